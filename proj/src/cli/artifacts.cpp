#include "keyvec/cli/artifacts.hpp"

#include <openssl/evp.h>

#include <cctype>
#include <fstream>
#include <iomanip>
#include <iterator>
#include <memory>
#include <mutex>
#include <sstream>
#include <thread>

#include "keyvec/error.hpp"

namespace keyvec::cli {

using nlohmann::json;

int exit_code_for(const std::exception& e) {
  if (dynamic_cast<const EmptyDocument*>(&e) || dynamic_cast<const MissingSummary*>(&e) ||
      dynamic_cast<const EmptyTrainingSet*>(&e) || dynamic_cast<const EmptyKeywordSet*>(&e) ||
      dynamic_cast<const EmptyIndex*>(&e) || dynamic_cast<const TooFewPoints*>(&e) ||
      dynamic_cast<const QueryWithoutRelevants*>(&e)) {
    return kExitDegenerate;
  }
  if (dynamic_cast<const Error*>(&e)) return kExitBadInput;
  return kExitInternal;
}

namespace {

std::string hex_digest(const unsigned char* data, unsigned int n) {
  std::ostringstream out;
  out << std::hex << std::setfill('0');
  for (unsigned int i = 0; i < n; ++i) out << std::setw(2) << static_cast<int>(data[i]);
  return out.str();
}

struct DigestContext {
  std::unique_ptr<EVP_MD_CTX, decltype(&EVP_MD_CTX_free)> ctx{EVP_MD_CTX_new(), EVP_MD_CTX_free};

  DigestContext() {
    if (!ctx || EVP_DigestInit_ex(ctx.get(), EVP_sha256(), nullptr) != 1) throw std::runtime_error("sha256 init");
  }
  void update(const char* data, std::size_t n) {
    if (EVP_DigestUpdate(ctx.get(), data, n) != 1) throw std::runtime_error("sha256 update");
  }
  std::string finish() {
    unsigned char md[EVP_MAX_MD_SIZE];
    unsigned int len = 0;
    if (EVP_DigestFinal_ex(ctx.get(), md, &len) != 1) throw std::runtime_error("sha256 final");
    return hex_digest(md, len);
  }
};

std::string trim(const std::string& s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string::npos) return "";
  const auto e = s.find_last_not_of(" \t\r");
  return s.substr(b, e - b + 1);
}

}  // namespace

std::string sha256_bytes(const std::string& bytes) {
  DigestContext d;
  d.update(bytes.data(), bytes.size());
  return d.finish();
}

std::string sha256_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot read " + path);
  DigestContext d;
  char buf[1 << 16];
  while (in) {
    in.read(buf, sizeof buf);
    d.update(buf, static_cast<std::size_t>(in.gcount()));
  }
  return d.finish();
}

std::string tool_version() { return KEYVEC_VERSION; }

std::string manifest_path_for(const std::string& output) {
  std::string base = output;
  while (base.size() > 1 && base.back() == '/') base.pop_back();
  return base + ".manifest.json";
}

json manifest_json(const RunManifest& m) {
  json inputs = json::object();
  for (const auto& path : m.inputs) inputs[path] = sha256_file(path);
  return json{{"command", m.command}, {"config", m.config}, {"inputs", inputs},
              {"seed", m.seed},       {"summary", m.summary}, {"version", tool_version()}};
}

void write_manifest(const std::string& output, const RunManifest& m) {
  const auto path = manifest_path_for(output);
  std::ofstream out(path);
  if (!out) throw IoError("cannot write manifest " + path);
  out << manifest_json(m).dump(2) << '\n';
}

std::map<std::string, std::string> read_flat_config(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot read config file " + path);
  std::map<std::string, std::string> out;
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    const auto text = trim(line);
    if (text.empty() || text[0] == '#') continue;
    const auto eq = text.find('=');
    const auto where = path + " line " + std::to_string(lineno);
    if (eq == std::string::npos) throw ParseError(where + ": expected key = value");
    const auto key = trim(text.substr(0, eq));
    const auto value = trim(text.substr(eq + 1));
    if (key.empty()) throw ParseError(where + ": empty key");
    if (!std::all_of(key.begin(), key.end(), [](unsigned char c) { return std::isalnum(c) || c == '-' || c == '_'; })) {
      throw ParseError(where + ": invalid key '" + key + "'");
    }
    if (!out.emplace(key, value).second) throw ParseError(where + ": repeated key '" + key + "'");
  }
  return out;
}

void write_embeddings(const std::string& path, const std::vector<EmbeddingRecord>& records) {
  std::ofstream out(path);
  if (!out) throw IoError("cannot write embeddings " + path);
  for (const auto& r : records) {
    out << json{{"id", r.id}, {"embedding", r.embedding}, {"salience", r.salience}}.dump() << '\n';
  }
}

std::vector<EmbeddingRecord> read_embeddings(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot read embeddings " + path);
  std::vector<EmbeddingRecord> out;
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (trim(line).empty()) continue;
    try {
      const auto j = json::parse(line);
      EmbeddingRecord r;
      r.id = j.at("id").get<std::string>();
      r.embedding = j.at("embedding").get<std::vector<double>>();
      if (j.contains("salience")) r.salience = j["salience"].get<std::vector<double>>();
      if (!out.empty() && out.front().embedding.size() != r.embedding.size()) {
        throw ParseError("embedding dimension " + std::to_string(r.embedding.size()) + " differs from " +
                         std::to_string(out.front().embedding.size()));
      }
      out.push_back(std::move(r));
    } catch (const json::exception& e) {
      throw ParseError(path + " line " + std::to_string(lineno) + ": " + e.what());
    } catch (const ParseError& e) {
      throw ParseError(path + " line " + std::to_string(lineno) + ": " + e.what());
    }
  }
  return out;
}

eval::EmbeddingIndex to_index(const std::vector<EmbeddingRecord>& records) {
  eval::EmbeddingIndex index;
  for (const auto& r : records) {
    if (!index.emplace(r.id, r.embedding).second) throw ParseError("duplicate embedding id '" + r.id + "'");
  }
  return index;
}

std::map<std::string, std::string> read_doc_labels(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot read " + path);
  std::map<std::string, std::string> out;
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (trim(line).empty()) continue;
    try {
      const auto j = json::parse(line);
      if (!j.contains("label") || j["label"].is_null()) continue;
      out[j.at("id").get<std::string>()] = j["label"].get<std::string>();
    } catch (const json::exception& e) {
      throw ParseError(path + " line " + std::to_string(lineno) + ": " + e.what());
    }
  }
  return out;
}

void parallel_for(std::size_t n, std::size_t threads, const std::function<void(std::size_t)>& fn) {
  threads = std::max<std::size_t>(1, std::min(threads, n));
  if (threads == 1) {
    for (std::size_t i = 0; i < n; ++i) fn(i);
    return;
  }
  // Keep the failure at the lowest index so errors do not depend on timing.
  std::exception_ptr failure;
  std::size_t failed_at = n;
  std::mutex failure_mutex;
  std::vector<std::thread> workers;
  workers.reserve(threads);
  for (std::size_t t = 0; t < threads; ++t) {
    workers.emplace_back([&, t] {
      const std::size_t begin = n * t / threads, end = n * (t + 1) / threads;
      for (std::size_t i = begin; i < end; ++i) {
        try {
          fn(i);
        } catch (...) {
          std::lock_guard<std::mutex> lock(failure_mutex);
          if (i < failed_at) {
            failed_at = i;
            failure = std::current_exception();
          }
          return;
        }
      }
    });
  }
  for (auto& w : workers) w.join();
  if (failure) std::rethrow_exception(failure);
}

}  // namespace keyvec::cli
