#include "keyvec/eval/retrieval.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <sstream>

#include "keyvec/error.hpp"

namespace keyvec::eval {

double cosine(std::span<const double> a, std::span<const double> b) {
  if (a.size() != b.size()) {
    throw DimMismatch("cosine of vectors with " + std::to_string(a.size()) + " and " + std::to_string(b.size()) +
                      " dimensions");
  }
  double dot = 0.0, na = 0.0, nb = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    dot += a[i] * b[i];
    na += a[i] * a[i];
    nb += b[i] * b[i];
  }
  if (na == 0.0 || nb == 0.0) return 0.0;
  return std::clamp(dot / (std::sqrt(na) * std::sqrt(nb)), -1.0, 1.0);
}

RankedList retrieve(const std::string& query_id, std::span<const double> query, const EmbeddingIndex& index,
                    std::size_t k) {
  if (index.empty()) throw EmptyIndex("retrieval index is empty");
  if (k < 1) throw InvalidConfig("k must be >= 1");
  RankedList run{query_id, {}};
  run.results.reserve(index.size());
  for (const auto& [id, emb] : index) run.results.push_back({id, cosine(query, emb)});
  // index iterates in id order, so a stable sort keeps ties by ascending id
  std::stable_sort(run.results.begin(), run.results.end(),
                   [](const ScoredDoc& a, const ScoredDoc& b) { return a.score > b.score; });
  if (run.results.size() > k) run.results.resize(k);
  return run;
}

double precision_at_k(const RankedList& run, const std::set<std::string>& relevant, std::size_t k) {
  if (k < 1) throw InvalidConfig("k must be >= 1");
  std::size_t hits = 0;
  for (std::size_t i = 0; i < std::min(k, run.results.size()); ++i) hits += relevant.count(run.results[i].doc_id);
  return static_cast<double>(hits) / static_cast<double>(k);
}

double average_precision(const RankedList& run, const std::set<std::string>& relevant) {
  if (relevant.empty()) throw QueryWithoutRelevants("query '" + run.query_id + "' has no relevant documents");
  double sum = 0.0;
  std::size_t hits = 0;
  for (std::size_t i = 0; i < run.results.size(); ++i) {
    if (relevant.count(run.results[i].doc_id)) {
      ++hits;
      sum += static_cast<double>(hits) / static_cast<double>(i + 1);
    }
  }
  return sum / static_cast<double>(relevant.size());
}

double reciprocal_rank(const RankedList& run, const std::set<std::string>& relevant) {
  for (std::size_t i = 0; i < run.results.size(); ++i) {
    if (relevant.count(run.results[i].doc_id)) return 1.0 / static_cast<double>(i + 1);
  }
  return 0.0;
}

namespace {

const std::set<std::string>& relevant_for(const Qrels& qrels, const std::string& query) {
  auto it = qrels.find(query);
  if (it == qrels.end() || it->second.empty()) {
    throw QueryWithoutRelevants("query '" + query + "' has no relevant documents in qrels");
  }
  return it->second;
}

template <typename Fn>
double mean_over(std::span<const RankedList> runs, const Qrels& qrels, Fn&& fn) {
  if (runs.empty()) return 0.0;
  double sum = 0.0;
  for (const auto& run : runs) sum += fn(run, relevant_for(qrels, run.query_id));
  return sum / static_cast<double>(runs.size());
}

}  // namespace

double mean_precision_at_k(std::span<const RankedList> runs, const Qrels& qrels, std::size_t k) {
  return mean_over(runs, qrels, [k](const RankedList& r, const auto& rel) { return precision_at_k(r, rel, k); });
}

double mean_average_precision(std::span<const RankedList> runs, const Qrels& qrels) {
  return mean_over(runs, qrels, [](const RankedList& r, const auto& rel) { return average_precision(r, rel); });
}

double mean_reciprocal_rank(std::span<const RankedList> runs, const Qrels& qrels) {
  return mean_over(runs, qrels, [](const RankedList& r, const auto& rel) { return reciprocal_rank(r, rel); });
}

RetrievalMetrics evaluate_runs(std::span<const RankedList> runs, const Qrels& qrels, std::size_t k) {
  RetrievalMetrics m;
  m.k = k;
  m.num_queries = runs.size();
  m.precision_at_k = mean_precision_at_k(runs, qrels, k);
  m.map = mean_average_precision(runs, qrels);
  m.mrr = mean_reciprocal_rank(runs, qrels);
  return m;
}

namespace {

std::vector<std::string> split_tabs(const std::string& line) {
  std::vector<std::string> out;
  std::string field;
  std::istringstream ss(line);
  while (std::getline(ss, field, '\t')) out.push_back(field);
  return out;
}

}  // namespace

Qrels read_qrels(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot read qrels file " + path);
  Qrels qrels;
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.empty()) continue;
    auto f = split_tabs(line);
    if (f.size() != 3 || (f[2] != "0" && f[2] != "1")) {
      throw ParseError(path + " line " + std::to_string(lineno) + ": expected query<TAB>doc<TAB>0|1");
    }
    if (f[2] == "1") qrels[f[0]].insert(f[1]);
  }
  return qrels;
}

void write_qrels(const std::string& path, const Qrels& qrels) {
  std::ofstream out(path);
  if (!out) throw IoError("cannot write qrels file " + path);
  for (const auto& [q, docs] : qrels) {
    for (const auto& d : docs) out << q << '\t' << d << "\t1\n";
  }
}

std::vector<RankedList> read_run(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot read run file " + path);
  std::vector<RankedList> runs;
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.empty()) continue;
    auto f = split_tabs(line);
    if (f.size() != 4) throw ParseError(path + " line " + std::to_string(lineno) + ": expected 4 tab-separated fields");
    std::size_t rank = 0;
    double score = 0.0;
    try {
      rank = std::stoul(f[2]);
      score = std::stod(f[3]);
    } catch (const std::exception&) {
      throw ParseError(path + " line " + std::to_string(lineno) + ": bad rank or score");
    }
    if (runs.empty() || runs.back().query_id != f[0]) runs.push_back({f[0], {}});
    auto& res = runs.back().results;
    if (rank != res.size() + 1) {
      throw ParseError(path + " line " + std::to_string(lineno) + ": ranks must be consecutive from 1");
    }
    res.push_back({f[1], score});
  }
  return runs;
}

void write_run(const std::string& path, std::span<const RankedList> runs) {
  std::ofstream out(path);
  if (!out) throw IoError("cannot write run file " + path);
  char buf[64];
  for (const auto& run : runs) {
    for (std::size_t i = 0; i < run.results.size(); ++i) {
      std::snprintf(buf, sizeof buf, "%.17g", run.results[i].score);
      out << run.query_id << '\t' << run.results[i].doc_id << '\t' << (i + 1) << '\t' << buf << '\n';
    }
  }
}

}  // namespace keyvec::eval
