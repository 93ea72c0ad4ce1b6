#ifndef KEYVEC_CLI_ARTIFACTS_HPP
#define KEYVEC_CLI_ARTIFACTS_HPP

#include <cstddef>
#include <cstdint>
#include <exception>
#include <functional>
#include <map>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "keyvec/eval/retrieval.hpp"

namespace keyvec::cli {

enum ExitCode : int {
  kExitOk = 0,
  kExitInternal = 1,
  kExitBadInput = 2,
  kExitDegenerate = 3,
  kExitGradcheck = 4,
};

/// Maps a library error to the process exit code.
int exit_code_for(const std::exception& e);

/// Lowercase hex SHA-256 of a file's bytes. Throws IoError.
std::string sha256_file(const std::string& path);
std::string sha256_bytes(const std::string& bytes);

/// Provenance record written next to every output artifact. Holds no
/// timestamps or host details, so identical runs write identical manifests.
struct RunManifest {
  std::string command;
  nlohmann::json config = nlohmann::json::object();
  /// Input paths as given on the command line.
  std::vector<std::string> inputs;
  std::uint64_t seed = 0;
  nlohmann::json summary = nlohmann::json::object();
};

std::string tool_version();
/// `<output>.manifest.json`, ignoring a trailing slash on directory outputs.
std::string manifest_path_for(const std::string& output);
nlohmann::json manifest_json(const RunManifest& manifest);
void write_manifest(const std::string& output, const RunManifest& manifest);

/// Flat `key = value` lines; `#` starts a comment line. Throws ParseError
/// naming the line for anything else or for a repeated key.
std::map<std::string, std::string> read_flat_config(const std::string& path);

struct EmbeddingRecord {
  std::string id;
  std::vector<double> embedding;
  std::vector<double> salience;
};

/// JSON Lines `{"id", "embedding", "salience"}`.
void write_embeddings(const std::string& path, const std::vector<EmbeddingRecord>& records);
std::vector<EmbeddingRecord> read_embeddings(const std::string& path);
/// Id -> embedding; throws ParseError on a duplicate id.
eval::EmbeddingIndex to_index(const std::vector<EmbeddingRecord>& records);

/// Document id -> label from any JSON Lines file whose objects carry "id" and
/// "label" (raw or encoded corpora). Unlabeled lines are skipped.
std::map<std::string, std::string> read_doc_labels(const std::string& path);

/// Runs fn(i) for i in [0, n) on up to `threads` workers with a static split.
/// Callers write results into preassigned slots, so output order never
/// depends on the thread count. The exception at the lowest index is rethrown.
void parallel_for(std::size_t n, std::size_t threads, const std::function<void(std::size_t)>& fn);

}  // namespace keyvec::cli

#endif  // KEYVEC_CLI_ARTIFACTS_HPP
