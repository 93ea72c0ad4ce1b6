#ifndef KEYVEC_CLI_COMMANDS_HPP
#define KEYVEC_CLI_COMMANDS_HPP

#include <cstddef>
#include <cstdint>
#include <ostream>
#include <string>

#include "keyvec/cli/artifacts.hpp"
#include "keyvec/eval/clustering.hpp"
#include "keyvec/model.hpp"
#include "keyvec/planted.hpp"
#include "keyvec/supervision.hpp"
#include "keyvec/train.hpp"

// One function per subcommand. Each validates its options, writes its
// artifacts plus `<output>.manifest.json`, and returns the manifest. Errors are
// library exceptions; exit_code_for() maps them to process exit codes.
namespace keyvec::cli {

struct GlobalOptions {
  std::uint64_t seed = 1;
  /// Workers for embedding, retrieval and k-means restarts; outputs do not
  /// depend on it.
  std::size_t threads = 1;
};

struct CommandResult {
  RunManifest manifest;
  int exit_code = kExitOk;
};

// Files inside an ingested corpus directory.
std::string corpus_vocab_path(const std::string& dir);
std::string corpus_docs_path(const std::string& dir);
std::string corpus_tfidf_path(const std::string& dir);
std::string corpus_labels_path(const std::string& dir);

struct IngestOptions {
  std::string input;
  std::string out_dir;
  std::size_t min_count = 1;
  std::size_t max_vocab = 50000;
};
/// Raw JSON Lines corpus -> vocabulary, encoded corpus and TF-IDF statistics.
/// Duplicate document ids are rejected with the full list.
CommandResult cmd_ingest(const IngestOptions& opts, const GlobalOptions& global);

struct LabelOptions {
  std::string corpus_dir;
  /// Defaults to labels.jsonl inside the corpus directory.
  std::string out;
  SupervisionConfig supervision;
};
/// Surrogate salient-sentence and keyword labels. Warns on `log` when
/// summarized documents end up with empty salient sets.
CommandResult cmd_label(const LabelOptions& opts, const GlobalOptions& global, std::ostream& log);

struct TrainOptions {
  std::string corpus_dir;
  /// Defaults to the corpus directory's labels file.
  std::string labels;
  std::string out;
  /// Defaults to `<out>.log.csv`.
  std::string log;
  /// Optional text word-vector file for embedding initialization.
  std::string pretrained;
  /// vocab_size is taken from the corpus vocabulary.
  ModelConfig model;
  /// seed is taken from the global options.
  TrainConfig train;
  bool quiet = false;
};
CommandResult cmd_train(const TrainOptions& opts, const GlobalOptions& global, std::ostream& log);

struct EmbedOptions {
  std::string model;
  /// Exactly one of an ingested corpus directory or a raw JSON Lines file,
  /// which is encoded with the checkpoint's vocabulary.
  std::string corpus_dir;
  std::string input;
  std::string out;
};
CommandResult cmd_embed(const EmbedOptions& opts, const GlobalOptions& global);

struct RetrieveOptions {
  std::string index;
  std::string queries;
  std::string out;
  std::size_t k = 10;
};
/// Cosine retrieval of every query embedding against the index; writes a run file.
CommandResult cmd_retrieve(const RetrieveOptions& opts, const GlobalOptions& global);

struct ClusterOptions {
  std::string embeddings;
  std::string out;
  /// Optional JSON Lines file with "id" and "label"; adds metrics to the report.
  std::string truth;
  std::size_t k = 8;
  std::size_t max_iters = 100;
  std::size_t restarts = 10;
  bool l2_normalize = false;
};
CommandResult cmd_cluster(const ClusterOptions& opts, const GlobalOptions& global);

struct EvalOptions {
  /// Retrieval mode: run file and qrels.
  std::string run;
  std::string qrels;
  std::size_t k = 10;
  /// Clustering mode: a cluster report and a truth file.
  std::string clusters;
  std::string truth;
  std::string out;
};
CommandResult cmd_eval(const EvalOptions& opts, const GlobalOptions& global);

struct GradcheckOptions {
  /// Optional JSON report path; the summary is returned either way.
  std::string out;
  std::size_t trials = 20;
  double eps = 1e-5;
};
/// Exit code kExitGradcheck when any check exceeds its tolerance.
CommandResult cmd_gradcheck(const GradcheckOptions& opts, const GlobalOptions& global);

struct PlantedOptions {
  std::string out;
  std::string queries;
  std::string qrels;
  /// seed is taken from the global options.
  PlantedConfig corpus;
};
/// Synthetic topic corpus with held-out queries and their relevance file.
CommandResult cmd_planted(const PlantedOptions& opts, const GlobalOptions& global);

/// Cluster metrics against string labels, keyed by document id.
nlohmann::json clustering_metrics(const std::vector<std::string>& ids, const std::vector<int>& assignment,
                                  const std::map<std::string, std::string>& truth);

}  // namespace keyvec::cli

#endif  // KEYVEC_CLI_COMMANDS_HPP
