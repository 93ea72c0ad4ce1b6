#include "keyvec/cli/commands.hpp"

#include <algorithm>
#include <filesystem>
#include <fstream>
#include <set>

#include "keyvec/checkpoint.hpp"
#include "keyvec/encoder.hpp"
#include "keyvec/error.hpp"
#include "keyvec/gradient_suite.hpp"

namespace keyvec::cli {

using nlohmann::json;
namespace fs = std::filesystem;

namespace {

void require_path(const std::string& value, const std::string& command, const std::string& flag) {
  if (value.empty()) throw InvalidConfig(command + " needs --" + flag);
}

void ensure_parent(const std::string& path) {
  const auto parent = fs::path(path).parent_path();
  if (!parent.empty()) fs::create_directories(parent);
}

const char* activation_name(nn::Activation a) { return a == nn::Activation::kTanh ? "tanh" : "relu"; }

json model_json(const ModelConfig& c) {
  return json{{"vocab_size", c.vocab_size},
              {"word_dim", c.word_dim},
              {"filter_widths", c.filter_widths},
              {"filters_per_width", c.filters_per_width},
              {"lstm_hidden", c.lstm_hidden},
              {"doc_dim", c.doc_dim},
              {"activation", activation_name(c.conv_activation)}};
}

json train_json(const TrainConfig& c) {
  return json{{"epochs", c.epochs},       {"learning_rate", c.learning_rate},
              {"lr_decay", c.lr_decay},   {"clip_norm", c.clip_norm},
              {"seed", c.seed},           {"lambda_read", c.lambda_read},
              {"lambda_enc", c.lambda_enc}, {"shuffle", c.shuffle},
              {"freeze_embeddings", c.freeze_embeddings}};
}

json metrics_json(const eval::RetrievalMetrics& m) {
  return json{{"k", m.k}, {"queries", m.num_queries}, {"p_at_k", m.precision_at_k}, {"map", m.map}, {"mrr", m.mrr}};
}

void write_json(const std::string& path, const json& j) {
  ensure_parent(path);
  std::ofstream out(path);
  if (!out) throw IoError("cannot write " + path);
  out << j.dump(2) << '\n';
}

json read_json(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot read " + path);
  try {
    return json::parse(in);
  } catch (const json::exception& e) {
    throw ParseError(path + ": " + e.what());
  }
}

std::vector<RawDocument> read_raw_unique(const std::string& path) {
  auto raw = read_raw_corpus(path);
  std::map<std::string, std::size_t> seen;
  for (const auto& d : raw) ++seen[d.id];
  std::vector<std::string> dups;
  for (const auto& [id, n] : seen) {
    if (n > 1) dups.push_back(id);
  }
  if (!dups.empty()) {
    std::string list;
    for (const auto& id : dups) list += (list.empty() ? "" : ", ") + id;
    throw ParseError(path + ": duplicate document ids: " + list);
  }
  return raw;
}

std::vector<Document> encode_all(const Vocabulary& vocab, const std::vector<RawDocument>& raw) {
  std::vector<Document> docs;
  docs.reserve(raw.size());
  for (const auto& r : raw) docs.push_back(encode_document(vocab, r));
  return docs;
}

}  // namespace

std::string corpus_vocab_path(const std::string& dir) { return (fs::path(dir) / "vocab.tsv").string(); }
std::string corpus_docs_path(const std::string& dir) { return (fs::path(dir) / "corpus.jsonl").string(); }
std::string corpus_tfidf_path(const std::string& dir) { return (fs::path(dir) / "tfidf.json").string(); }
std::string corpus_labels_path(const std::string& dir) { return (fs::path(dir) / "labels.jsonl").string(); }

CommandResult cmd_ingest(const IngestOptions& opts, const GlobalOptions& global) {
  require_path(opts.input, "ingest", "input");
  require_path(opts.out_dir, "ingest", "out");
  if (opts.min_count < 1) throw InvalidConfig("--min-count must be at least 1");
  auto raw = read_raw_unique(opts.input);
  if (raw.empty()) throw EmptyTrainingSet(opts.input + " holds no documents");
  auto vocab = Vocabulary::build(raw, opts.min_count, opts.max_vocab);
  auto docs = encode_all(vocab, raw);
  auto tfidf = compute_tfidf(docs);

  fs::create_directories(opts.out_dir);
  vocab.save(corpus_vocab_path(opts.out_dir));
  write_encoded_corpus(corpus_docs_path(opts.out_dir), docs);
  tfidf.save(corpus_tfidf_path(opts.out_dir));

  CommandResult r;
  r.manifest.command = "ingest";
  r.manifest.config = {{"input", opts.input},
                       {"out", opts.out_dir},
                       {"min_count", opts.min_count},
                       {"max_vocab", opts.max_vocab}};
  r.manifest.inputs = {opts.input};
  r.manifest.seed = global.seed;
  std::size_t sentences = 0, summarized = 0, labeled = 0;
  for (const auto& d : docs) {
    sentences += d.num_sentences();
    summarized += d.has_summary() ? 1 : 0;
    labeled += d.label ? 1 : 0;
  }
  r.manifest.summary = {{"documents", docs.size()}, {"sentences", sentences},    {"with_summary", summarized},
                        {"with_label", labeled},    {"vocab_size", vocab.size()}};
  write_manifest(opts.out_dir, r.manifest);
  return r;
}

CommandResult cmd_label(const LabelOptions& opts, const GlobalOptions& global, std::ostream& log) {
  require_path(opts.corpus_dir, "label", "corpus");
  opts.supervision.validate();
  const auto out = opts.out.empty() ? corpus_labels_path(opts.corpus_dir) : opts.out;
  const auto vocab_path = corpus_vocab_path(opts.corpus_dir);
  const auto docs_path = corpus_docs_path(opts.corpus_dir);
  const auto tfidf_path = corpus_tfidf_path(opts.corpus_dir);
  auto vocab = Vocabulary::load(vocab_path);
  auto docs = read_encoded_corpus(docs_path, vocab.size());
  auto tfidf = TfIdfModel::load(tfidf_path);

  const auto summarized = static_cast<std::size_t>(
      std::count_if(docs.begin(), docs.end(), [](const Document& d) { return d.has_summary(); }));
  if (summarized == 0) throw MissingSummary("no document in " + docs_path + " has a summary");

  auto set = build_training_set(docs, opts.supervision, tfidf);
  std::size_t empty_salient = set.dropped, salient_total = 0, keyword_total = 0;
  for (const auto& ex : set.examples) {
    empty_salient += ex.salient.empty() ? 1 : 0;
    salient_total += ex.salient.size();
    keyword_total += ex.keywords.size();
  }
  if (empty_salient > 0) {
    log << "warning: " << empty_salient << " of " << summarized
        << " summarized documents have an empty salient set at threshold " << opts.supervision.sim_threshold
        << '\n';
  }
  if (set.dropped > 0) log << "warning: dropped " << set.dropped << " documents with no salient sentence or keyword\n";

  ensure_parent(out);
  write_labels(out, set.examples, vocab);

  CommandResult r;
  r.manifest.command = "label";
  r.manifest.config = {{"corpus", opts.corpus_dir},
                       {"out", out},
                       {"top_k", opts.supervision.top_k},
                       {"threshold", opts.supervision.sim_threshold},
                       {"keywords", opts.supervision.num_keywords}};
  r.manifest.inputs = {vocab_path, docs_path, tfidf_path};
  r.manifest.seed = global.seed;
  const double n = set.examples.empty() ? 1.0 : static_cast<double>(set.examples.size());
  r.manifest.summary = {{"documents", docs.size()},
                        {"with_summary", summarized},
                        {"examples", set.examples.size()},
                        {"dropped", set.dropped},
                        {"empty_salient", empty_salient},
                        {"mean_salient", static_cast<double>(salient_total) / n},
                        {"mean_keywords", static_cast<double>(keyword_total) / n}};
  write_manifest(out, r.manifest);
  return r;
}

CommandResult cmd_train(const TrainOptions& opts, const GlobalOptions& global, std::ostream& log) {
  require_path(opts.corpus_dir, "train", "corpus");
  require_path(opts.out, "train", "out");
  const auto labels_path = opts.labels.empty() ? corpus_labels_path(opts.corpus_dir) : opts.labels;
  const auto log_path = opts.log.empty() ? opts.out + ".log.csv" : opts.log;
  const auto vocab_path = corpus_vocab_path(opts.corpus_dir);
  const auto docs_path = corpus_docs_path(opts.corpus_dir);

  auto vocab = Vocabulary::load(vocab_path);
  auto docs = read_encoded_corpus(docs_path, vocab.size());
  auto examples = read_labels(labels_path, vocab);

  ModelConfig mcfg = opts.model;
  mcfg.vocab_size = vocab.size();
  mcfg.validate();
  TrainConfig tcfg = opts.train;
  tcfg.seed = global.seed;
  tcfg.validate();
  if (examples.empty()) throw EmptyTrainingSet(labels_path + " holds no training examples");

  auto model = init_model<float>(mcfg, tcfg.seed);
  std::vector<std::string> inputs{vocab_path, docs_path, labels_path};
  std::size_t pretrained_rows = 0;
  if (!opts.pretrained.empty()) {
    pretrained_rows = load_pretrained_embeddings(model, vocab, opts.pretrained);
    inputs.push_back(opts.pretrained);
  }
  auto history = train_model(model, docs, examples, tcfg, [&](const EpochLog& e) {
    if (!opts.quiet) {
      log << "epoch " << e.epoch << " reader_loss " << e.reader_loss << " enc_loss " << e.enc_loss << " salience_acc "
          << e.salience_acc << " keyword_recall " << e.keyword_recall << '\n';
    }
  });

  ensure_parent(opts.out);
  save_checkpoint(make_checkpoint(model, vocab), opts.out);
  ensure_parent(log_path);
  write_training_log(log_path, history);

  auto fit = evaluate_fit(model, std::span<const Document>(docs), std::span<const TrainingExample>(examples));
  auto fit30 = evaluate_fit(model, std::span<const Document>(docs), std::span<const TrainingExample>(examples), 30);
  CommandResult r;
  r.manifest.command = "train";
  r.manifest.config = {{"corpus", opts.corpus_dir}, {"labels", labels_path},        {"out", opts.out},
                       {"log", log_path},           {"pretrained", opts.pretrained}, {"model", model_json(mcfg)},
                       {"train", train_json(tcfg)}};
  r.manifest.inputs = inputs;
  r.manifest.seed = global.seed;
  r.manifest.summary = {{"examples", examples.size()},
                        {"epochs", history.size()},
                        {"first_loss", history.front().total(tcfg.lambda_read, tcfg.lambda_enc)},
                        {"final_loss", history.back().total(tcfg.lambda_read, tcfg.lambda_enc)},
                        {"reader_loss", fit.reader_loss},
                        {"enc_loss", fit.enc_loss},
                        {"salience_acc", fit.salience_acc},
                        {"keyword_recall", fit.keyword_recall},
                        {"keyword_recall_at_30", fit30.keyword_recall},
                        {"pretrained_rows", pretrained_rows}};
  write_manifest(opts.out, r.manifest);
  return r;
}

CommandResult cmd_embed(const EmbedOptions& opts, const GlobalOptions& global) {
  require_path(opts.model, "embed", "model");
  require_path(opts.out, "embed", "out");
  if (opts.corpus_dir.empty() == opts.input.empty()) throw InvalidConfig("embed needs exactly one of --corpus, --input");
  auto ckpt = load_checkpoint(opts.model);
  auto model = model_from_checkpoint(ckpt);
  std::vector<std::string> inputs{opts.model};
  std::vector<Document> docs;
  if (!opts.corpus_dir.empty()) {
    inputs.push_back(corpus_docs_path(opts.corpus_dir));
    docs = read_encoded_corpus(corpus_docs_path(opts.corpus_dir), model.config.vocab_size);
  } else {
    if (!ckpt.vocab) throw InvalidConfig("--input needs the vocabulary file " + vocab_path_for(opts.model));
    inputs.push_back(opts.input);
    docs = encode_all(*ckpt.vocab, read_raw_unique(opts.input));
  }
  if (docs.empty()) throw EmptyIndex("nothing to embed");

  std::vector<EmbeddingRecord> records(docs.size());
  parallel_for(docs.size(), global.threads, [&](std::size_t i) {
    auto e = embed_document(model, docs[i]);
    records[i] = {docs[i].id, {e.embedding.begin(), e.embedding.end()}, {e.salience.begin(), e.salience.end()}};
  });
  ensure_parent(opts.out);
  write_embeddings(opts.out, records);

  CommandResult r;
  r.manifest.command = "embed";
  r.manifest.config = {{"model", opts.model}, {"corpus", opts.corpus_dir}, {"input", opts.input}, {"out", opts.out}};
  r.manifest.inputs = inputs;
  r.manifest.seed = global.seed;
  r.manifest.summary = {{"documents", records.size()}, {"dim", model.config.doc_dim}};
  write_manifest(opts.out, r.manifest);
  return r;
}

CommandResult cmd_retrieve(const RetrieveOptions& opts, const GlobalOptions& global) {
  require_path(opts.index, "retrieve", "index");
  require_path(opts.queries, "retrieve", "queries");
  require_path(opts.out, "retrieve", "out");
  if (opts.k < 1) throw InvalidConfig("--k must be at least 1");
  const auto index = to_index(read_embeddings(opts.index));
  const auto queries = read_embeddings(opts.queries);
  std::vector<eval::RankedList> runs(queries.size());
  parallel_for(queries.size(), global.threads,
               [&](std::size_t i) { runs[i] = eval::retrieve(queries[i].id, queries[i].embedding, index, opts.k); });
  ensure_parent(opts.out);
  eval::write_run(opts.out, runs);

  CommandResult r;
  r.manifest.command = "retrieve";
  r.manifest.config = {{"index", opts.index}, {"queries", opts.queries}, {"out", opts.out}, {"k", opts.k}};
  r.manifest.inputs = {opts.index, opts.queries};
  r.manifest.seed = global.seed;
  r.manifest.summary = {{"queries", runs.size()}, {"index_size", index.size()}};
  write_manifest(opts.out, r.manifest);
  return r;
}

json clustering_metrics(const std::vector<std::string>& ids, const std::vector<int>& assignment,
                        const std::map<std::string, std::string>& truth) {
  std::vector<std::string> labels;
  labels.reserve(ids.size());
  for (const auto& id : ids) {
    const auto it = truth.find(id);
    if (it == truth.end()) throw LabelMismatch("no truth label for '" + id + "'");
    labels.push_back(it->second);
  }
  const auto gold = eval::encode_labels(labels);
  const auto v = eval::v_measure(assignment, gold);
  return json{{"f1", eval::pairwise_f1(assignment, gold)},
              {"best_match_f1", eval::best_match_f1(assignment, gold)},
              {"v_measure", v.v_measure},
              {"homogeneity", v.homogeneity},
              {"completeness", v.completeness},
              {"ari", eval::adjusted_rand_index(assignment, gold)},
              {"classes", std::set<std::string>(labels.begin(), labels.end()).size()}};
}

CommandResult cmd_cluster(const ClusterOptions& opts, const GlobalOptions& global) {
  require_path(opts.embeddings, "cluster", "embeddings");
  require_path(opts.out, "cluster", "out");
  const auto records = read_embeddings(opts.embeddings);
  std::vector<std::vector<double>> points;
  std::vector<std::string> ids;
  for (const auto& rec : records) {
    ids.push_back(rec.id);
    points.push_back(rec.embedding);
  }
  eval::KMeansOptions km;
  km.k = opts.k;
  km.seed = global.seed;
  km.max_iters = opts.max_iters;
  km.restarts = opts.restarts;
  km.l2_normalize = opts.l2_normalize;
  km.threads = global.threads;
  const auto clustering = eval::kmeans(points, km);

  json assignments = json::object();
  for (std::size_t i = 0; i < ids.size(); ++i) assignments[ids[i]] = clustering.assignment[i];
  json report{{"k", clustering.k},
              {"wcss", clustering.wcss},
              {"cluster_sizes", clustering.cluster_sizes()},
              {"assignments", assignments}};
  std::vector<std::string> inputs{opts.embeddings};
  if (!opts.truth.empty()) {
    report["metrics"] = clustering_metrics(ids, clustering.assignment, read_doc_labels(opts.truth));
    inputs.push_back(opts.truth);
  }
  write_json(opts.out, report);

  CommandResult r;
  r.manifest.command = "cluster";
  r.manifest.config = {{"embeddings", opts.embeddings},     {"out", opts.out},
                       {"truth", opts.truth},               {"k", opts.k},
                       {"max_iters", opts.max_iters},       {"restarts", opts.restarts},
                       {"l2_normalize", opts.l2_normalize}};
  r.manifest.inputs = inputs;
  r.manifest.seed = global.seed;
  r.manifest.summary = report.contains("metrics") ? report["metrics"] : json{{"wcss", clustering.wcss}};
  write_manifest(opts.out, r.manifest);
  return r;
}

CommandResult cmd_eval(const EvalOptions& opts, const GlobalOptions& global) {
  require_path(opts.out, "eval", "out");
  const bool retrieval = !opts.run.empty() || !opts.qrels.empty();
  const bool clustering = !opts.clusters.empty() || !opts.truth.empty();
  if (retrieval == clustering) throw InvalidConfig("eval needs either --run and --qrels, or --clusters and --truth");
  json metrics;
  CommandResult r;
  if (retrieval) {
    require_path(opts.run, "eval", "run");
    require_path(opts.qrels, "eval", "qrels");
    if (opts.k < 1) throw InvalidConfig("--k must be at least 1");
    const auto runs = eval::read_run(opts.run);
    if (runs.empty()) throw EmptyIndex(opts.run + " holds no queries");
    metrics = metrics_json(eval::evaluate_runs(runs, eval::read_qrels(opts.qrels), opts.k));
    r.manifest.inputs = {opts.run, opts.qrels};
  } else {
    require_path(opts.clusters, "eval", "clusters");
    require_path(opts.truth, "eval", "truth");
    const auto report = read_json(opts.clusters);
    std::vector<std::string> ids;
    std::vector<int> assignment;
    try {
      for (const auto& [id, c] : report.at("assignments").items()) {
        ids.push_back(id);
        assignment.push_back(c.get<int>());
      }
    } catch (const json::exception& e) {
      throw ParseError(opts.clusters + ": " + e.what());
    }
    metrics = clustering_metrics(ids, assignment, read_doc_labels(opts.truth));
    r.manifest.inputs = {opts.clusters, opts.truth};
  }
  write_json(opts.out, metrics);
  r.manifest.command = "eval";
  r.manifest.config = {{"run", opts.run},           {"qrels", opts.qrels}, {"k", opts.k},
                       {"clusters", opts.clusters}, {"truth", opts.truth}, {"out", opts.out}};
  r.manifest.seed = global.seed;
  r.manifest.summary = metrics;
  write_manifest(opts.out, r.manifest);
  return r;
}

CommandResult cmd_gradcheck(const GradcheckOptions& opts, const GlobalOptions& global) {
  if (opts.trials < 1) throw InvalidConfig("--trials must be at least 1");
  if (!(opts.eps > 0.0)) throw InvalidConfig("--eps must be positive");
  GradientSuiteOptions suite;
  suite.seed = global.seed;
  suite.trials = opts.trials;
  suite.eps = opts.eps;
  CommandResult r;
  json checks = json::array();
  bool passed = true;
  for (const auto& e : run_gradient_suite(suite)) {
    const bool ok = e.passed(opts.trials);
    passed = passed && ok;
    checks.push_back({{"name", e.name},
                      {"max_rel_error", e.max_rel_error},
                      {"tolerance", e.tolerance},
                      {"checked", e.checked},
                      {"skipped", e.skipped},
                      {"passed", ok}});
  }
  r.exit_code = passed ? kExitOk : kExitGradcheck;
  r.manifest.command = "gradcheck";
  r.manifest.config = {{"trials", opts.trials}, {"eps", opts.eps}, {"out", opts.out}};
  r.manifest.seed = global.seed;
  r.manifest.summary = {{"passed", passed}, {"checks", checks}};
  if (!opts.out.empty()) {
    write_json(opts.out, r.manifest.summary);
    write_manifest(opts.out, r.manifest);
  }
  return r;
}

CommandResult cmd_planted(const PlantedOptions& opts, const GlobalOptions& global) {
  require_path(opts.out, "planted", "out");
  PlantedConfig cfg = opts.corpus;
  cfg.seed = global.seed;
  const auto corpus = generate_planted_corpus(cfg);
  auto write_raw = [](const std::string& path, const std::vector<RawDocument>& docs) {
    ensure_parent(path);
    std::ofstream out(path);
    if (!out) throw IoError("cannot write " + path);
    write_raw_corpus(out, docs);
  };
  write_raw(opts.out, corpus.docs);
  if (!opts.queries.empty()) write_raw(opts.queries, corpus.queries);
  if (!opts.qrels.empty()) {
    ensure_parent(opts.qrels);
    eval::write_qrels(opts.qrels, corpus.qrels);
  }

  CommandResult r;
  r.manifest.command = "planted";
  r.manifest.config = {{"out", opts.out},
                       {"queries", opts.queries},
                       {"qrels", opts.qrels},
                       {"topics", cfg.topics},
                       {"docs_per_topic", cfg.docs_per_topic},
                       {"queries_per_topic", cfg.queries_per_topic},
                       {"noise_sentences", cfg.noise_sentences},
                       {"topic_sentences", cfg.topic_sentences},
                       {"words_per_topic", cfg.words_per_topic},
                       {"noise_words", cfg.noise_words},
                       {"sentence_length", cfg.sentence_length}};
  r.manifest.seed = global.seed;
  r.manifest.summary = {{"documents", corpus.docs.size()}, {"queries", corpus.queries.size()}};
  write_manifest(opts.out, r.manifest);
  return r;
}

}  // namespace keyvec::cli
