#include <algorithm>
#include <iostream>
#include <map>
#include <string>

#include "CLI11.hpp"
#include "keyvec/cli/commands.hpp"
#include "keyvec/error.hpp"

namespace kc = keyvec::cli;

namespace {

// Config keys are flag names without the leading dashes; underscores are
// accepted for dashes. Command-line values win over file values.
void apply_config(CLI::App& app, CLI::App& sub, const std::string& path) {
  for (const auto& [raw_key, value] : kc::read_flat_config(path)) {
    std::string key = raw_key;
    std::replace(key.begin(), key.end(), '_', '-');
    if (key == "config") throw keyvec::ParseError(path + ": config files cannot include other config files");
    CLI::Option* opt = sub.get_option_no_throw("--" + key);
    if (opt == nullptr) opt = app.get_option_no_throw("--" + key);
    if (opt == nullptr) throw keyvec::ParseError(path + ": unknown key '" + key + "' for " + sub.get_name());
    if (opt->count() > 0) continue;
    opt->add_result(value);
    opt->run_callback();
  }
}

const std::map<std::string, keyvec::nn::Activation> kActivations{{"relu", keyvec::nn::Activation::kRelu},
                                                                  {"tanh", keyvec::nn::Activation::kTanh}};

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Document embeddings from salient sentences: corpus, training and evaluation pipeline."};
  app.require_subcommand(1);
  kc::GlobalOptions global;
  std::string config;
  app.add_option("--seed", global.seed, "Random seed")->capture_default_str();
  app.add_option("--threads", global.threads, "Worker threads (outputs do not depend on it)")
      ->capture_default_str()
      ->check(CLI::PositiveNumber);
  app.add_option("--config", config, "Flat key=value file; keys mirror flag names")->check(CLI::ExistingFile);

  kc::IngestOptions ingest;
  auto* c_ingest = app.add_subcommand("ingest", "Build vocabulary, encoded corpus and TF-IDF statistics");
  c_ingest->add_option("--input", ingest.input, "Raw corpus (JSON Lines)");
  c_ingest->add_option("--out", ingest.out_dir, "Output directory");
  c_ingest->add_option("--min-count", ingest.min_count, "Minimum word frequency")->capture_default_str();
  c_ingest->add_option("--max-vocab", ingest.max_vocab, "Vocabulary size cap, specials included")
      ->capture_default_str();

  kc::LabelOptions label;
  auto* c_label = app.add_subcommand("label", "Generate surrogate salient-sentence and keyword labels");
  c_label->add_option("--corpus", label.corpus_dir, "Ingested corpus directory");
  c_label->add_option("--out", label.out, "Labels file (default: <corpus>/labels.jsonl)");
  c_label->add_option("--top-k", label.supervision.top_k, "Salient sentences per summary sentence")
      ->capture_default_str();
  c_label->add_option("--threshold", label.supervision.sim_threshold, "Minimum similarity")->capture_default_str();
  c_label->add_option("--keywords", label.supervision.num_keywords, "Keywords per document")->capture_default_str();

  kc::TrainOptions train;
  auto* c_train = app.add_subcommand("train", "Train the reader and encoder jointly");
  c_train->add_option("--corpus", train.corpus_dir, "Ingested corpus directory");
  c_train->add_option("--labels", train.labels, "Labels file (default: <corpus>/labels.jsonl)");
  c_train->add_option("--out", train.out, "Checkpoint path");
  c_train->add_option("--log", train.log, "Training log CSV (default: <out>.log.csv)");
  c_train->add_option("--pretrained", train.pretrained, "Word vectors to initialize embeddings");
  c_train->add_option("--epochs", train.train.epochs)->capture_default_str();
  c_train->add_option("--lr", train.train.learning_rate, "Learning rate")->capture_default_str();
  c_train->add_option("--lr-decay", train.train.lr_decay, "Per-epoch learning-rate factor")->capture_default_str();
  c_train->add_option("--clip", train.train.clip_norm, "Gradient norm clip")->capture_default_str();
  c_train->add_option("--lambda-read", train.train.lambda_read, "Reader loss weight")->capture_default_str();
  c_train->add_option("--lambda-enc", train.train.lambda_enc, "Keyword loss weight")->capture_default_str();
  c_train->add_flag("--freeze-embeddings", train.train.freeze_embeddings);
  c_train->add_option("--word-dim", train.model.word_dim)->capture_default_str();
  c_train->add_option("--filter-widths", train.model.filter_widths)->delimiter(',')->capture_default_str();
  c_train->add_option("--filters", train.model.filters_per_width, "Filters per width")->capture_default_str();
  c_train->add_option("--hidden", train.model.lstm_hidden, "LSTM state size per direction")->capture_default_str();
  c_train->add_option("--doc-dim", train.model.doc_dim, "Document embedding size")->capture_default_str();
  c_train->add_option("--activation", train.model.conv_activation, "Convolution activation (relu or tanh)")
      ->transform(CLI::CheckedTransformer(kActivations, CLI::ignore_case));
  c_train->add_flag("--quiet", train.quiet, "No per-epoch progress");

  kc::EmbedOptions embed;
  auto* c_embed = app.add_subcommand("embed", "Embed documents with a trained checkpoint");
  c_embed->add_option("--model", embed.model, "Checkpoint");
  c_embed->add_option("--corpus", embed.corpus_dir, "Ingested corpus directory");
  c_embed->add_option("--input", embed.input, "Raw corpus (JSON Lines), encoded with the checkpoint vocabulary");
  c_embed->add_option("--out", embed.out, "Embeddings (JSON Lines)");

  kc::RetrieveOptions retrieve;
  auto* c_retrieve = app.add_subcommand("retrieve", "Rank index documents for each query by cosine similarity");
  c_retrieve->add_option("--index", retrieve.index, "Document embeddings");
  c_retrieve->add_option("--queries", retrieve.queries, "Query embeddings");
  c_retrieve->add_option("--out", retrieve.out, "Run file");
  c_retrieve->add_option("--k", retrieve.k, "Results per query")->capture_default_str();

  kc::ClusterOptions cluster;
  auto* c_cluster = app.add_subcommand("cluster", "k-means over document embeddings");
  c_cluster->add_option("--embeddings", cluster.embeddings, "Document embeddings");
  c_cluster->add_option("--out", cluster.out, "Clustering report (JSON)");
  c_cluster->add_option("--truth", cluster.truth, "JSON Lines with id and label, for metrics");
  c_cluster->add_option("--k", cluster.k, "Clusters")->capture_default_str();
  c_cluster->add_option("--max-iters", cluster.max_iters)->capture_default_str();
  c_cluster->add_option("--restarts", cluster.restarts)->capture_default_str();
  c_cluster->add_flag("--l2-normalize", cluster.l2_normalize, "Scale embeddings to unit length first");

  kc::EvalOptions evaluate;
  auto* c_eval = app.add_subcommand("eval", "Score a run file or a clustering report");
  c_eval->add_option("--run", evaluate.run, "Run file");
  c_eval->add_option("--qrels", evaluate.qrels, "Relevance file");
  c_eval->add_option("--k", evaluate.k, "Precision cutoff")->capture_default_str();
  c_eval->add_option("--clusters", evaluate.clusters, "Clustering report");
  c_eval->add_option("--truth", evaluate.truth, "JSON Lines with id and label");
  c_eval->add_option("--out", evaluate.out, "Metrics (JSON)");

  kc::GradcheckOptions gradcheck;
  auto* c_gradcheck = app.add_subcommand("gradcheck", "Finite-difference check of every primitive and the joint loss");
  c_gradcheck->add_option("--out", gradcheck.out, "Report (JSON)");
  c_gradcheck->add_option("--trials", gradcheck.trials, "Random instances per check")->capture_default_str();
  c_gradcheck->add_option("--eps", gradcheck.eps, "Difference step")->capture_default_str();

  kc::PlantedOptions planted;
  auto* c_planted = app.add_subcommand("planted", "Generate a synthetic topic corpus with queries and relevance");
  c_planted->add_option("--out", planted.out, "Corpus (JSON Lines)");
  c_planted->add_option("--queries", planted.queries, "Held-out queries (JSON Lines)");
  c_planted->add_option("--qrels", planted.qrels, "Relevance file");
  c_planted->add_option("--topics", planted.corpus.topics)->capture_default_str();
  c_planted->add_option("--docs-per-topic", planted.corpus.docs_per_topic)->capture_default_str();
  c_planted->add_option("--queries-per-topic", planted.corpus.queries_per_topic)->capture_default_str();
  c_planted->add_option("--noise-sentences", planted.corpus.noise_sentences)->capture_default_str();
  c_planted->add_option("--topic-sentences", planted.corpus.topic_sentences)->capture_default_str();
  c_planted->add_option("--words-per-topic", planted.corpus.words_per_topic)->capture_default_str();
  c_planted->add_option("--noise-words", planted.corpus.noise_words)->capture_default_str();
  c_planted->add_option("--sentence-length", planted.corpus.sentence_length)->capture_default_str();

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForAllHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return kc::kExitBadInput;
  }

  try {
    CLI::App* sub = app.get_subcommands().front();
    if (!config.empty()) apply_config(app, *sub, config);
    kc::CommandResult result;
    const std::string name = sub->get_name();
    if (name == "ingest") {
      result = kc::cmd_ingest(ingest, global);
    } else if (name == "label") {
      result = kc::cmd_label(label, global, std::cerr);
    } else if (name == "train") {
      result = kc::cmd_train(train, global, std::cerr);
    } else if (name == "embed") {
      result = kc::cmd_embed(embed, global);
    } else if (name == "retrieve") {
      result = kc::cmd_retrieve(retrieve, global);
    } else if (name == "cluster") {
      result = kc::cmd_cluster(cluster, global);
    } else if (name == "eval") {
      result = kc::cmd_eval(evaluate, global);
    } else if (name == "gradcheck") {
      result = kc::cmd_gradcheck(gradcheck, global);
    } else {
      result = kc::cmd_planted(planted, global);
    }
    std::cout << result.manifest.summary.dump() << '\n';
    return result.exit_code;
  } catch (const CLI::ParseError& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kc::kExitBadInput;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kc::exit_code_for(e);
  }
}
