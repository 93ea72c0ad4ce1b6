#include <pybind11/numpy.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

#include <sstream>

#include "keyvec/checkpoint.hpp"
#include "keyvec/cli/commands.hpp"
#include "keyvec/encoder.hpp"
#include "keyvec/error.hpp"
#include "keyvec/eval/clustering.hpp"
#include "keyvec/eval/retrieval.hpp"
#include "keyvec/gradient_suite.hpp"

namespace py = pybind11;
using namespace keyvec;

namespace {

py::object to_python(const nlohmann::json& j) { return py::module_::import("json").attr("loads")(j.dump()); }

template <typename T>
py::array_t<double> to_array(const std::vector<T>& v) {
  py::array_t<double> out(static_cast<py::ssize_t>(v.size()));
  auto w = out.mutable_unchecked<1>();
  for (std::size_t i = 0; i < v.size(); ++i) w(static_cast<py::ssize_t>(i)) = static_cast<double>(v[i]);
  return out;
}

std::vector<int> to_labels(const py::array_t<int, py::array::c_style | py::array::forcecast>& a) {
  if (a.ndim() != 1) throw LabelMismatch("labels must be one-dimensional");
  return {a.data(), a.data() + a.size()};
}

/// A loaded checkpoint and its vocabulary, embedding raw sentences.
class Embedder {
 public:
  explicit Embedder(const std::string& path) {
    auto ckpt = load_checkpoint(path);
    if (!ckpt.vocab) throw IoError(path + ": no vocabulary next to the checkpoint");
    vocab_ = *ckpt.vocab;
    model_ = model_from_checkpoint(ckpt);
  }

  py::tuple embed(const std::vector<std::string>& sentences) const {
    RawDocument raw;
    raw.id = "doc";
    raw.sentences = sentences;
    DocumentEmbedding<float> e;
    {
      py::gil_scoped_release release;
      e = embed_document(model_, encode_document(vocab_, raw));
    }
    return py::make_tuple(to_array(e.embedding), to_array(e.salience));
  }

  std::size_t dim() const { return model_.config.doc_dim; }
  std::size_t vocab_size() const { return vocab_.size(); }

 private:
  Vocabulary vocab_;
  Model<float> model_;
};

eval::RankedList ranked(const std::string& query, const std::vector<std::string>& docs) {
  eval::RankedList run;
  run.query_id = query;
  for (std::size_t i = 0; i < docs.size(); ++i) run.results.push_back({docs[i], -static_cast<double>(i)});
  return run;
}

}  // namespace

PYBIND11_MODULE(_keyvec, m) {
  m.doc() = "Document embeddings from salient sentences";
  m.attr("__version__") = cli::tool_version();

  auto base = py::register_exception<Error>(m, "Error", PyExc_RuntimeError);
  py::register_exception<EmptyDocument>(m, "EmptyDocument", base);
  py::register_exception<ParseError>(m, "ParseError", base);
  py::register_exception<MissingSummary>(m, "MissingSummary", base);
  py::register_exception<IndexOutOfRange>(m, "IndexOutOfRange", base);
  py::register_exception<ShapeMismatch>(m, "ShapeMismatch", base);
  py::register_exception<NotScalar>(m, "NotScalar", base);
  py::register_exception<EmptyKeywordSet>(m, "EmptyKeywordSet", base);
  py::register_exception<EmptyTrainingSet>(m, "EmptyTrainingSet", base);
  py::register_exception<InvalidConfig>(m, "InvalidConfig", base);
  py::register_exception<IoError>(m, "IoError", base);
  py::register_exception<FormatVersionMismatch>(m, "FormatVersionMismatch", base);
  py::register_exception<CorruptFile>(m, "CorruptFile", base);
  py::register_exception<DimMismatch>(m, "DimMismatch", base);
  py::register_exception<EmptyIndex>(m, "EmptyIndex", base);
  py::register_exception<QueryWithoutRelevants>(m, "QueryWithoutRelevants", base);
  py::register_exception<TooFewPoints>(m, "TooFewPoints", base);
  py::register_exception<LabelMismatch>(m, "LabelMismatch", base);

  m.def("tokenize", [](const std::string& text) { return tokenize(text); }, py::arg("text"));

  py::class_<Embedder>(m, "Embedder")
      .def(py::init<const std::string&>(), py::arg("checkpoint"))
      .def("embed", &Embedder::embed, py::arg("sentences"),
           "Returns the document embedding and the per-sentence salience.")
      .def_property_readonly("dim", &Embedder::dim)
      .def_property_readonly("vocab_size", &Embedder::vocab_size);

  m.def("pairwise_f1", [](py::array_t<int, py::array::c_style | py::array::forcecast> pred,
                          py::array_t<int, py::array::c_style | py::array::forcecast> truth) {
    return eval::pairwise_f1(to_labels(pred), to_labels(truth));
  }, py::arg("pred"), py::arg("truth"));
  m.def("best_match_f1", [](py::array_t<int, py::array::c_style | py::array::forcecast> pred,
                            py::array_t<int, py::array::c_style | py::array::forcecast> truth) {
    return eval::best_match_f1(to_labels(pred), to_labels(truth));
  }, py::arg("pred"), py::arg("truth"));
  m.def("adjusted_rand_index", [](py::array_t<int, py::array::c_style | py::array::forcecast> pred,
                                  py::array_t<int, py::array::c_style | py::array::forcecast> truth) {
    return eval::adjusted_rand_index(to_labels(pred), to_labels(truth));
  }, py::arg("pred"), py::arg("truth"));
  m.def("v_measure", [](py::array_t<int, py::array::c_style | py::array::forcecast> pred,
                        py::array_t<int, py::array::c_style | py::array::forcecast> truth) {
    const auto v = eval::v_measure(to_labels(pred), to_labels(truth));
    return py::dict(py::arg("homogeneity") = v.homogeneity, py::arg("completeness") = v.completeness,
                    py::arg("v_measure") = v.v_measure);
  }, py::arg("pred"), py::arg("truth"));

  m.def("retrieval_metrics",
        [](const std::map<std::string, std::vector<std::string>>& runs,
           const std::map<std::string, std::set<std::string>>& qrels, std::size_t k) {
          std::vector<eval::RankedList> lists;
          for (const auto& [query, docs] : runs) lists.push_back(ranked(query, docs));
          const auto r = eval::evaluate_runs(lists, qrels, k);
          return py::dict(py::arg("p_at_k") = r.precision_at_k, py::arg("map") = r.map, py::arg("mrr") = r.mrr);
        },
        py::arg("runs"), py::arg("qrels"), py::arg("k") = 10,
        "Scores ranked document ids per query against sets of relevant ids.");

  m.def("kmeans",
        [](py::array_t<double, py::array::c_style | py::array::forcecast> points, std::size_t k, std::uint64_t seed,
           std::size_t max_iters, std::size_t restarts, bool l2_normalize, std::size_t threads) {
          if (points.ndim() != 2) throw DimMismatch("points must be a two-dimensional array");
          const auto rows = static_cast<std::size_t>(points.shape(0)), cols = static_cast<std::size_t>(points.shape(1));
          std::vector<std::vector<double>> data(rows);
          for (std::size_t i = 0; i < rows; ++i) data[i].assign(points.data() + i * cols, points.data() + (i + 1) * cols);
          eval::KMeansOptions opts{k, seed, max_iters, restarts, l2_normalize, threads};
          eval::Clustering c;
          {
            py::gil_scoped_release release;
            c = eval::kmeans(data, opts);
          }
          py::array_t<int> assignment(static_cast<py::ssize_t>(c.assignment.size()));
          std::copy(c.assignment.begin(), c.assignment.end(), assignment.mutable_data());
          return py::make_tuple(assignment, c.wcss);
        },
        py::arg("points"), py::arg("k"), py::kw_only(), py::arg("seed") = 1, py::arg("max_iters") = 100,
        py::arg("restarts") = 10, py::arg("l2_normalize") = false, py::arg("threads") = 1,
        "Returns the cluster assignment and the within-cluster sum of squares.");

  m.def("gradient_suite",
        [](std::uint64_t seed, std::size_t trials, double eps) {
          std::vector<GradientCheckEntry> entries;
          {
            py::gil_scoped_release release;
            entries = run_gradient_suite({seed, trials, eps});
          }
          py::list out;
          for (const auto& e : entries) {
            out.append(py::dict(py::arg("name") = e.name, py::arg("tolerance") = e.tolerance,
                                py::arg("max_rel_error") = e.max_rel_error, py::arg("checked") = e.checked,
                                py::arg("skipped") = e.skipped, py::arg("passed") = e.passed(trials)));
          }
          return out;
        },
        py::kw_only(), py::arg("seed") = 1, py::arg("trials") = 20, py::arg("eps") = 1e-5);

  // Pipeline commands; each returns its run summary.
  m.def("planted",
        [](const std::string& out, const std::string& queries, const std::string& qrels, std::size_t topics,
           std::size_t docs_per_topic, std::uint64_t seed) {
          cli::PlantedOptions o{out, queries, qrels, {}};
          o.corpus.topics = topics;
          o.corpus.docs_per_topic = docs_per_topic;
          return to_python(cli::cmd_planted(o, {seed, 1}).manifest.summary);
        },
        py::arg("out"), py::arg("queries"), py::arg("qrels"), py::kw_only(), py::arg("topics") = 8,
        py::arg("docs_per_topic") = 10, py::arg("seed") = 1);
  m.def("ingest",
        [](const std::string& input, const std::string& out_dir, std::size_t min_count, std::size_t max_vocab) {
          return to_python(cli::cmd_ingest({input, out_dir, min_count, max_vocab}, {}).manifest.summary);
        },
        py::arg("input"), py::arg("out_dir"), py::kw_only(), py::arg("min_count") = 1, py::arg("max_vocab") = 50000);
  m.def("label",
        [](const std::string& corpus_dir, std::size_t top_k, double threshold, std::size_t keywords) {
          cli::LabelOptions o;
          o.corpus_dir = corpus_dir;
          o.supervision = {top_k, threshold, keywords};
          std::ostringstream log;
          auto summary = cli::cmd_label(o, {}, log).manifest.summary;
          if (!log.str().empty()) {
            py::module_::import("warnings").attr("warn")(log.str().substr(0, log.str().find_last_not_of('\n') + 1));
          }
          return to_python(summary);
        },
        py::arg("corpus_dir"), py::kw_only(), py::arg("top_k") = 10, py::arg("threshold") = 0.3,
        py::arg("keywords") = 30);
  m.def("train",
        [](const std::string& corpus_dir, const std::string& out, std::size_t epochs, std::size_t word_dim,
           std::size_t filters, std::size_t hidden, std::size_t doc_dim, double learning_rate, std::uint64_t seed) {
          cli::TrainOptions o;
          o.corpus_dir = corpus_dir;
          o.out = out;
          o.quiet = true;
          o.train.epochs = epochs;
          o.train.learning_rate = learning_rate;
          o.model.word_dim = word_dim;
          o.model.filters_per_width = filters;
          o.model.lstm_hidden = hidden;
          o.model.doc_dim = doc_dim;
          std::ostringstream log;
          cli::CommandResult r;
          {
            py::gil_scoped_release release;
            r = cli::cmd_train(o, {seed, 1}, log);
          }
          return to_python(r.manifest.summary);
        },
        py::arg("corpus_dir"), py::arg("out"), py::kw_only(), py::arg("epochs") = 60, py::arg("word_dim") = 100,
        py::arg("filters") = 50, py::arg("hidden") = 100, py::arg("doc_dim") = 100, py::arg("learning_rate") = 0.1,
        py::arg("seed") = 1);
}
