#include "keyvec/gradient_suite.hpp"

#include <algorithm>
#include <functional>
#include <numeric>
#include <random>

#include "keyvec/encoder.hpp"
#include "keyvec/nn/gradcheck.hpp"

namespace keyvec {

namespace {

using nn::Tape;
using nn::Tensor;
using nn::Var;
using Rng = std::mt19937_64;
using Extended = long double;

constexpr double kLinearTol = 1e-6;
constexpr double kSmoothTol = 1e-4;
// Attempts per requested trial before a piecewise check gives up.
constexpr std::size_t kAttemptFactor = 5;

Tensor<double> uniform(Rng& rng, nn::Shape shape, double scale = 1.0) {
  Tensor<double> t(std::move(shape));
  std::uniform_real_distribution<double> dist(-scale, scale);
  for (auto& v : t.data()) v = dist(rng);
  return t;
}

std::size_t pick(Rng& rng, std::size_t lo, std::size_t hi) {
  return std::uniform_int_distribution<std::size_t>(lo, hi)(rng);
}

std::vector<std::int32_t> ids(Rng& rng, std::size_t n, std::size_t vocab) {
  std::vector<std::int32_t> out(n);
  for (auto& i : out) i = static_cast<std::int32_t>(pick(rng, 0, vocab - 1));
  return out;
}

// Scalar readout with fixed random weights, so every output coordinate gets a
// distinct upstream gradient.
template <typename R>
Var<R> project(const Var<R>& v, std::uint64_t seed) {
  Rng rng(seed);
  return nn::dot(v, v.tape().constant(uniform(rng, {v.size()}).template cast<R>()));
}

template <typename>
struct ScalarOf;
template <typename R>
struct ScalarOf<std::vector<Var<R>>> {
  using type = R;
};
// Element type of a leaf list, for generic loss builders.
template <typename Leaves>
using scalar_of = typename ScalarOf<std::decay_t<Leaves>>::type;

template <typename R>
R real(double v) {
  return static_cast<R>(v);
}

/// One random instance: the loss at both tape precisions and its inputs.
struct Instance {
  std::function<Var<double>(Tape<double>&, const std::vector<Var<double>>&)> at_double;
  std::function<Var<Extended>(Tape<Extended>&, const std::vector<Var<Extended>>&)> at_extended;
  std::vector<Tensor<double>> inputs;
};

template <typename Fn>
Instance instance(Fn fn, std::vector<Tensor<double>> inputs) {
  return Instance{fn, fn, std::move(inputs)};
}

// Differences are taken in extended precision: with losses of order 10, double
// central differences carry ~1e-10 of round-off, which is larger than some
// genuine LSTM gradients at these sizes and would drown the check.
GradientCheckEntry run_check(const std::string& name, double tol, bool piecewise, const GradientSuiteOptions& opts,
                             Rng& rng, const std::function<Instance(Rng&, std::size_t)>& draw) {
  GradientCheckEntry e{name, tol};
  const std::size_t attempts = piecewise ? kAttemptFactor * opts.trials : opts.trials;
  for (std::size_t a = 0; a < attempts && e.checked < opts.trials; ++a) {
    auto inst = draw(rng, a);
    auto r = nn::finite_difference_check<Extended>(
        [&](auto& tape, const auto& vars) {
          if constexpr (std::is_same_v<std::decay_t<decltype(tape)>, Tape<double>>) {
            return inst.at_double(tape, vars);
          } else {
            return inst.at_extended(tape, vars);
          }
        },
        std::move(inst.inputs), opts.eps);
    if (piecewise && !r.locally_smooth(opts.eps)) {
      ++e.skipped;
      continue;
    }
    ++e.checked;
    e.max_rel_error = std::max(e.max_rel_error, r.max_rel_error);
  }
  return e;
}

Instance joint_instance(Rng& rng, std::size_t attempt) {
  ModelConfig cfg;
  cfg.vocab_size = pick(rng, 4, 12);
  cfg.word_dim = pick(rng, 2, 4);
  cfg.filter_widths = pick(rng, 0, 1) ? std::vector<std::size_t>{1, 2} : std::vector<std::size_t>{1, 2, 3};
  cfg.filters_per_width = pick(rng, 2, 3);
  cfg.lstm_hidden = pick(rng, 2, 3);
  cfg.doc_dim = pick(rng, 2, 4);
  cfg.conv_activation = attempt % 2 ? nn::Activation::kTanh : nn::Activation::kRelu;

  Document doc;
  doc.id = "doc";
  const std::size_t n = pick(rng, 1, 4);
  // Distinct words within a sentence: repeated windows would tie exactly in
  // the max-pool and every attempt would be skipped as non-smooth.
  std::vector<WordId> words(cfg.vocab_size - 2);
  std::iota(words.begin(), words.end(), WordId{2});
  for (std::size_t i = 0; i < n; ++i) {
    std::shuffle(words.begin(), words.end(), rng);
    const auto len = static_cast<std::ptrdiff_t>(pick(rng, 1, std::min<std::size_t>(5, words.size())));
    doc.sentences.emplace_back(words.begin(), words.begin() + len);
  }
  std::vector<std::size_t> salient;
  for (std::size_t i = 0; i < n; ++i) {
    if (pick(rng, 0, 1)) salient.push_back(i);
  }
  std::vector<WordId> keywords;
  for (std::size_t w = 2; w < cfg.vocab_size; ++w) {
    if (pick(rng, 0, 2) == 0) keywords.push_back(static_cast<WordId>(w));
  }
  if (keywords.empty()) keywords.push_back(2);

  // Parameters drawn in +-0.5 rather than at init scale, so that gates and
  // ReLUs sit at generic points.
  std::vector<std::string> names;
  std::vector<Tensor<double>> inputs;
  for (const auto& [pname, shape] : param_shapes(cfg)) {
    names.push_back(pname);
    inputs.push_back(uniform(rng, shape, 0.5));
  }
  return instance(
      [cfg, doc, salient, keywords, names](auto&, const auto& leaves) {
        using R = scalar_of<decltype(leaves)>;
        auto vars = make_vars<R>(cfg, [&](const std::string& pname) {
          const auto it = std::find(names.begin(), names.end(), pname);
          return leaves[static_cast<std::size_t>(it - names.begin())];
        });
        return joint_loss(vars, cfg, doc, salient, keywords).total;
      },
      std::move(inputs));
}

}  // namespace

std::vector<GradientCheckEntry> run_gradient_suite(const GradientSuiteOptions& opts) {
  Rng rng(opts.seed);
  std::vector<GradientCheckEntry> out;
  auto add = [&](const std::string& name, double tol, bool piecewise,
                 const std::function<Instance(Rng&, std::size_t)>& draw) {
    out.push_back(run_check(name, tol, piecewise, opts, rng, draw));
  };

  add("embedding_lookup", kLinearTol, false, [](Rng& r, std::size_t) {
    const std::size_t v = pick(r, 2, 7), e = pick(r, 1, 5);
    auto lookup = ids(r, pick(r, 1, 6), v);
    return instance(
        [lookup](auto&, const auto& x) {
          return project(nn::embedding_lookup(x[0], std::span<const std::int32_t>(lookup)), 1);
        },
        {uniform(r, {v, e})});
  });
  add("linear", kLinearTol, false, [](Rng& r, std::size_t) {
    const std::size_t a = pick(r, 1, 6), b = pick(r, 1, 6);
    return instance([](auto&, const auto& x) { return project(nn::linear(x[0], x[1], x[2]), 2); },
                    {uniform(r, {a}), uniform(r, {b, a}), uniform(r, {b})});
  });
  add("add", kLinearTol, false, [](Rng& r, std::size_t) {
    const std::size_t n = pick(r, 1, 8);
    return instance([](auto&, const auto& x) { return project(nn::add(x[0], x[1]), 3); },
                    {uniform(r, {n}), uniform(r, {n})});
  });
  add("add_scalar", kLinearTol, false, [](Rng& r, std::size_t) {
    const std::size_t n = pick(r, 1, 8);
    return instance([](auto&, const auto& x) { return project(nn::add_scalar(x[0], x[1]), 4); },
                    {uniform(r, {n}), uniform(r, {1})});
  });
  add("scale", kLinearTol, false, [](Rng& r, std::size_t) {
    const std::size_t n = pick(r, 1, 8);
    return instance(
        [](auto&, const auto& x) {
          using R = scalar_of<decltype(x)>;
          return project(nn::scale(x[0], real<R>(-1.75)), 5);
        },
        {uniform(r, {n})});
  });
  add("sum", kLinearTol, false, [](Rng& r, std::size_t) {
    return instance([](auto&, const auto& x) { return nn::sum(x[0]); }, {uniform(r, {pick(r, 1, 8)})});
  });
  add("dot", kLinearTol, false, [](Rng& r, std::size_t) {
    const std::size_t n = pick(r, 1, 8);
    return instance([](auto&, const auto& x) { return nn::dot(x[0], x[1]); }, {uniform(r, {n}), uniform(r, {n})});
  });
  add("slice", kLinearTol, false, [](Rng& r, std::size_t) {
    const std::size_t n = pick(r, 2, 8), off = pick(r, 0, n - 1), len = pick(r, 1, n - off);
    return instance([off, len](auto&, const auto& x) { return project(nn::slice(x[0], off, len), 6); },
                    {uniform(r, {n})});
  });
  add("concat", kLinearTol, false, [](Rng& r, std::size_t) {
    return instance(
        [](auto&, const auto& x) {
          using R = scalar_of<decltype(x)>;
          return project(nn::concat<R>(x), 7);
        },
        {uniform(r, {pick(r, 1, 4)}), uniform(r, {pick(r, 1, 4)}), uniform(r, {pick(r, 1, 4)})});
  });
  add("stack", kLinearTol, false, [](Rng& r, std::size_t) {
    const std::size_t k = pick(r, 1, 4);
    return instance(
        [](auto&, const auto& x) {
          using R = scalar_of<decltype(x)>;
          return project(nn::stack<R>(x), 8);
        },
        {uniform(r, {k}), uniform(r, {k}), uniform(r, {k})});
  });
  add("mul", kSmoothTol, false, [](Rng& r, std::size_t) {
    const std::size_t n = pick(r, 1, 8);
    return instance([](auto&, const auto& x) { return project(nn::mul(x[0], x[1]), 9); },
                    {uniform(r, {n}), uniform(r, {n})});
  });
  add("sigmoid", kSmoothTol, false, [](Rng& r, std::size_t) {
    return instance([](auto&, const auto& x) { return project(nn::sigmoid(x[0]), 10); },
                    {uniform(r, {pick(r, 1, 8)}, 3.0)});
  });
  add("tanh", kSmoothTol, false, [](Rng& r, std::size_t) {
    return instance([](auto&, const auto& x) { return project(nn::tanh_op(x[0]), 11); },
                    {uniform(r, {pick(r, 1, 8)}, 3.0)});
  });
  add("softmax", kSmoothTol, false, [](Rng& r, std::size_t) {
    return instance([](auto&, const auto& x) { return project(nn::softmax(x[0]), 12); },
                    {uniform(r, {pick(r, 1, 8)}, 3.0)});
  });
  add("conv1d_maxpool", kSmoothTol, true, [](Rng& r, std::size_t attempt) {
    const std::size_t m = pick(r, 1, 6), e = pick(r, 1, 4), f = pick(r, 1, 4), w = pick(r, 1, 3);
    const auto act = attempt % 2 ? nn::Activation::kTanh : nn::Activation::kRelu;
    return instance([act](auto&, const auto& x) { return project(nn::conv1d_maxpool(x[0], x[1], x[2], act), 13); },
                    {uniform(r, {m, e}), uniform(r, {f, w, e}), uniform(r, {f})});
  });
  add("lstm_cell", kSmoothTol, false, [](Rng& r, std::size_t) {
    const std::size_t h = pick(r, 1, 4);
    return instance([](auto&, const auto& x) { return project(nn::lstm_cell(x[0], x[1]), 14); },
                    {uniform(r, {4 * h}, 2.0), uniform(r, {h})});
  });
  add("lstm_step", kSmoothTol, false, [](Rng& r, std::size_t) {
    const std::size_t e = pick(r, 1, 4), h = pick(r, 1, 4);
    return instance(
        [](auto&, const auto& x) {
          auto st = nn::lstm_step(x[0], x[1], x[2], x[3], x[4], x[5]);
          return nn::add(project(st.h, 15), project(st.c, 16));
        },
        {uniform(r, {e}), uniform(r, {h}), uniform(r, {h}), uniform(r, {4 * h, e}), uniform(r, {4 * h, h}),
         uniform(r, {4 * h})});
  });
  add("weighted_mean", kSmoothTol, false, [](Rng& r, std::size_t) {
    const std::size_t n = pick(r, 1, 5), k = pick(r, 1, 4);
    auto weights = uniform(r, {n});
    for (auto& w : weights.data()) w = 0.1 + std::abs(w);
    return instance([](auto&, const auto& x) { return project(nn::weighted_mean(x[0], x[1]), 17); },
                    {uniform(r, {n, k}), weights});
  });
  add("binary_nll", kSmoothTol, false, [](Rng& r, std::size_t) {
    const std::size_t n = pick(r, 1, 6);
    std::vector<bool> positive(n);
    for (std::size_t i = 0; i < n; ++i) positive[i] = pick(r, 0, 1) == 1;
    auto probs = uniform(r, {n});
    for (auto& p : probs.data()) p = 0.05 + 0.45 * (p + 1.0);
    return instance([positive](auto&, const auto& x) { return nn::binary_nll(x[0], positive); }, {probs});
  });
  add("softmax_nll", kSmoothTol, false, [](Rng& r, std::size_t) {
    const std::size_t classes = pick(r, 2, 9);
    auto targets = ids(r, pick(r, 1, 4), classes);
    return instance(
        [targets](auto&, const auto& x) { return nn::softmax_nll(x[0], std::span<const std::int32_t>(targets)); },
        {uniform(r, {classes}, 3.0)});
  });
  add("joint_loss", kSmoothTol, true, joint_instance);
  return out;
}

}  // namespace keyvec
