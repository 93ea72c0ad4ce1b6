#ifndef KEYVEC_NN_OPS_HPP
#define KEYVEC_NN_OPS_HPP

#include <Eigen/Core>

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <span>
#include <string>
#include <vector>

#include "keyvec/nn/tape.hpp"

namespace keyvec::nn {

enum class Activation { kRelu, kTanh };

namespace detail {

template <typename T>
using RowMat = Eigen::Matrix<T, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
template <typename T>
using MatMap = Eigen::Map<RowMat<T>>;
template <typename T>
using CMatMap = Eigen::Map<const RowMat<T>>;
template <typename T>
using VecMap = Eigen::Map<Eigen::Matrix<T, Eigen::Dynamic, 1>>;
template <typename T>
using CVecMap = Eigen::Map<const Eigen::Matrix<T, Eigen::Dynamic, 1>>;

template <typename T>
VecMap<T> vec(std::span<T> s) {
  return VecMap<T>(s.data(), static_cast<Eigen::Index>(s.size()));
}
template <typename T>
MatMap<T> mat(std::span<T> s, std::size_t rows, std::size_t cols) {
  return MatMap<T>(s.data(), static_cast<Eigen::Index>(rows), static_cast<Eigen::Index>(cols));
}

inline void require(bool ok, const std::string& what) {
  if (!ok) throw ShapeMismatch(what);
}

template <typename T>
bool any_grad(std::initializer_list<Var<T>> vars) {
  return std::any_of(vars.begin(), vars.end(), [](const Var<T>& v) { return v.requires_grad(); });
}

template <typename T>
T sigmoid(T x) {
  return T{1} / (T{1} + std::exp(-x));
}

}  // namespace detail

/// Gathers rows of `table` [V x E] for each id; backward scatter-adds into the
/// table gradient, so repeated ids accumulate.
template <typename T>
Var<T> embedding_lookup(const Var<T>& table, std::span<const std::int32_t> ids) {
  detail::require(table.shape().size() == 2, "embedding table must be rank 2");
  const std::size_t vocab = table.shape()[0];
  const std::size_t dim = table.shape()[1];
  for (std::int32_t id : ids) {
    if (id < 0 || static_cast<std::size_t>(id) >= vocab) {
      throw IndexOutOfRange("embedding id " + std::to_string(id) + " outside table of " +
                            std::to_string(vocab) + " rows");
    }
  }
  if (ids.empty()) throw ShapeMismatch("embedding_lookup needs at least one id");
  Tape<T>& tape = table.tape();
  Var<T> out = tape.make({ids.size(), dim}, table.requires_grad());
  auto src = table.value();
  auto dst = out.value();
  for (std::size_t i = 0; i < ids.size(); ++i) {
    std::copy_n(src.begin() + ids[i] * dim, dim, dst.begin() + i * dim);
  }
  std::vector<std::int32_t> idv(ids.begin(), ids.end());
  tape.on_backward(out, [table, out, idv = std::move(idv), dim] {
    auto g = out.grad();
    auto tg = table.grad();
    for (std::size_t i = 0; i < idv.size(); ++i) {
      for (std::size_t j = 0; j < dim; ++j) tg[idv[i] * dim + j] += g[i * dim + j];
    }
  });
  return out;
}

/// W x (+ b). `bias` may be an invalid Var for a bias-free product.
template <typename T>
Var<T> linear(const Var<T>& x, const Var<T>& weight, const Var<T>& bias = {}) {
  detail::require(weight.shape().size() == 2, "linear weight must be rank 2");
  const std::size_t rows = weight.shape()[0];
  const std::size_t cols = weight.shape()[1];
  detail::require(x.size() == cols, "linear: input size " + std::to_string(x.size()) +
                                        " does not match weight " + shape_string(weight.shape()));
  if (bias.valid()) detail::require(bias.size() == rows, "linear: bias size mismatch");
  Tape<T>& tape = x.tape();
  bool rg = x.requires_grad() || weight.requires_grad() || (bias.valid() && bias.requires_grad());
  Var<T> out = tape.make({rows}, rg);
  auto y = detail::vec(out.value());
  y.noalias() = detail::mat(weight.value(), rows, cols) * detail::vec(x.value());
  if (bias.valid()) y += detail::vec(bias.value());
  tape.on_backward(out, [x, weight, bias, out, rows, cols] {
    auto g = detail::vec(out.grad());
    if (x.requires_grad()) {
      detail::vec(x.grad()).noalias() += detail::mat(weight.value(), rows, cols).transpose() * g;
    }
    if (weight.requires_grad()) {
      detail::mat(weight.grad(), rows, cols).noalias() += g * detail::vec(x.value()).transpose();
    }
    if (bias.valid() && bias.requires_grad()) detail::vec(bias.grad()) += g;
  });
  return out;
}

template <typename T>
Var<T> add(const Var<T>& a, const Var<T>& b) {
  detail::require(a.size() == b.size(), "add: size mismatch");
  Var<T> out = a.tape().make(a.shape(), detail::any_grad({a, b}));
  detail::vec(out.value()) = detail::vec(a.value()) + detail::vec(b.value());
  a.tape().on_backward(out, [a, b, out] {
    auto g = detail::vec(out.grad());
    if (a.requires_grad()) detail::vec(a.grad()) += g;
    if (b.requires_grad()) detail::vec(b.grad()) += g;
  });
  return out;
}

/// v + s with a single-element `s` broadcast over v.
template <typename T>
Var<T> add_scalar(const Var<T>& v, const Var<T>& s) {
  detail::require(s.size() == 1, "add_scalar: second operand must have one element");
  Var<T> out = v.tape().make(v.shape(), detail::any_grad({v, s}));
  detail::vec(out.value()) = detail::vec(v.value()).array() + s.value()[0];
  v.tape().on_backward(out, [v, s, out] {
    auto g = detail::vec(out.grad());
    if (v.requires_grad()) detail::vec(v.grad()) += g;
    if (s.requires_grad()) s.grad()[0] += g.sum();
  });
  return out;
}

template <typename T>
Var<T> mul(const Var<T>& a, const Var<T>& b) {
  detail::require(a.size() == b.size(), "mul: size mismatch");
  Var<T> out = a.tape().make(a.shape(), detail::any_grad({a, b}));
  detail::vec(out.value()) = detail::vec(a.value()).cwiseProduct(detail::vec(b.value()));
  a.tape().on_backward(out, [a, b, out] {
    auto g = detail::vec(out.grad());
    if (a.requires_grad()) detail::vec(a.grad()) += g.cwiseProduct(detail::vec(b.value()));
    if (b.requires_grad()) detail::vec(b.grad()) += g.cwiseProduct(detail::vec(a.value()));
  });
  return out;
}

template <typename T>
Var<T> scale(const Var<T>& a, T factor) {
  Var<T> out = a.tape().make(a.shape(), a.requires_grad());
  detail::vec(out.value()) = detail::vec(a.value()) * factor;
  a.tape().on_backward(out, [a, out, factor] { detail::vec(a.grad()) += detail::vec(out.grad()) * factor; });
  return out;
}

template <typename T>
Var<T> sum(const Var<T>& a) {
  Var<T> out = a.tape().make({}, a.requires_grad());
  out.value()[0] = detail::vec(a.value()).sum();
  a.tape().on_backward(out, [a, out] { detail::vec(a.grad()).array() += out.grad()[0]; });
  return out;
}

template <typename T>
Var<T> dot(const Var<T>& a, const Var<T>& b) {
  detail::require(a.size() == b.size(), "dot: size mismatch");
  Var<T> out = a.tape().make({}, detail::any_grad({a, b}));
  out.value()[0] = detail::vec(a.value()).dot(detail::vec(b.value()));
  a.tape().on_backward(out, [a, b, out] {
    T g = out.grad()[0];
    if (a.requires_grad()) detail::vec(a.grad()) += g * detail::vec(b.value());
    if (b.requires_grad()) detail::vec(b.grad()) += g * detail::vec(a.value());
  });
  return out;
}

template <typename T>
Var<T> sigmoid(const Var<T>& x) {
  Var<T> out = x.tape().make(x.shape(), x.requires_grad());
  auto xv = x.value();
  auto y = out.value();
  for (std::size_t i = 0; i < y.size(); ++i) y[i] = detail::sigmoid(xv[i]);
  x.tape().on_backward(out, [x, out] {
    auto y = out.value();
    auto g = out.grad();
    auto gx = x.grad();
    for (std::size_t i = 0; i < y.size(); ++i) gx[i] += g[i] * y[i] * (T{1} - y[i]);
  });
  return out;
}

template <typename T>
Var<T> tanh_op(const Var<T>& x) {
  Var<T> out = x.tape().make(x.shape(), x.requires_grad());
  detail::vec(out.value()) = detail::vec(x.value()).array().tanh();
  x.tape().on_backward(out, [x, out] {
    auto y = detail::vec(out.value()).array();
    detail::vec(x.grad()).array() += detail::vec(out.grad()).array() * (T{1} - y * y);
  });
  return out;
}

/// Softmax over all elements, computed with max subtraction.
template <typename T>
Var<T> softmax(const Var<T>& x) {
  Var<T> out = x.tape().make(x.shape(), x.requires_grad());
  auto xv = detail::vec(x.value());
  auto y = detail::vec(out.value());
  y = (xv.array() - xv.maxCoeff()).exp();
  y /= y.sum();
  x.tape().on_backward(out, [x, out] {
    auto y = detail::vec(out.value());
    auto g = detail::vec(out.grad());
    T gy = g.dot(y);
    detail::vec(x.grad()).array() += y.array() * (g.array() - gy);
  });
  return out;
}

/// Concatenates flattened inputs into one vector.
template <typename T>
Var<T> concat(std::span<const Var<T>> parts) {
  detail::require(!parts.empty(), "concat of nothing");
  std::size_t total = 0;
  bool rg = false;
  for (const auto& p : parts) {
    total += p.size();
    rg = rg || p.requires_grad();
  }
  Tape<T>& tape = parts[0].tape();
  Var<T> out = tape.make({total}, rg);
  std::size_t off = 0;
  for (const auto& p : parts) {
    std::copy(p.value().begin(), p.value().end(), out.value().begin() + off);
    off += p.size();
  }
  std::vector<Var<T>> saved(parts.begin(), parts.end());
  tape.on_backward(out, [saved = std::move(saved), out] {
    auto g = out.grad();
    std::size_t off = 0;
    for (const auto& p : saved) {
      if (p.requires_grad()) {
        auto pg = p.grad();
        for (std::size_t i = 0; i < pg.size(); ++i) pg[i] += g[off + i];
      }
      off += p.size();
    }
  });
  return out;
}

/// Stacks equally sized inputs as rows of an [N x K] matrix.
template <typename T>
Var<T> stack(std::span<const Var<T>> rows) {
  detail::require(!rows.empty(), "stack of nothing");
  const std::size_t width = rows[0].size();
  for (const auto& r : rows) detail::require(r.size() == width, "stack: rows differ in size");
  Var<T> flat = concat(rows);
  flat.tape().node(flat.id()).shape = {rows.size(), width};
  return flat;
}

template <typename T>
Var<T> slice(const Var<T>& v, std::size_t offset, std::size_t length) {
  detail::require(offset + length <= v.size() && length > 0, "slice out of range");
  Var<T> out = v.tape().make({length}, v.requires_grad());
  std::copy_n(v.value().begin() + offset, length, out.value().begin());
  v.tape().on_backward(out, [v, out, offset] {
    auto g = out.grad();
    auto vg = v.grad();
    for (std::size_t i = 0; i < g.size(); ++i) vg[offset + i] += g[i];
  });
  return out;
}

/// Convolution over word positions followed by max-pooling over time.
///
/// words: [M x E]; filters: [F x w x E]; bias: [F]. Inputs shorter than w are
/// zero-padded at the end. Feature f is max_t act(bias_f + <filter_f, window_t>);
/// since act is monotone this is act of the maximal pre-activation. Gradient flows
/// only through the first maximizing position.
template <typename T>
Var<T> conv1d_maxpool(const Var<T>& words, const Var<T>& filters, const Var<T>& bias,
                      Activation act = Activation::kRelu) {
  detail::require(words.shape().size() == 2, "conv1d_maxpool: words must be [M x E]");
  detail::require(filters.shape().size() == 3, "conv1d_maxpool: filters must be [F x w x E]");
  const std::size_t m = words.shape()[0];
  const std::size_t e = words.shape()[1];
  const std::size_t nf = filters.shape()[0];
  const std::size_t w = filters.shape()[1];
  detail::require(filters.shape()[2] == e, "conv1d_maxpool: filter depth does not match word dim");
  detail::require(bias.size() == nf, "conv1d_maxpool: bias size mismatch");

  const std::size_t padded_len = std::max(m, w);
  const std::size_t positions = padded_len - w + 1;
  std::vector<T> padded;
  const T* base = words.value().data();
  if (padded_len != m) {
    padded.assign(padded_len * e, T{0});
    std::copy(words.value().begin(), words.value().end(), padded.begin());
    base = padded.data();
  }
  using Strided = Eigen::Map<const detail::RowMat<T>, 0, Eigen::OuterStride<>>;
  Strided windows(base, static_cast<Eigen::Index>(positions), static_cast<Eigen::Index>(w * e),
                  Eigen::OuterStride<>(static_cast<Eigen::Index>(e)));
  detail::RowMat<T> pre = windows * detail::mat(filters.value(), nf, w * e).transpose();

  Tape<T>& tape = words.tape();
  Var<T> out = tape.make({nf}, detail::any_grad({words, filters, bias}));
  std::vector<std::size_t> argmax(nf);
  std::vector<T> zmax(nf);
  auto b = bias.value();
  auto y = out.value();
  double margin = std::numeric_limits<double>::infinity();
  for (std::size_t f = 0; f < nf; ++f) {
    std::size_t best = 0;
    for (std::size_t t = 1; t < positions; ++t) {
      if (pre(t, f) > pre(best, f)) best = t;
    }
    for (std::size_t t = 0; t < positions; ++t) {
      if (t != best) margin = std::min(margin, static_cast<double>(pre(best, f) - pre(t, f)));
    }
    T z = pre(best, f) + b[f];
    if (act == Activation::kRelu) margin = std::min(margin, std::abs(static_cast<double>(z)));
    argmax[f] = best;
    zmax[f] = z;
    y[f] = act == Activation::kRelu ? std::max(z, T{0}) : std::tanh(z);
  }
  tape.record_margin(margin);

  tape.on_backward(out, [words, filters, bias, out, argmax = std::move(argmax), zmax = std::move(zmax),
                         act, m, e, w, nf] {
    auto g = out.grad();
    auto fv = filters.value();
    auto wv = words.value();
    for (std::size_t f = 0; f < nf; ++f) {
      T dz = act == Activation::kRelu ? (zmax[f] > T{0} ? g[f] : T{0})
                                      : g[f] * (T{1} - std::tanh(zmax[f]) * std::tanh(zmax[f]));
      if (dz == T{0}) continue;
      const std::size_t t0 = argmax[f];
      if (bias.requires_grad()) bias.grad()[f] += dz;
      for (std::size_t j = 0; j < w && t0 + j < m; ++j) {
        const std::size_t row = t0 + j;
        if (filters.requires_grad()) {
          auto fg = filters.grad();
          for (std::size_t k = 0; k < e; ++k) fg[(f * w + j) * e + k] += dz * wv[row * e + k];
        }
        if (words.requires_grad()) {
          auto wg = words.grad();
          for (std::size_t k = 0; k < e; ++k) wg[row * e + k] += dz * fv[(f * w + j) * e + k];
        }
      }
    }
  });
  return out;
}

/// LSTM cell nonlinearity. gates: [4H] pre-activations in (input, forget,
/// candidate, output) order; c_prev: [H]. Returns [2H] = (h, c).
template <typename T>
Var<T> lstm_cell(const Var<T>& gates, const Var<T>& c_prev) {
  const std::size_t h = c_prev.size();
  detail::require(gates.size() == 4 * h, "lstm_cell: gates must have 4x the state size");
  Var<T> out = gates.tape().make({2 * h}, detail::any_grad({gates, c_prev}));
  auto a = gates.value();
  auto cp = c_prev.value();
  auto y = out.value();
  // cache: i, f, g, o, tanh(c)
  std::vector<T> cache(5 * h);
  for (std::size_t k = 0; k < h; ++k) {
    T i = detail::sigmoid(a[k]);
    T f = detail::sigmoid(a[h + k]);
    T g = std::tanh(a[2 * h + k]);
    T o = detail::sigmoid(a[3 * h + k]);
    T c = f * cp[k] + i * g;
    T tc = std::tanh(c);
    y[k] = o * tc;
    y[h + k] = c;
    cache[k] = i;
    cache[h + k] = f;
    cache[2 * h + k] = g;
    cache[3 * h + k] = o;
    cache[4 * h + k] = tc;
  }
  gates.tape().on_backward(out, [gates, c_prev, out, cache = std::move(cache), h] {
    auto gy = out.grad();
    auto cp = c_prev.value();
    for (std::size_t k = 0; k < h; ++k) {
      const T i = cache[k], f = cache[h + k], g = cache[2 * h + k], o = cache[3 * h + k], tc = cache[4 * h + k];
      const T dh = gy[k];
      const T dc = gy[h + k] + dh * o * (T{1} - tc * tc);
      if (gates.requires_grad()) {
        auto ga = gates.grad();
        ga[k] += dc * g * i * (T{1} - i);
        ga[h + k] += dc * cp[k] * f * (T{1} - f);
        ga[2 * h + k] += dc * i * (T{1} - g * g);
        ga[3 * h + k] += dh * tc * o * (T{1} - o);
      }
      if (c_prev.requires_grad()) c_prev.grad()[k] += dc * f;
    }
  });
  return out;
}

template <typename T>
struct LstmState {
  Var<T> h;
  Var<T> c;
};

/// One LSTM step: gates = W_x x + W_h h_prev + b, then the standard cell update.
template <typename T>
LstmState<T> lstm_step(const Var<T>& x, const Var<T>& h_prev, const Var<T>& c_prev, const Var<T>& w_x,
                       const Var<T>& w_h, const Var<T>& b) {
  Var<T> gates = add(linear(x, w_x, b), linear(h_prev, w_h));
  Var<T> hc = lstm_cell(gates, c_prev);
  const std::size_t h = c_prev.size();
  return {slice(hc, 0, h), slice(hc, h, h)};
}

/// Convex combination of the rows of `rows` [N x K] with weights w_i / sum_j w_j.
template <typename T>
Var<T> weighted_mean(const Var<T>& rows, const Var<T>& weights) {
  detail::require(rows.shape().size() == 2, "weighted_mean: rows must be [N x K]");
  const std::size_t n = rows.shape()[0];
  const std::size_t k = rows.shape()[1];
  detail::require(weights.size() == n, "weighted_mean: one weight per row required");
  Var<T> out = rows.tape().make({k}, detail::any_grad({rows, weights}));
  auto wv = detail::vec(weights.value());
  const T total = wv.sum();
  detail::vec(out.value()).noalias() = detail::mat(rows.value(), n, k).transpose() * wv / total;
  rows.tape().on_backward(out, [rows, weights, out, n, k, total] {
    auto g = detail::vec(out.grad());
    auto r = detail::mat(rows.value(), n, k);
    if (rows.requires_grad()) {
      detail::mat(rows.grad(), n, k).noalias() += (detail::vec(weights.value()) / total) * g.transpose();
    }
    if (weights.requires_grad()) {
      // d out / d w_i = (r_i - out) / total
      Eigen::Matrix<T, Eigen::Dynamic, 1> rg = r * g;
      const T og = detail::vec(out.value()).dot(g);
      detail::vec(weights.grad()).array() += (rg.array() - og) / total;
    }
  });
  return out;
}

inline constexpr double kLogClamp = 1e-12;

/// -sum_i [y_i ln p_i + (1 - y_i) ln(1 - p_i)] with log arguments clamped at 1e-12.
template <typename T>
Var<T> binary_nll(const Var<T>& probs, const std::vector<bool>& positive) {
  detail::require(probs.size() == positive.size(), "binary_nll: one target per probability required");
  Var<T> out = probs.tape().make({}, probs.requires_grad());
  const T eps = static_cast<T>(kLogClamp);
  auto p = probs.value();
  T loss{0};
  for (std::size_t i = 0; i < p.size(); ++i) {
    loss -= positive[i] ? std::log(std::max(p[i], eps)) : std::log(std::max(T{1} - p[i], eps));
  }
  out.value()[0] = loss;
  probs.tape().on_backward(out, [probs, out, positive, eps] {
    auto p = probs.value();
    auto gp = probs.grad();
    const T g = out.grad()[0];
    for (std::size_t i = 0; i < p.size(); ++i) {
      if (positive[i]) {
        if (p[i] > eps) gp[i] -= g / p[i];
      } else if (T{1} - p[i] > eps) {
        gp[i] += g / (T{1} - p[i]);
      }
    }
  });
  return out;
}

/// -sum_{t in targets} ln softmax(logits)_t, via a stable log-sum-exp.
template <typename T>
Var<T> softmax_nll(const Var<T>& logits, std::span<const std::int32_t> targets) {
  const std::size_t n = logits.size();
  for (std::int32_t t : targets) {
    if (t < 0 || static_cast<std::size_t>(t) >= n) {
      throw IndexOutOfRange("softmax target " + std::to_string(t) + " outside " + std::to_string(n) + " classes");
    }
  }
  auto z = detail::vec(logits.value());
  const T zmax = z.maxCoeff();
  const T lse = zmax + std::log((z.array() - zmax).exp().sum());
  Var<T> out = logits.tape().make({}, logits.requires_grad());
  T loss{0};
  for (std::int32_t t : targets) loss += lse - z[t];
  out.value()[0] = loss;
  std::vector<std::int32_t> tv(targets.begin(), targets.end());
  logits.tape().on_backward(out, [logits, out, tv = std::move(tv), lse] {
    auto z = detail::vec(logits.value());
    auto gz = detail::vec(logits.grad());
    const T g = out.grad()[0];
    gz.array() += g * static_cast<T>(tv.size()) * (z.array() - lse).exp();
    for (std::int32_t t : tv) gz[t] -= g;
  });
  return out;
}

}  // namespace keyvec::nn

#endif  // KEYVEC_NN_OPS_HPP
