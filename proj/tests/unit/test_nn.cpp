#include "doctest.h"

#include <cmath>
#include <limits>
#include <random>

#include "keyvec/nn/gradcheck.hpp"
#include "keyvec/nn/ops.hpp"
#include "keyvec/nn/sgd.hpp"
#include "support/random.hpp"

using namespace keyvec;
using namespace keyvec::nn;
using keyvec::testing::random_ids;
using keyvec::testing::random_size;
using keyvec::testing::random_tensor;

namespace {

using Vars = std::vector<Var<double>>;

// Projects an op output to a scalar with fixed random weights so that every
// output coordinate contributes a distinct gradient.
Var<double> project(const Var<double>& v, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  Var<double> w = v.tape().constant(random_tensor(rng, {v.size()}));
  Var<double> flat = v;
  return dot(flat, w);
}

constexpr double kEps = 1e-5;

}  // namespace

TEST_CASE("embedding_lookup gathers rows in order") {
  Tape<double> tape;
  Tensor<double> table({3, 2}, {0, 1, 10, 11, 20, 21});
  auto t = tape.constant(table, true);
  std::vector<std::int32_t> ids{2, 0};
  auto out = embedding_lookup(t, std::span<const std::int32_t>(ids));
  CHECK(out.shape() == Shape{2, 2});
  CHECK(std::vector<double>(out.value().begin(), out.value().end()) == std::vector<double>{20, 21, 0, 1});
}

TEST_CASE("embedding_lookup accumulates gradients of repeated ids") {
  Tape<double> tape;
  auto t = tape.constant(Tensor<double>({3, 2}), true);
  std::vector<std::int32_t> ids{1, 1};
  auto out = embedding_lookup(t, std::span<const std::int32_t>(ids));
  auto g = tape.constant(Tensor<double>({2, 2}, {1, 2, 30, 40}));
  tape.backward(dot(out, g));
  auto tg = t.grad();
  CHECK(tg[2] == 31.0);
  CHECK(tg[3] == 42.0);
  CHECK(tg[0] == 0.0);
  CHECK(tg[4] == 0.0);
}

TEST_CASE("embedding_lookup rejects out-of-range ids") {
  Tape<double> tape;
  auto t = tape.constant(Tensor<double>({3, 2}));
  std::vector<std::int32_t> ids{3};
  CHECK_THROWS_AS(embedding_lookup(t, std::span<const std::int32_t>(ids)), IndexOutOfRange);
  ids = {-1};
  CHECK_THROWS_AS(embedding_lookup(t, std::span<const std::int32_t>(ids)), IndexOutOfRange);
}

TEST_CASE("embedding_lookup gradient matches finite differences") {
  std::mt19937_64 rng(11);
  for (int trial = 0; trial < 5; ++trial) {
    const auto v = static_cast<std::int32_t>(random_size(rng, 2, 7));
    const std::size_t e = random_size(rng, 1, 5);
    auto ids = random_ids(rng, random_size(rng, 1, 6), v);
    auto r = finite_difference_check(
        [&](Tape<double>&, const Vars& x) {
          return project(embedding_lookup(x[0], std::span<const std::int32_t>(ids)), 99);
        },
        {random_tensor(rng, {static_cast<std::size_t>(v), e})}, kEps);
    CHECK(r.max_rel_error < 1e-6);
  }
}

TEST_CASE("conv1d_maxpool with an identity filter returns the max word value") {
  Tape<double> tape;
  auto words = tape.constant(Tensor<double>({2, 2}, {3, 7, 5, -1}));
  auto filters = tape.constant(Tensor<double>({1, 1, 2}, {1, 0}));
  auto bias = tape.constant(Tensor<double>({1}));
  auto out = conv1d_maxpool(words, filters, bias);
  CHECK(out.size() == 1);
  CHECK(out.value()[0] == 5.0);
}

TEST_CASE("conv1d_maxpool with zero filters and bias is zero") {
  std::mt19937_64 rng(3);
  Tape<double> tape;
  auto words = tape.constant(random_tensor(rng, {4, 3}));
  auto out = conv1d_maxpool(words, tape.constant(Tensor<double>({5, 2, 3})), tape.constant(Tensor<double>({5})));
  for (double v : out.value()) CHECK(v == 0.0);
}

TEST_CASE("conv1d_maxpool pads inputs shorter than the filter") {
  Tape<double> tape;
  auto words = tape.constant(Tensor<double>({1, 2}, {2, 3}));
  // width 3 filter whose first row reads the only real word
  auto filters = tape.constant(Tensor<double>({1, 3, 2}, {1, 1, 5, 5, 5, 5}));
  auto out = conv1d_maxpool(words, filters, tape.constant(Tensor<double>({1})));
  CHECK(out.value()[0] == doctest::Approx(5.0));
}

TEST_CASE("conv1d_maxpool gradient matches finite differences at stable points") {
  std::mt19937_64 rng(21);
  int checked = 0;
  for (int trial = 0; trial < 40 && checked < 8; ++trial) {
    const std::size_t m = random_size(rng, 1, 6), e = random_size(rng, 1, 4);
    const std::size_t f = random_size(rng, 1, 4), w = random_size(rng, 1, 3);
    const auto act = trial % 2 ? Activation::kTanh : Activation::kRelu;
    auto r = finite_difference_check(
        [&](Tape<double>&, const Vars& x) { return project(conv1d_maxpool(x[0], x[1], x[2], act), 5); },
        {random_tensor(rng, {m, e}), random_tensor(rng, {f, w, e}), random_tensor(rng, {f})}, kEps);
    if (!r.locally_smooth(kEps)) continue;
    ++checked;
    CHECK(r.max_rel_error < 1e-4);
  }
  CHECK(checked >= 8);
}

TEST_CASE("lstm_step with zero parameters and states gives zero output") {
  Tape<double> tape;
  const std::size_t e = 3, h = 2;
  auto zero = [&](Shape s) { return tape.constant(Tensor<double>(std::move(s))); };
  auto st = lstm_step(zero({e}), zero({h}), zero({h}), zero({4 * h, e}), zero({4 * h, h}), zero({4 * h}));
  for (double v : st.h.value()) CHECK(v == 0.0);
  for (double v : st.c.value()) CHECK(v == 0.0);
}

TEST_CASE("lstm_step with zero parameters halves the previous cell") {
  Tape<double> tape;
  const std::size_t e = 2, h = 3;
  auto zero = [&](Shape s) { return tape.constant(Tensor<double>(std::move(s))); };
  auto c0 = tape.constant(Tensor<double>({h}, {1.0, -2.0, 0.25}));
  auto st = lstm_step(zero({e}), zero({h}), c0, zero({4 * h, e}), zero({4 * h, h}), zero({4 * h}));
  CHECK(st.c.value()[0] == doctest::Approx(0.5));
  CHECK(st.c.value()[1] == doctest::Approx(-1.0));
  CHECK(st.c.value()[2] == doctest::Approx(0.125));
}

TEST_CASE("lstm_step gradients match finite differences") {
  std::mt19937_64 rng(31);
  for (int trial = 0; trial < 5; ++trial) {
    const std::size_t e = random_size(rng, 1, 4), h = random_size(rng, 1, 4);
    auto r = finite_difference_check(
        [&](Tape<double>&, const Vars& x) {
          auto st = lstm_step(x[0], x[1], x[2], x[3], x[4], x[5]);
          return add(project(st.h, 1), project(st.c, 2));
        },
        {random_tensor(rng, {e}), random_tensor(rng, {h}), random_tensor(rng, {h}), random_tensor(rng, {4 * h, e}),
         random_tensor(rng, {4 * h, h}), random_tensor(rng, {4 * h})},
        kEps);
    CHECK(r.max_rel_error < 1e-4);
  }
}

TEST_CASE("linear identity and zero-input cases") {
  Tape<double> tape;
  auto x = tape.constant(Tensor<double>({3}, {1, 2, 3}));
  auto eye = tape.constant(Tensor<double>({3, 3}, {1, 0, 0, 0, 1, 0, 0, 0, 1}));
  auto zero_b = tape.constant(Tensor<double>({3}));
  auto y = linear(x, eye, zero_b);
  CHECK(std::vector<double>(y.value().begin(), y.value().end()) == std::vector<double>{1, 2, 3});

  auto b = tape.constant(Tensor<double>({2}, {4, -5}));
  auto w = tape.constant(Tensor<double>({2, 3}, {1, 2, 3, 4, 5, 6}));
  auto y0 = linear(tape.constant(Tensor<double>({3})), w, b);
  CHECK(y0.value()[0] == 4.0);
  CHECK(y0.value()[1] == -5.0);
}

TEST_CASE("linear rejects mismatched shapes") {
  Tape<double> tape;
  auto x = tape.constant(Tensor<double>({4}));
  auto w = tape.constant(Tensor<double>({2, 3}));
  CHECK_THROWS_AS(linear(x, w), ShapeMismatch);
  CHECK_THROWS_AS(linear(tape.constant(Tensor<double>({3})), w, tape.constant(Tensor<double>({3}))), ShapeMismatch);
}

TEST_CASE("linear gradient matches finite differences") {
  std::mt19937_64 rng(41);
  for (int trial = 0; trial < 5; ++trial) {
    const std::size_t a = random_size(rng, 1, 6), b = random_size(rng, 1, 6);
    auto r = finite_difference_check(
        [&](Tape<double>&, const Vars& x) { return project(linear(x[0], x[1], x[2]), 7); },
        {random_tensor(rng, {a}), random_tensor(rng, {b, a}), random_tensor(rng, {b})}, kEps);
    CHECK(r.max_rel_error < 1e-6);
  }
}

TEST_CASE("elementwise and vector primitives") {
  Tape<double> tape;
  auto zero = tape.constant(Tensor<double>({1}));
  CHECK(sigmoid(zero).item() == 0.5);
  CHECK(tanh_op(zero).item() == 0.0);
  auto s = softmax(tape.constant(Tensor<double>({2})));
  CHECK(s.value()[0] == 0.5);
  CHECK(s.value()[1] == 0.5);

  std::mt19937_64 rng(5);
  auto x = random_tensor(rng, {6}, 3.0);
  auto shifted = x;
  for (auto& v : shifted.data()) v += 123.25;
  auto a = softmax(tape.constant(x));
  auto b = softmax(tape.constant(shifted));
  for (std::size_t i = 0; i < 6; ++i) CHECK(a.value()[i] == doctest::Approx(b.value()[i]).epsilon(1e-12));
}

TEST_CASE("softmax outputs are a distribution") {
  std::mt19937_64 rng(6);
  for (int trial = 0; trial < 200; ++trial) {
    Tape<double> tape;
    auto p = softmax(tape.constant(random_tensor(rng, {random_size(rng, 1, 50)}, 20.0)));
    double total = 0.0;
    for (double v : p.value()) {
      CHECK(v > 0.0);
      CHECK(v <= 1.0);
      total += v;
    }
    CHECK(std::abs(total - 1.0) <= 1e-9);
  }
}

TEST_CASE("elementwise primitive gradients match finite differences") {
  std::mt19937_64 rng(51);
  const std::size_t n = 5;
  auto check = [&](auto op, double tol) {
    auto r = finite_difference_check([&](Tape<double>&, const Vars& x) { return project(op(x[0]), 3); },
                                     {random_tensor(rng, {n}, 2.0)}, kEps);
    CHECK(r.max_rel_error < tol);
  };
  check([](const Var<double>& x) { return sigmoid(x); }, 1e-6);
  check([](const Var<double>& x) { return tanh_op(x); }, 1e-6);
  check([](const Var<double>& x) { return softmax(x); }, 1e-6);
  check([](const Var<double>& x) { return scale(x, 2.5); }, 1e-6);
  check([](const Var<double>& x) { return slice(x, 1, 3); }, 1e-6);
  check([](const Var<double>& x) { return mul(x, x); }, 1e-6);
}

TEST_CASE("weighted_mean, binary_nll and softmax_nll gradients") {
  std::mt19937_64 rng(61);
  for (int trial = 0; trial < 5; ++trial) {
    const std::size_t n = random_size(rng, 1, 5), k = random_size(rng, 1, 4);
    auto weights = random_tensor(rng, {n});
    for (auto& w : weights.data()) w = 0.1 + std::abs(w);
    auto r = finite_difference_check(
        [&](Tape<double>&, const Vars& x) { return project(weighted_mean(x[0], x[1]), 9); },
        {random_tensor(rng, {n, k}), weights}, kEps);
    CHECK(r.max_rel_error < 1e-4);

    std::vector<bool> pos(n);
    for (std::size_t i = 0; i < n; ++i) pos[i] = (rng() & 1) != 0;
    auto probs = random_tensor(rng, {n});
    for (auto& p : probs.data()) p = 0.05 + 0.9 * (p + 1.0) / 2.0;
    r = finite_difference_check([&](Tape<double>&, const Vars& x) { return binary_nll(x[0], pos); }, {probs}, kEps);
    CHECK(r.max_rel_error < 1e-4);

    const std::size_t classes = random_size(rng, 2, 9);
    auto targets = random_ids(rng, random_size(rng, 1, 4), static_cast<std::int32_t>(classes));
    r = finite_difference_check(
        [&](Tape<double>&, const Vars& x) { return softmax_nll(x[0], std::span<const std::int32_t>(targets)); },
        {random_tensor(rng, {classes}, 3.0)}, kEps);
    CHECK(r.max_rel_error < 1e-4);
  }
}

TEST_CASE("backward of a parameter sum yields all ones") {
  ParamStore<double> store;
  auto& p = store.add("p", Tensor<double>({2, 3}, 0.7));
  Tape<double> tape;
  auto v = tape.bind(p);
  tape.backward(sum(v));
  for (double g : p.grad.data()) CHECK(g == 1.0);
}

TEST_CASE("backward accumulates across calls") {
  std::mt19937_64 rng(71);
  ParamStore<double> store;
  auto& w = store.add("w", random_tensor(rng, {3, 4}));
  Tape<double> tape;
  auto x = tape.constant(random_tensor(rng, {4}));
  auto loss = project(tanh_op(linear(x, tape.bind(w))), 4);
  tape.backward(loss);
  auto first = w.grad;
  tape.backward(loss);
  for (std::size_t i = 0; i < first.size(); ++i) CHECK(w.grad[i] == 2.0 * first[i]);
}

TEST_CASE("backward requires a scalar") {
  Tape<double> tape;
  auto x = tape.constant(Tensor<double>({3}), true);
  CHECK_THROWS_AS(tape.backward(scale(x, 2.0)), NotScalar);
}

TEST_CASE("composed CNN -> LSTM -> linear graph matches finite differences") {
  std::mt19937_64 rng(81);
  int checked = 0;
  for (int trial = 0; trial < 20 && checked < 4; ++trial) {
    const std::size_t v = 6, e = 3, f = 2, w = 2, h = 2;
    auto ids = random_ids(rng, random_size(rng, 1, 5), static_cast<std::int32_t>(v));
    auto ids2 = random_ids(rng, random_size(rng, 1, 5), static_cast<std::int32_t>(v));
    auto r = finite_difference_check(
        [&](Tape<double>& tape, const Vars& x) {
          auto s1 = conv1d_maxpool(embedding_lookup(x[0], std::span<const std::int32_t>(ids)), x[1], x[2]);
          auto s2 = conv1d_maxpool(embedding_lookup(x[0], std::span<const std::int32_t>(ids2)), x[1], x[2]);
          auto h0 = tape.constant(Tensor<double>({h}));
          auto st = lstm_step(s1, h0, h0, x[3], x[4], x[5]);
          st = lstm_step(s2, st.h, st.c, x[3], x[4], x[5]);
          return sum(sigmoid(linear(st.h, x[6], x[7])));
        },
        {random_tensor(rng, {v, e}), random_tensor(rng, {f, w, e}), random_tensor(rng, {f}, 0.1),
         random_tensor(rng, {4 * h, f}), random_tensor(rng, {4 * h, h}), random_tensor(rng, {4 * h}),
         random_tensor(rng, {3, h}), random_tensor(rng, {3})},
        kEps);
    if (!r.locally_smooth(kEps)) continue;
    ++checked;
    CHECK(r.max_rel_error < 1e-4);
  }
  CHECK(checked >= 4);
}

TEST_CASE("finite_difference_check of a constant function is exact") {
  auto r = finite_difference_check(
      [](Tape<double>& tape, const Vars&) { return tape.constant(Tensor<double>({}, {3.0})); },
      {Tensor<double>({3}, 1.0)});
  CHECK(r.max_rel_error == 0.0);
  CHECK(r.coordinates == 3);
}

TEST_CASE("sgd_step arithmetic") {
  SUBCASE("zero gradient leaves parameters unchanged") {
    ParamStore<double> store;
    auto& p = store.add("p", Tensor<double>({2}, {1.5, -2.0}));
    sgd_step(store, 0.1, 5.0);
    CHECK(p.value[0] == 1.5);
    CHECK(p.value[1] == -2.0);
  }
  SUBCASE("single step without clipping") {
    ParamStore<double> store;
    auto& p = store.add("p", Tensor<double>({1}, {1.0}));
    p.grad[0] = 2.0;
    sgd_step(store, 0.1, std::numeric_limits<double>::infinity());
    CHECK(p.value[0] == doctest::Approx(0.8).epsilon(1e-15));
    CHECK(p.grad[0] == 0.0);
  }
  SUBCASE("clipping halves a gradient of norm 10 at clip 5") {
    ParamStore<double> store;
    auto& a = store.add("a", Tensor<double>({1}, {0.0}));
    auto& b = store.add("b", Tensor<double>({1}, {0.0}));
    a.grad[0] = 6.0;
    b.grad[0] = 8.0;
    double norm = sgd_step(store, 1.0, 5.0);
    CHECK(norm == doctest::Approx(10.0));
    CHECK(a.value[0] == doctest::Approx(-3.0));
    CHECK(b.value[0] == doctest::Approx(-4.0));
  }
  SUBCASE("update equals -lr times the clipped gradient exactly") {
    std::mt19937_64 rng(91);
    ParamStore<double> store;
    auto& p = store.add("p", random_tensor(rng, {7}));
    p.grad = random_tensor(rng, {7}, 3.0);
    auto before = p.value;
    auto grad = p.grad;
    const double norm = store.grad_norm();
    const double clip = norm / 2.0;
    sgd_step(store, 0.05, clip);
    const double step = 0.05 * (clip / norm);
    for (std::size_t i = 0; i < 7; ++i) CHECK(p.value[i] == before[i] - step * grad[i]);
  }
}

TEST_CASE("sgd_step rejects a non-positive learning rate") {
  ParamStore<double> store;
  store.add("p", Tensor<double>({1}));
  CHECK_THROWS_AS(sgd_step(store, 0.0), InvalidConfig);
}

TEST_CASE("extended-precision differences resolve a gradient that double round-off hides") {
  // With a single row the weight gradient of weighted_mean is exactly zero;
  // double central differences return round-off of order 1e-12 instead.
  auto rows = Tensor<double>({1, 3}, {0.3, -0.7, 0.9});
  auto weights = Tensor<double>({1}, {0.37});
  auto fn = [](auto& tape, const auto& x) {
    using R = std::decay_t<decltype(x[0].item())>;
    auto w = tape.constant(Tensor<R>({3}, {R(1.1), R(-0.4), R(2.3)}));
    return dot(weighted_mean(x[0], x[1]), w);
  };
  auto coarse = finite_difference_check(fn, {rows, weights}, kEps);
  auto fine = finite_difference_check<long double>(fn, {rows, weights}, kEps);
  CHECK(fine.max_rel_error < 1e-8);
  CHECK(fine.max_rel_error <= coarse.max_rel_error);
}
