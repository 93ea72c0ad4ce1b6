#include "doctest.h"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <numeric>
#include <random>
#include <set>

#include "keyvec/error.hpp"
#include "keyvec/eval/clustering.hpp"
#include "keyvec/eval/retrieval.hpp"
#include "support/metric_oracles.hpp"
#include "support/temp_dir.hpp"

using namespace keyvec;
using namespace keyvec::eval;
using keyvec::testing::random_partition;

namespace {

using Vec = std::vector<double>;

RankedList ranked(std::vector<std::string> ids) {
  RankedList r{"q", {}};
  double s = 1.0;
  for (auto& id : ids) r.results.push_back({std::move(id), s -= 0.1});
  return r;
}

}  // namespace

TEST_CASE("cosine closed forms") {
  const Vec a{1, 0}, b{1, 1}, c{0, 3}, z{0, 0};
  CHECK(cosine(b, b) == doctest::Approx(1.0).epsilon(1e-15));
  CHECK(cosine(a, c) == 0.0);
  CHECK(cosine(a, b) == doctest::Approx(1.0 / std::sqrt(2.0)).epsilon(1e-15));
  CHECK(cosine(a, z) == 0.0);
  CHECK(cosine(a, Vec{-2, 0}) == -1.0);
  CHECK_THROWS_AS(cosine(a, Vec{1, 2, 3}), DimMismatch);
}

TEST_CASE("retrieve ranks by cosine with id tie-break") {
  EmbeddingIndex index{{"b", {1, 0}}, {"a", {2, 0}}, {"c", {0, 1}}, {"d", {1, 1}}};
  auto run = retrieve("q", Vec{1, 0}, index, 10);
  REQUIRE(run.results.size() == 4);
  CHECK(run.results[0].doc_id == "a");
  CHECK(run.results[1].doc_id == "b");
  CHECK(run.results[2].doc_id == "d");
  CHECK(run.results[3].doc_id == "c");
  CHECK(retrieve("q", Vec{0, 1}, index, 1).results[0].doc_id == "c");
  CHECK(retrieve("q", Vec{1, 0}, index, 2).results.size() == 2);
  CHECK_THROWS_AS(retrieve("q", Vec{1, 0}, EmbeddingIndex{}, 3), EmptyIndex);
  CHECK_THROWS_AS(retrieve("q", Vec{1, 0, 0}, index, 3), DimMismatch);
}

TEST_CASE("retrieve output is sorted, unique and self-first on random indexes") {
  std::mt19937_64 rng(1);
  std::normal_distribution<double> g;
  for (int trial = 0; trial < 50; ++trial) {
    EmbeddingIndex index;
    const auto n = std::uniform_int_distribution<int>(1, 40)(rng);
    for (int i = 0; i < n; ++i) {
      Vec v(5);
      for (auto& x : v) x = g(rng);
      index["d" + std::to_string(i)] = v;
    }
    const std::string self = "d" + std::to_string(std::uniform_int_distribution<int>(0, n - 1)(rng));
    auto run = retrieve("q", index.at(self), index, 15);
    CHECK(run.results.size() == std::min<std::size_t>(15, index.size()));
    CHECK(run.results[0].doc_id == self);
    std::set<std::string> seen;
    for (std::size_t i = 0; i < run.results.size(); ++i) {
      CHECK(seen.insert(run.results[i].doc_id).second);
      if (i) CHECK(run.results[i - 1].score >= run.results[i].score);
    }
  }
}

TEST_CASE("per-query retrieval metrics") {
  const std::set<std::string> rel{"r1", "r2", "r3"};
  auto run = ranked({"r1", "x", "r2", "y", "x2", "x3", "x4", "x5", "x6", "r3", "r4"});
  CHECK(precision_at_k(run, rel, 10) == doctest::Approx(0.3));
  CHECK(precision_at_k(ranked({"a", "b"}), rel, 10) == 0.0);
  CHECK(precision_at_k(ranked({"r1"}), rel, 10) == doctest::Approx(0.1));

  auto two = ranked({"r1", "x", "r2"});
  CHECK(average_precision(two, {"r1", "r2"}) == doctest::Approx((1.0 + 2.0 / 3.0) / 2.0).epsilon(1e-15));
  CHECK(average_precision(ranked({"r1"}), {"r1", "r2"}) == 0.5);
  CHECK(reciprocal_rank(ranked({"x", "r1"}), {"r1"}) == 0.5);
  CHECK(reciprocal_rank(ranked({"x"}), {"r1"}) == 0.0);
  CHECK_THROWS_AS(average_precision(two, {}), QueryWithoutRelevants);
}

TEST_CASE("perfect runs and missing qrels") {
  std::vector<RankedList> runs{{"q1", {{"a", 0.9}, {"b", 0.8}, {"c", 0.1}}}, {"q2", {{"c", 0.5}, {"a", 0.1}}}};
  Qrels qrels{{"q1", {"a", "b"}}, {"q2", {"c"}}};
  auto m = evaluate_runs(runs, qrels, 10);
  CHECK(m.map == 1.0);
  CHECK(m.mrr == 1.0);
  CHECK(m.num_queries == 2);
  Qrels missing{{"q1", {"a"}}};
  CHECK_THROWS_AS(mean_average_precision(runs, missing), QueryWithoutRelevants);
  CHECK_THROWS_AS(mean_reciprocal_rank(runs, missing), QueryWithoutRelevants);
}

TEST_CASE("retrieval metrics equal the naive scorer on random runs") {
  std::mt19937_64 rng(2);
  for (int trial = 0; trial < 100; ++trial) {
    const auto queries = std::uniform_int_distribution<std::size_t>(1, 20)(rng);
    const auto docs = std::uniform_int_distribution<std::size_t>(1, 50)(rng);
    auto [runs, qrels] = keyvec::testing::random_runs(rng, queries, docs);
    const auto k = std::uniform_int_distribution<std::size_t>(1, 12)(rng);
    auto m = evaluate_runs(runs, qrels, k);
    auto o = keyvec::testing::oracle_retrieval(runs, qrels, k);
    CHECK(m.precision_at_k == o.p_at_k);
    CHECK(m.map == o.map);
    CHECK(m.mrr == o.mrr);
  }
}

TEST_CASE("qrels and run files round trip") {
  keyvec::testing::TempDir dir;
  Qrels qrels{{"q1", {"a", "b"}}, {"q2", {"c"}}};
  write_qrels(dir.file("qrels.tsv"), qrels);
  CHECK(read_qrels(dir.file("qrels.tsv")) == qrels);
  std::vector<RankedList> runs{{"q1", {{"a", 0.1 + 0.2}, {"b", -1e-300}}}, {"q2", {{"c", 1.0}}}};
  write_run(dir.file("run.tsv"), runs);
  auto back = read_run(dir.file("run.tsv"));
  REQUIRE(back.size() == 2);
  CHECK(back[0].query_id == "q1");
  CHECK(back[0].results[0].score == runs[0].results[0].score);
  CHECK(back[0].results[1].score == runs[0].results[1].score);
  CHECK(back[1].results[0].doc_id == "c");
  {
    std::ofstream f(dir.file("bad.tsv"));
    f << "q1\ta\t2\n";
  }
  CHECK_THROWS_AS(read_qrels(dir.file("bad.tsv")), ParseError);
}

TEST_CASE("clustering metrics on identical and degenerate partitions") {
  const std::vector<int> truth{0, 0, 1, 1, 2, 2, 2};
  const std::vector<int> relabeled{5, 5, 3, 3, 9, 9, 9};
  CHECK(pairwise_f1(relabeled, truth) == 1.0);
  CHECK(v_measure(relabeled, truth).v_measure == doctest::Approx(1.0).epsilon(1e-15));
  CHECK(adjusted_rand_index(relabeled, truth) == 1.0);
  CHECK(best_match_f1(relabeled, truth) == 1.0);

  const std::vector<int> giant{0, 0, 0, 0};
  const std::vector<int> halves{0, 0, 1, 1};
  CHECK(adjusted_rand_index(giant, halves) == 0.0);
  CHECK(pairwise_f1(giant, halves) == doctest::Approx(keyvec::testing::oracle_pairwise_f1(giant, halves)));
  CHECK(pairwise_f1(giant, halves) == doctest::Approx(0.5));  // precision 2/6, recall 1
  CHECK(v_measure(giant, halves).homogeneity == 0.0);
  CHECK(v_measure(giant, halves).completeness == 1.0);
  CHECK_THROWS_AS(pairwise_f1(giant, truth), LabelMismatch);
  CHECK_THROWS_AS(adjusted_rand_index(giant, truth), LabelMismatch);
  CHECK_THROWS_AS(v_measure(giant, truth), LabelMismatch);
}

TEST_CASE("clustering metrics match independent oracles on random partitions") {
  std::mt19937_64 rng(3);
  for (int trial = 0; trial < 100; ++trial) {
    const auto n = std::uniform_int_distribution<std::size_t>(1, 200)(rng);
    auto truth = random_partition(rng, n, std::uniform_int_distribution<int>(1, 10)(rng));
    std::vector<int> pred;
    if (trial % 3 == 0) {
      // noisy copy of the truth, to cover high-agreement cases
      pred = truth;
      for (auto& p : pred) {
        if (std::bernoulli_distribution(0.2)(rng)) p = std::uniform_int_distribution<int>(0, 9)(rng);
      }
    } else {
      pred = random_partition(rng, n, std::uniform_int_distribution<int>(1, 12)(rng));
    }
    auto ov = keyvec::testing::oracle_v_measure(pred, truth);
    auto v = v_measure(pred, truth);
    CHECK(std::abs(pairwise_f1(pred, truth) - keyvec::testing::oracle_pairwise_f1(pred, truth)) < 1e-12);
    CHECK(std::abs(adjusted_rand_index(pred, truth) - keyvec::testing::oracle_ari(pred, truth)) < 1e-12);
    CHECK(std::abs(v.homogeneity - ov.homogeneity) < 1e-12);
    CHECK(std::abs(v.completeness - ov.completeness) < 1e-12);
    CHECK(std::abs(v.v_measure - ov.v) < 1e-12);

    // permuting predicted cluster ids changes nothing
    std::vector<int> perm(12);
    std::iota(perm.begin(), perm.end(), 0);
    std::shuffle(perm.begin(), perm.end(), rng);
    std::vector<int> renamed(pred.size());
    for (std::size_t i = 0; i < pred.size(); ++i) renamed[i] = perm[static_cast<std::size_t>(pred[i])] * 7 + 100;
    CHECK(pairwise_f1(renamed, truth) == pairwise_f1(pred, truth));
    CHECK(adjusted_rand_index(renamed, truth) == doctest::Approx(adjusted_rand_index(pred, truth)).epsilon(1e-12));
    CHECK(v_measure(renamed, truth).v_measure == doctest::Approx(v.v_measure).epsilon(1e-12));
  }
}

TEST_CASE("ARI of random partitions concentrates near zero") {
  std::mt19937_64 rng(4);
  const auto truth = random_partition(rng, 20, 4);
  double sum = 0.0;
  for (int trial = 0; trial < 50; ++trial) sum += adjusted_rand_index(random_partition(rng, 20, 4), truth);
  CHECK(std::abs(sum / 50.0) <= 0.1);
}

TEST_CASE("best-match F1 weights classes by size") {
  // class A = {0,1,2}, class B = {3}; one cluster holds {0,1}, the other {2,3}
  const std::vector<int> pred{0, 0, 1, 1}, truth{0, 0, 0, 1};
  // A: best with cluster 0, p=1 r=2/3 -> 0.8; B: cluster 1, p=1/2 r=1 -> 2/3
  CHECK(best_match_f1(pred, truth) == doctest::Approx((3 * 0.8 + 1 * (2.0 / 3.0)) / 4.0).epsilon(1e-15));
}

TEST_CASE("encode_labels assigns ids by first appearance") {
  const std::vector<std::string> labels{"b", "a", "b", "c"};
  CHECK(encode_labels(labels) == std::vector<int>{0, 1, 0, 2});
}

TEST_CASE("k-means finds separated pairs and singletons") {
  std::vector<Vec> pts{{0, 0}, {0.1, 0}, {10, 10}, {10, 10.1}};
  KMeansOptions opts;
  opts.k = 2;
  auto c = kmeans(pts, opts);
  CHECK(c.assignment[0] == c.assignment[1]);
  CHECK(c.assignment[2] == c.assignment[3]);
  CHECK(c.assignment[0] != c.assignment[2]);
  CHECK(c.wcss == doctest::Approx(4 * 0.05 * 0.05));

  opts.k = 4;
  auto singles = kmeans(pts, opts);
  CHECK(singles.wcss == 0.0);
  auto sizes = singles.cluster_sizes();
  CHECK(std::all_of(sizes.begin(), sizes.end(), [](std::size_t s) { return s == 1; }));

  opts.k = 5;
  CHECK_THROWS_AS(kmeans(pts, opts), TooFewPoints);
  opts.k = 2;
  CHECK_THROWS_AS(kmeans({{0, 0}, {1}}, opts), DimMismatch);
}

TEST_CASE("k-means is deterministic and independent of the thread count") {
  std::mt19937_64 rng(5);
  std::normal_distribution<double> g;
  for (int trial = 0; trial < 10; ++trial) {
    std::vector<Vec> pts(60, Vec(4));
    for (auto& p : pts) {
      for (auto& x : p) x = g(rng);
    }
    KMeansOptions opts;
    opts.k = 5;
    opts.seed = 100 + static_cast<std::uint64_t>(trial);
    auto a = kmeans(pts, opts);
    auto b = kmeans(pts, opts);
    opts.threads = 4;
    auto c = kmeans(pts, opts);
    CHECK(a.assignment == b.assignment);
    CHECK(a.assignment == c.assignment);
    CHECK(a.wcss == c.wcss);
    for (int id : a.assignment) {
      CHECK(id >= 0);
      CHECK(id < 5);
    }
    // reported wcss is the within-cluster sum of squares of the final assignment
    double wcss = 0.0;
    for (std::size_t i = 0; i < pts.size(); ++i) {
      const auto& ctr = a.centroids[static_cast<std::size_t>(a.assignment[i])];
      for (std::size_t d = 0; d < 4; ++d) wcss += (pts[i][d] - ctr[d]) * (pts[i][d] - ctr[d]);
    }
    CHECK(a.wcss == doctest::Approx(wcss).epsilon(1e-12));
  }
}

TEST_CASE("k-means optional L2 normalization clusters by direction") {
  std::vector<Vec> pts{{1, 0}, {100, 1}, {0, 1}, {1, 80}};
  KMeansOptions opts;
  opts.k = 2;
  opts.l2_normalize = true;
  auto c = kmeans(pts, opts);
  CHECK(c.assignment[0] == c.assignment[1]);
  CHECK(c.assignment[2] == c.assignment[3]);
  CHECK(c.assignment[0] != c.assignment[2]);
}
