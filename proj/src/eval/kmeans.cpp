#include <algorithm>
#include <cmath>
#include <limits>
#include <random>
#include <thread>

#include "keyvec/error.hpp"
#include "keyvec/eval/clustering.hpp"

namespace keyvec::eval {

namespace {

using Points = std::vector<std::vector<double>>;

double sq_dist(const std::vector<double>& a, const std::vector<double>& b) {
  double s = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    const double d = a[i] - b[i];
    s += d * d;
  }
  return s;
}

std::size_t nearest(const std::vector<double>& p, const Points& centroids, double& best) {
  std::size_t arg = 0;
  best = std::numeric_limits<double>::infinity();
  for (std::size_t c = 0; c < centroids.size(); ++c) {
    const double d = sq_dist(p, centroids[c]);
    if (d < best) {
      best = d;
      arg = c;
    }
  }
  return arg;
}

Points plus_plus_seeds(const Points& points, std::size_t k, std::mt19937_64& rng) {
  Points centroids;
  centroids.push_back(points[std::uniform_int_distribution<std::size_t>(0, points.size() - 1)(rng)]);
  std::vector<double> d2(points.size());
  while (centroids.size() < k) {
    double total = 0.0;
    for (std::size_t i = 0; i < points.size(); ++i) {
      nearest(points[i], centroids, d2[i]);
      total += d2[i];
    }
    std::size_t pick = 0;
    if (total > 0.0) {
      double r = std::uniform_real_distribution<double>(0.0, total)(rng);
      for (pick = 0; pick + 1 < points.size(); ++pick) {
        r -= d2[pick];
        if (r < 0.0) break;
      }
    } else {
      // every point coincides with a centroid
      pick = std::uniform_int_distribution<std::size_t>(0, points.size() - 1)(rng);
    }
    centroids.push_back(points[pick]);
  }
  return centroids;
}

Clustering lloyd(const Points& points, std::size_t k, std::size_t max_iters, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  const std::size_t n = points.size();
  const std::size_t dim = points[0].size();
  Clustering result;
  result.k = k;
  result.centroids = plus_plus_seeds(points, k, rng);
  result.assignment.assign(n, -1);
  std::vector<double> dist(n);
  for (std::size_t iter = 0; iter < max_iters; ++iter) {
    bool changed = false;
    for (std::size_t i = 0; i < n; ++i) {
      const int c = static_cast<int>(nearest(points[i], result.centroids, dist[i]));
      if (c != result.assignment[i]) {
        result.assignment[i] = c;
        changed = true;
      }
    }
    if (!changed && iter > 0) break;
    Points sums(k, std::vector<double>(dim, 0.0));
    std::vector<std::size_t> counts(k, 0);
    for (std::size_t i = 0; i < n; ++i) {
      const auto c = static_cast<std::size_t>(result.assignment[i]);
      ++counts[c];
      for (std::size_t j = 0; j < dim; ++j) sums[c][j] += points[i][j];
    }
    std::vector<bool> taken(n, false);
    for (std::size_t c = 0; c < k; ++c) {
      if (counts[c] > 0) {
        for (std::size_t j = 0; j < dim; ++j) result.centroids[c][j] = sums[c][j] / static_cast<double>(counts[c]);
        continue;
      }
      // empty cluster: move it onto the point farthest from its centroid
      std::size_t far = 0;
      double far_d = -1.0;
      for (std::size_t i = 0; i < n; ++i) {
        if (!taken[i] && dist[i] > far_d) {
          far_d = dist[i];
          far = i;
        }
      }
      taken[far] = true;
      dist[far] = 0.0;
      result.centroids[c] = points[far];
    }
  }
  result.wcss = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    result.assignment[i] = static_cast<int>(nearest(points[i], result.centroids, dist[i]));
    result.wcss += dist[i];
  }
  return result;
}

}  // namespace

Clustering kmeans(const Points& input, const KMeansOptions& opts) {
  if (opts.k < 1) throw InvalidConfig("k must be >= 1");
  if (input.size() < opts.k) {
    throw TooFewPoints("k-means with k=" + std::to_string(opts.k) + " on " + std::to_string(input.size()) + " points");
  }
  const std::size_t dim = input[0].size();
  for (const auto& p : input) {
    if (p.size() != dim) throw DimMismatch("k-means points differ in dimension");
  }
  Points points = input;
  if (opts.l2_normalize) {
    for (auto& p : points) {
      double norm = 0.0;
      for (double v : p) norm += v * v;
      norm = std::sqrt(norm);
      if (norm > 0.0) {
        for (double& v : p) v /= norm;
      }
    }
  }
  const std::size_t restarts = std::max<std::size_t>(1, opts.restarts);
  std::vector<Clustering> runs(restarts);
  auto work = [&](std::size_t begin, std::size_t step) {
    for (std::size_t r = begin; r < restarts; r += step) runs[r] = lloyd(points, opts.k, opts.max_iters, opts.seed + r);
  };
  const std::size_t threads = std::clamp<std::size_t>(opts.threads, 1, restarts);
  if (threads == 1) {
    work(0, 1);
  } else {
    std::vector<std::thread> pool;
    for (std::size_t t = 0; t < threads; ++t) pool.emplace_back(work, t, threads);
    for (auto& th : pool) th.join();
  }
  std::size_t best = 0;
  for (std::size_t r = 1; r < restarts; ++r) {
    if (runs[r].wcss < runs[best].wcss) best = r;
  }
  return std::move(runs[best]);
}

}  // namespace keyvec::eval
