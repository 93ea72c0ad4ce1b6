#ifndef KEYVEC_EVAL_CLUSTERING_HPP
#define KEYVEC_EVAL_CLUSTERING_HPP

#include <cstddef>
#include <cstdint>
#include <span>
#include <string>
#include <vector>

namespace keyvec::eval {

struct KMeansOptions {
  std::size_t k = 8;
  std::uint64_t seed = 1;
  std::size_t max_iters = 100;
  std::size_t restarts = 10;
  /// Scale every point to unit L2 norm before clustering.
  bool l2_normalize = false;
  /// Worker threads for restarts; the result does not depend on this.
  std::size_t threads = 1;
};

struct Clustering {
  std::size_t k = 0;
  /// Cluster id per point, each < k.
  std::vector<int> assignment;
  std::vector<std::vector<double>> centroids;
  double wcss = 0.0;

  std::vector<std::size_t> cluster_sizes() const;
};

/// Lloyd's algorithm with k-means++ seeding, best of `restarts` runs by
/// within-cluster sum of squares (ties to the earlier restart). Empty clusters
/// are re-seeded with the point farthest from its centroid.
/// Throws TooFewPoints when k exceeds the number of points.
Clustering kmeans(const std::vector<std::vector<double>>& points, const KMeansOptions& opts);

/// Contingency counts between two labelings of the same points; rows index
/// predicted clusters and columns true classes, both relabeled densely.
struct Contingency {
  std::vector<std::vector<std::size_t>> counts;
  std::vector<std::size_t> row_sums;
  std::vector<std::size_t> col_sums;
  std::size_t n = 0;

  static Contingency build(std::span<const int> pred, std::span<const int> truth);
};

/// Pair-counting F1 over same-cluster decisions. Precision is 1 when no pair
/// is predicted together, recall is 1 when no pair is truly together.
double pairwise_f1(std::span<const int> pred, std::span<const int> truth);
/// Class-size weighted mean over classes of the best F1 against any cluster.
double best_match_f1(std::span<const int> pred, std::span<const int> truth);

struct VMeasure {
  double homogeneity = 1.0;
  double completeness = 1.0;
  double v_measure = 1.0;
};
VMeasure v_measure(std::span<const int> pred, std::span<const int> truth);

/// Hubert-Arabie adjusted Rand index; 1 when both partitions are trivially
/// identical (the expected and maximal indices coincide).
double adjusted_rand_index(std::span<const int> pred, std::span<const int> truth);

/// Maps arbitrary string labels to dense ids in order of first appearance.
std::vector<int> encode_labels(std::span<const std::string> labels);

}  // namespace keyvec::eval

#endif  // KEYVEC_EVAL_CLUSTERING_HPP
