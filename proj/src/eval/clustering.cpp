#include "keyvec/eval/clustering.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <unordered_map>

#include "keyvec/error.hpp"

namespace keyvec::eval {

namespace {

double choose2(std::size_t n) { return 0.5 * static_cast<double>(n) * static_cast<double>(n > 0 ? n - 1 : 0); }

std::vector<std::size_t> densify(std::span<const int> labels, std::size_t& count) {
  std::map<int, std::size_t> ids;
  for (int l : labels) ids.emplace(l, 0);
  std::size_t next = 0;
  for (auto& [_, id] : ids) id = next++;
  count = next;
  std::vector<std::size_t> out(labels.size());
  for (std::size_t i = 0; i < labels.size(); ++i) out[i] = ids[labels[i]];
  return out;
}

double entropy(const std::vector<std::size_t>& sums, double n) {
  double h = 0.0;
  for (std::size_t s : sums) {
    if (s == 0) continue;
    const double p = static_cast<double>(s) / n;
    h -= p * std::log(p);
  }
  return h;
}

}  // namespace

std::vector<std::size_t> Clustering::cluster_sizes() const {
  std::vector<std::size_t> sizes(k, 0);
  for (int c : assignment) ++sizes[static_cast<std::size_t>(c)];
  return sizes;
}

Contingency Contingency::build(std::span<const int> pred, std::span<const int> truth) {
  if (pred.size() != truth.size()) {
    throw LabelMismatch("prediction covers " + std::to_string(pred.size()) + " points, truth " +
                        std::to_string(truth.size()));
  }
  std::size_t rows = 0, cols = 0;
  auto p = densify(pred, rows);
  auto t = densify(truth, cols);
  Contingency c;
  c.n = pred.size();
  c.counts.assign(rows, std::vector<std::size_t>(cols, 0));
  c.row_sums.assign(rows, 0);
  c.col_sums.assign(cols, 0);
  for (std::size_t i = 0; i < c.n; ++i) {
    ++c.counts[p[i]][t[i]];
    ++c.row_sums[p[i]];
    ++c.col_sums[t[i]];
  }
  return c;
}

double pairwise_f1(std::span<const int> pred, std::span<const int> truth) {
  auto c = Contingency::build(pred, truth);
  double together_both = 0.0, together_pred = 0.0, together_true = 0.0;
  for (const auto& row : c.counts) {
    for (std::size_t v : row) together_both += choose2(v);
  }
  for (std::size_t s : c.row_sums) together_pred += choose2(s);
  for (std::size_t s : c.col_sums) together_true += choose2(s);
  const double precision = together_pred == 0.0 ? 1.0 : together_both / together_pred;
  const double recall = together_true == 0.0 ? 1.0 : together_both / together_true;
  return precision + recall == 0.0 ? 0.0 : 2.0 * precision * recall / (precision + recall);
}

double best_match_f1(std::span<const int> pred, std::span<const int> truth) {
  auto c = Contingency::build(pred, truth);
  if (c.n == 0) return 1.0;
  double total = 0.0;
  for (std::size_t j = 0; j < c.col_sums.size(); ++j) {
    double best = 0.0;
    for (std::size_t i = 0; i < c.row_sums.size(); ++i) {
      const double overlap = static_cast<double>(c.counts[i][j]);
      if (overlap == 0.0) continue;
      const double p = overlap / static_cast<double>(c.row_sums[i]);
      const double r = overlap / static_cast<double>(c.col_sums[j]);
      best = std::max(best, 2.0 * p * r / (p + r));
    }
    total += static_cast<double>(c.col_sums[j]) * best;
  }
  return total / static_cast<double>(c.n);
}

VMeasure v_measure(std::span<const int> pred, std::span<const int> truth) {
  auto c = Contingency::build(pred, truth);
  VMeasure v;
  if (c.n == 0) return v;
  const double n = static_cast<double>(c.n);
  const double h_class = entropy(c.col_sums, n);
  const double h_cluster = entropy(c.row_sums, n);
  double h_class_given_cluster = 0.0, h_cluster_given_class = 0.0;
  for (std::size_t i = 0; i < c.row_sums.size(); ++i) {
    for (std::size_t j = 0; j < c.col_sums.size(); ++j) {
      const double nij = static_cast<double>(c.counts[i][j]);
      if (nij == 0.0) continue;
      h_class_given_cluster -= nij / n * std::log(nij / static_cast<double>(c.row_sums[i]));
      h_cluster_given_class -= nij / n * std::log(nij / static_cast<double>(c.col_sums[j]));
    }
  }
  v.homogeneity = h_class == 0.0 ? 1.0 : 1.0 - h_class_given_cluster / h_class;
  v.completeness = h_cluster == 0.0 ? 1.0 : 1.0 - h_cluster_given_class / h_cluster;
  const double s = v.homogeneity + v.completeness;
  v.v_measure = s == 0.0 ? 0.0 : 2.0 * v.homogeneity * v.completeness / s;
  return v;
}

double adjusted_rand_index(std::span<const int> pred, std::span<const int> truth) {
  auto c = Contingency::build(pred, truth);
  double index = 0.0, sum_rows = 0.0, sum_cols = 0.0;
  for (const auto& row : c.counts) {
    for (std::size_t v : row) index += choose2(v);
  }
  for (std::size_t s : c.row_sums) sum_rows += choose2(s);
  for (std::size_t s : c.col_sums) sum_cols += choose2(s);
  const double total = choose2(c.n);
  const double expected = total == 0.0 ? 0.0 : sum_rows * sum_cols / total;
  const double max_index = 0.5 * (sum_rows + sum_cols);
  if (max_index == expected) return 1.0;
  return (index - expected) / (max_index - expected);
}

std::vector<int> encode_labels(std::span<const std::string> labels) {
  std::unordered_map<std::string, int> ids;
  std::vector<int> out;
  out.reserve(labels.size());
  for (const auto& l : labels) {
    auto [it, _] = ids.emplace(l, static_cast<int>(ids.size()));
    out.push_back(it->second);
  }
  return out;
}

}  // namespace keyvec::eval
