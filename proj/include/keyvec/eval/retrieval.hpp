#ifndef KEYVEC_EVAL_RETRIEVAL_HPP
#define KEYVEC_EVAL_RETRIEVAL_HPP

#include <cstddef>
#include <map>
#include <set>
#include <span>
#include <string>
#include <utility>
#include <vector>

namespace keyvec::eval {

/// a.b / (|a| |b|), or 0 when either norm is 0. Throws DimMismatch.
double cosine(std::span<const double> a, std::span<const double> b);

struct ScoredDoc {
  std::string doc_id;
  double score = 0.0;
};

/// Retrieval result for one query: scores non-increasing, ids unique.
struct RankedList {
  std::string query_id;
  std::vector<ScoredDoc> results;
};

using EmbeddingIndex = std::map<std::string, std::vector<double>>;
/// query id -> ids of relevant documents.
using Qrels = std::map<std::string, std::set<std::string>>;

/// Top-k documents by cosine similarity, ties to the smaller doc id.
/// Throws EmptyIndex.
RankedList retrieve(const std::string& query_id, std::span<const double> query, const EmbeddingIndex& index,
                    std::size_t k);

/// |top-k ∩ relevant| / k; the denominator stays k for short lists.
double precision_at_k(const RankedList& run, const std::set<std::string>& relevant, std::size_t k);
/// Mean precision at the ranks of relevant hits, divided by the total number
/// of relevant documents (unretrieved ones contribute 0).
double average_precision(const RankedList& run, const std::set<std::string>& relevant);
/// 1 / rank of the first relevant hit, 0 if none was retrieved.
double reciprocal_rank(const RankedList& run, const std::set<std::string>& relevant);

// Means over runs; every run's query must have at least one relevant document
// in qrels (QueryWithoutRelevants otherwise).
double mean_precision_at_k(std::span<const RankedList> runs, const Qrels& qrels, std::size_t k);
double mean_average_precision(std::span<const RankedList> runs, const Qrels& qrels);
double mean_reciprocal_rank(std::span<const RankedList> runs, const Qrels& qrels);

struct RetrievalMetrics {
  std::size_t k = 10;
  std::size_t num_queries = 0;
  double precision_at_k = 0.0;
  double map = 0.0;
  double mrr = 0.0;
};

RetrievalMetrics evaluate_runs(std::span<const RankedList> runs, const Qrels& qrels, std::size_t k);

// Text formats.
/// `query_id<TAB>doc_id<TAB>relevance` with relevance 0 or 1; zeros are dropped.
Qrels read_qrels(const std::string& path);
void write_qrels(const std::string& path, const Qrels& qrels);
/// `query_id<TAB>doc_id<TAB>rank<TAB>score`, ranks starting at 1.
std::vector<RankedList> read_run(const std::string& path);
void write_run(const std::string& path, std::span<const RankedList> runs);

}  // namespace keyvec::eval

#endif  // KEYVEC_EVAL_RETRIEVAL_HPP
