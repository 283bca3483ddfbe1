#pragma once

#include <cstddef>
#include <span>
#include <string>
#include <vector>

#include "ntssl/data_model.hpp"
#include "ntssl/encoder.hpp"
#include "ntssl/tensor.hpp"

namespace ntssl {

struct RetrievalMetrics {
  double map = 0.0;
  double hr1 = 0.0;
  double hr5 = 0.0;
  std::size_t queries = 0;
};

struct ReidMetrics {
  double auroc = 0.0;
  double aupr = 0.0;
  std::size_t positives = 0;
  std::size_t negatives = 0;
};

/// Mean of precision@rank over relevant items, ranking by descending score.
/// Equal scores keep their input order. Returns 0 when nothing is relevant.
double average_precision(std::span<const double> scores, std::span<const char> relevant);

/// Probability that a random positive outscores a random negative, ties 1/2.
double auroc(std::span<const double> scores, std::span<const char> positive);

/// Pairwise cosine similarity of the rows of `embs` (N x N).
Tensor cosine_matrix(const Tensor& embs);

/// Each row queries all other rows; queries without a same-identity item
/// elsewhere are skipped. Throws UsageError when no query is valid.
RetrievalMetrics retrieval_eval(const Tensor& embs, std::span<const std::string> identities);

/// Same/different-identity classification over all unordered pairs.
ReidMetrics reid_eval(const Tensor& embs, std::span<const std::string> identities);

RetrievalMetrics retrieval_eval(const EmbeddingSet& embs, const TrackletDataset& dataset);
ReidMetrics reid_eval(const EmbeddingSet& embs, const TrackletDataset& dataset);

/// polyp_id of every tracklet; throws UsageError if any is missing.
std::vector<std::string> identities_of(const TrackletDataset& dataset);

}  // namespace ntssl
