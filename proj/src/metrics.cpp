#include "ntssl/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "ntssl/error.hpp"
#include "ntssl/parallel.hpp"
#include "ntssl/simd/kernels.hpp"

namespace ntssl {

namespace {

std::vector<std::size_t> descending_order(std::span<const double> scores) {
  std::vector<std::size_t> idx(scores.size());
  std::iota(idx.begin(), idx.end(), std::size_t{0});
  std::stable_sort(idx.begin(), idx.end(), [&](std::size_t a, std::size_t b) { return scores[a] > scores[b]; });
  return idx;
}

}  // namespace

double average_precision(std::span<const double> scores, std::span<const char> relevant) {
  if (scores.size() != relevant.size()) throw UsageError("average_precision: size mismatch");
  double sum = 0.0;
  std::size_t hits = 0;
  const auto order = descending_order(scores);
  for (std::size_t r = 0; r < order.size(); ++r) {
    if (relevant[order[r]]) {
      ++hits;
      sum += static_cast<double>(hits) / static_cast<double>(r + 1);
    }
  }
  return hits == 0 ? 0.0 : sum / static_cast<double>(hits);
}

double auroc(std::span<const double> scores, std::span<const char> positive) {
  if (scores.size() != positive.size()) throw UsageError("auroc: size mismatch");
  std::vector<std::size_t> idx(scores.size());
  std::iota(idx.begin(), idx.end(), std::size_t{0});
  std::sort(idx.begin(), idx.end(), [&](std::size_t a, std::size_t b) { return scores[a] < scores[b]; });
  // Mann-Whitney U with mid-ranks for tied groups.
  double rank_sum = 0.0;
  std::size_t P = 0;
  for (std::size_t i = 0; i < idx.size();) {
    std::size_t j = i;
    while (j < idx.size() && scores[idx[j]] == scores[idx[i]]) ++j;
    const double mid = 0.5 * static_cast<double>(i + 1 + j);  // mean of ranks i+1..j
    for (std::size_t k = i; k < j; ++k) {
      if (positive[idx[k]]) {
        rank_sum += mid;
        ++P;
      }
    }
    i = j;
  }
  const std::size_t N = scores.size() - P;
  if (P == 0 || N == 0) throw UsageError("auroc: need at least one positive and one negative");
  const double U = rank_sum - 0.5 * static_cast<double>(P) * static_cast<double>(P + 1);
  return U / (static_cast<double>(P) * static_cast<double>(N));
}

Tensor cosine_matrix(const Tensor& embs) {
  const std::size_t n = embs.rows(), d = embs.cols();
  const auto& k = simd::active();
  Tensor unit = embs;
  for (std::size_t r = 0; r < n; ++r) {
    const double nr = std::sqrt(k.dot(unit.data() + r * d, unit.data() + r * d, d));
    if (!(nr > 0.0)) throw NumericError("cosine: zero-norm embedding at row " + std::to_string(r));
    for (std::size_t c = 0; c < d; ++c) unit(r, c) /= nr;
  }
  Tensor out = Tensor::matrix(n, n);
  k.gemm_nt(n, n, d, unit.data(), unit.data(), out.data());
  return out;
}

RetrievalMetrics retrieval_eval(const Tensor& embs, std::span<const std::string> ids) {
  const std::size_t n = embs.rows();
  if (ids.size() != n) throw UsageError("retrieval_eval: identity count mismatch");
  const Tensor sim = cosine_matrix(embs);
  std::vector<double> ap(n, -1.0), hit1(n, 0.0), hit5(n, 0.0);
  parallel_for(n, [&](std::size_t q) {
    std::vector<double> scores;
    std::vector<char> rel;
    scores.reserve(n - 1);
    rel.reserve(n - 1);
    for (std::size_t j = 0; j < n; ++j) {
      if (j == q) continue;
      scores.push_back(sim(q, j));
      rel.push_back(ids[j] == ids[q] ? 1 : 0);
    }
    if (std::find(rel.begin(), rel.end(), 1) == rel.end()) return;
    ap[q] = average_precision(scores, rel);
    const auto order = descending_order(scores);
    for (std::size_t r = 0; r < std::min<std::size_t>(5, order.size()); ++r) {
      if (rel[order[r]]) {
        hit5[q] = 1.0;
        if (r == 0) hit1[q] = 1.0;
        break;
      }
    }
  });
  RetrievalMetrics m;
  for (std::size_t q = 0; q < n; ++q) {
    if (ap[q] < 0.0) continue;
    ++m.queries;
    m.map += ap[q];
    m.hr1 += hit1[q];
    m.hr5 += hit5[q];
  }
  if (m.queries == 0) throw UsageError("retrieval_eval: no valid queries");
  const double nq = static_cast<double>(m.queries);
  m.map /= nq;
  m.hr1 /= nq;
  m.hr5 /= nq;
  return m;
}

ReidMetrics reid_eval(const Tensor& embs, std::span<const std::string> ids) {
  const std::size_t n = embs.rows();
  if (ids.size() != n) throw UsageError("reid_eval: identity count mismatch");
  const Tensor sim = cosine_matrix(embs);
  std::vector<double> scores;
  std::vector<char> labels;
  scores.reserve(n * (n - 1) / 2);
  labels.reserve(n * (n - 1) / 2);
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = i + 1; j < n; ++j) {
      scores.push_back(sim(i, j));
      labels.push_back(ids[i] == ids[j] ? 1 : 0);
    }
  ReidMetrics m;
  m.positives = static_cast<std::size_t>(std::count(labels.begin(), labels.end(), 1));
  m.negatives = labels.size() - m.positives;
  if (m.positives == 0 || m.negatives == 0) throw UsageError("reid_eval: degenerate label set");
  m.auroc = auroc(scores, labels);
  m.aupr = average_precision(scores, labels);
  return m;
}

std::vector<std::string> identities_of(const TrackletDataset& dataset) {
  std::vector<std::string> ids(dataset.size());
  for (std::size_t i = 0; i < dataset.size(); ++i) {
    const auto& p = dataset.labels(i).polyp_id;
    if (!p) throw UsageError("evaluation needs polyp_id on every tracklet; missing on '" + dataset.id(i) + "'");
    ids[i] = *p;
  }
  return ids;
}

RetrievalMetrics retrieval_eval(const EmbeddingSet& embs, const TrackletDataset& dataset) {
  if (embs.size() != dataset.size()) throw MismatchError("retrieval_eval: embedding count != dataset size");
  return retrieval_eval(embs.tracklet_emb, identities_of(dataset));
}

ReidMetrics reid_eval(const EmbeddingSet& embs, const TrackletDataset& dataset) {
  if (embs.size() != dataset.size()) throw MismatchError("reid_eval: embedding count != dataset size");
  return reid_eval(embs.tracklet_emb, identities_of(dataset));
}

}  // namespace ntssl
