#pragma once

#include <cstddef>
#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "ntssl/data_model.hpp"
#include "ntssl/encoder.hpp"
#include "ntssl/tensor.hpp"

namespace ntssl {

/// Non-linear probe: linear -> GELU -> dropout -> linear, AdamW, fixed
/// epoch budget, no early stopping.
struct ProbeConfig {
  std::size_t hidden = 256;
  double dropout = 0.1;
  std::size_t epochs = 20;
  double lr_size = 1e-4;
  double lr_histology = 1e-5;
  double weight_decay = 1e-2;
  std::size_t batch_size = 64;
  double train_fraction = 0.7;
  std::uint64_t split_seed = 0;

  void validate() const;
  double lr_for(const std::string& attribute) const;
};

struct ProbeResult {
  std::string attribute;
  std::string metric;  // "f1_identity_weighted" or "accuracy"
  double value = 0.0;
  std::size_t train_tracklets = 0;
  std::size_t test_tracklets = 0;
  std::size_t split_attempt = 0;
};

struct IdentitySplit {
  std::vector<std::size_t> train;  // row indices
  std::vector<std::size_t> test;
  std::size_t attempt = 0;
};

/// Splits identities (not rows) train/test. Reshuffles with the next seed
/// until both classes appear on both sides; UsageError after 10 attempts.
IdentitySplit split_by_identity(std::span<const std::string> ids, std::span<const int> labels, double train_fraction,
                                std::uint64_t seed);

/// 1 / (rows sharing the identity), so every identity sums to weight 1.
std::vector<double> identity_weights(std::span<const std::string> ids);
double weighted_accuracy(std::span<const int> truth, std::span<const int> pred, std::span<const double> weights);
double accuracy(std::span<const int> truth, std::span<const int> pred);
/// Per-class F1 from identity-weighted confusion counts, averaged over the
/// two classes.
double identity_weighted_macro_f1(std::span<const int> truth, std::span<const int> pred,
                                  std::span<const std::string> ids);

/// Trains the probe on `train` rows and predicts the `test` rows.
std::vector<int> fit_predict_probe(const Tensor& features, std::span<const int> labels,
                                   std::span<const std::size_t> train, std::span<const std::size_t> test,
                                   const ProbeConfig& cfg, double lr);

/// size_class reports identity-weighted macro F1; histology_class accuracy.
ProbeResult probe_eval(const Tensor& embs, const TrackletDataset& dataset, const std::string& attribute,
                       const ProbeConfig& cfg);
ProbeResult probe_eval(const EmbeddingSet& embs, const TrackletDataset& dataset, const std::string& attribute,
                       const ProbeConfig& cfg);

}  // namespace ntssl
