#pragma once

#include <cstddef>
#include <cstdint>
#include <string>

#include "ntssl/autodiff.hpp"
#include "ntssl/rng.hpp"
#include "ntssl/tensor.hpp"

namespace ntssl {

/// Desk-scale defaults; the full-size setting is d_model 256, 3 layers,
/// 8 heads, d_ff 1024, dropout 0.1, head 256 -> 128.
struct EncoderConfig {
  std::size_t d_in = 32;
  std::size_t d_model = 32;
  std::size_t num_layers = 1;
  std::size_t num_heads = 4;
  std::size_t d_ff = 64;
  double dropout = 0.0;
  std::size_t proj_hidden = 32;
  std::size_t proj_out = 16;
  std::size_t L = 8;

  void validate() const;
  friend bool operator==(const EncoderConfig&, const EncoderConfig&) = default;
};

enum class Mode { train, eval };

/// Frozen embeddings of a dataset in the projected space.
struct EmbeddingSet {
  Tensor tracklet_emb;  // N x d
  Tensor frame_embs;    // N x L x d

  std::size_t size() const noexcept { return tracklet_emb.rows(); }
};

/// Fan-in scaled uniform weights, zero biases, unit layer-norm gains, and
/// N(0, 0.02^2) token / positional embeddings. Deterministic per seed.
ad::ParamStore init_params(const EncoderConfig& cfg, std::uint64_t seed);

struct EncodedBatch {
  ad::Var tracklet_hidden;  // B x d_model (learned-token output)
  ad::Var frame_hidden;     // B*L x d_model, tracklet-major
};

/// Encodes B tracklets stacked as a (B*L x d_in) matrix. dropout_rng is
/// consulted only in train mode with dropout > 0.
EncodedBatch encode_batch(ad::Tape& tape, ad::ParamStore& params, const EncoderConfig& cfg, const Tensor& frames,
                          std::size_t batch, Mode mode, Rng* dropout_rng = nullptr);

/// Shared MLP head: linear -> ReLU -> linear, row-wise over d_model.
ad::Var project(ad::Tape& tape, ad::ParamStore& params, const EncoderConfig& cfg, ad::Var hidden);

struct Encoding {
  Tensor tracklet_hidden;  // d_model
  Tensor frame_hidden;     // L x d_model
};

/// Eval-mode convenience for a single L x d_in tracklet.
Encoding encode(const Tensor& frames, ad::ParamStore& params, const EncoderConfig& cfg);
/// Eval-mode projection of a vector (d_model) or matrix (n x d_model).
Tensor project(const Tensor& hidden, ad::ParamStore& params, const EncoderConfig& cfg);

}  // namespace ntssl
