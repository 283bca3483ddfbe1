#include "ntssl/encoder.hpp"

#include <cmath>

#include "ntssl/error.hpp"

namespace ntssl {

void EncoderConfig::validate() const {
  if (d_in < 1 || d_model < 1 || num_layers < 1 || num_heads < 1 || d_ff < 1 || proj_hidden < 1 || proj_out < 1 ||
      L < 1) {
    throw UsageError("encoder: all sizes must be >= 1");
  }
  if (d_model % num_heads != 0) throw UsageError("encoder: d_model must be divisible by num_heads");
  if (!(dropout >= 0.0 && dropout < 1.0)) throw UsageError("encoder: dropout must be in [0,1)");
}

namespace {

std::string layer_key(std::size_t l, const char* leaf) { return "enc.l" + std::to_string(l) + "." + leaf; }

Tensor uniform_weight(Rng& rng, std::size_t fan_in, std::size_t fan_out) {
  const double bound = 1.0 / std::sqrt(static_cast<double>(fan_in));
  Tensor w = Tensor::matrix(fan_in, fan_out);
  for (double& v : w.values()) v = rng.uniform(-bound, bound);
  return w;
}

Tensor small_normal(Rng& rng, std::size_t rows, std::size_t cols) {
  Tensor w = Tensor::matrix(rows, cols);
  for (double& v : w.values()) v = 0.02 * rng.normal();
  return w;
}

}  // namespace

ad::ParamStore init_params(const EncoderConfig& cfg, std::uint64_t seed) {
  cfg.validate();
  Rng rng(mix_seed(seed, 0xe4c0de));
  ad::ParamStore p;
  const std::size_t D = cfg.d_model;
  p.add("enc.in.W", uniform_weight(rng, cfg.d_in, D));
  p.add("enc.in.b", Tensor({D}, 0.0));
  p.add("enc.token", small_normal(rng, 1, D));
  p.add("enc.pos", small_normal(rng, cfg.L, D));
  for (std::size_t l = 0; l < cfg.num_layers; ++l) {
    p.add(layer_key(l, "ln1.g"), Tensor({D}, 1.0));
    p.add(layer_key(l, "ln1.b"), Tensor({D}, 0.0));
    p.add(layer_key(l, "attn.Wqkv"), uniform_weight(rng, D, 3 * D));
    p.add(layer_key(l, "attn.bqkv"), Tensor({3 * D}, 0.0));
    p.add(layer_key(l, "attn.Wo"), uniform_weight(rng, D, D));
    p.add(layer_key(l, "attn.bo"), Tensor({D}, 0.0));
    p.add(layer_key(l, "ln2.g"), Tensor({D}, 1.0));
    p.add(layer_key(l, "ln2.b"), Tensor({D}, 0.0));
    p.add(layer_key(l, "ff.W1"), uniform_weight(rng, D, cfg.d_ff));
    p.add(layer_key(l, "ff.b1"), Tensor({cfg.d_ff}, 0.0));
    p.add(layer_key(l, "ff.W2"), uniform_weight(rng, cfg.d_ff, D));
    p.add(layer_key(l, "ff.b2"), Tensor({D}, 0.0));
  }
  p.add("enc.ln_f.g", Tensor({D}, 1.0));
  p.add("enc.ln_f.b", Tensor({D}, 0.0));
  p.add("head.W1", uniform_weight(rng, D, cfg.proj_hidden));
  p.add("head.b1", Tensor({cfg.proj_hidden}, 0.0));
  p.add("head.W2", uniform_weight(rng, cfg.proj_hidden, cfg.proj_out));
  p.add("head.b2", Tensor({cfg.proj_out}, 0.0));
  return p;
}

EncodedBatch encode_batch(ad::Tape& tape, ad::ParamStore& params, const EncoderConfig& cfg, const Tensor& frames,
                          std::size_t batch, Mode mode, Rng* dropout_rng) {
  if (frames.rank() != 2 || frames.cols() != cfg.d_in || frames.rows() != batch * cfg.L) {
    throw MismatchError("encode: frames " + shape_string(frames.shape()) + " do not match batch=" +
                        std::to_string(batch) + " L=" + std::to_string(cfg.L) + " d_in=" + std::to_string(cfg.d_in));
  }
  const bool drop = mode == Mode::train && cfg.dropout > 0.0;
  if (drop && dropout_rng == nullptr) throw UsageError("encode: dropout requires an rng");
  auto P = [&](const std::string& name) { return tape.parameter(params, name); };
  auto maybe_drop = [&](ad::Var v) { return drop ? ad::dropout(v, cfg.dropout, *dropout_rng) : v; };

  const std::size_t S = cfg.L + 1;
  ad::Var x = ad::linear(tape.constant(frames), P("enc.in.W"), P("enc.in.b"));
  x = ad::add_tiled(x, P("enc.pos"));
  x = ad::prepend_token(x, P("enc.token"), batch);

  for (std::size_t l = 0; l < cfg.num_layers; ++l) {
    ad::Var h = ad::layer_norm(x, P(layer_key(l, "ln1.g")), P(layer_key(l, "ln1.b")), ad::kLayerNormEps);
    h = ad::linear(h, P(layer_key(l, "attn.Wqkv")), P(layer_key(l, "attn.bqkv")));
    h = ad::multi_head_attention(h, batch, S, cfg.num_heads);
    h = ad::linear(h, P(layer_key(l, "attn.Wo")), P(layer_key(l, "attn.bo")));
    x = ad::add(x, maybe_drop(h));

    ad::Var f = ad::layer_norm(x, P(layer_key(l, "ln2.g")), P(layer_key(l, "ln2.b")), ad::kLayerNormEps);
    f = ad::relu(ad::linear(f, P(layer_key(l, "ff.W1")), P(layer_key(l, "ff.b1"))));
    f = ad::linear(f, P(layer_key(l, "ff.W2")), P(layer_key(l, "ff.b2")));
    x = ad::add(x, maybe_drop(f));
  }
  x = ad::layer_norm(x, P("enc.ln_f.g"), P("enc.ln_f.b"), ad::kLayerNormEps);

  std::vector<std::size_t> token_rows(batch), frame_rows;
  frame_rows.reserve(batch * cfg.L);
  for (std::size_t b = 0; b < batch; ++b) {
    token_rows[b] = b * S;
    for (std::size_t t = 1; t < S; ++t) frame_rows.push_back(b * S + t);
  }
  return {ad::select_rows(x, std::move(token_rows)), ad::select_rows(x, std::move(frame_rows))};
}

ad::Var project(ad::Tape& tape, ad::ParamStore& params, const EncoderConfig& cfg, ad::Var hidden) {
  if (hidden.value().rank() != 2 || hidden.value().cols() != cfg.d_model) {
    throw MismatchError("project: expected last dimension " + std::to_string(cfg.d_model));
  }
  auto P = [&](const std::string& name) { return tape.parameter(params, name); };
  ad::Var h = ad::relu(ad::linear(hidden, P("head.W1"), P("head.b1")));
  return ad::linear(h, P("head.W2"), P("head.b2"));
}

Encoding encode(const Tensor& frames, ad::ParamStore& params, const EncoderConfig& cfg) {
  ad::Tape tape;
  EncodedBatch out = encode_batch(tape, params, cfg, frames, 1, Mode::eval);
  return {out.tracklet_hidden.value().reshaped({cfg.d_model}), out.frame_hidden.value()};
}

Tensor project(const Tensor& hidden, ad::ParamStore& params, const EncoderConfig& cfg) {
  ad::Tape tape;
  const bool vec = hidden.rank() == 1;
  Tensor h = vec ? hidden.reshaped({1, hidden.size()}) : hidden;
  Tensor out = project(tape, params, cfg, tape.constant(std::move(h))).value();
  return vec ? out.reshaped({cfg.proj_out}) : out;
}

}  // namespace ntssl
