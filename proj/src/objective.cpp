#include "ntssl/objective.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <memory>
#include <vector>

#include "ntssl/error.hpp"
#include "ntssl/simd/kernels.hpp"

namespace ntssl {

void LossConfig::validate() const {
  if (!(sim_temperature > 0.0)) throw UsageError("loss: sim_temperature must be > 0");
}

double similarity(std::span<const double> u, std::span<const double> v, const LossConfig& cfg) {
  if (u.size() != v.size()) throw UsageError("similarity: dimension mismatch");
  const auto& k = simd::active();
  const double nu = std::sqrt(k.dot(u.data(), u.data(), u.size()));
  const double nv = std::sqrt(k.dot(v.data(), v.data(), v.size()));
  if (!(nu > 0.0) || !(nv > 0.0)) throw NumericError("similarity: zero-norm vector");
  return k.dot(u.data(), v.data(), u.size()) / (nu * nv) / cfg.sim_temperature;
}

namespace {

// Terms are summed in sorted order, so the result does not depend on how
// bag members are ordered.
double logsumexp(const double* x, std::size_t n, std::size_t stride, std::vector<double>& scratch) {
  double mx = -std::numeric_limits<double>::infinity();
  for (std::size_t i = 0; i < n; ++i) mx = std::max(mx, x[i * stride]);
  scratch.resize(n);
  for (std::size_t i = 0; i < n; ++i) scratch[i] = std::exp(x[i * stride] - mx);
  std::sort(scratch.begin(), scratch.end());
  double s = 0.0;
  for (double v : scratch) s += v;
  return mx + std::log(s);
}

}  // namespace

ad::Var bag_contrastive_from_logits(ad::Var logits, std::size_t M) {
  const Tensor& G = logits.value();
  if (G.rank() != 2 || M == 0 || G.rows() % M != 0) throw UsageError("bag loss: logits must be (N*M x N)");
  const std::size_t N = G.cols();
  if (G.rows() != N * M) throw UsageError("bag loss: logits must be (N*M x N)");
  if (N < 2) throw UsageError("bag loss: need N >= 2 anchors for negatives");
  if (!G.all_finite()) throw NumericError("bag loss: non-finite similarity");

  // Softmax weights over the full block and over the positive column.
  auto w_all = std::make_shared<Tensor>(Tensor::matrix(N * M, N));
  auto w_pos = std::make_shared<Tensor>(Tensor::matrix(N, M));
  Tensor out({N, 1});
  std::vector<double> scratch;
  for (std::size_t i = 0; i < N; ++i) {
    const double* block = G.data() + i * M * N;
    const double lse_all = logsumexp(block, M * N, 1, scratch);
    const double lse_pos = logsumexp(block + i, M, N, scratch);
    out[i] = lse_all - lse_pos;
    for (std::size_t e = 0; e < M * N; ++e) (*w_all)[i * M * N + e] = std::exp(block[e] - lse_all);
    for (std::size_t m = 0; m < M; ++m) (*w_pos)(i, m) = std::exp(block[m * N + i] - lse_pos);
  }
  const std::size_t ig = logits.id();
  return logits.tape().record(std::move(out), [ig, N, M, w_all, w_pos](ad::Tape& t, std::size_t self) {
    const Tensor& g = t.grad(self);
    Tensor& gG = t.grad(ig);
    for (std::size_t i = 0; i < N; ++i) {
      const double gi = g[i];
      if (gi == 0.0) continue;
      for (std::size_t e = 0; e < M * N; ++e) gG[i * M * N + e] += gi * (*w_all)[i * M * N + e];
      for (std::size_t m = 0; m < M; ++m) gG[(i * M + m) * N + i] -= gi * (*w_pos)(i, m);
    }
  });
}

ad::Var noise_aware_loss(ad::Var anchors, ad::Var bags, std::size_t M, double temperature) {
  const Tensor& A = anchors.value();
  const Tensor& B = bags.value();
  if (A.rank() != 2 || B.rank() != 2 || A.cols() != B.cols() || B.rows() != A.rows() * M) {
    throw UsageError("noise_aware_loss: expected anchors (N x d) and bags (N*K x d)");
  }
  if (A.rows() < 2) throw UsageError("noise_aware_loss: need N >= 2 anchors for negatives");
  if (!A.all_finite() || !B.all_finite()) throw NumericError("noise_aware_loss: non-finite embedding");
  ad::Var logits = ad::matmul_nt(ad::normalize_rows(bags), ad::normalize_rows(anchors), 1.0 / temperature);
  return bag_contrastive_from_logits(logits, M);
}

LossOutput noise_aware_loss(const Tensor& anchors, const Tensor& bags, std::size_t K, const LossConfig& cfg) {
  cfg.validate();
  ad::Tape tape;
  Tensor flat = bags.rank() == 3 ? bags.reshaped({bags.shape()[0] * bags.shape()[1], bags.shape()[2]}) : bags;
  ad::Var per = noise_aware_loss(tape.constant(anchors), tape.constant(std::move(flat)), K, cfg.sim_temperature);
  LossOutput out;
  out.per_anchor = per.value().storage();
  for (double v : out.per_anchor) out.total += v;
  out.total /= static_cast<double>(out.per_anchor.size());
  out.per_level["tracklet"] = out.total;
  return out;
}

MultiLevelLoss multi_level_loss(const MultiLevelInputs& in, const LossConfig& cfg) {
  cfg.validate();
  const std::size_t N = in.N, K = in.K, L = in.L;
  MultiLevelLoss out;
  std::vector<ad::Var> parts;
  if (cfg.level == Level::tracklet || cfg.level == Level::both) {
    out.tracklet = noise_aware_loss(in.anchor_tracklet, in.bag_tracklet, K, cfg.sim_temperature);
    parts.push_back(*out.tracklet);
  }
  if (cfg.level == Level::frame || cfg.level == Level::both) {
    if (L < 1) throw UsageError("multi_level_loss: frame level needs L >= 1");
    std::vector<ad::Var> per_t;
    for (std::size_t t = 0; t < L; ++t) {
      std::vector<std::size_t> anchor_rows(N);
      for (std::size_t i = 0; i < N; ++i) anchor_rows[i] = i * L + t;
      ad::Var anchors = ad::select_rows(in.anchor_frames, std::move(anchor_rows));
      if (cfg.frame_pairing == FramePairing::all) {
        per_t.push_back(noise_aware_loss(anchors, in.bag_frames, K * L, cfg.sim_temperature));
      } else {
        std::vector<std::size_t> bag_rows(N * K);
        for (std::size_t r = 0; r < N * K; ++r) bag_rows[r] = r * L + t;
        per_t.push_back(noise_aware_loss(anchors, ad::select_rows(in.bag_frames, std::move(bag_rows)), K,
                                         cfg.sim_temperature));
      }
    }
    out.frame = ad::scale(ad::add_n(per_t), 1.0 / static_cast<double>(L));
    parts.push_back(*out.frame);
  }
  out.per_anchor = parts.size() == 1 ? parts[0] : ad::add_n(parts);
  out.total = ad::mean(out.per_anchor);
  return out;
}

LossOutput MultiLevelLoss::summary() const {
  LossOutput s;
  s.total = total.value()[0];
  s.per_anchor = per_anchor.value().storage();
  auto avg = [](const Tensor& t) {
    double v = 0.0;
    for (double x : t.values()) v += x;
    return v / static_cast<double>(t.size());
  };
  if (tracklet) s.per_level["tracklet"] = avg(tracklet->value());
  if (frame) s.per_level["frame"] = avg(frame->value());
  return s;
}

std::string to_string(Level level) {
  switch (level) {
    case Level::tracklet: return "tracklet";
    case Level::frame: return "frame";
    case Level::both: return "both";
  }
  return "both";
}

Level parse_level(const std::string& s) {
  if (s == "tracklet") return Level::tracklet;
  if (s == "frame") return Level::frame;
  if (s == "both") return Level::both;
  throw UsageError("unknown level '" + s + "' (expected tracklet|frame|both)");
}

std::string to_string(FramePairing p) { return p == FramePairing::all ? "all" : "aligned"; }

FramePairing parse_frame_pairing(const std::string& s) {
  if (s == "all") return FramePairing::all;
  if (s == "aligned") return FramePairing::aligned;
  throw UsageError("unknown frame_pairing '" + s + "' (expected all|aligned)");
}

}  // namespace ntssl
