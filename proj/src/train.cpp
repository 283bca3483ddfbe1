#include "ntssl/train.hpp"

#include <cmath>
#include <fstream>
#include <iomanip>
#include <iostream>
#include <sstream>

#include "ntssl/error.hpp"
#include "ntssl/optim.hpp"
#include "ntssl/parallel.hpp"
#include "ntssl/rng.hpp"

namespace ntssl {

std::string to_string(Sampling s) { return s == Sampling::topk ? "topk" : "exp"; }

Sampling parse_sampling(const std::string& s) {
  if (s == "topk") return Sampling::topk;
  if (s == "exp") return Sampling::exp;
  throw UsageError("unknown sampling '" + s + "' (expected topk|exp)");
}

void TrainConfig::validate() const {
  if (batch_size < 2) throw UsageError("train: batch_size must be >= 2");
  if (total_steps < 1) throw UsageError("train: total_steps must be >= 1");
  if (K < 1) throw UsageError("train: K must be >= 1");
  if (!(lr >= 0.0) || !(weight_decay >= 0.0)) throw UsageError("train: lr and weight_decay must be >= 0");
  if (!(fixed_tau > 0.0)) throw UsageError("train: fixed_tau must be > 0");
  schedule.validate();
}

double curriculum_progress(std::size_t step, std::size_t total_steps) {
  const std::size_t denom = total_steps > 1 ? total_steps - 1 : 1;
  return std::min(1.0, static_cast<double>(step) / static_cast<double>(denom));
}

Checkpoint initial_checkpoint(const EncoderConfig& enc, const TrainConfig& cfg, nlohmann::json config_echo) {
  return {enc, init_params(enc, mix_seed(cfg.seed, 0x1417)), std::move(config_echo)};
}

namespace {

bool has_all_labels(const TrackletDataset& ds) {
  for (std::size_t i = 0; i < ds.size(); ++i)
    if (!ds.labels(i).polyp_id) return false;
  return true;
}

void stack_frames(const TrackletDataset& ds, std::span<const std::size_t> rows, Tensor& out) {
  const std::size_t block = ds.L() * ds.d_in();
  out = Tensor::matrix(rows.size() * ds.L(), ds.d_in());
  for (std::size_t r = 0; r < rows.size(); ++r) {
    const Tensor& f = ds.features(rows[r]);
    std::copy(f.data(), f.data() + block, out.data() + r * block);
  }
}

template <typename T>
void shuffle(std::vector<T>& v, Rng& rng) {
  for (std::size_t i = v.size(); i > 1; --i) std::swap(v[i - 1], v[rng.below(i)]);
}

}  // namespace

TrainResult train(const TrackletDataset& ds, const EncoderConfig& enc, const LossConfig& loss_cfg,
                  const TrainConfig& cfg, nlohmann::json config_echo) {
  cfg.validate();
  enc.validate();
  loss_cfg.validate();
  if (enc.L != ds.L() || enc.d_in != ds.d_in()) {
    throw MismatchError("config mismatch: encoder expects L=" + std::to_string(enc.L) + " d_in=" +
                        std::to_string(enc.d_in) + ", dataset has L=" + std::to_string(ds.L()) +
                        " d_in=" + std::to_string(ds.d_in()));
  }

  const RankIndex index(ds);
  const std::vector<std::size_t> usable = index.usable_anchors(cfg.K);
  if (usable.empty()) throw UsageError("no usable anchors: every anchor has fewer than K=" + std::to_string(cfg.K) +
                                       " same-video candidates");
  if (usable.size() < ds.size()) {
    std::clog << "warning: " << ds.size() - usable.size() << " anchor(s) have fewer than K=" << cfg.K
              << " candidates and are excluded\n";
  }
  const std::size_t B = std::min(cfg.batch_size, usable.size());
  if (B < 2) throw UsageError("need at least 2 usable anchors per batch");
  if (B < cfg.batch_size) std::clog << "warning: batch size reduced to " << B << " usable anchors\n";
  const bool labelled = has_all_labels(ds);
  const std::size_t K = cfg.K, L = enc.L;
  const bool want_tracklet = loss_cfg.level != Level::frame;
  const bool want_frame = loss_cfg.level != Level::tracklet;

  TrainResult result;
  result.usable_anchors = usable.size();
  result.checkpoint = initial_checkpoint(enc, cfg, std::move(config_echo));
  ad::ParamStore& params = result.checkpoint.params;
  AdamW opt({.lr = cfg.lr, .weight_decay = cfg.weight_decay});

  std::vector<std::size_t> perm;
  std::size_t cursor = 0, epoch = 0;
  Tensor frames;
  for (std::size_t step = 0; step < cfg.total_steps; ++step) {
    StepRecord rec;
    rec.step = step;
    rec.c = curriculum_progress(step, cfg.total_steps);
    rec.tau = cfg.curriculum ? curriculum_tau(cfg.schedule, rec.c) : cfg.fixed_tau;

    if (cursor + B > perm.size()) {
      perm = usable;
      Rng rng(mix_seed(cfg.seed, 0xe90c, epoch++));
      shuffle(perm, rng);
      cursor = 0;
    }
    std::vector<Bag> bags;
    bags.reserve(B);
    std::vector<std::size_t> rows(perm.begin() + static_cast<std::ptrdiff_t>(cursor),
                                  perm.begin() + static_cast<std::ptrdiff_t>(cursor + B));
    cursor += B;
    for (std::size_t b = 0; b < B; ++b) {
      const RankOrder& order = index.order(rows[b]);
      if (cfg.sampling == Sampling::exp) {
        Rng rng(mix_seed(cfg.seed, 0xba9, step, rows[b]));
        bags.push_back(sample_bag(order, K, rec.tau, rng));
      } else {
        bags.push_back(top_k_bag(order, K));
      }
    }
    for (const Bag& bag : bags) rows.insert(rows.end(), bag.members.begin(), bag.members.end());
    if (labelled) rec.purity = bag_purity(bags, ds);

    stack_frames(ds, rows, frames);
    ad::Tape tape;
    Rng drop_rng(mix_seed(cfg.seed, 0xd0, step));
    const EncodedBatch h = encode_batch(tape, params, enc, frames, rows.size(), Mode::train, &drop_rng);
    MultiLevelInputs in;
    in.N = B;
    in.K = K;
    in.L = L;
    if (want_tracklet) {
      ad::Var z = project(tape, params, enc, h.tracklet_hidden);
      in.anchor_tracklet = ad::slice_rows(z, 0, B);
      in.bag_tracklet = ad::slice_rows(z, B, B + B * K);
    }
    if (want_frame) {
      ad::Var z = project(tape, params, enc, h.frame_hidden);
      in.anchor_frames = ad::slice_rows(z, 0, B * L);
      in.bag_frames = ad::slice_rows(z, B * L, (B + B * K) * L);
    }
    MultiLevelLoss loss;
    try {
      loss = multi_level_loss(in, loss_cfg);
    } catch (const NumericError& e) {
      std::ostringstream os;
      os << "non-finite values at step " << step << " (c=" << rec.c << ", tau=" << rec.tau << "); anchors:";
      for (std::size_t b = 0; b < B; ++b) os << ' ' << ds.id(rows[b]);
      os << "; " << e.what();
      throw NumericError(os.str());
    }
    const LossOutput summary = loss.summary();
    if (!std::isfinite(summary.total)) {
      std::ostringstream os;
      os << "non-finite loss at step " << step << "; anchors:";
      for (std::size_t b = 0; b < B; ++b) os << ' ' << ds.id(rows[b]);
      throw NumericError(os.str());
    }
    rec.loss_total = summary.total;
    if (auto it = summary.per_level.find("tracklet"); it != summary.per_level.end()) rec.loss_tracklet = it->second;
    if (auto it = summary.per_level.find("frame"); it != summary.per_level.end()) rec.loss_frame = it->second;

    tape.backward(loss.total);
    opt.step(params);
    params.zero_grad();
    result.log.push_back(rec);
  }
  return result;
}

std::string step_log_csv(std::span<const StepRecord> log) {
  std::ostringstream os;
  os << std::setprecision(17);
  os << "step,c,tau,loss_total,loss_tracklet,loss_frame,purity\n";
  auto opt = [&](const std::optional<double>& v) {
    if (v) os << *v;
  };
  for (const StepRecord& r : log) {
    os << r.step << ',' << r.c << ',' << r.tau << ',' << r.loss_total << ',';
    opt(r.loss_tracklet);
    os << ',';
    opt(r.loss_frame);
    os << ',';
    opt(r.purity);
    os << '\n';
  }
  return os.str();
}

void write_step_log(std::span<const StepRecord> log, const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw UsageError("cannot write step log '" + path.string() + "'");
  out << step_log_csv(log);
}

EmbeddingSet embed_all(const TrackletDataset& ds, Checkpoint& ckpt) {
  const EncoderConfig& enc = ckpt.encoder;
  if (enc.L != ds.L() || enc.d_in != ds.d_in()) {
    throw MismatchError("config mismatch: checkpoint has L=" + std::to_string(enc.L) + " d_in=" +
                        std::to_string(enc.d_in) + ", dataset has L=" + std::to_string(ds.L()) +
                        " d_in=" + std::to_string(ds.d_in()));
  }
  const std::size_t N = ds.size(), L = enc.L, d = enc.proj_out;
  EmbeddingSet out{Tensor::matrix(N, d), Tensor({N, L, d})};
  constexpr std::size_t kChunk = 128;
  const std::size_t chunks = (N + kChunk - 1) / kChunk;
  parallel_for(chunks, [&](std::size_t c) {
    const std::size_t begin = c * kChunk, end = std::min(N, begin + kChunk);
    std::vector<std::size_t> rows(end - begin);
    for (std::size_t r = 0; r < rows.size(); ++r) rows[r] = begin + r;
    Tensor frames;
    stack_frames(ds, rows, frames);
    ad::Tape tape;
    const EncodedBatch h = encode_batch(tape, ckpt.params, enc, frames, rows.size(), Mode::eval);
    const Tensor zt = project(tape, ckpt.params, enc, h.tracklet_hidden).value();
    const Tensor zf = project(tape, ckpt.params, enc, h.frame_hidden).value();
    std::copy(zt.data(), zt.data() + zt.size(), out.tracklet_emb.data() + begin * d);
    std::copy(zf.data(), zf.data() + zf.size(), out.frame_embs.data() + begin * L * d);
  });
  return out;
}

}  // namespace ntssl
