#include "ntssl/config.hpp"

#include <fstream>
#include <set>

#include "ntssl/error.hpp"

namespace ntssl {

using nlohmann::json;

namespace {

// Reads `key` into `field` when present.
template <typename T>
void read(const json& j, const char* key, T& field) {
  if (auto it = j.find(key); it != j.end()) field = it->get<T>();
}

void reject_unknown(const json& j, const std::string& section, std::initializer_list<const char*> allowed) {
  if (!j.is_object()) throw UsageError("config: section '" + section + "' must be an object");
  std::set<std::string> ok(allowed.begin(), allowed.end());
  for (auto it = j.begin(); it != j.end(); ++it) {
    if (!ok.count(it.key())) throw UsageError("config: unknown key '" + section + "." + it.key() + "'");
  }
}

std::string to_string(ChainBy c) { return c == ChainBy::iou ? "iou" : "track"; }

ChainBy parse_chain_by(const std::string& s) {
  if (s == "iou") return ChainBy::iou;
  if (s == "track") return ChainBy::track;
  throw UsageError("config: chain_by must be iou|track");
}

SynthConfig synth_from(const json& j, SynthConfig c) {
  reject_unknown(j, "synth",
                 {"num_videos", "polyps_per_video", "encounters_per_polyp", "frames_per_encounter", "gap_frames",
                  "overlap_prob", "d_in", "drift_scale", "noise_scale", "drift_fraction", "attr_margin", "seed"});
  read(j, "num_videos", c.num_videos);
  read(j, "polyps_per_video", c.polyps_per_video);
  read(j, "encounters_per_polyp", c.encounters_per_polyp);
  read(j, "frames_per_encounter", c.frames_per_encounter);
  read(j, "gap_frames", c.gap_frames);
  read(j, "overlap_prob", c.overlap_prob);
  read(j, "d_in", c.d_in);
  read(j, "drift_scale", c.drift_scale);
  read(j, "noise_scale", c.noise_scale);
  read(j, "drift_fraction", c.drift_fraction);
  read(j, "attr_margin", c.attr_margin);
  read(j, "seed", c.seed);
  return c;
}

BuilderConfig builder_from(const json& j, BuilderConfig c) {
  reject_unknown(j, "builder", {"iou_threshold", "subsample_stride", "tracklet_length", "chain_by"});
  read(j, "iou_threshold", c.iou_threshold);
  read(j, "subsample_stride", c.subsample_stride);
  read(j, "tracklet_length", c.tracklet_length);
  if (auto it = j.find("chain_by"); it != j.end()) c.chain_by = parse_chain_by(it->get<std::string>());
  return c;
}

EncoderConfig encoder_from(const json& j, EncoderConfig c) {
  reject_unknown(j, "encoder",
                 {"d_in", "d_model", "num_layers", "num_heads", "d_ff", "dropout", "proj_hidden", "proj_out", "L"});
  read(j, "d_in", c.d_in);
  read(j, "d_model", c.d_model);
  read(j, "num_layers", c.num_layers);
  read(j, "num_heads", c.num_heads);
  read(j, "d_ff", c.d_ff);
  read(j, "dropout", c.dropout);
  read(j, "proj_hidden", c.proj_hidden);
  read(j, "proj_out", c.proj_out);
  read(j, "L", c.L);
  return c;
}

LossConfig loss_from(const json& j, LossConfig c) {
  reject_unknown(j, "loss", {"sim_temperature", "level", "frame_pairing"});
  read(j, "sim_temperature", c.sim_temperature);
  if (auto it = j.find("level"); it != j.end()) c.level = parse_level(it->get<std::string>());
  if (auto it = j.find("frame_pairing"); it != j.end()) c.frame_pairing = parse_frame_pairing(it->get<std::string>());
  return c;
}

CurriculumSchedule schedule_from(const json& j, CurriculumSchedule c) {
  reject_unknown(j, "train.schedule", {"tau_min", "tau_max"});
  read(j, "tau_min", c.tau_min);
  read(j, "tau_max", c.tau_max);
  return c;
}

TrainConfig train_from(const json& j, TrainConfig c) {
  reject_unknown(j, "train",
                 {"total_steps", "batch_size", "K", "lr", "weight_decay", "sampling", "curriculum", "schedule",
                  "fixed_tau", "seed"});
  read(j, "total_steps", c.total_steps);
  read(j, "batch_size", c.batch_size);
  read(j, "K", c.K);
  read(j, "lr", c.lr);
  read(j, "weight_decay", c.weight_decay);
  if (auto it = j.find("sampling"); it != j.end()) c.sampling = parse_sampling(it->get<std::string>());
  read(j, "curriculum", c.curriculum);
  if (auto it = j.find("schedule"); it != j.end()) c.schedule = schedule_from(*it, c.schedule);
  read(j, "fixed_tau", c.fixed_tau);
  read(j, "seed", c.seed);
  return c;
}

ProbeConfig probe_from(const json& j, ProbeConfig c) {
  reject_unknown(j, "probe",
                 {"hidden", "dropout", "epochs", "lr_size", "lr_histology", "weight_decay", "batch_size",
                  "train_fraction", "split_seed"});
  read(j, "hidden", c.hidden);
  read(j, "dropout", c.dropout);
  read(j, "epochs", c.epochs);
  read(j, "lr_size", c.lr_size);
  read(j, "lr_histology", c.lr_histology);
  read(j, "weight_decay", c.weight_decay);
  read(j, "batch_size", c.batch_size);
  read(j, "train_fraction", c.train_fraction);
  read(j, "split_seed", c.split_seed);
  return c;
}

}  // namespace

void RunConfig::validate() const {
  synth.validate();
  builder.validate();
  encoder.validate();
  loss.validate();
  train.validate();
  probe.validate();
  if (encoder.d_in != synth.d_in) throw UsageError("config: encoder.d_in must equal synth.d_in");
  if (encoder.L != builder.tracklet_length) throw UsageError("config: encoder.L must equal builder.tracklet_length");
}

json to_json(const SynthConfig& c) {
  return {{"num_videos", c.num_videos},
          {"polyps_per_video", c.polyps_per_video},
          {"encounters_per_polyp", c.encounters_per_polyp},
          {"frames_per_encounter", c.frames_per_encounter},
          {"gap_frames", c.gap_frames},
          {"overlap_prob", c.overlap_prob},
          {"d_in", c.d_in},
          {"drift_scale", c.drift_scale},
          {"noise_scale", c.noise_scale},
          {"drift_fraction", c.drift_fraction},
          {"attr_margin", c.attr_margin},
          {"seed", c.seed}};
}

json to_json(const BuilderConfig& c) {
  return {{"iou_threshold", c.iou_threshold},
          {"subsample_stride", c.subsample_stride},
          {"tracklet_length", c.tracklet_length},
          {"chain_by", to_string(c.chain_by)}};
}

json to_json(const EncoderConfig& c) {
  return {{"d_in", c.d_in},         {"d_model", c.d_model},         {"num_layers", c.num_layers},
          {"num_heads", c.num_heads}, {"d_ff", c.d_ff},               {"dropout", c.dropout},
          {"proj_hidden", c.proj_hidden}, {"proj_out", c.proj_out}, {"L", c.L}};
}

json to_json(const LossConfig& c) {
  return {{"sim_temperature", c.sim_temperature},
          {"level", to_string(c.level)},
          {"frame_pairing", to_string(c.frame_pairing)}};
}

json to_json(const CurriculumSchedule& c) { return {{"tau_min", c.tau_min}, {"tau_max", c.tau_max}}; }

json to_json(const TrainConfig& c) {
  return {{"total_steps", c.total_steps}, {"batch_size", c.batch_size}, {"K", c.K},
          {"lr", c.lr},                   {"weight_decay", c.weight_decay}, {"sampling", to_string(c.sampling)},
          {"curriculum", c.curriculum},   {"schedule", to_json(c.schedule)}, {"fixed_tau", c.fixed_tau},
          {"seed", c.seed}};
}

json to_json(const ProbeConfig& c) {
  return {{"hidden", c.hidden},
          {"dropout", c.dropout},
          {"epochs", c.epochs},
          {"lr_size", c.lr_size},
          {"lr_histology", c.lr_histology},
          {"weight_decay", c.weight_decay},
          {"batch_size", c.batch_size},
          {"train_fraction", c.train_fraction},
          {"split_seed", c.split_seed}};
}

json to_json(const RunConfig& c) {
  return {{"synth", to_json(c.synth)},     {"builder", to_json(c.builder)}, {"encoder", to_json(c.encoder)},
          {"loss", to_json(c.loss)},       {"train", to_json(c.train)},     {"probe", to_json(c.probe)}};
}

EncoderConfig encoder_config_from_json(const json& j) {
  EncoderConfig c = encoder_from(j, EncoderConfig{});
  c.validate();
  return c;
}

RunConfig run_config_from_json(const json& j, RunConfig base) {
  try {
    reject_unknown(j, "<root>", {"synth", "builder", "encoder", "loss", "train", "probe"});
    if (auto it = j.find("synth"); it != j.end()) base.synth = synth_from(*it, base.synth);
    if (auto it = j.find("builder"); it != j.end()) base.builder = builder_from(*it, base.builder);
    if (auto it = j.find("encoder"); it != j.end()) base.encoder = encoder_from(*it, base.encoder);
    if (auto it = j.find("loss"); it != j.end()) base.loss = loss_from(*it, base.loss);
    if (auto it = j.find("train"); it != j.end()) base.train = train_from(*it, base.train);
    if (auto it = j.find("probe"); it != j.end()) base.probe = probe_from(*it, base.probe);
  } catch (const json::exception& e) {
    throw UsageError(std::string("config: ") + e.what());
  }
  base.validate();
  return base;
}

RunConfig load_run_config(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw UsageError("cannot open config '" + path.string() + "'");
  json j;
  try {
    j = json::parse(in);
  } catch (const json::parse_error& e) {
    throw UsageError("config '" + path.string() + "': " + e.what());
  }
  return run_config_from_json(j);
}

}  // namespace ntssl
