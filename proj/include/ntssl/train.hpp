#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <json.hpp>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "ntssl/checkpoint.hpp"
#include "ntssl/data_model.hpp"
#include "ntssl/encoder.hpp"
#include "ntssl/objective.hpp"
#include "ntssl/temporal_sampler.hpp"

namespace ntssl {

enum class Sampling { topk, exp };

std::string to_string(Sampling s);
Sampling parse_sampling(const std::string& s);

struct TrainConfig {
  std::size_t total_steps = 2000;
  std::size_t batch_size = 60;
  std::size_t K = 4;
  double lr = 1e-4;
  double weight_decay = 1e-2;
  Sampling sampling = Sampling::exp;
  bool curriculum = true;
  CurriculumSchedule schedule;
  double fixed_tau = 6.15;  // used when curriculum is off
  std::uint64_t seed = 0;

  void validate() const;
};

struct StepRecord {
  std::size_t step = 0;
  double c = 0.0;
  double tau = 0.0;
  double loss_total = 0.0;
  std::optional<double> loss_tracklet;
  std::optional<double> loss_frame;
  std::optional<double> purity;  // only when every tracklet carries a polyp_id

  friend bool operator==(const StepRecord&, const StepRecord&) = default;
};

struct TrainResult {
  Checkpoint checkpoint;
  std::vector<StepRecord> log;
  std::size_t usable_anchors = 0;
};

/// Curriculum progress of a step: step / (total_steps - 1), denominator
/// clamped to 1.
double curriculum_progress(std::size_t step, std::size_t total_steps);

/// The untrained encoder a run with this seed starts from.
Checkpoint initial_checkpoint(const EncoderConfig& enc, const TrainConfig& cfg, nlohmann::json config_echo = {});

/// Contrastive training on temporally sampled bags. Reads positions and
/// video ids for supervision; polyp ids are used only for the purity column.
TrainResult train(const TrackletDataset& dataset, const EncoderConfig& enc, const LossConfig& loss,
                  const TrainConfig& cfg, nlohmann::json config_echo = {});

std::string step_log_csv(std::span<const StepRecord> log);
void write_step_log(std::span<const StepRecord> log, const std::filesystem::path& path);

/// Eval-mode embeddings of every tracklet (projected space).
/// Throws MismatchError if the checkpoint's L or d_in differ from the dataset.
EmbeddingSet embed_all(const TrackletDataset& dataset, Checkpoint& checkpoint);

}  // namespace ntssl
