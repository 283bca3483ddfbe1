#pragma once

#include <filesystem>
#include <json.hpp>

#include "ntssl/encoder.hpp"
#include "ntssl/objective.hpp"
#include "ntssl/probe.hpp"
#include "ntssl/synthgen.hpp"
#include "ntssl/temporal_sampler.hpp"
#include "ntssl/tracklet_builder.hpp"
#include "ntssl/train.hpp"

namespace ntssl {

/// Everything a CLI run needs. The JSON config file mirrors this layout with
/// one object per section; absent keys keep their defaults, unknown keys are
/// rejected.
struct RunConfig {
  SynthConfig synth;
  BuilderConfig builder;
  EncoderConfig encoder;
  LossConfig loss;
  TrainConfig train;
  ProbeConfig probe;

  void validate() const;
};

nlohmann::json to_json(const SynthConfig& c);
nlohmann::json to_json(const BuilderConfig& c);
nlohmann::json to_json(const EncoderConfig& c);
nlohmann::json to_json(const LossConfig& c);
nlohmann::json to_json(const CurriculumSchedule& c);
nlohmann::json to_json(const TrainConfig& c);
nlohmann::json to_json(const ProbeConfig& c);
nlohmann::json to_json(const RunConfig& c);

EncoderConfig encoder_config_from_json(const nlohmann::json& j);
/// Overlays the keys present in j onto `base`.
RunConfig run_config_from_json(const nlohmann::json& j, RunConfig base = {});
/// Throws UsageError when the file is missing or malformed.
RunConfig load_run_config(const std::filesystem::path& path);

}  // namespace ntssl
