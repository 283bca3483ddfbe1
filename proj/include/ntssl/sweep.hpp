#pragma once

#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "ntssl/config.hpp"
#include "ntssl/report.hpp"

namespace ntssl {

struct SweepVariant {
  std::string name;
  Sampling sampling = Sampling::exp;
  bool curriculum = true;
  Level level = Level::both;
};

/// The ablation grid: top-k / exponential / exponential + curriculum at the
/// base level, then frame / tracklet / both with exponential + curriculum.
std::vector<SweepVariant> ablation_variants(Level base_level);

struct SweepRow {
  SweepVariant variant;
  MetricsReport report;
};

/// Trains and evaluates every variant with the base config's seeds. With an
/// output directory, writes <variant>.ckpt, <variant>.steps.csv,
/// <variant>.report.json and ablation.csv there.
std::vector<SweepRow> ablation_sweep(const TrackletDataset& dataset, const RunConfig& base, const EvalTasks& tasks,
                                     std::span<const SweepVariant> variants,
                                     const std::optional<std::filesystem::path>& out_dir = std::nullopt);

std::string sweep_csv(std::span<const SweepRow> rows);

}  // namespace ntssl
