#pragma once

#include <filesystem>
#include <json.hpp>
#include <optional>
#include <vector>

#include "ntssl/checkpoint.hpp"
#include "ntssl/data_model.hpp"
#include "ntssl/metrics.hpp"
#include "ntssl/probe.hpp"

namespace ntssl {

struct EvalTasks {
  bool retrieval = true;
  bool reid = true;
  bool probe = true;
};

/// Parses "retrieval,reid,probe" (any subset, any order).
EvalTasks parse_tasks(const std::string& csv);

struct MetricsReport {
  std::optional<RetrievalMetrics> retrieval;
  std::optional<ReidMetrics> reid;
  std::vector<ProbeResult> probes;
  nlohmann::json provenance = nlohmann::json::object();
};

MetricsReport evaluate(const TrackletDataset& dataset, Checkpoint& checkpoint, const EvalTasks& tasks,
                       const ProbeConfig& probe);

nlohmann::json to_json(const MetricsReport& report);
void write_report(const MetricsReport& report, const std::filesystem::path& path);

}  // namespace ntssl
