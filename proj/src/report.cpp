#include "ntssl/report.hpp"

#include <fstream>
#include <sstream>

#include "ntssl/error.hpp"
#include "ntssl/train.hpp"

namespace ntssl {

using nlohmann::json;

EvalTasks parse_tasks(const std::string& csv) {
  EvalTasks t{false, false, false};
  std::stringstream ss(csv);
  std::string item;
  while (std::getline(ss, item, ',')) {
    if (item == "retrieval") t.retrieval = true;
    else if (item == "reid") t.reid = true;
    else if (item == "probe") t.probe = true;
    else if (!item.empty()) throw UsageError("unknown task '" + item + "' (expected retrieval,reid,probe)");
  }
  if (!t.retrieval && !t.reid && !t.probe) throw UsageError("no evaluation tasks selected");
  return t;
}

MetricsReport evaluate(const TrackletDataset& dataset, Checkpoint& checkpoint, const EvalTasks& tasks,
                       const ProbeConfig& probe) {
  const EmbeddingSet embs = embed_all(dataset, checkpoint);
  if (!embs.tracklet_emb.all_finite()) throw NumericError("evaluate: non-finite embeddings");
  MetricsReport report;
  if (tasks.retrieval) report.retrieval = retrieval_eval(embs, dataset);
  if (tasks.reid) report.reid = reid_eval(embs, dataset);
  if (tasks.probe) {
    for (const char* attr : {"size_class", "histology_class"}) report.probes.push_back(probe_eval(embs, dataset, attr, probe));
  }
  report.provenance = {{"checkpoint_config", checkpoint.config_echo},
                       {"probe", {{"split_seed", probe.split_seed}, {"epochs", probe.epochs}}},
                       {"tracklets", dataset.size()}};
  return report;
}

json to_json(const MetricsReport& r) {
  json j = json::object();
  if (r.retrieval) {
    j["retrieval"] = {{"map", r.retrieval->map},
                      {"hr@1", r.retrieval->hr1},
                      {"hr@5", r.retrieval->hr5},
                      {"queries", r.retrieval->queries}};
  }
  if (r.reid) {
    j["reid"] = {{"auroc", r.reid->auroc},
                 {"aupr", r.reid->aupr},
                 {"positive_pairs", r.reid->positives},
                 {"negative_pairs", r.reid->negatives}};
  }
  if (!r.probes.empty()) {
    json probes = json::object();
    for (const ProbeResult& p : r.probes) {
      probes[p.attribute] = {{p.metric, p.value},
                             {"train_tracklets", p.train_tracklets},
                             {"test_tracklets", p.test_tracklets},
                             {"split_attempt", p.split_attempt}};
    }
    j["probes"] = std::move(probes);
  }
  j["provenance"] = r.provenance;
  return j;
}

void write_report(const MetricsReport& report, const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw UsageError("cannot write report '" + path.string() + "'");
  out << to_json(report).dump(2) << '\n';
}

}  // namespace ntssl
