#include "ntssl/sweep.hpp"

#include <fstream>
#include <iomanip>
#include <map>
#include <sstream>

#include "ntssl/error.hpp"

namespace ntssl {

std::vector<SweepVariant> ablation_variants(Level base_level) {
  return {
      {"sampler-topk", Sampling::topk, false, base_level},
      {"sampler-exp", Sampling::exp, false, base_level},
      {"sampler-exp-curriculum", Sampling::exp, true, base_level},
      {"level-frame", Sampling::exp, true, Level::frame},
      {"level-tracklet", Sampling::exp, true, Level::tracklet},
      {"level-both", Sampling::exp, true, Level::both},
  };
}

namespace {

std::string cell_key(const SweepVariant& v) {
  return to_string(v.sampling) + (v.curriculum ? "+c" : "") + "/" + to_string(v.level);
}

}  // namespace

std::vector<SweepRow> ablation_sweep(const TrackletDataset& dataset, const RunConfig& base, const EvalTasks& tasks,
                                     std::span<const SweepVariant> variants,
                                     const std::optional<std::filesystem::path>& out_dir) {
  std::vector<SweepRow> rows;
  // Identical cells share seeds, so a repeated cell reuses the first result.
  std::map<std::string, MetricsReport> done;
  for (const SweepVariant& v : variants) {
    RunConfig cfg = base;
    cfg.train.sampling = v.sampling;
    cfg.train.curriculum = v.curriculum;
    cfg.loss.level = v.level;
    const std::string key = cell_key(v);
    if (auto it = done.find(key); it != done.end() && !out_dir) {
      rows.push_back({v, it->second});
      continue;
    }
    nlohmann::json echo = to_json(cfg);
    echo["variant"] = v.name;
    TrainResult run = train(dataset, cfg.encoder, cfg.loss, cfg.train, echo);
    MetricsReport report = evaluate(dataset, run.checkpoint, tasks, cfg.probe);
    report.provenance["variant"] = v.name;
    if (out_dir) {
      save_checkpoint(run.checkpoint, *out_dir / (v.name + ".ckpt"));
      write_step_log(run.log, *out_dir / (v.name + ".steps.csv"));
      write_report(report, *out_dir / (v.name + ".report.json"));
    }
    done.emplace(key, report);
    rows.push_back({v, std::move(report)});
  }
  if (out_dir) {
    std::ofstream out(*out_dir / "ablation.csv", std::ios::binary | std::ios::trunc);
    if (!out) throw UsageError("cannot write ablation.csv in '" + out_dir->string() + "'");
    out << sweep_csv(rows);
  }
  return rows;
}

std::string sweep_csv(std::span<const SweepRow> rows) {
  std::ostringstream os;
  os << std::setprecision(17);
  os << "variant,sampling,curriculum,level,map,hr1,hr5,auroc,aupr,size_f1,histology_acc\n";
  for (const SweepRow& r : rows) {
    const MetricsReport& m = r.report;
    os << r.variant.name << ',' << to_string(r.variant.sampling) << ',' << (r.variant.curriculum ? 1 : 0) << ','
       << to_string(r.variant.level) << ',';
    if (m.retrieval) os << m.retrieval->map << ',' << m.retrieval->hr1 << ',' << m.retrieval->hr5;
    else os << ",,";
    os << ',';
    if (m.reid) os << m.reid->auroc << ',' << m.reid->aupr;
    else os << ',';
    std::string size_f1, hist;
    for (const ProbeResult& p : m.probes) {
      std::ostringstream v;
      v << std::setprecision(17) << p.value;
      (p.attribute == "size_class" ? size_f1 : hist) = v.str();
    }
    os << ',' << size_f1 << ',' << hist << '\n';
  }
  return os.str();
}

}  // namespace ntssl
