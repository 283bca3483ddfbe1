#include "ntssl/cli.hpp"

#include <CLI11.hpp>
#include <chrono>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <optional>
#include <set>
#include <sstream>

#include "ntssl/config.hpp"
#include "ntssl/error.hpp"
#include "ntssl/report.hpp"
#include "ntssl/sweep.hpp"
#include "ntssl/synthgen.hpp"
#include "ntssl/temporal_sampler.hpp"
#include "ntssl/train.hpp"

namespace ntssl {

namespace fs = std::filesystem;

namespace {

std::string one_line(std::string s) {
  for (char& ch : s) {
    if (ch == '\n' || ch == '\r') ch = ' ';
  }
  return s;
}

RunConfig base_config(const std::string& path) {
  if (path.empty()) {
    RunConfig c;
    c.validate();
    return c;
  }
  return load_run_config(path);
}

void write_text(const fs::path& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw UsageError("cannot write '" + path.string() + "'");
  out << text;
}

struct TrainFlags {
  std::optional<std::size_t> steps, K, batch;
  std::optional<double> tau_min, tau_max, lr;
  std::optional<std::string> sampling, level;
  std::optional<std::uint64_t> seed;
  std::optional<bool> curriculum;
};

void add_train_flags(CLI::App* cmd, TrainFlags& f) {
  cmd->add_option("--steps", f.steps, "training steps");
  cmd->add_option("--K", f.K, "bag size");
  cmd->add_option("--batch", f.batch, "anchors per step");
  cmd->add_option("--tau-min", f.tau_min, "curriculum start temperature");
  cmd->add_option("--tau-max", f.tau_max, "curriculum end temperature");
  cmd->add_option("--lr", f.lr, "AdamW learning rate");
  cmd->add_option("--sampling", f.sampling, "topk|exp");
  cmd->add_option("--level", f.level, "tracklet|frame|both");
  cmd->add_option("--seed", f.seed, "training seed");
  cmd->add_flag("--curriculum,!--no-curriculum", f.curriculum, "anneal tau over training");
}

void apply(const TrainFlags& f, RunConfig& c) {
  if (f.steps) c.train.total_steps = *f.steps;
  if (f.K) c.train.K = *f.K;
  if (f.batch) c.train.batch_size = *f.batch;
  if (f.tau_min) c.train.schedule.tau_min = *f.tau_min;
  if (f.tau_max) c.train.schedule.tau_max = *f.tau_max;
  if (f.lr) c.train.lr = *f.lr;
  if (f.sampling) c.train.sampling = parse_sampling(*f.sampling);
  if (f.level) c.loss.level = parse_level(*f.level);
  if (f.seed) c.train.seed = *f.seed;
  if (f.curriculum) c.train.curriculum = *f.curriculum;
  c.validate();
}

// Tracklet length and feature width come from the data; the config must agree.
void check_data(const RunConfig& c, const TrackletDataset& d) {
  if (c.encoder.L != d.L() || c.encoder.d_in != d.d_in()) {
    throw MismatchError("config mismatch: encoder expects L=" + std::to_string(c.encoder.L) +
                        " d_in=" + std::to_string(c.encoder.d_in) + ", dataset has L=" +
                        std::to_string(d.L()) + " d_in=" + std::to_string(d.d_in()));
  }
}

}  // namespace

int run_cli(int argc, const char* const* argv, std::ostream& out, std::ostream& err) {
  CLI::App app{"Noise-aware temporal self-supervised tracklet embeddings", "ntssl"};
  app.require_subcommand(1);
  app.set_help_all_flag("--help-all");

  std::string config_path;
  auto add_config = [&](CLI::App* cmd) {
    cmd->add_option("--config", config_path, "JSON run config (defaults when omitted)");
  };

  // generate
  auto* gen = app.add_subcommand("generate", "synthesize a tracklet dataset");
  std::optional<std::uint64_t> gen_seed;
  std::string gen_out;
  gen->add_option("config,--config", config_path, "JSON run config (defaults when omitted)");
  gen->add_option("--seed", gen_seed, "generator seed");
  gen->add_option("--out", gen_out, "output dataset (JSONL)")->required();

  // train
  auto* tr = app.add_subcommand("train", "train an encoder on a dataset");
  std::string tr_data, tr_out, tr_log;
  TrainFlags tr_flags;
  add_config(tr);
  tr->add_option("--data", tr_data, "dataset file")->required();
  tr->add_option("--out", tr_out, "output checkpoint")->required();
  tr->add_option("--log", tr_log, "step log CSV (default <out>.steps.csv)");
  add_train_flags(tr, tr_flags);

  // eval
  auto* ev = app.add_subcommand("eval", "evaluate a checkpoint");
  std::string ev_data, ev_ckpt, ev_tasks = "retrieval,reid,probe", ev_out;
  add_config(ev);
  ev->add_option("--data", ev_data, "dataset file")->required();
  ev->add_option("--checkpoint", ev_ckpt, "checkpoint file")->required();
  ev->add_option("--tasks", ev_tasks, "comma list of retrieval,reid,probe");
  ev->add_option("--out", ev_out, "report JSON (stdout when omitted)");

  // diagnose-sampler
  auto* ds = app.add_subcommand("diagnose-sampler", "sampled rank and bag purity along the curriculum");
  std::string ds_data, ds_out;
  std::size_t ds_samples = 10000, ds_grid = 11;
  std::optional<std::size_t> ds_K;
  std::optional<std::uint64_t> ds_seed;
  add_config(ds);
  ds->add_option("--data", ds_data, "dataset file")->required();
  ds->add_option("--samples", ds_samples, "bags per curriculum point");
  ds->add_option("--grid", ds_grid, "number of evenly spaced c values");
  ds->add_option("--K", ds_K, "bag size");
  ds->add_option("--seed", ds_seed, "sampling seed");
  ds->add_option("--out", ds_out, "CSV output (stdout when omitted)");

  // sweep
  auto* sw = app.add_subcommand("sweep", "sampler and level ablation");
  std::string sw_data, sw_out, sw_tasks = "retrieval,reid,probe";
  bool sw_force = false;
  TrainFlags sw_flags;
  add_config(sw);
  sw->add_option("--data", sw_data, "dataset file")->required();
  sw->add_option("--out-dir", sw_out, "output directory")->required();
  sw->add_option("--tasks", sw_tasks, "comma list of retrieval,reid,probe");
  sw->add_flag("--force", sw_force, "overwrite an existing output directory");
  add_train_flags(sw, sw_flags);

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    out << app.help();
    return 0;
  } catch (const CLI::CallForAllHelp& e) {
    out << app.help("", CLI::AppFormatMode::All);
    return 0;
  } catch (const CLI::ParseError& e) {
    err << "error: usage: " << one_line(e.what()) << '\n';
    return static_cast<int>(ErrorKind::usage);
  }

  try {
    if (*gen) {
      RunConfig c = base_config(config_path);
      if (gen_seed) c.synth.seed = *gen_seed;
      c.validate();
      const TrackletDataset d = generate_dataset(c.synth, c.builder);
      save_dataset(d, gen_out);
      std::set<std::string> videos, polyps;
      for (std::size_t i = 0; i < d.size(); ++i) {
        videos.insert(d.video_id(i));
        if (const auto& p = d.labels(i).polyp_id) polyps.insert(*p);
      }
      out << "tracklets=" << d.size() << " videos=" << videos.size() << " polyps=" << polyps.size()
          << " L=" << d.L() << " d_in=" << d.d_in() << '\n';
    } else if (*tr) {
      RunConfig c = base_config(config_path);
      apply(tr_flags, c);
      const TrackletDataset d = load_dataset(tr_data);
      check_data(c, d);
      TrainResult r = train(d, c.encoder, c.loss, c.train, to_json(c));
      save_checkpoint(r.checkpoint, tr_out);
      const fs::path log = tr_log.empty() ? fs::path(tr_out + ".steps.csv") : fs::path(tr_log);
      write_step_log(r.log, log);
      out << "steps=" << r.log.size() << " usable_anchors=" << r.usable_anchors << std::setprecision(6)
          << " final_loss=" << (r.log.empty() ? 0.0 : r.log.back().loss_total) << '\n';
    } else if (*ev) {
      RunConfig c = base_config(config_path);
      const EvalTasks tasks = parse_tasks(ev_tasks);
      const TrackletDataset d = load_dataset(ev_data);
      Checkpoint ck = load_checkpoint(ev_ckpt);
      const MetricsReport rep = evaluate(d, ck, tasks, c.probe);
      if (ev_out.empty()) out << to_json(rep).dump(2) << '\n';
      else write_report(rep, ev_out);
    } else if (*ds) {
      RunConfig c = base_config(config_path);
      const std::size_t K = ds_K.value_or(c.train.K);
      const TrackletDataset d = load_dataset(ds_data);
      const auto pts = diagnose_sampler(d, K, c.train.schedule, ds_grid, ds_samples, ds_seed.value_or(c.train.seed));
      std::ostringstream os;
      os << std::setprecision(17) << "c,tau,mean_rank,purity\n";
      for (const SamplerPoint& p : pts) os << p.c << ',' << p.tau << ',' << p.mean_rank << ',' << p.purity << '\n';
      if (ds_out.empty()) out << os.str();
      else write_text(ds_out, os.str());
    } else if (*sw) {
      RunConfig c = base_config(config_path);
      apply(sw_flags, c);
      const EvalTasks tasks = parse_tasks(sw_tasks);
      const fs::path dir(sw_out);
      if (fs::exists(dir) && !(fs::is_directory(dir) && fs::is_empty(dir))) {
        if (!sw_force) throw UsageError("output directory '" + sw_out + "' exists; pass --force to overwrite");
      }
      fs::create_directories(dir);
      const TrackletDataset d = load_dataset(sw_data);
      check_data(c, d);
      const auto variants = ablation_variants(c.loss.level);
      const auto rows = ablation_sweep(d, c, tasks, variants, dir);
      out << sweep_csv(rows);
    }
  } catch (const Error& e) {
    err << "error: " << to_string(e.kind()) << ": " << one_line(e.what()) << '\n';
    return static_cast<int>(e.kind());
  } catch (const nlohmann::json::exception& e) {
    err << "error: usage: " << one_line(e.what()) << '\n';
    return static_cast<int>(ErrorKind::usage);
  } catch (const fs::filesystem_error& e) {
    err << "error: usage: " << one_line(e.what()) << '\n';
    return static_cast<int>(ErrorKind::usage);
  }
  return 0;
}

}  // namespace ntssl
