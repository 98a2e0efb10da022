#include <CLI11.hpp>

#include <filesystem>
#include <fstream>
#include <iostream>
#include <sstream>

#include "orion/experiment.hpp"

namespace fs = std::filesystem;

namespace {

std::string slurp(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot open " + path);
  std::ostringstream buf;
  buf << in.rdbuf();
  return buf.str();
}

void spit(const std::string& path, const std::string& bytes) {
  if (fs::path(path).has_parent_path()) fs::create_directories(fs::path(path).parent_path());
  std::ofstream out(path, std::ios::binary);
  out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"orion: cooperative multi-agent online navigation benchmark"};
  app.require_subcommand(1);

  // ---- run ---------------------------------------------------------------
  std::string run_config;
  std::string run_out;
  std::string run_planner;
  std::uint64_t run_seed = 0;
  int run_agents = 0;
  int run_jobs = 0;
  bool run_measure_time = false;
  auto* run = app.add_subcommand("run", "run a benchmark experiment grid");
  run->add_option("--config", run_config, "experiment config JSON")->required();
  run->add_option("--out", run_out, "output directory (overrides config)");
  run->add_option("--planner", run_planner, "restrict to a single planner");
  run->add_option("--seed", run_seed, "override seed_base");
  run->add_option("--agents", run_agents, "restrict to a single team size");
  run->add_option("--jobs", run_jobs, "parallel episode workers");
  run->add_flag("--measure-time", run_measure_time,
                "record wall-clock per decision (makes the CSV nondeterministic)");

  // ---- aggregate ----------------------------------------------------------
  std::string agg_logs;
  std::string agg_out;
  auto* agg = app.add_subcommand("aggregate", "aggregate episode logs into a results table");
  agg->add_option("--logs", agg_logs, "directory of .jsonl episode logs")->required();
  agg->add_option("--out", agg_out, "CSV output path");

  // ---- render ---------------------------------------------------------------
  std::string render_config, render_log, render_out, render_planner = "greedy";
  auto* render = app.add_subcommand("render", "render an episode log to SVG");
  render->add_option("--config", render_config, "experiment config JSON")->required();
  render->add_option("--log", render_log, "episode .jsonl log")->required();
  render->add_option("--out", render_out, "SVG output path")->required();
  render->add_option("--planner", render_planner, "planner the log was produced with");

  // ---- profile --------------------------------------------------------------
  std::string prof_config, prof_out;
  int prof_agents = 10;
  std::uint64_t prof_seed = 1;
  auto* prof = app.add_subcommand("profile", "single-episode runtime profile");
  prof->add_option("--config", prof_config, "experiment config JSON")->required();
  prof->add_option("--out", prof_out, "CSV output path")->required();
  prof->add_option("--agents", prof_agents, "team size");
  prof->add_option("--seed", prof_seed, "episode seed");

  // ---- train ------------------------------------------------------------------
  std::string train_config, train_out;
  auto* train = app.add_subcommand("train", "train the actor-critic from a manifest");
  train->add_option("--config", train_config, "training manifest JSON")->required();
  train->add_option("--out", train_out, "output directory")->required();

  CLI11_PARSE(app, argc, argv);

  try {
    if (*run) {
      orion::ExperimentConfig cfg = orion::experiment_from_json(slurp(run_config));
      if (!run_out.empty()) cfg.out_dir = run_out;
      if (!run_planner.empty()) cfg.planners = {run_planner};
      if (run_seed) cfg.seed_base = run_seed;
      if (run_agents) cfg.team_sizes = {run_agents};
      if (run_jobs) cfg.jobs = run_jobs;
      if (run_measure_time) cfg.measure_time = true;
      const orion::RunReport report = orion::run_experiment(cfg);
      std::cout << "episodes run: " << report.episodes_run
                << ", resumed: " << report.episodes_skipped
                << ", failures: " << report.failures << "\n";
      std::cout << "results: " << (fs::path(cfg.out_dir) / "results.csv").string() << "\n";
      const auto agg_res = orion::aggregate_logs({});
      (void)agg_res;
      std::vector<std::string> paths;
      for (const auto& entry : fs::directory_iterator(fs::path(cfg.out_dir) / "logs")) {
        if (entry.path().extension() == ".jsonl") paths.push_back(entry.path().string());
      }
      std::sort(paths.begin(), paths.end());
      std::cout << orion::aggregate_logs(paths).table;
      return report.failures == 0 ? 0 : 1;
    }
    if (*agg) {
      std::vector<std::string> paths;
      for (const auto& entry : fs::directory_iterator(agg_logs)) {
        if (entry.path().extension() == ".jsonl") paths.push_back(entry.path().string());
      }
      std::sort(paths.begin(), paths.end());
      const orion::AggregateResult result = orion::aggregate_logs(paths);
      if (result.skipped_lines) {
        std::cerr << "warning: skipped " << result.skipped_lines << " unreadable logs\n";
      }
      std::cout << result.table;
      if (!agg_out.empty()) spit(agg_out, orion::results_csv(result.rows));
      return 0;
    }
    if (*render) {
      const orion::ExperimentConfig cfg = orion::experiment_from_json(slurp(render_config));
      const orion::EpisodeLog log = orion::EpisodeLog::from_jsonl(slurp(render_log));
      spit(render_out, orion::render_svg(log, cfg, render_planner));
      std::cout << "wrote " << render_out << "\n";
      return 0;
    }
    if (*prof) {
      const orion::ExperimentConfig cfg = orion::experiment_from_json(slurp(prof_config));
      const auto rows = orion::profile_runtime(cfg, prof_agents, prof_seed);
      spit(prof_out, orion::profile_csv(rows));
      double max_rebuild = 0, max_infer = 0;
      for (const auto& r : rows) {
        max_rebuild = std::max(max_rebuild, r.graph_update_s);
        max_infer = std::max(max_infer, r.inference_s);
      }
      std::cout << "steps: " << rows.size() << ", max graph update: " << max_rebuild
                << " s, max team inference: " << max_infer << " s\n";
      return 0;
    }
    if (*train) {
      const orion::TrainManifest manifest = orion::manifest_from_json(slurp(train_config));
      fs::create_directories(train_out);
      spit((fs::path(train_out) / "manifest.json").string(), orion::manifest_to_json(manifest));
      for (std::uint64_t seed : manifest.seeds) {
        std::cout << "training seed " << seed << "..." << std::endl;
        const orion::TrainResult result = orion::train_policy(manifest, seed);
        const std::string stem = "seed" + std::to_string(seed);
        spit((fs::path(train_out) / (stem + "_loss.csv")).string(), result.loss_trace_csv);
        orion::save_checkpoint(result.params,
                               (fs::path(train_out) / (stem + "_params.ckpt")).string());
        std::cout << "  untrained return " << result.untrained_mean_return << " (success "
                  << result.untrained_success << ")  ->  trained return "
                  << result.trained_mean_return << " (success " << result.trained_success
                  << ")\n";
      }
      return 0;
    }
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  }
  return 0;
}
