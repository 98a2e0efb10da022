#pragma once

#include <map>
#include <string>
#include <vector>

#include "orion/baselines.hpp"
#include "orion/trainer.hpp"

namespace orion {

struct ExperimentConfig {
  MapParams map;
  DiscrepancyConfig discrepancies{1, 1, 2, 0};
  GraphConfig graph;
  SensorConfig sensor;
  RewardConfig reward;
  std::vector<int> team_sizes = {2, 3};
  int episodes_per_cell = 3;
  std::vector<std::string> planners = {"greedy+dual", "prioritized"};
  std::uint64_t seed_base = 1;
  int step_cap = 128;
  double kappa = 1.0;
  bool dual_stage = true;
  std::string out_dir = "results";
  int jobs = 1;
  // Wall-clock measurement makes the CSV nondeterministic; it is opt-in so
  // that identical configs reproduce byte-identical outputs by default.
  bool measure_time = false;
  NetConfig net;
  std::string checkpoint;  // actor parameters for the learned planners
};

ExperimentConfig experiment_from_json(const std::string& text);
std::string experiment_to_json(const ExperimentConfig& cfg);

EngineConfig engine_config(const ExperimentConfig& cfg, int agents);

// Known planner names: greedy, greedy+dual, prioritized, prioritized-optimistic,
// orion, orion-greedy, orion-no-option, orion-no-dual.
std::vector<std::string> known_planners();
// The dual-stage gate is engine-side; this reports whether a planner variant
// disables it.
bool planner_uses_dual_stage(const std::string& name, const ExperimentConfig& cfg);
std::unique_ptr<Controller> make_planner(const std::string& name, const ExperimentConfig& cfg,
                                         const PolicyNet* net, const ParameterStore* params,
                                         std::uint64_t episode_seed);

struct ResultsRow {
  std::string planner;
  int agents = 0;
  double max_mean = 0, max_var = 0;
  double avg_mean = 0, avg_var = 0;
  double min_mean = 0, min_var = 0;
  double steps_mean = 0;
  double success_rate = 0;
  double sec_per_decision = 0;
};

std::string episode_log_name(const std::string& planner, int agents, int episode);

struct RunReport {
  std::vector<ResultsRow> rows;
  int episodes_run = 0;
  int episodes_skipped = 0;  // resumed cells
  int failures = 0;
};

// Runs every (planner, team size, episode) cell, writes JSON-lines logs and
// the aggregate CSV (fixed header). Existing complete logs are reused, so an
// interrupted run resumes to identical outputs.
RunReport run_experiment(const ExperimentConfig& cfg);

struct AggregateResult {
  std::vector<ResultsRow> rows;
  int skipped_lines = 0;
  std::string table;  // human-readable, paper-style "mean (+-var)" cells
};

AggregateResult aggregate_logs(const std::vector<std::string>& log_paths,
                               const std::map<std::string, double>& sec_per_decision = {});
std::string results_csv(const std::vector<ResultsRow>& rows);

// Replays a finished log through a fresh engine (reconstructed from the
// episode seed) and renders the final combined map plus trajectories.
std::string render_svg(const EpisodeLog& log, const ExperimentConfig& cfg,
                       const std::string& planner);

struct ProfileRow {
  int step = 0;
  double graph_update_s = 0;
  double inference_s = 0;
  int prior_utility = 0;  // nodes on or next to the prior-frontier boundary
};

// Single-episode runtime profile with the greedy actor at cfg.net scale.
std::vector<ProfileRow> profile_runtime(const ExperimentConfig& cfg, int agents,
                                        std::uint64_t seed);
std::string profile_csv(const std::vector<ProfileRow>& rows);

// ---------------------------------------------------------------------------
// Training manifest for the CLI `train` subcommand.
// ---------------------------------------------------------------------------

struct TrainManifest {
  TrainConfig train;
  EngineConfig env;
  int updates = 2000;
  int warmup_transitions = 400;
  int env_steps_per_update = 2;
  int eval_episodes = 50;
  std::uint64_t eval_seed_base = 90000;
  // Checkpoint selection: every `select_every` updates the policy is scored
  // on `select_episodes` greedy episodes (independent seed stream) and the
  // best-scoring parameters become the result. 0 disables selection.
  int select_every = 0;
  int select_episodes = 12;
  std::vector<std::uint64_t> seeds = {1};
};

TrainManifest manifest_from_json(const std::string& text);
std::string manifest_to_json(const TrainManifest& m);

struct TrainResult {
  std::uint64_t seed = 0;
  std::string loss_trace_csv;     // update,critic_loss,policy_loss,term_loss,mean_return
  ParameterStore params;
  double untrained_mean_return = 0;
  double trained_mean_return = 0;
  double untrained_success = 0;
  double trained_success = 0;
};

struct EvalStats {
  double mean_return = 0;
  double success_rate = 0;
  double mean_makespan = 0;
};

EvalStats evaluate_policy(const PolicyNet& net, const ParameterStore& params,
                          const EngineConfig& env, int episodes, std::uint64_t seed_base);

TrainResult train_policy(const TrainManifest& manifest, std::uint64_t seed,
                         const std::function<void(int, const LossReport&)>& on_update = {});

}  // namespace orion
