#include "orion/experiment.hpp"

#include <algorithm>
#include <atomic>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <thread>

#include <json.hpp>

namespace orion {

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

json graph_to_json(const GraphConfig& g) {
  return {{"node_spacing", g.node_spacing}, {"k_max", g.k_max}, {"r_b", g.r_b}};
}
void graph_from_json(const json& j, GraphConfig& g) {
  g.node_spacing = j.value("node_spacing", g.node_spacing);
  g.k_max = j.value("k_max", g.k_max);
  g.r_b = j.value("r_b", g.r_b);
}

json map_to_json(const MapParams& m) {
  return {{"width", m.width},
          {"height", m.height},
          {"corridor_width", m.corridor_width},
          {"obstacle_density", m.obstacle_density}};
}
void map_from_json(const json& j, MapParams& m) {
  m.width = j.value("width", m.width);
  m.height = j.value("height", m.height);
  m.corridor_width = j.value("corridor_width", m.corridor_width);
  m.obstacle_density = j.value("obstacle_density", m.obstacle_density);
}

json disc_to_json(const DiscrepancyConfig& d) {
  return {{"add_blocks", d.add_block_count},
          {"remove_blocks", d.remove_block_count},
          {"block_size", d.block_size},
          {"seed", d.seed}};
}
void disc_from_json(const json& j, DiscrepancyConfig& d) {
  d.add_block_count = j.value("add_blocks", d.add_block_count);
  d.remove_block_count = j.value("remove_blocks", d.remove_block_count);
  d.block_size = j.value("block_size", d.block_size);
  d.seed = j.value("seed", d.seed);
}

json reward_to_json(const RewardConfig& r) {
  return {{"step_cost_scale", r.step_cost_scale},
          {"arrival_bonus", r.arrival_bonus},
          {"team_done_bonus", r.team_done_bonus},
          {"frontier_bonus", r.frontier_bonus}};
}
void reward_from_json(const json& j, RewardConfig& r) {
  r.step_cost_scale = j.value("step_cost_scale", r.step_cost_scale);
  r.arrival_bonus = j.value("arrival_bonus", r.arrival_bonus);
  r.team_done_bonus = j.value("team_done_bonus", r.team_done_bonus);
  r.frontier_bonus = j.value("frontier_bonus", r.frontier_bonus);
}

json net_to_json(const NetConfig& n) {
  return {{"d", n.d},
          {"heads", n.heads},
          {"encoder_layers", n.encoder_layers},
          {"options", n.option_count}};
}
void net_from_json(const json& j, NetConfig& n) {
  n.d = j.value("d", n.d);
  n.heads = j.value("heads", n.heads);
  n.encoder_layers = j.value("encoder_layers", n.encoder_layers);
  n.option_count = j.value("options", n.option_count);
}

std::string format_double(double v) {
  char buf[64];
  std::snprintf(buf, sizeof(buf), "%.6f", v);
  return buf;
}

}  // namespace

ExperimentConfig experiment_from_json(const std::string& text) {
  const json j = json::parse(text);
  ExperimentConfig cfg;
  if (j.contains("map")) map_from_json(j["map"], cfg.map);
  if (j.contains("discrepancies")) disc_from_json(j["discrepancies"], cfg.discrepancies);
  if (j.contains("graph")) graph_from_json(j["graph"], cfg.graph);
  if (j.contains("sensor")) cfg.sensor.r_fov = j["sensor"].value("r_fov", cfg.sensor.r_fov);
  if (j.contains("reward")) reward_from_json(j["reward"], cfg.reward);
  if (j.contains("net")) net_from_json(j["net"], cfg.net);
  cfg.team_sizes = j.value("team_sizes", cfg.team_sizes);
  cfg.episodes_per_cell = j.value("episodes_per_cell", cfg.episodes_per_cell);
  cfg.planners = j.value("planners", cfg.planners);
  cfg.seed_base = j.value("seed_base", cfg.seed_base);
  cfg.step_cap = j.value("step_cap", cfg.step_cap);
  cfg.kappa = j.value("kappa", cfg.kappa);
  cfg.dual_stage = j.value("dual_stage", cfg.dual_stage);
  cfg.out_dir = j.value("out_dir", cfg.out_dir);
  cfg.jobs = j.value("jobs", cfg.jobs);
  cfg.measure_time = j.value("measure_time", cfg.measure_time);
  cfg.checkpoint = j.value("checkpoint", cfg.checkpoint);
  return cfg;
}

std::string experiment_to_json(const ExperimentConfig& cfg) {
  json j;
  j["map"] = map_to_json(cfg.map);
  j["discrepancies"] = disc_to_json(cfg.discrepancies);
  j["graph"] = graph_to_json(cfg.graph);
  j["sensor"] = {{"r_fov", cfg.sensor.r_fov}};
  j["reward"] = reward_to_json(cfg.reward);
  j["net"] = net_to_json(cfg.net);
  j["team_sizes"] = cfg.team_sizes;
  j["episodes_per_cell"] = cfg.episodes_per_cell;
  j["planners"] = cfg.planners;
  j["seed_base"] = cfg.seed_base;
  j["step_cap"] = cfg.step_cap;
  j["kappa"] = cfg.kappa;
  j["dual_stage"] = cfg.dual_stage;
  j["out_dir"] = cfg.out_dir;
  j["jobs"] = cfg.jobs;
  j["measure_time"] = cfg.measure_time;
  j["checkpoint"] = cfg.checkpoint;
  return j.dump(2);
}

EngineConfig engine_config(const ExperimentConfig& cfg, int agents) {
  EngineConfig e;
  e.map = cfg.map;
  e.discrepancies = cfg.discrepancies;
  e.graph = cfg.graph;
  e.sensor = cfg.sensor;
  e.reward = cfg.reward;
  e.n_agents = agents;
  e.step_cap = cfg.step_cap;
  e.kappa = cfg.kappa;
  e.dual_stage_enabled = cfg.dual_stage;
  return e;
}

std::vector<std::string> known_planners() {
  return {"greedy",
          "greedy+dual",
          "prioritized",
          "prioritized-optimistic",
          "orion",
          "orion-greedy",
          "orion-no-option",
          "orion-no-dual"};
}

bool planner_uses_dual_stage(const std::string& name, const ExperimentConfig& cfg) {
  if (name == "orion-no-dual") return false;
  if (name == "greedy") return false;  // plain baseline never departs
  return cfg.dual_stage;
}

std::unique_ptr<Controller> make_planner(const std::string& name, const ExperimentConfig& cfg,
                                         const PolicyNet* net, const ParameterStore* params,
                                         std::uint64_t episode_seed) {
  (void)cfg;
  if (name == "greedy") return std::make_unique<GreedyDijkstraController>();
  if (name == "greedy+dual") {
    return std::make_unique<DualStageWrapper>(std::make_unique<GreedyDijkstraController>());
  }
  if (name == "prioritized") return std::make_unique<PrioritizedReplanController>(false);
  if (name == "prioritized-optimistic") {
    return std::make_unique<PrioritizedReplanController>(true);
  }
  if (name == "orion" || name == "orion-greedy" || name == "orion-no-option" ||
      name == "orion-no-dual") {
    if (!net || !params) throw SetupError("planner '" + name + "' needs actor parameters");
    AblationFlags flags;
    flags.without_option = name == "orion-no-option";
    flags.without_dual_stage = name == "orion-no-dual";
    const bool greedy = name != "orion";  // plain "orion" samples stochastically
    return std::make_unique<ActorController>(*net, *params, greedy, episode_seed ^ 0x5bd1e995ULL,
                                             flags);
  }
  throw SetupError("unknown planner '" + name + "'");
}

std::string episode_log_name(const std::string& planner, int agents, int episode) {
  std::string safe = planner;
  for (char& c : safe) {
    if (c == '+') c = '-';
  }
  return safe + "_a" + std::to_string(agents) + "_e" + std::to_string(episode) + ".jsonl";
}

namespace {

struct CellSpec {
  std::string planner;
  int agents;
  int episode;
  std::uint64_t seed;
};

struct CellOutcome {
  bool failed = false;
  bool skipped = false;
  double seconds_per_decision = 0.0;
};

double run_episode_timed(Engine& engine, Controller& ctrl) {
  ctrl.reset(engine);
  const auto t0 = std::chrono::steady_clock::now();
  while (!engine.done()) {
    const JointAction proposal = ctrl.propose(engine);
    const JointAction constrained = engine.apply_dual_stage_constraint(proposal);
    const StepOutcome out = engine.step(engine.resolve_conflicts(constrained));
    ctrl.post_step(engine, out);
  }
  const double total =
      std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  return total / std::max(1, engine.step_count());
}

}  // namespace

RunReport run_experiment(const ExperimentConfig& cfg) {
  fs::create_directories(cfg.out_dir);
  fs::create_directories(fs::path(cfg.out_dir) / "logs");

  // Actor parameters for the learned planners.
  PolicyNet net(cfg.net);
  ParameterStore params;
  bool needs_actor = false;
  for (const std::string& p : cfg.planners) {
    needs_actor |= p.rfind("orion", 0) == 0;
  }
  if (needs_actor) {
    if (!cfg.checkpoint.empty()) {
      params = load_checkpoint(cfg.checkpoint);
    } else {
      Rng rng(cfg.seed_base ^ 0xabcdef12345ULL);
      PolicyNet::init(params, cfg.net, rng);
    }
  }

  std::vector<CellSpec> cells;
  for (const std::string& planner : cfg.planners) {
    for (int agents : cfg.team_sizes) {
      for (int e = 0; e < cfg.episodes_per_cell; ++e) {
        // Episode worlds are shared across planners (same seed per
        // (team size, episode)) so comparisons are paired.
        const std::uint64_t seed =
            Rng(cfg.seed_base).fork(static_cast<std::uint64_t>(agents) * 1000 + e).next_u64() |
            1ULL;
        cells.push_back({planner, agents, e, seed});
      }
    }
  }

  std::vector<CellOutcome> outcomes(cells.size());
  std::atomic<size_t> next{0};
  auto worker = [&]() {
    while (true) {
      const size_t k = next.fetch_add(1);
      if (k >= cells.size()) return;
      const CellSpec& cell = cells[k];
      const fs::path log_path = fs::path(cfg.out_dir) / "logs" /
                                episode_log_name(cell.planner, cell.agents, cell.episode);
      try {
        if (fs::exists(log_path)) {
          std::ifstream in(log_path, std::ios::binary);
          std::ostringstream buf;
          buf << in.rdbuf();
          const EpisodeLog existing = EpisodeLog::from_jsonl(buf.str());
          if (existing.finished) {
            outcomes[k].skipped = true;
            continue;
          }
        }
        ExperimentConfig local = cfg;
        local.dual_stage = planner_uses_dual_stage(cell.planner, cfg);
        Engine engine(cell.seed, engine_config(local, cell.agents));
        std::unique_ptr<Controller> ctrl =
            make_planner(cell.planner, cfg, &net, &params, cell.seed);
        const double spd = run_episode_timed(engine, *ctrl);
        outcomes[k].seconds_per_decision = cfg.measure_time ? spd : 0.0;
        std::ofstream out(log_path, std::ios::binary);
        out << engine.log().to_jsonl();
      } catch (const std::exception& e) {
        outcomes[k].failed = true;
        std::fprintf(stderr, "[run] cell %s a=%d e=%d failed: %s\n", cell.planner.c_str(),
                     cell.agents, cell.episode, e.what());
      }
    }
  };
  std::vector<std::thread> pool;
  const int jobs = std::max(1, cfg.jobs);
  for (int t = 0; t < jobs - 1; ++t) pool.emplace_back(worker);
  worker();
  for (auto& t : pool) t.join();

  std::vector<std::string> log_paths;
  std::map<std::string, double> timing;
  std::map<std::string, int> timing_counts;
  RunReport report;
  for (size_t k = 0; k < cells.size(); ++k) {
    const CellSpec& cell = cells[k];
    if (outcomes[k].failed) {
      ++report.failures;
      continue;
    }
    report.episodes_run += outcomes[k].skipped ? 0 : 1;
    report.episodes_skipped += outcomes[k].skipped ? 1 : 0;
    log_paths.push_back((fs::path(cfg.out_dir) / "logs" /
                         episode_log_name(cell.planner, cell.agents, cell.episode))
                            .string());
    const std::string key = episode_log_name(cell.planner, cell.agents, 0);
    const std::string tkey = key.substr(0, key.rfind("_e"));
    timing[tkey] += outcomes[k].seconds_per_decision;
    timing_counts[tkey] += 1;
  }
  for (auto& [key, total] : timing) total /= std::max(1, timing_counts[key]);

  const AggregateResult agg = aggregate_logs(log_paths, timing);
  report.rows = agg.rows;

  std::ofstream csv(fs::path(cfg.out_dir) / "results.csv", std::ios::binary);
  csv << results_csv(report.rows);
  std::ofstream cfg_out(fs::path(cfg.out_dir) / "config.json", std::ios::binary);
  cfg_out << experiment_to_json(cfg);
  return report;
}

AggregateResult aggregate_logs(const std::vector<std::string>& log_paths,
                               const std::map<std::string, double>& sec_per_decision) {
  struct Acc {
    std::vector<double> max_d, avg_d, min_d, steps;
    int successes = 0;
    int episodes = 0;
  };
  std::map<std::pair<std::string, int>, Acc> acc;
  AggregateResult result;

  for (const std::string& path : log_paths) {
    std::ifstream in(path, std::ios::binary);
    if (!in) {
      ++result.skipped_lines;
      continue;
    }
    std::ostringstream buf;
    buf << in.rdbuf();
    EpisodeLog log;
    try {
      log = EpisodeLog::from_jsonl(buf.str());
    } catch (const std::exception&) {
      ++result.skipped_lines;
      continue;
    }
    if (!log.finished) {
      ++result.skipped_lines;
      continue;
    }
    // Planner name from the file name: <planner>_a<agents>_e<episode>.jsonl
    const std::string name = fs::path(path).filename().string();
    const size_t a_pos = name.rfind("_a");
    const std::string planner = a_pos == std::string::npos ? name : name.substr(0, a_pos);
    Acc& a = acc[{planner, log.n_agents}];
    a.max_d.push_back(log.metrics.max_dist);
    a.avg_d.push_back(log.metrics.avg_dist);
    a.min_d.push_back(log.metrics.min_dist);
    a.steps.push_back(log.metrics.steps);
    a.successes += log.metrics.success ? 1 : 0;
    a.episodes += 1;
  }

  auto mean = [](const std::vector<double>& v) {
    double s = 0;
    for (double x : v) s += x;
    return v.empty() ? 0.0 : s / v.size();
  };
  // Population variance (divide by N), matching the "(+-variance)" reporting.
  auto var = [&mean](const std::vector<double>& v) {
    if (v.empty()) return 0.0;
    const double m = mean(v);
    double s = 0;
    for (double x : v) s += (x - m) * (x - m);
    return s / v.size();
  };

  std::ostringstream table;
  table << "planner                 agents  max dist (m)        avg dist (m)        steps   success\n";
  for (const auto& [key, a] : acc) {
    ResultsRow row;
    row.planner = key.first;
    row.agents = key.second;
    row.max_mean = mean(a.max_d);
    row.max_var = var(a.max_d);
    row.avg_mean = mean(a.avg_d);
    row.avg_var = var(a.avg_d);
    row.min_mean = mean(a.min_d);
    row.min_var = var(a.min_d);
    row.steps_mean = mean(a.steps);
    row.success_rate = a.episodes ? static_cast<double>(a.successes) / a.episodes : 0.0;
    const auto it = sec_per_decision.find(key.first + "_a" + std::to_string(key.second));
    row.sec_per_decision = it == sec_per_decision.end() ? 0.0 : it->second;
    result.rows.push_back(row);

    char line[256];
    std::snprintf(line, sizeof(line),
                  "%-23s %6d  %7.2f (+-%6.2f)  %7.2f (+-%6.2f)  %6.2f  %6.2f\n",
                  row.planner.c_str(), row.agents, row.max_mean, row.max_var, row.avg_mean,
                  row.avg_var, row.steps_mean, row.success_rate);
    table << line;
  }
  std::sort(result.rows.begin(), result.rows.end(), [](const ResultsRow& a, const ResultsRow& b) {
    if (a.planner != b.planner) return a.planner < b.planner;
    return a.agents < b.agents;
  });
  result.table = table.str();
  return result;
}

std::string results_csv(const std::vector<ResultsRow>& rows) {
  std::ostringstream out;
  out << "planner,agents,max_mean,max_var,avg_mean,avg_var,min_mean,min_var,steps_mean,"
         "success_rate,sec_per_decision\n";
  for (const ResultsRow& r : rows) {
    out << r.planner << ',' << r.agents << ',' << format_double(r.max_mean) << ','
        << format_double(r.max_var) << ',' << format_double(r.avg_mean) << ','
        << format_double(r.avg_var) << ',' << format_double(r.min_mean) << ','
        << format_double(r.min_var) << ',' << format_double(r.steps_mean) << ','
        << format_double(r.success_rate) << ',' << format_double(r.sec_per_decision) << '\n';
  }
  return out.str();
}

std::string render_svg(const EpisodeLog& log, const ExperimentConfig& cfg,
                       const std::string& planner) {
  // Rebuild the world and replay the recorded moves to recover the final
  // combined map.
  ExperimentConfig local = cfg;
  local.dual_stage = planner_uses_dual_stage(planner, cfg);
  Engine engine(log.seed, engine_config(local, log.n_agents));

  std::vector<std::vector<Point>> trails(log.n_agents);
  for (int i = 0; i < log.n_agents; ++i) {
    trails[i].push_back(engine.graph().node_by_id(log.start_nodes[i]).position);
  }
  for (const StepRecord& rec : log.records) {
    if (engine.done()) break;
    JointAction act;
    act.next_node = rec.nodes;
    engine.step(act);
    for (int i = 0; i < log.n_agents; ++i) {
      trails[i].push_back(engine.graph().node_by_id(rec.nodes[i]).position);
    }
  }

  const OccupancyGrid& m = engine.belief().combined();
  const int cell_px = 12;
  std::ostringstream svg;
  svg << "<?xml version=\"1.0\" encoding=\"UTF-8\"?>\n";
  svg << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << m.width * cell_px
      << "\" height=\"" << m.height * cell_px << "\" viewBox=\"0 0 " << m.width * cell_px << " "
      << m.height * cell_px << "\">\n";
  svg << "<rect width=\"100%\" height=\"100%\" fill=\"#eef2f5\"/>\n";
  for (int y = 0; y < m.height; ++y) {
    for (int x = 0; x < m.width; ++x) {
      const CellState s = m.at({x, y});
      if (s == CellState::Free) continue;
      const char* color = s == CellState::Occupied
                              ? (engine.belief().verified({x, y}) ? "#30343a" : "#8a8f98")
                              : "#d8d8d8";
      svg << "<rect x=\"" << x * cell_px << "\" y=\"" << y * cell_px << "\" width=\"" << cell_px
          << "\" height=\"" << cell_px << "\" fill=\"" << color << "\"/>\n";
    }
  }

  const char* palette[] = {"#d1495b", "#edae49", "#00798c", "#6a4c93", "#2e933c", "#a44a3f"};
  auto px = [&](const Point& p) {
    char buf[64];
    std::snprintf(buf, sizeof(buf), "%.2f,%.2f", p.x * cell_px, p.y * cell_px);
    return std::string(buf);
  };
  for (int i = 0; i < log.n_agents; ++i) {
    const char* color = palette[i % 6];
    bool moved = false;
    for (size_t k = 1; k < trails[i].size(); ++k) {
      moved |= !(trails[i][k] == trails[i][0]);
    }
    if (moved) {
      svg << "<polyline fill=\"none\" stroke=\"" << color
          << "\" stroke-width=\"2.5\" stroke-opacity=\"0.85\" points=\"";
      for (size_t k = 0; k < trails[i].size(); ++k) {
        if (k) svg << ' ';
        svg << px(trails[i][k]);
      }
      svg << "\"/>\n";
    }
    const Point s = trails[i].front();
    const Point t = engine.graph().node_by_id(log.target_nodes[i]).position;
    char buf[256];
    std::snprintf(buf, sizeof(buf), "<circle cx=\"%.2f\" cy=\"%.2f\" r=\"5\" fill=\"%s\"/>\n",
                  s.x * cell_px, s.y * cell_px, color);
    svg << buf;
    std::snprintf(buf, sizeof(buf),
                  "<rect x=\"%.2f\" y=\"%.2f\" width=\"10\" height=\"10\" fill=\"none\" "
                  "stroke=\"%s\" stroke-width=\"2.5\"/>\n",
                  t.x * cell_px - 5.0, t.y * cell_px - 5.0, color);
    svg << buf;
  }
  svg << "</svg>\n";
  return svg.str();
}

std::vector<ProfileRow> profile_runtime(const ExperimentConfig& cfg, int agents,
                                        std::uint64_t seed) {
  Engine engine(seed, engine_config(cfg, agents));
  PolicyNet net(cfg.net);
  ParameterStore params;
  if (!cfg.checkpoint.empty()) {
    params = load_checkpoint(cfg.checkpoint);
  } else {
    Rng rng(seed ^ 0x77777777ULL);
    PolicyNet::init(params, cfg.net, rng);
  }
  ActorController ctrl(net, params, /*greedy=*/true, seed);
  ctrl.reset(engine);

  auto prior_utility_nodes = [&engine]() {
    const auto& frontiers = engine.belief().prior_frontiers();
    int count = 0;
    for (const NavNode& n : engine.graph().nodes()) {
      const Cell c = n.cell;
      const Cell probe[5] = {c, {c.x + 1, c.y}, {c.x - 1, c.y}, {c.x, c.y + 1}, {c.x, c.y - 1}};
      for (const Cell& q : probe) {
        if (frontiers.contains(q)) {
          ++count;
          break;
        }
      }
    }
    return count;
  };

  std::vector<ProfileRow> rows;
  while (!engine.done()) {
    ProfileRow row;
    row.step = engine.step_count();
    row.prior_utility = prior_utility_nodes();

    const auto t0 = std::chrono::steady_clock::now();
    const JointAction proposal = ctrl.propose(engine);
    row.inference_s = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();

    const StepOutcome out =
        engine.step(engine.resolve_conflicts(engine.apply_dual_stage_constraint(proposal)));
    ctrl.post_step(engine, out);
    row.graph_update_s = engine.last_rebuild_seconds();
    rows.push_back(row);
  }
  return rows;
}

std::string profile_csv(const std::vector<ProfileRow>& rows) {
  std::ostringstream out;
  out << "step,graph_update_s,inference_s,prior_utility\n";
  for (const ProfileRow& r : rows) {
    out << r.step << ',' << format_double(r.graph_update_s) << ',' << format_double(r.inference_s)
        << ',' << r.prior_utility << '\n';
  }
  return out.str();
}

TrainManifest manifest_from_json(const std::string& text) {
  const json j = json::parse(text);
  TrainManifest m;
  if (j.contains("net")) net_from_json(j["net"], m.train.net);
  m.train.gamma = j.value("gamma", m.train.gamma);
  m.train.alpha = j.value("alpha", m.train.alpha);
  m.train.lambda_term = j.value("lambda_term", m.train.lambda_term);
  m.train.tau = j.value("tau", m.train.tau);
  m.train.lr_actor = j.value("lr_actor", m.train.lr_actor);
  m.train.lr_critic = j.value("lr_critic", m.train.lr_critic);
  m.train.momentum = j.value("momentum", m.train.momentum);
  m.train.lr_half_life = j.value("lr_half_life", m.train.lr_half_life);
  m.train.grad_clip = j.value("grad_clip", m.train.grad_clip);
  m.train.batch_size = j.value("batch_size", m.train.batch_size);
  m.train.replay_capacity = j.value("replay_capacity", m.train.replay_capacity);
  if (j.contains("env")) {
    const json& e = j["env"];
    if (e.contains("map")) map_from_json(e["map"], m.env.map);
    if (e.contains("discrepancies")) disc_from_json(e["discrepancies"], m.env.discrepancies);
    if (e.contains("graph")) graph_from_json(e["graph"], m.env.graph);
    if (e.contains("sensor")) m.env.sensor.r_fov = e["sensor"].value("r_fov", m.env.sensor.r_fov);
    if (e.contains("reward")) reward_from_json(e["reward"], m.env.reward);
    m.env.n_agents = e.value("agents", m.env.n_agents);
    m.env.world_seed = e.value("world_seed", m.env.world_seed);
    m.env.fixed_missions = e.value("fixed_missions", m.env.fixed_missions);
    m.env.step_cap = e.value("step_cap", m.env.step_cap);
    m.env.kappa = e.value("kappa", m.env.kappa);
    m.env.dual_stage_enabled = e.value("dual_stage", m.env.dual_stage_enabled);
  }
  m.updates = j.value("updates", m.updates);
  m.warmup_transitions = j.value("warmup_transitions", m.warmup_transitions);
  m.env_steps_per_update = j.value("env_steps_per_update", m.env_steps_per_update);
  m.eval_episodes = j.value("eval_episodes", m.eval_episodes);
  m.eval_seed_base = j.value("eval_seed_base", m.eval_seed_base);
  m.select_every = j.value("select_every", m.select_every);
  m.select_episodes = j.value("select_episodes", m.select_episodes);
  m.seeds = j.value("seeds", m.seeds);
  return m;
}

std::string manifest_to_json(const TrainManifest& m) {
  json j;
  j["net"] = net_to_json(m.train.net);
  j["gamma"] = m.train.gamma;
  j["alpha"] = m.train.alpha;
  j["lambda_term"] = m.train.lambda_term;
  j["tau"] = m.train.tau;
  j["lr_actor"] = m.train.lr_actor;
  j["lr_critic"] = m.train.lr_critic;
  j["momentum"] = m.train.momentum;
  j["lr_half_life"] = m.train.lr_half_life;
  j["grad_clip"] = m.train.grad_clip;
  j["batch_size"] = m.train.batch_size;
  j["replay_capacity"] = m.train.replay_capacity;
  j["env"] = {{"map", map_to_json(m.env.map)},
              {"discrepancies", disc_to_json(m.env.discrepancies)},
              {"graph", graph_to_json(m.env.graph)},
              {"sensor", {{"r_fov", m.env.sensor.r_fov}}},
              {"reward", reward_to_json(m.env.reward)},
              {"agents", m.env.n_agents},
              {"world_seed", m.env.world_seed},
              {"fixed_missions", m.env.fixed_missions},
              {"step_cap", m.env.step_cap},
              {"kappa", m.env.kappa},
              {"dual_stage", m.env.dual_stage_enabled}};
  j["updates"] = m.updates;
  j["warmup_transitions"] = m.warmup_transitions;
  j["env_steps_per_update"] = m.env_steps_per_update;
  j["eval_episodes"] = m.eval_episodes;
  j["eval_seed_base"] = m.eval_seed_base;
  j["select_every"] = m.select_every;
  j["select_episodes"] = m.select_episodes;
  j["seeds"] = m.seeds;
  return j.dump(2);
}

EvalStats evaluate_policy(const PolicyNet& net, const ParameterStore& params,
                          const EngineConfig& env, int episodes, std::uint64_t seed_base) {
  EvalStats stats;
  double total_return = 0;
  double total_makespan = 0;
  int successes = 0;
  for (int e = 0; e < episodes; ++e) {
    Engine engine(Rng(seed_base).fork(e + 1).next_u64() | 1ULL, env);
    ActorController ctrl(net, params, /*greedy=*/true, seed_base + e);
    const EpisodeLog log = run_episode(engine, ctrl);
    double ep_return = 0;
    for (const StepRecord& r : log.records) {
      for (double rw : r.rewards) ep_return += rw;
    }
    total_return += ep_return;
    total_makespan += log.metrics.max_dist;
    successes += log.metrics.success ? 1 : 0;
  }
  stats.mean_return = total_return / std::max(1, episodes);
  stats.success_rate = static_cast<double>(successes) / std::max(1, episodes);
  stats.mean_makespan = total_makespan / std::max(1, episodes);
  return stats;
}

TrainResult train_policy(const TrainManifest& manifest, std::uint64_t seed,
                         const std::function<void(int, const LossReport&)>& on_update) {
  TrainResult result;
  result.seed = seed;

  TrainConfig tc = manifest.train;
  tc.seed = seed;
  PolicyNet actor(tc.net);
  CriticNet critic(tc.net);
  ParameterStore params;
  Rng init_rng(seed);
  PolicyNet::init(params, tc.net, init_rng);
  CriticNet::init(params, tc.net, init_rng);
  const ParameterStore untrained = params;

  ParameterStore target;
  for (const std::string& name : params.names_with_prefix("critic.")) {
    const DenseMatrix& m = params.at(name);
    target.add(name, m.rows, m.cols) = m;
  }

  ReplayBuffer buffer(tc.replay_capacity, seed ^ 0x9e3779b9ULL);
  RolloutEnv env;
  env.cfg = manifest.env;
  env.episode_seed = seed * 1000 + 1;
  Rng rollout_rng(seed ^ 0x51ed2701ULL);
  OptState opt;

  std::ostringstream trace;
  trace << "update,critic_loss,policy_loss,term_loss,mean_return\n";

  while (buffer.size() < manifest.warmup_transitions) {
    collect_rollout(env, actor, critic, params, buffer, 16, rollout_rng);
  }
  ParameterStore best_params;
  double best_score = -1e300;
  const std::uint64_t select_seed_base = manifest.eval_seed_base + 777777;
  for (int update = 0; update < manifest.updates; ++update) {
    collect_rollout(env, actor, critic, params, buffer, manifest.env_steps_per_update,
                    rollout_rng);
    const LossReport report = update_step(buffer, actor, critic, params, target, opt, tc, update);
    double recent_return = 0;
    const auto& hist = env.episode_return_history;
    const int window = std::min<int>(20, static_cast<int>(hist.size()));
    for (int k = 0; k < window; ++k) recent_return += hist[hist.size() - 1 - k];
    if (window > 0) recent_return /= window;
    trace << update << ',' << format_double(report.critic_td) << ','
          << format_double(report.policy) << ',' << format_double(report.termination) << ','
          << format_double(recent_return) << '\n';
    if (on_update) on_update(update, report);

    if (manifest.select_every > 0 && (update + 1) % manifest.select_every == 0) {
      const EvalStats s = evaluate_policy(actor, params, manifest.env, manifest.select_episodes,
                                          select_seed_base);
      const double score = s.success_rate * 1000.0 + s.mean_return;
      if (score > best_score) {
        best_score = score;
        best_params = params;
      }
    }
  }
  if (manifest.select_every > 0 && best_score > -1e300) {
    const EvalStats last = evaluate_policy(actor, params, manifest.env, manifest.select_episodes,
                                           select_seed_base);
    if (last.success_rate * 1000.0 + last.mean_return < best_score) params = best_params;
  }

  const EvalStats before = evaluate_policy(actor, untrained, manifest.env, manifest.eval_episodes,
                                           manifest.eval_seed_base);
  const EvalStats after =
      evaluate_policy(actor, params, manifest.env, manifest.eval_episodes, manifest.eval_seed_base);
  result.untrained_mean_return = before.mean_return;
  result.untrained_success = before.success_rate;
  result.trained_mean_return = after.mean_return;
  result.trained_success = after.success_rate;
  result.params = std::move(params);
  result.loss_trace_csv = trace.str();
  return result;
}

}  // namespace orion
