// heurplan command-line tool: dataset generation, training, evaluation,
// single-map planning and rendering.
//
// Exit codes: 0 success, 1 usage or I/O error, 2 no path, 3 invalid endpoints.

#include <CLI11.hpp>

#include <algorithm>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <iostream>
#include <optional>
#include <sstream>

#include "heurplan/evaluation.hpp"
#include "heurplan/parallel.hpp"
#include "heurplan/training.hpp"

using namespace heurplan;
namespace fs = std::filesystem;

namespace {

constexpr int kExitOk = 0;
constexpr int kExitUsage = 1;
constexpr int kExitNoPath = 2;
constexpr int kExitInvalidEndpoint = 3;

class UsageError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

std::uint64_t mix_seed(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

void write_atomic(const fs::path& path, const std::string& bytes) {
  const fs::path tmp = path.string() + ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw std::runtime_error("cannot open for writing: " + path.string());
    out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
    if (!out) throw std::runtime_error("write failed: " + path.string());
  }
  fs::rename(tmp, path);
}

void require_file(const std::string& path, const std::string& what) {
  if (!fs::is_regular_file(path)) throw UsageError(what + " not found: " + path);
}

void require_parent(const std::string& path) {
  const fs::path parent = fs::path(path).parent_path();
  if (!parent.empty() && !fs::is_directory(parent)) throw UsageError("output directory does not exist: " + parent.string());
}

Cell parse_cell(const std::string& text) {
  const auto comma = text.find(',');
  if (comma == std::string::npos) throw UsageError("expected ROW,COL but got '" + text + "'");
  try {
    std::size_t a = 0, b = 0;
    const int row = std::stoi(text.substr(0, comma), &a);
    const int col = std::stoi(text.substr(comma + 1), &b);
    if (a != comma || b != text.size() - comma - 1) throw std::invalid_argument(text);
    return {row, col};
  } catch (const std::logic_error&) {
    throw UsageError("expected ROW,COL but got '" + text + "'");
  }
}

struct Dataset {
  std::vector<LabeledMap> maps;
};

Dataset load_dataset(const std::string& dir) {
  const fs::path manifest = fs::path(dir) / "manifest.jsonl";
  if (!fs::is_regular_file(manifest)) throw UsageError("dataset manifest not found: " + manifest.string());
  Dataset d;
  for (const auto& e : read_manifest(manifest.string())) {
    GridMap m = load_pgm((fs::path(dir) / e.path).string());
    if (m.height() != e.height || m.width() != e.width)
      throw FormatError("map " + e.path + " does not match the size recorded in the manifest");
    d.maps.push_back({std::move(m), e.kind});
  }
  if (d.maps.empty()) throw UsageError("dataset is empty: " + dir);
  return d;
}

std::vector<GridMap> plain_maps(const Dataset& d) {
  std::vector<GridMap> out;
  for (const auto& m : d.maps) out.push_back(m.map);
  return out;
}

/// "euclid", "optimal", or a weight file path.
struct HeuristicArg {
  HeuristicChoice choice;
  std::optional<ModelWeights> weights;  // keeps learned weights alive
};

std::unique_ptr<HeuristicArg> resolve_heuristic(const std::string& spec) {
  auto h = std::make_unique<HeuristicArg>();
  std::string lower = spec;
  std::transform(lower.begin(), lower.end(), lower.begin(), [](unsigned char c) { return std::tolower(c); });
  if (lower == "euclid") {
    h->choice = HeuristicChoice::euclid();
  } else if (lower == "optimal") {
    h->choice = HeuristicChoice::optimal();
  } else {
    require_file(spec, "weight file");
    h->weights = load_weights(spec);
    h->choice = HeuristicChoice::learned(*h->weights, "Learned-" + fs::path(spec).stem().string());
  }
  return h;
}

HeuristicSource heuristic_source(const HeuristicArg& h, const GridMap& map, Cell goal) {
  switch (h.choice.type) {
    case HeuristicChoice::Type::Euclid: return HeuristicSource::euclidean();
    case HeuristicChoice::Type::Optimal: return HeuristicSource::table(backward_dijkstra(map, goal).values);
    case HeuristicChoice::Type::Learned: return HeuristicSource::table(predict_heuristic_map(*h.weights, map, goal));
  }
  throw std::logic_error("unreachable");
}

CostField heuristic_field(const HeuristicArg& h, const GridMap& map, Cell goal) {
  switch (h.choice.type) {
    case HeuristicChoice::Type::Euclid: return goal_distance(map.height(), map.width(), goal);
    case HeuristicChoice::Type::Optimal: return backward_dijkstra(map, goal).values;
    case HeuristicChoice::Type::Learned: return predict_heuristic_map(*h.weights, map, goal);
  }
  throw std::logic_error("unreachable");
}

void check_endpoints(const GridMap& map, Cell start, Cell goal) {
  for (Cell c : {start, goal})
    if (!map.contains(c) || map.occupied(c))
      throw InvalidEndpoint("endpoint (" + std::to_string(c.row) + "," + std::to_string(c.col) +
                            ") is outside the map or occupied");
}

// --- gen-data ------------------------------------------------------------------

struct GenDataArgs {
  std::string kind = "all";
  int count = 200;
  int size = 64;
  std::string out;
  bool force = false;
};

int run_gen_data(const GenDataArgs& a, std::uint64_t seed) {
  std::vector<EnvironmentKind> kinds;
  if (a.kind == "all")
    kinds.assign(kAllKinds.begin(), kAllKinds.end());
  else
    kinds.push_back(parse_kind(a.kind));
  if (a.count <= 0) throw UsageError("--count must be positive");

  const fs::path out(a.out);
  if (fs::exists(out) && !fs::is_directory(out)) throw UsageError("--out is not a directory: " + a.out);
  if (fs::exists(out) && !fs::is_empty(out) && !a.force)
    throw UsageError("output directory is not empty (use --force to overwrite): " + a.out);
  fs::create_directories(out / "maps");

  std::string manifest;
  for (auto kind : kinds) {
    const auto kind_index = static_cast<std::uint64_t>(kind);
    for (int i = 0; i < a.count; ++i) {
      const std::uint64_t map_seed = mix_seed(seed ^ mix_seed((kind_index << 32) | static_cast<std::uint64_t>(i)));
      const GridMap m = generate(kind, a.size, a.size, map_seed);
      std::ostringstream name;
      name << "maps/" << to_string(kind) << '_' << std::setw(4) << std::setfill('0') << i << ".pgm";
      std::ostringstream pgm;
      write_pgm(pgm, m);
      write_atomic(out / name.str(), pgm.str());
      manifest += manifest_line({name.str(), kind, map_seed, a.size, a.size}) + "\n";
    }
  }
  write_atomic(out / "manifest.jsonl", manifest);
  std::cout << "wrote " << kinds.size() * static_cast<std::size_t>(a.count) << " maps to " << a.out << "\n";
  return kExitOk;
}

// --- train ---------------------------------------------------------------------

struct TrainArgs {
  std::string data;
  std::string eval_data;
  std::string target = "sparse";
  int steps = 2000;
  int batch = 32;
  double lr = 0.01;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double td_lambda = 0.001;
  int td_steps = 3;
  int canvas = 0;
  int eval_every = 100;
  std::string out;
  std::string log;
};

int run_train(const TrainArgs& a, std::uint64_t seed, int jobs) {
  TrainConfig cfg;
  cfg.target.kind = parse_target_kind(a.target);
  cfg.target.td_lambda = a.td_lambda;
  cfg.target.td_steps = a.td_steps;
  if (cfg.target.td_lambda <= 0.0 || cfg.target.td_steps < 1) throw UsageError("--td-lambda must be > 0 and --td-steps >= 1");
  if (a.steps <= 0 || a.batch <= 0) throw UsageError("--steps and --batch must be positive");
  cfg.steps = a.steps;
  cfg.batch_size = a.batch;
  cfg.adam.lr = a.lr;
  cfg.adam.beta1 = a.beta1;
  cfg.adam.beta2 = a.beta2;
  cfg.canvas = a.canvas;
  cfg.eval_every = a.eval_every;
  cfg.seed = seed;
  cfg.jobs = jobs;
  require_parent(a.out);
  const std::string log_path = a.log.empty() ? a.out + ".log.csv" : a.log;
  require_parent(log_path);

  const Dataset train_set = load_dataset(a.data);
  std::vector<GridMap> eval_maps;
  if (!a.eval_data.empty()) eval_maps = plain_maps(load_dataset(a.eval_data));

  const TrainResult r = train(plain_maps(train_set), cfg, eval_maps, [&](const TrainLogRow& row) {
    if (row.eval_mae >= 0.0 || row.step == 1 || row.step % 100 == 0) {
      std::cerr << "step " << row.step << " loss " << row.loss;
      if (row.eval_mae >= 0.0) std::cerr << " eval_mae " << row.eval_mae;
      std::cerr << "\n";
    }
  });
  save_weights(r.weights, a.out);
  write_atomic(log_path, train_log_csv(r.log));
  std::cout << "wrote " << a.out << " and " << log_path << " (skipped maps: " << r.skipped_maps << ")\n";
  return kExitOk;
}

// --- eval ----------------------------------------------------------------------

struct EvalArgs {
  std::string data;
  std::vector<std::string> heuristics{"euclid"};
  std::vector<std::string> planners{"greedy"};
  std::string out;
  std::string timing;
};

int run_eval(const EvalArgs& a, int jobs) {
  require_parent(a.out);
  if (!a.timing.empty()) require_parent(a.timing);
  std::vector<Planner> planners;
  for (const auto& p : a.planners) planners.push_back(parse_planner(p));
  std::vector<std::unique_ptr<HeuristicArg>> hs;
  for (const auto& h : a.heuristics) hs.push_back(resolve_heuristic(h));
  const Dataset d = load_dataset(a.data);

  EvalOptions opts;
  opts.jobs = jobs;
  std::string csv = results_csv_header();
  std::vector<std::pair<HeuristicChoice, Planner>> timing_cfgs;
  for (const auto& h : hs)
    for (Planner p : planners) {
      const std::string rows = results_csv(evaluate(d.maps, h->choice, p, opts));
      csv += rows.substr(results_csv_header().size());
      timing_cfgs.push_back({h->choice, p});
    }
  write_atomic(a.out, csv);
  std::cout << csv;
  if (!a.timing.empty()) write_atomic(a.timing, timing_csv(timing_report(d.maps, timing_cfgs, opts)));
  return kExitOk;
}

// --- plan ----------------------------------------------------------------------

struct PlanArgs {
  std::string map;
  std::string start;
  std::string goal;
  std::string heuristic = "euclid";
  std::string planner = "greedy";
};

int run_plan(const PlanArgs& a) {
  require_file(a.map, "map");
  const Planner planner = parse_planner(a.planner);
  const GridMap map = load_pgm(a.map);
  const Cell start = a.start.empty() ? Cell{0, 0} : parse_cell(a.start);
  const Cell goal = a.goal.empty() ? Cell{map.height() - 1, map.width() - 1} : parse_cell(a.goal);
  check_endpoints(map, start, goal);
  const auto h = resolve_heuristic(a.heuristic);
  const SearchResult r = graph_search(map, start, goal, ScorePolicy{planner, heuristic_source(*h, map, goal)});
  std::cout << to_json(r) << "\n";
  return r.found ? kExitOk : kExitNoPath;
}

// --- render --------------------------------------------------------------------

struct RenderArgs {
  std::string map;
  std::string start;
  std::string goal;
  std::string heuristic = "optimal";
  std::string planner = "greedy";
  std::string out;
  int scale = 4;
  bool no_path = false;
};

int run_render(const RenderArgs& a) {
  require_file(a.map, "map");
  require_parent(a.out);
  if (a.scale < 1) throw UsageError("--scale must be at least 1");
  const Planner planner = parse_planner(a.planner);
  const GridMap map = load_pgm(a.map);
  const Cell start = a.start.empty() ? Cell{0, 0} : parse_cell(a.start);
  const Cell goal = a.goal.empty() ? Cell{map.height() - 1, map.width() - 1} : parse_cell(a.goal);
  check_endpoints(map, start, goal);
  const auto h = resolve_heuristic(a.heuristic);
  const CostField field = heuristic_field(*h, map, goal);
  std::vector<Cell> path;
  bool found = true;
  if (!a.no_path) {
    const SearchResult r = graph_search(map, start, goal, ScorePolicy{planner, HeuristicSource::table(field)});
    found = r.found;
    path = r.path;
  }
  render(map, field, path, a.out, a.scale);
  std::cout << "wrote " << a.out << "\n";
  return found ? kExitOk : kExitNoPath;
}

// --- bench ---------------------------------------------------------------------

struct BenchArgs {
  std::string data;
  std::string weights;
  std::string planner = "greedy";
  std::string out;
};

int run_bench(const BenchArgs& a, int jobs) {
  if (!a.out.empty()) require_parent(a.out);
  const Planner planner = parse_planner(a.planner);
  const auto learned = resolve_heuristic(a.weights);
  if (learned->choice.type != HeuristicChoice::Type::Learned) throw UsageError("--weights must be a weight file");
  const Dataset d = load_dataset(a.data);
  EvalOptions opts;
  opts.jobs = jobs;
  const auto euclid_runs = run_maps(d.maps, HeuristicChoice::euclid(), planner, opts);
  const auto learned_runs = run_maps(d.maps, learned->choice, planner, opts);

  auto median_expanded = [](const std::vector<MapRun>& runs) {
    std::vector<double> v;
    for (const auto& r : runs)
      if (r.solved && r.audit_ok) v.push_back(static_cast<double>(r.expanded));
    return median(v);
  };
  const double e = median_expanded(euclid_runs), l = median_expanded(learned_runs);
  std::string csv = results_csv(aggregate(euclid_runs, "Euclid", planner));
  csv += results_csv(aggregate(learned_runs, learned->choice.name, planner)).substr(results_csv_header().size());
  std::cout << csv;
  std::cout << "median expansions: Euclid " << e << ", " << learned->choice.name << " " << l << ", ratio "
            << (e > 0.0 ? l / e : 0.0) << "\n";
  if (!a.out.empty()) write_atomic(a.out, csv);
  return kExitOk;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"heurplan: learned heuristics for grid path planning"};
  app.require_subcommand(1);
  app.set_config("--config", "", "TOML/INI file with option values (section per subcommand)");
  std::uint64_t seed = 0;
  int jobs = 0;
  app.add_option("--seed", seed, "Random seed")->capture_default_str();
  app.add_option("--jobs", jobs, "Worker threads (default: $HEURPLAN_JOBS or 1)");

  auto add_common = [&](CLI::App* sub) {
    sub->add_option("--seed", seed, "Random seed")->capture_default_str();
    sub->add_option("--jobs", jobs, "Worker threads (default: $HEURPLAN_JOBS or 1)");
  };

  GenDataArgs gen;
  auto* gen_cmd = app.add_subcommand("gen-data", "Generate a dataset of PGM maps with a JSON-lines manifest");
  add_common(gen_cmd);
  gen_cmd->add_option("--kind", gen.kind, "Environment kind or 'all'")->capture_default_str();
  gen_cmd->add_option("--count", gen.count, "Maps per kind")->capture_default_str();
  gen_cmd->add_option("--size", gen.size, "Map edge length (>= 16)")->capture_default_str();
  gen_cmd->add_option("--out", gen.out, "Output directory")->required();
  gen_cmd->add_flag("--force", gen.force, "Allow writing into a non-empty directory");

  TrainArgs tr;
  auto* train_cmd = app.add_subcommand("train", "Train a heuristic network");
  add_common(train_cmd);
  train_cmd->add_option("--data", tr.data, "Training dataset directory")->required();
  train_cmd->add_option("--eval-data", tr.eval_data, "Held-out dataset for periodic eval MAE");
  train_cmd->add_option("--target", tr.target, "bd, sparse or sparse-td")->capture_default_str();
  train_cmd->add_option("--steps", tr.steps, "Optimization steps (one minibatch each)")->capture_default_str();
  train_cmd->add_option("--batch", tr.batch, "Maps per minibatch")->capture_default_str();
  train_cmd->add_option("--lr", tr.lr, "Adam learning rate")->capture_default_str();
  train_cmd->add_option("--beta1", tr.beta1, "Adam beta1")->capture_default_str();
  train_cmd->add_option("--beta2", tr.beta2, "Adam beta2")->capture_default_str();
  train_cmd->add_option("--td-lambda", tr.td_lambda, "TD loss weight (sparse-td)")->capture_default_str();
  train_cmd->add_option("--td-steps", tr.td_steps, "TD refinement steps (sparse-td)")->capture_default_str();
  train_cmd->add_option("--canvas", tr.canvas, "Augmentation canvas edge, 0 = automatic")->capture_default_str();
  train_cmd->add_option("--eval-every", tr.eval_every, "Steps between eval MAE rows")->capture_default_str();
  train_cmd->add_option("--out", tr.out, "Output weight file")->required();
  train_cmd->add_option("--log", tr.log, "Metrics CSV (default: <out>.log.csv)");

  EvalArgs ev;
  auto* eval_cmd = app.add_subcommand("eval", "Benchmark heuristics and planners on a dataset");
  add_common(eval_cmd);
  eval_cmd->add_option("--data", ev.data, "Dataset directory")->required();
  eval_cmd->add_option("--heuristic", ev.heuristics, "euclid, optimal or a weight file (repeatable)")
      ->capture_default_str();
  eval_cmd->add_option("--planner", ev.planners, "greedy, astar or dijkstra (repeatable)")->capture_default_str();
  eval_cmd->add_option("--out", ev.out, "Results CSV")->required();
  eval_cmd->add_option("--timing", ev.timing, "Optional timing CSV");

  PlanArgs pl;
  auto* plan_cmd = app.add_subcommand("plan", "Plan on one map and print the result as JSON");
  add_common(plan_cmd);
  plan_cmd->add_option("--map", pl.map, "PGM map")->required();
  plan_cmd->add_option("--start", pl.start, "ROW,COL (default 0,0)");
  plan_cmd->add_option("--goal", pl.goal, "ROW,COL (default far corner)");
  plan_cmd->add_option("--heuristic", pl.heuristic, "euclid, optimal or a weight file")->capture_default_str();
  plan_cmd->add_option("--planner", pl.planner, "greedy, astar or dijkstra")->capture_default_str();

  RenderArgs rd;
  auto* render_cmd = app.add_subcommand("render", "Render a heuristic map and path as a P6 image");
  add_common(render_cmd);
  render_cmd->add_option("--map", rd.map, "PGM map")->required();
  render_cmd->add_option("--start", rd.start, "ROW,COL (default 0,0)");
  render_cmd->add_option("--goal", rd.goal, "ROW,COL (default far corner)");
  render_cmd->add_option("--heuristic", rd.heuristic, "euclid, optimal or a weight file")->capture_default_str();
  render_cmd->add_option("--planner", rd.planner, "Planner for the overlaid path")->capture_default_str();
  render_cmd->add_option("--scale", rd.scale, "Pixels per cell")->capture_default_str();
  render_cmd->add_flag("--no-path", rd.no_path, "Do not overlay a path");
  render_cmd->add_option("--out", rd.out, "Output .ppm")->required();

  BenchArgs bn;
  auto* bench_cmd = app.add_subcommand("bench", "Compare Euclid against a learned heuristic");
  add_common(bench_cmd);
  bench_cmd->add_option("--data", bn.data, "Dataset directory")->required();
  bench_cmd->add_option("--weights", bn.weights, "Weight file")->required();
  bench_cmd->add_option("--planner", bn.planner, "greedy, astar or dijkstra")->capture_default_str();
  bench_cmd->add_option("--out", bn.out, "Optional results CSV");

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForAllHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return kExitUsage;
  }

  try {
    const int workers = resolve_jobs(jobs);
    if (*gen_cmd) return run_gen_data(gen, seed);
    if (*train_cmd) return run_train(tr, seed, workers);
    if (*eval_cmd) return run_eval(ev, workers);
    if (*plan_cmd) return run_plan(pl);
    if (*render_cmd) return run_render(rd);
    if (*bench_cmd) return run_bench(bn, workers);
  } catch (const InvalidEndpoint& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitInvalidEndpoint;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitUsage;
  }
  return kExitUsage;
}
