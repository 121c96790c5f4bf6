// End-to-end acceptance checks. Prints one PASS/FAIL line per criterion and
// exits non-zero if any criterion fails. Artifacts (weights, logs, CSVs) are
// kept under --workdir for inspection.

#include <CLI11.hpp>

#include <chrono>
#include <filesystem>
#include <fstream>
#include <functional>
#include <iomanip>
#include <iostream>
#include <random>
#include <set>
#include <sstream>

#include "heurplan/evaluation.hpp"
#include "heurplan/parallel.hpp"
#include "heurplan/training.hpp"
#include "test_util.hpp"

using namespace heurplan;
namespace fs = std::filesystem;

namespace {

struct Outcome {
  bool pass = false;
  std::string detail;
};

using Clock = std::chrono::steady_clock;

double seconds_since(Clock::time_point t0) { return std::chrono::duration<double>(Clock::now() - t0).count(); }

std::string fmt(double v, int precision = 4) {
  std::ostringstream out;
  out << std::setprecision(precision) << v;
  return out.str();
}

Cell random_free_cell(const GridMap& m, std::mt19937_64& rng) {
  std::vector<Cell> cells;
  for (int r = 0; r < m.height(); ++r)
    for (int c = 0; c < m.width(); ++c)
      if (m.free({r, c})) cells.push_back({r, c});
  return cells[rng() % cells.size()];
}

// --- 1 -------------------------------------------------------------------------

Outcome oracle_equivalence() {
  double worst = 0.0;
  int maps = 0, mismatched_reach = 0;
  std::mt19937_64 rng(1);
  for (auto kind : kAllKinds)
    for (int i = 0; i < 50; ++i) {
      const GridMap m = generate(kind, 16, 16, 10'000 + i);
      const Cell goal = random_free_cell(m, rng);
      const CostToGo bd = backward_dijkstra(m, goal);
      const CostField oracle = test::bellman_ford_cost_to_go(m, goal);
      for (std::size_t k = 0; k < oracle.size(); ++k) {
        const bool reach = std::isfinite(oracle.data()[k]);
        if (reach != static_cast<bool>(bd.valid.data()[k])) ++mismatched_reach;
        if (reach) worst = std::max(worst, std::abs(oracle.data()[k] - bd.values.data()[k]));
      }
      ++maps;
    }
  return {worst <= 1e-9 && mismatched_reach == 0,
          std::to_string(maps) + " maps, max |BD - Bellman-Ford| = " + fmt(worst) +
              ", reachability mismatches = " + std::to_string(mismatched_reach)};
}

// --- 2 -------------------------------------------------------------------------

std::vector<GridMap> random_64_maps(int count, std::uint64_t seed) {
  // Half procedurally generated (all kinds), half i.i.d. occupancy.
  std::vector<GridMap> maps;
  for (int i = 0; i < count; ++i) {
    if (i % 2 == 0)
      maps.push_back(generate(kAllKinds[(i / 2) % kAllKinds.size()], 64, 64, seed + i));
    else
      maps.push_back(test::random_map_free_corners(64, 64, 0.15 + 0.2 * ((i / 2) % 5) / 4.0, seed + i));
  }
  return maps;
}

Outcome astar_optimality() {
  int solved = 0, unsolved_agree = 0, cost_mismatch = 0, expansion_violations = 0;
  std::int64_t astar_total = 0, dijkstra_total = 0;
  const auto maps = random_64_maps(100, 20'000);
  for (const auto& m : maps) {
    const auto d = graph_search(m, {0, 0}, {63, 63}, ScorePolicy::dijkstra());
    const auto a = graph_search(m, {0, 0}, {63, 63}, ScorePolicy::astar(HeuristicSource::euclidean()));
    if (d.found != a.found) {
      ++cost_mismatch;
      continue;
    }
    if (!d.found) {
      ++unsolved_agree;
      continue;
    }
    ++solved;
    if (a.path_cost != d.path_cost) ++cost_mismatch;
    if (a.expanded > d.expanded) ++expansion_violations;
    astar_total += a.expanded;
    dijkstra_total += d.expanded;
  }
  return {cost_mismatch == 0 && expansion_violations == 0 && solved >= 50,
          std::to_string(solved) + " solvable + " + std::to_string(unsolved_agree) +
              " unsolvable maps, cost mismatches = " + std::to_string(cost_mismatch) +
              ", expansion violations = " + std::to_string(expansion_violations) + ", expansions A*/Dijkstra = " +
              std::to_string(astar_total) + "/" + std::to_string(dijkstra_total)};
}

// --- 3 -------------------------------------------------------------------------

struct GreedyExactStats {
  int maps = 0, violations = 0, suboptimal = 0;
  double worst_ratio = 0.0, worst_gap = 0.0;
};

GreedyExactStats greedy_exact_on(const std::function<GridMap(int)>& make, int wanted) {
  GreedyExactStats st;
  for (int i = 0; st.maps < wanted; ++i) {
    const GridMap m = make(i);
    const CostToGo ctg = backward_dijkstra(m, {63, 63});
    if (!ctg.valid(0, 0)) continue;
    ++st.maps;
    const auto r = graph_search(m, {0, 0}, {63, 63}, ScorePolicy::greedy(HeuristicSource::table(ctg.values)));
    const double ratio = static_cast<double>(r.expanded) / static_cast<double>(r.path.size());
    const double gap = r.path_cost - ctg.values(0, 0);
    st.worst_ratio = std::max(st.worst_ratio, ratio);
    st.worst_gap = std::max(st.worst_gap, gap);
    if (gap > 1e-9) ++st.suboptimal;
    if (!r.found || ratio > 1.2 || std::abs(gap) > 1e-9) ++st.violations;
  }
  return st;
}

Outcome greedy_exact() {
  // Gate: generated maps of every kind.
  const auto gen = greedy_exact_on(
      [](int i) { return generate(kAllKinds[i % kAllKinds.size()], 64, 64, 30'000 + i); }, 50);
  // Diagnostic only: on i.i.d. noise a lower-h diagonal neighbor can beat the
  // optimal orthogonal move (h drop < sqrt 2), so pure greedy may lose 3 sqrt 2 - 4.
  const auto noise = greedy_exact_on([](int i) { return test::random_map_free_corners(64, 64, 0.25, 30'000 + i); }, 50);
  return {gen.violations == 0,
          std::to_string(gen.maps) + " generated maps, violations = " + std::to_string(gen.violations) +
              ", worst expansions/path vertices = " + fmt(gen.worst_ratio) + " [diagnostic, " +
              std::to_string(noise.maps) + " i.i.d. noise maps: " + std::to_string(noise.suboptimal) +
              " suboptimal by at most " + fmt(noise.worst_gap) + ", worst expansions/path vertices = " +
              fmt(noise.worst_ratio) + "]"};
}

// --- 4 -------------------------------------------------------------------------

Outcome td_fixed_point() {
  double worst = 0.0;
  int max_iters = 0;
  bool all_converged = true;
  std::mt19937_64 rng(4);
  for (int i = 0; i < 20; ++i) {
    const GridMap m = test::random_map_free_corners(16, 16, 0.3, 40'000 + i);
    const Cell goal = random_free_cell(m, rng);
    const CostToGo bd = backward_dijkstra(m, goal);
    CostField h(16, 16, 0.0);
    int iters = 0;
    for (;; ++iters) {
      CostField next = td_refine(h, m, goal, 1);
      if (next == h) break;
      h = std::move(next);
      if (iters > 16 * 16 * 4) {
        all_converged = false;
        break;
      }
    }
    max_iters = std::max(max_iters, iters);
    for (std::size_t k = 0; k < h.size(); ++k)
      if (bd.valid.data()[k]) worst = std::max(worst, std::abs(h.data()[k] - bd.values.data()[k]));
  }
  return {all_converged && worst <= 1e-6, "20 maps, max |fixed point - BD| = " + fmt(worst) +
                                              " on reachable cells, iterations to converge <= " +
                                              std::to_string(max_iters)};
}

// --- 5 -------------------------------------------------------------------------

double weighted(const Tensor& y, const Tensor& probe) { return test::dot(y.values(), probe.values()); }

Outcome gradient_suite() {
  std::vector<std::string> failures;
  double worst_layer = 0.0;
  auto record = [&](const std::string& name, double err, double tol) {
    worst_layer = tol < 1e-3 ? std::max(worst_layer, err) : worst_layer;
    if (!(err < tol)) failures.push_back(name + " (" + fmt(err) + ")");
  };

  for (int stride = 1; stride <= 2; ++stride)
    for (int d = 1; d <= 3; ++d) {
      const nn::ConvSpec s{2, 3, 3, 3, stride, d, d};
      Tensor x = test::random_tensor({2, 2, 9, 8}, 500 + 10 * stride + d);
      Tensor w = test::random_tensor(s.conv_weight_shape(), 600 + 10 * stride + d);
      std::vector<double> b{0.1, -0.3, 0.2};
      const Tensor probe = test::random_tensor({2, 3, s.conv_out_h(9), s.conv_out_w(8)}, 700 + d);
      auto f = [&] { return weighted(nn::conv2d_fwd(x, w, b, s), probe); };
      const auto g = nn::conv2d_bwd(x, w, s, probe);
      const std::string tag = "conv s" + std::to_string(stride) + " d" + std::to_string(d);
      record(tag + " dx", test::relative_error(g.grad_x.values(), test::numeric_gradient(x.values(), f)), 1e-4);
      record(tag + " dw", test::relative_error(g.grad_w.values(), test::numeric_gradient(w.values(), f)), 1e-4);
      record(tag + " db", test::relative_error(g.grad_b, test::numeric_gradient(b, f)), 1e-4);
    }

  {
    const nn::ConvSpec s{3, 2, 4, 4, 2, 1, 1};
    Tensor x = test::random_tensor({2, 3, 4, 5}, 801);
    Tensor w = test::random_tensor(s.deconv_weight_shape(), 802);
    std::vector<double> b{0.4, -0.2};
    const Tensor probe = test::random_tensor({2, 2, 8, 10}, 803);
    auto f = [&] { return weighted(nn::deconv2d_fwd(x, w, b, s), probe); };
    const auto g = nn::deconv2d_bwd(x, w, s, probe);
    record("deconv dx", test::relative_error(g.grad_x.values(), test::numeric_gradient(x.values(), f)), 1e-4);
    record("deconv dw", test::relative_error(g.grad_w.values(), test::numeric_gradient(w.values(), f)), 1e-4);
    record("deconv db", test::relative_error(g.grad_b, test::numeric_gradient(b, f)), 1e-4);
  }

  {
    Tensor x = test::random_tensor({3, 2, 4, 4}, 811, 2.0);
    std::vector<double> gamma{1.3, 0.6}, beta{0.1, -0.2};
    const Tensor probe = test::random_tensor(x.shape(), 812);
    auto f = [&] {
      std::vector<double> rm(2, 0.0), rv(2, 1.0);
      return weighted(nn::batchnorm_fwd(x, gamma, beta, rm, rv, nn::Mode::Train), probe);
    };
    std::vector<double> rm(2, 0.0), rv(2, 1.0);
    nn::BatchNormCache cache;
    nn::batchnorm_fwd(x, gamma, beta, rm, rv, nn::Mode::Train, &cache);
    const auto g = nn::batchnorm_bwd(cache, gamma, probe);
    record("batchnorm dx", test::relative_error(g.grad_x.values(), test::numeric_gradient(x.values(), f)), 1e-4);
    record("batchnorm dgamma", test::relative_error(g.grad_gamma, test::numeric_gradient(gamma, f)), 1e-4);
    record("batchnorm dbeta", test::relative_error(g.grad_beta, test::numeric_gradient(beta, f)), 1e-4);
  }

  {
    Tensor x = test::random_tensor({1, 2, 5, 5}, 821);
    for (double& v : x.values())
      if (std::abs(v) < 1e-3) v = 0.5;  // keep away from the kink
    const Tensor probe = test::random_tensor(x.shape(), 822);
    auto f = [&] { return weighted(nn::leaky_relu_fwd(x), probe); };
    record("leaky relu",
           test::relative_error(nn::leaky_relu_bwd(x, probe).values(), test::numeric_gradient(x.values(), f)), 1e-4);
  }

  {
    Tensor pred = test::random_tensor({2, 1, 6, 6}, 831);
    const Tensor target = test::random_tensor(pred.shape(), 832);
    Tensor mask(pred.shape());
    for (std::size_t i = 0; i < mask.size(); ++i) mask.values()[i] = i % 3 ? 1.0 : 0.0;
    auto f = [&] { return nn::masked_sq_loss(pred, target, mask).value; };
    record("masked loss",
           test::relative_error(nn::masked_sq_loss(pred, target, mask).grad.values(),
                                test::numeric_gradient(pred.values(), f)),
           1e-4);
  }

  // Full network at 16x16: all vector parameters, sampled kernel coordinates, sampled inputs.
  double worst_net = 0.0;
  {
    ModelWeights w = build_model({}, 841);
    std::mt19937_64 rng(842);
    std::uniform_real_distribution<double> u(-0.2, 0.2);
    for (auto& e : w.entries)
      if (e.name.ends_with(".gamma") || e.name.ends_with(".beta") || e.name.ends_with(".bias"))
        for (double& v : e.value.values()) v += u(rng);
    Tensor x = test::random_tensor({1, 3, 16, 16}, 843);
    const Tensor target = test::random_tensor({1, 1, 16, 16}, 844, 2.0);
    Tensor mask({1, 1, 16, 16});
    for (double& v : mask.values()) v = (rng() % 3) ? 1.0 : 0.0;
    auto loss = [&] { return nn::masked_sq_loss(forward(w, x, nn::Mode::Train), target, mask).value; };
    ForwardCache cache;
    const Tensor y = forward(w, x, nn::Mode::Train, &cache);
    const Gradients g = backward(w, cache, nn::masked_sq_loss(y, target, mask).grad);
    auto central = [&](double& slot) {
      const double saved = slot, h = 1e-6;
      slot = saved + h;
      const double up = loss();
      slot = saved - h;
      const double down = loss();
      slot = saved;
      return (up - down) / (2.0 * h);
    };
    for (std::size_t ei = 0; ei < w.entries.size(); ++ei) {
      auto& e = w.entries[ei];
      if (!e.trainable) continue;
      std::vector<std::size_t> coords;
      if (e.value.shape().n == 1 && e.value.shape().c == 1)
        for (std::size_t i = 0; i < e.value.size(); ++i) coords.push_back(i);
      else
        for (int k = 0; k < 32; ++k) coords.push_back(rng() % e.value.size());
      std::vector<double> analytic, numeric;
      for (std::size_t i : coords) {
        analytic.push_back(g.entries[ei][i]);
        numeric.push_back(central(e.value.values()[i]));
      }
      const double err = test::relative_error(analytic, numeric);
      worst_net = std::max(worst_net, err);
      record("net " + e.name, err, 1e-3);
    }
    std::vector<double> analytic, numeric;
    for (int k = 0; k < 64; ++k) {
      const std::size_t i = rng() % x.size();
      analytic.push_back(g.input.values()[i]);
      numeric.push_back(central(x.values()[i]));
    }
    const double err = test::relative_error(analytic, numeric);
    worst_net = std::max(worst_net, err);
    record("net input", err, 1e-3);
  }

  std::string detail = "worst layer rel. err = " + fmt(worst_layer) + ", worst full-net rel. err = " + fmt(worst_net);
  for (const auto& f : failures) detail += "; FAILED " + f;
  return {failures.empty(), detail};
}

// --- 6, 7 ----------------------------------------------------------------------

struct TrainedVariant {
  std::string name;
  TrainResult result;
  std::vector<MapRun> runs;
  double median_expanded = 0.0;
  double success = 0.0;
  double median_quality_ratio = 0.0;
  double seconds = 0.0;
};

struct Suite {
  std::vector<GridMap> train_maps;
  std::vector<GridMap> eval_maps;
  std::vector<LabeledMap> eval_labeled;
};

Suite shifting_gap_suite() {
  Suite s;
  for (int i = 0; i < 200; ++i) s.train_maps.push_back(generate(EnvironmentKind::ShiftingGap, 64, 64, 100'000 + i));
  for (int i = 0; i < 50; ++i) {
    s.eval_maps.push_back(generate(EnvironmentKind::ShiftingGap, 64, 64, 900'000 + i));
    s.eval_labeled.push_back({s.eval_maps.back(), EnvironmentKind::ShiftingGap});
  }
  return s;
}

double median_of(const std::vector<MapRun>& runs, const std::function<double(const MapRun&)>& f) {
  std::vector<double> v;
  for (const auto& r : runs)
    if (r.solved && r.audit_ok) v.push_back(f(r));
  return median(v);
}

void summarize(TrainedVariant& v) {
  int solved = 0;
  std::vector<double> ratios;
  for (const auto& r : v.runs)
    if (r.solved && r.audit_ok) {
      ++solved;
      ratios.push_back(r.path_quality / r.optimal_cost);
    }
  v.success = static_cast<double>(solved) / static_cast<double>(v.runs.size());
  v.median_expanded = median_of(v.runs, [](const MapRun& r) { return static_cast<double>(r.expanded); });
  v.median_quality_ratio = median(ratios);
}

TrainedVariant train_variant(const Suite& suite, TargetKind kind, const fs::path& workdir, int jobs) {
  TrainedVariant v;
  v.name = std::string(to_string(kind));
  TrainConfig cfg;
  cfg.target.kind = kind;
  cfg.steps = 2000;
  cfg.batch_size = 8;
  cfg.seed = 2024;
  cfg.eval_every = 100;
  cfg.jobs = jobs;
  const auto t0 = Clock::now();
  std::ofstream progress(workdir / ("progress_" + v.name + ".txt"));
  v.result = train(suite.train_maps, cfg, suite.eval_maps, [&](const TrainLogRow& row) {
    if (row.eval_mae >= 0.0) progress << row.step << " loss " << row.loss << " eval_mae " << row.eval_mae << std::endl;
  });
  v.seconds = seconds_since(t0);
  save_weights(v.result.weights, (workdir / ("weights_" + v.name + ".bin")).string());
  std::ofstream(workdir / ("train_log_" + v.name + ".csv")) << train_log_csv(v.result.log);
  EvalOptions opts;
  opts.jobs = jobs;
  v.runs = run_maps(suite.eval_labeled, HeuristicChoice::learned(v.result.weights, "Learned-" + v.name),
                    Planner::Greedy, opts);
  summarize(v);
  return v;
}

// --- 8 -------------------------------------------------------------------------

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  return {std::istreambuf_iterator<char>(in), {}};
}

Outcome determinism(const fs::path& workdir, int jobs) {
  std::vector<GridMap> data;
  for (int i = 0; i < 12; ++i) data.push_back(generate(kAllKinds[i % kAllKinds.size()], 32, 32, 70'000 + i));
  std::vector<LabeledMap> bench;
  for (int i = 0; i < 14; ++i) {
    const auto kind = kAllKinds[i % kAllKinds.size()];
    bench.push_back({generate(kind, 32, 32, 80'000 + i), kind});
  }
  std::vector<std::string> weights, csvs;
  for (int run = 0; run < 2; ++run) {
    TrainConfig cfg;
    cfg.target.kind = TargetKind::SparseTD;
    cfg.steps = 25;
    cfg.batch_size = 4;
    cfg.seed = 8;
    cfg.jobs = run == 0 ? 1 : std::max(2, jobs);
    const TrainResult r = train(data, cfg);
    const fs::path wpath = workdir / ("determinism_" + std::to_string(run) + ".bin");
    save_weights(r.weights, wpath.string());
    weights.push_back(slurp(wpath));
    EvalOptions opts;
    opts.jobs = cfg.jobs;
    const ModelWeights loaded = load_weights(wpath.string());
    std::string csv;
    for (auto planner : {Planner::Greedy, Planner::AStar}) {
      const auto rows = evaluate(bench, HeuristicChoice::learned(loaded), planner, opts);
      csv += results_csv(rows);
    }
    std::ofstream(workdir / ("determinism_" + std::to_string(run) + ".csv")) << csv;
    csvs.push_back(csv);
  }
  const bool same_weights = weights[0] == weights[1];
  const bool same_csv = csvs[0] == csvs[1];
  const ModelWeights loaded = load_weights((workdir / "determinism_0.bin").string());
  const bool round_trip = serialize(loaded) == weights[0];
  return {same_weights && same_csv && round_trip,
          std::string("weight files ") + (same_weights ? "identical" : "DIFFER") + " (" +
              std::to_string(weights[0].size()) + " bytes), benchmark CSVs " + (same_csv ? "identical" : "DIFFER") +
              ", save/load round trip " + (round_trip ? "bit-exact" : "NOT exact")};
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Acceptance checks"};
  std::string workdir = "acceptance_work";
  std::set<int> only;
  int jobs = 0;
  app.add_option("--workdir", workdir, "Directory for artifacts");
  app.add_option("--only", only, "Run only these criteria (default: all)");
  app.add_option("--jobs", jobs, "Worker threads (default: HEURPLAN_JOBS or 1)");
  CLI11_PARSE(app, argc, argv);
  fs::create_directories(workdir);
  jobs = resolve_jobs(jobs);

  int failed = 0;
  auto report = [&](int id, const std::string& title, const Outcome& o, double secs) {
    std::cout << (o.pass ? "PASS" : "FAIL") << "  [" << id << "] " << title << ": " << o.detail << " ("
              << fmt(secs, 3) << " s)" << std::endl;
    if (!o.pass) ++failed;
  };
  auto want = [&](int id) { return only.empty() || only.count(id); };
  auto timed = [&](int id, const std::string& title, const std::function<Outcome()>& fn) {
    if (!want(id)) return;
    const auto t0 = Clock::now();
    const Outcome o = fn();
    report(id, title, o, seconds_since(t0));
  };

  timed(1, "backward Dijkstra equals Bellman-Ford oracle", oracle_equivalence);
  timed(2, "A* (Euclid) cost equals Dijkstra, never more expansions", astar_optimality);
  timed(3, "greedy with exact cost-to-go", greedy_exact);
  timed(4, "TD operator fixed point equals backward Dijkstra", td_fixed_point);
  timed(5, "gradient suite", gradient_suite);

  if (want(6) || want(7)) {
    const auto t0 = Clock::now();
    const Suite suite = shifting_gap_suite();
    EvalOptions opts;
    opts.jobs = jobs;
    const auto euclid = run_maps(suite.eval_labeled, HeuristicChoice::euclid(), Planner::Greedy, opts);
    const double euclid_median = median_of(euclid, [](const MapRun& r) { return static_cast<double>(r.expanded); });
    const auto optimal = run_maps(suite.eval_labeled, HeuristicChoice::optimal(), Planner::Greedy, opts);

    TrainedVariant sparse = train_variant(suite, TargetKind::Sparse, workdir, jobs);
    TrainedVariant bd = train_variant(suite, TargetKind::BD, workdir, jobs);

    std::string table = results_csv(aggregate(euclid, "Euclid", Planner::Greedy));
    table += results_csv(aggregate(optimal, "Optimal", Planner::Greedy)).substr(results_csv_header().size());
    for (const auto* v : {&sparse, &bd})
      table += results_csv(aggregate(v->runs, "Learned-" + v->name, Planner::Greedy))
                   .substr(results_csv_header().size());
    std::ofstream(fs::path(workdir) / "shifting_gap_results.csv") << table;

    std::vector<std::pair<HeuristicChoice, Planner>> timing_cfgs{
        {HeuristicChoice::euclid(), Planner::Greedy},
        {HeuristicChoice::learned(sparse.result.weights, "Learned-sparse"), Planner::Greedy},
        {HeuristicChoice::learned(bd.result.weights, "Learned-bd"), Planner::Greedy}};
    const auto timing = timing_report(suite.eval_labeled, timing_cfgs);
    std::ofstream(fs::path(workdir) / "shifting_gap_timing.csv") << timing_csv(timing);
    std::cout << "      timing (ms/map, inference + search): ";
    for (const auto& t : timing)
      std::cout << t.heuristic << " " << fmt(t.inference_ms, 3) << " + " << fmt(t.search_ms, 3) << "; ";
    std::cout << std::endl;

    if (want(6)) {
      const double ratio = sparse.median_expanded / euclid_median;
      const bool sparse_ok =
          ratio <= 0.3 && sparse.success >= 0.95 && sparse.median_quality_ratio <= 1.5;
      const bool bd_ok = bd.median_expanded <= sparse.median_expanded;
      std::ostringstream d;
      d << "median expansions Euclid " << euclid_median << ", Sparse " << sparse.median_expanded << " (ratio "
        << fmt(ratio) << ", success " << fmt(100.0 * sparse.success) << "%, median quality/optimal "
        << fmt(sparse.median_quality_ratio) << "), BD " << bd.median_expanded << " (success "
        << fmt(100.0 * bd.success) << "%, median quality/optimal " << fmt(bd.median_quality_ratio)
        << "); training " << fmt(sparse.seconds, 3) << " s + " << fmt(bd.seconds, 3) << " s";
      report(6, "desk-scale learned heuristic on shifting gap", {sparse_ok && bd_ok, d.str()}, seconds_since(t0));
    }
    if (want(7)) {
      double at100 = -1.0, at2000 = -1.0;
      for (const auto& row : bd.result.log) {
        if (row.step == 100) at100 = row.eval_mae;
        if (row.step == 2000) at2000 = row.eval_mae;
      }
      report(7, "BD eval MAE learning curve",
             {at100 > 0.0 && at2000 >= 0.0 && at2000 <= 0.5 * at100,
              "eval MAE step 100 = " + fmt(at100) + ", step 2000 = " + fmt(at2000) + " (ratio " +
                  fmt(at2000 / at100) + ")"},
             0.0);
    }
  }

  timed(8, "determinism and persistence", [&] { return determinism(workdir, jobs); });

  std::cout << (failed == 0 ? "ALL ACCEPTANCE CRITERIA PASSED" : std::to_string(failed) + " CRITERIA FAILED")
            << std::endl;
  return failed == 0 ? 0 : 1;
}
