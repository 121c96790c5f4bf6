#include "heurplan/evaluation.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <sstream>

#include "heurplan/parallel.hpp"

namespace heurplan {

Endpoints corner_endpoints(const GridMap& map) { return {{0, 0}, {map.height() - 1, map.width() - 1}}; }

double compensated_sum(std::span<const double> values) {
  double sum = 0.0, carry = 0.0;
  for (double x : values) {
    const double t = sum + x;
    if (std::abs(sum) >= std::abs(x))
      carry += (sum - t) + x;
    else
      carry += (x - t) + sum;
    sum = t;
  }
  return sum + carry;
}

double median(std::vector<double> values) {
  if (values.empty()) return 0.0;
  std::sort(values.begin(), values.end());
  const std::size_t mid = values.size() / 2;
  return values.size() % 2 ? values[mid] : 0.5 * (values[mid - 1] + values[mid]);
}

bool audit_path(const GridMap& map, std::span<const Cell> path, Cell start, Cell goal) {
  if (path.empty() || path.front() != start || path.back() != goal) return false;
  for (std::size_t i = 0; i < path.size(); ++i) {
    if (!map.contains(path[i]) || map.occupied(path[i])) return false;
    if (i == 0) continue;
    const int dr = std::abs(path[i].row - path[i - 1].row), dc = std::abs(path[i].col - path[i - 1].col);
    if (dr > 1 || dc > 1 || dr + dc == 0) return false;
  }
  return true;
}

namespace {

using Clock = std::chrono::steady_clock;

double elapsed_ms(Clock::time_point since) {
  return std::chrono::duration<double, std::milli>(Clock::now() - since).count();
}

MapRun run_one(const LabeledMap& lm, const HeuristicChoice& heuristic, Planner planner, Endpoints ends, int repeats) {
  MapRun run;
  run.kind = lm.kind;
  const GridMap& map = lm.map;
  const CostToGo truth = backward_dijkstra(map, ends.goal);
  run.optimal_cost = truth.valid[ends.start] ? truth.values[ends.start] : 0.0;

  repeats = std::max(1, repeats);
  std::vector<double> inference_times, search_times;
  std::optional<HeuristicSource> source;
  for (int k = 0; k < repeats; ++k) {
    const auto t0 = Clock::now();
    switch (heuristic.type) {
      case HeuristicChoice::Type::Optimal:
        source = HeuristicSource::table(backward_dijkstra(map, ends.goal).values);
        break;
      case HeuristicChoice::Type::Euclid:
        source = HeuristicSource::euclidean();
        break;
      case HeuristicChoice::Type::Learned:
        if (!heuristic.weights) throw std::invalid_argument("learned heuristic requires weights");
        source = HeuristicSource::table(predict_heuristic_map(*heuristic.weights, map, ends.goal));
        break;
    }
    inference_times.push_back(elapsed_ms(t0));
    // The oracle and learned maps are deterministic; one construction is enough unless timing.
    if (heuristic.type == HeuristicChoice::Type::Euclid) break;
  }
  run.inference_ms = median(inference_times);

  const ScorePolicy policy{planner, *source};
  SearchResult result;
  for (int k = 0; k < repeats; ++k) {
    const auto t0 = Clock::now();
    SearchResult r = graph_search(map, ends.start, ends.goal, policy);
    search_times.push_back(elapsed_ms(t0));
    if (k == 0) result = std::move(r);
  }
  run.search_ms = median(search_times);
  run.solved = result.found;
  run.expanded = result.expanded;
  if (result.found) {
    run.audit_ok = audit_path(map, result.path, ends.start, ends.goal);
    run.path_quality = path_quality(result.path);
    run.path = std::move(result.path);
  }
  return run;
}

}  // namespace

std::vector<MapRun> run_maps(const std::vector<LabeledMap>& maps, const HeuristicChoice& heuristic, Planner planner,
                             const EvalOptions& options) {
  if (!options.endpoints.empty() && options.endpoints.size() != maps.size())
    throw std::invalid_argument("run_maps: endpoints must be given for every map or none");
  std::vector<MapRun> runs(maps.size());
  parallel_for(maps.size(), resolve_jobs(options.jobs), [&](std::size_t i) {
    const Endpoints ends = options.endpoints.empty() ? corner_endpoints(maps[i].map) : options.endpoints[i];
    runs[i] = run_one(maps[i], heuristic, planner, ends, options.timing_repeats);
  });
  return runs;
}

std::vector<BenchRow> aggregate(const std::vector<MapRun>& runs, const std::string& heuristic, Planner planner) {
  std::vector<BenchRow> rows;
  for (auto kind : kAllKinds) {
    BenchRow row;
    row.kind = std::string(to_string(kind));
    row.heuristic = heuristic;
    row.planner = planner;
    std::vector<double> cost, quality, optimal, inference, search;
    for (const auto& r : runs) {
      if (r.kind != kind) continue;
      ++row.instances;
      if (!r.solved || !r.audit_ok) continue;
      ++row.solved;
      cost.push_back(static_cast<double>(r.expanded));
      quality.push_back(r.path_quality);
      optimal.push_back(r.optimal_cost);
      inference.push_back(r.inference_ms);
      search.push_back(r.search_ms);
    }
    if (row.instances == 0) continue;
    row.success_rate = static_cast<double>(row.solved) / row.instances;
    if (row.solved > 0) {
      const double n = row.solved;
      row.mean_search_cost = compensated_sum(cost) / n;
      row.median_search_cost = median(cost);
      row.mean_path_quality = compensated_sum(quality) / n;
      row.median_path_quality = median(quality);
      row.mean_optimal_cost = compensated_sum(optimal) / n;
      row.mean_inference_ms = compensated_sum(inference) / n;
      row.mean_search_ms = compensated_sum(search) / n;
    }
    rows.push_back(std::move(row));
  }
  return rows;
}

std::vector<BenchRow> evaluate(const std::vector<LabeledMap>& maps, const HeuristicChoice& heuristic, Planner planner,
                               const EvalOptions& options) {
  return aggregate(run_maps(maps, heuristic, planner, options), heuristic.name, planner);
}

std::string results_csv_header() {
  return "kind,heuristic,planner,instances,solved,success_rate,mean_search_cost,median_search_cost,"
         "mean_path_quality,median_path_quality,mean_optimal_cost\n";
}

std::string results_csv(const std::vector<BenchRow>& rows) {
  std::ostringstream out;
  out << results_csv_header() << std::setprecision(10);
  for (const auto& r : rows)
    out << r.kind << ',' << r.heuristic << ',' << to_string(r.planner) << ',' << r.instances << ',' << r.solved << ','
        << r.success_rate << ',' << r.mean_search_cost << ',' << r.median_search_cost << ',' << r.mean_path_quality
        << ',' << r.median_path_quality << ',' << r.mean_optimal_cost << '\n';
  return out.str();
}

std::vector<TimingRow> timing_report(const std::vector<LabeledMap>& maps,
                                     const std::vector<std::pair<HeuristicChoice, Planner>>& configs,
                                     const EvalOptions& options) {
  std::vector<TimingRow> rows;
  EvalOptions serial = options;
  serial.jobs = 1;  // concurrent runs would distort wall-clock numbers
  for (const auto& [heuristic, planner] : configs) {
    const auto runs = run_maps(maps, heuristic, planner, serial);
    std::vector<double> inference, search;
    for (const auto& r : runs) {
      inference.push_back(r.inference_ms);
      search.push_back(r.search_ms);
    }
    TimingRow row;
    row.heuristic = heuristic.name;
    row.planner = planner;
    if (!runs.empty()) {
      row.inference_ms = compensated_sum(inference) / static_cast<double>(runs.size());
      row.search_ms = compensated_sum(search) / static_cast<double>(runs.size());
    }
    row.total_ms = row.inference_ms + row.search_ms;
    rows.push_back(row);
  }
  return rows;
}

std::string timing_csv(const std::vector<TimingRow>& rows) {
  std::ostringstream out;
  out << "heuristic,planner,inference_ms,search_ms,total_ms\n" << std::fixed << std::setprecision(4);
  for (const auto& r : rows)
    out << r.heuristic << ',' << to_string(r.planner) << ',' << r.inference_ms << ',' << r.search_ms << ','
        << r.total_ms << '\n';
  return out.str();
}

std::string render_ppm(const GridMap& map, const CostField& field, std::span<const Cell> path, int scale) {
  if (field.height() != map.height() || field.width() != map.width())
    throw std::invalid_argument("render: field does not cover the map");
  if (scale < 1) throw std::invalid_argument("render: scale must be positive");
  const int h = map.height(), w = map.width();
  double lo = kInfinity, hi = -kInfinity;
  for (int r = 0; r < h; ++r)
    for (int c = 0; c < w; ++c) {
      const double v = field(r, c);
      if (map.occupied(r, c) || !std::isfinite(v)) continue;
      lo = std::min(lo, v);
      hi = std::max(hi, v);
    }
  std::vector<Rgb> pixels(static_cast<std::size_t>(h) * w);
  auto lerp = [](std::uint8_t a, std::uint8_t b, double t) {
    return static_cast<std::uint8_t>(std::lround(a + (double(b) - double(a)) * t));
  };
  for (int r = 0; r < h; ++r)
    for (int c = 0; c < w; ++c) {
      Rgb& px = pixels[static_cast<std::size_t>(r) * w + c];
      const double v = field(r, c);
      if (map.occupied(r, c)) {
        px = kObstacleColor;
      } else if (!std::isfinite(v)) {
        px = kUnreachableColor;
      } else {
        const double t = hi > lo ? (v - lo) / (hi - lo) : 0.0;
        px = {lerp(kLowColor.r, kHighColor.r, t), lerp(kLowColor.g, kHighColor.g, t), lerp(kLowColor.b, kHighColor.b, t)};
      }
    }
  for (const Cell& p : path)
    if (map.contains(p)) pixels[map.index(p)] = kPathColor;
  if (!path.empty() && map.contains(path.back())) pixels[map.index(path.back())] = kLowColor;

  std::string out = "P6\n" + std::to_string(w * scale) + " " + std::to_string(h * scale) + "\n255\n";
  out.reserve(out.size() + static_cast<std::size_t>(h) * w * scale * scale * 3);
  for (int r = 0; r < h; ++r)
    for (int sr = 0; sr < scale; ++sr)
      for (int c = 0; c < w; ++c) {
        const Rgb px = pixels[static_cast<std::size_t>(r) * w + c];
        for (int sc = 0; sc < scale; ++sc) {
          out.push_back(static_cast<char>(px.r));
          out.push_back(static_cast<char>(px.g));
          out.push_back(static_cast<char>(px.b));
        }
      }
  return out;
}

void render(const GridMap& map, const CostField& field, std::span<const Cell> path, const std::string& out_path,
            int scale) {
  const std::string bytes = render_ppm(map, field, path, scale);
  const std::string tmp = out_path + ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw std::runtime_error("render: cannot open for writing: " + out_path);
    out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
    if (!out) throw std::runtime_error("render: write failed: " + out_path);
  }
  std::filesystem::rename(tmp, out_path);
}

}  // namespace heurplan
