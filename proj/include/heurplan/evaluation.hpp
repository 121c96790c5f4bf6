#pragma once

#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "heurplan/gridworld.hpp"
#include "heurplan/model.hpp"
#include "heurplan/search.hpp"

namespace heurplan {

/// How the per-map heuristic is obtained.
///   Optimal: backward Dijkstra cost-to-go (oracle)
///   Euclid:  straight-line distance
///   Learned: one eval-mode forward pass of the network
struct HeuristicChoice {
  enum class Type { Optimal, Euclid, Learned };
  Type type = Type::Euclid;
  std::string name = "Euclid";
  const ModelWeights* weights = nullptr;

  static HeuristicChoice optimal() { return {Type::Optimal, "Optimal", nullptr}; }
  static HeuristicChoice euclid() { return {Type::Euclid, "Euclid", nullptr}; }
  static HeuristicChoice learned(const ModelWeights& w, std::string name = "Learned") {
    return {Type::Learned, std::move(name), &w};
  }
};

struct LabeledMap {
  GridMap map;
  EnvironmentKind kind = EnvironmentKind::ShiftingGap;
};

struct Endpoints {
  Cell start;
  Cell goal;
};

/// (0,0) -> (h-1, w-1)
Endpoints corner_endpoints(const GridMap& map);

/// Outcome of planning on one map.
struct MapRun {
  EnvironmentKind kind = EnvironmentKind::ShiftingGap;
  bool solved = false;
  bool audit_ok = true;  // false if a returned path failed the validity audit
  std::int64_t expanded = 0;
  double path_quality = 0.0;
  double optimal_cost = 0.0;  // Dijkstra cost, 0 when unsolvable
  double inference_ms = 0.0;  // heuristic construction (median of repeats)
  double search_ms = 0.0;     // planner only (median of repeats)
  std::vector<Cell> path;
};

struct EvalOptions {
  int jobs = 1;
  int timing_repeats = 3;
  /// Per-map endpoints; empty means corner_endpoints for every map.
  std::vector<Endpoints> endpoints;
};

std::vector<MapRun> run_maps(const std::vector<LabeledMap>& maps, const HeuristicChoice& heuristic, Planner planner,
                             const EvalOptions& options = {});

/// Path audit: nonempty, endpoints correct, 8-connected, never on an obstacle.
bool audit_path(const GridMap& map, std::span<const Cell> path, Cell start, Cell goal);

struct BenchRow {
  std::string kind;  // environment kind name, or "all"
  std::string heuristic;
  Planner planner = Planner::Greedy;
  int instances = 0;
  int solved = 0;
  double success_rate = 0.0;
  double mean_search_cost = 0.0;  // means and medians over solved instances
  double median_search_cost = 0.0;
  double mean_path_quality = 0.0;
  double median_path_quality = 0.0;
  double mean_optimal_cost = 0.0;
  double mean_inference_ms = 0.0;
  double mean_search_ms = 0.0;
};

/// Folds per-map runs into one row per environment kind (in kAllKinds order,
/// kinds without maps omitted).
std::vector<BenchRow> aggregate(const std::vector<MapRun>& runs, const std::string& heuristic, Planner planner);

std::vector<BenchRow> evaluate(const std::vector<LabeledMap>& maps, const HeuristicChoice& heuristic, Planner planner,
                               const EvalOptions& options = {});

/// Deterministic columns only (no wall-clock fields):
/// kind,heuristic,planner,instances,solved,success_rate,mean_search_cost,
/// median_search_cost,mean_path_quality,median_path_quality,mean_optimal_cost
std::string results_csv(const std::vector<BenchRow>& rows);
std::string results_csv_header();

struct TimingRow {
  std::string heuristic;
  Planner planner = Planner::Greedy;
  double inference_ms = 0.0;
  double search_ms = 0.0;
  double total_ms = 0.0;
};

/// Mean per-map inference and search time for each requested (heuristic, planner) pair.
std::vector<TimingRow> timing_report(const std::vector<LabeledMap>& maps,
                                     const std::vector<std::pair<HeuristicChoice, Planner>>& configs,
                                     const EvalOptions& options = {});
std::string timing_csv(const std::vector<TimingRow>& rows);

/// Kahan-Babuska (Neumaier) compensated sum.
double compensated_sum(std::span<const double> values);
double median(std::vector<double> values);

// --- rendering -----------------------------------------------------------------

struct Rgb {
  std::uint8_t r, g, b;
  friend bool operator==(const Rgb&, const Rgb&) = default;
};

/// Heuristic gradient endpoints: low values blue, high values yellow.
inline constexpr Rgb kLowColor{0, 0, 255};
inline constexpr Rgb kHighColor{255, 255, 0};
inline constexpr Rgb kObstacleColor{0, 0, 0};
inline constexpr Rgb kPathColor{255, 255, 255};
inline constexpr Rgb kUnreachableColor{128, 128, 128};

/// Binary PPM (P6), one pixel per cell scaled by `scale`. Free cells are
/// colored by linear interpolation between kLowColor and kHighColor over the
/// finite range of the field on free cells; non-finite values are gray,
/// obstacles black, path cells white, and the last path cell (the goal)
/// kLowColor.
std::string render_ppm(const GridMap& map, const CostField& field, std::span<const Cell> path, int scale = 1);
void render(const GridMap& map, const CostField& field, std::span<const Cell> path, const std::string& out_path,
            int scale = 1);

}  // namespace heurplan
