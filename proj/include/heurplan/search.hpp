#pragma once

#include <cstdint>
#include <limits>
#include <span>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

#include "heurplan/gridworld.hpp"

namespace heurplan {

inline constexpr double kInfinity = std::numeric_limits<double>::infinity();

double euclidean_h(Cell v, Cell goal);

/// Heuristic used by AStar/Greedy: Euclidean distance to the goal, or a
/// per-cell lookup table (a heuristic map). Lookups outside the table are +inf.
class HeuristicSource {
 public:
  static HeuristicSource euclidean() { return HeuristicSource(); }
  static HeuristicSource table(CostField values) { return HeuristicSource(std::move(values)); }

  bool is_table() const { return has_table_; }
  const CostField& values() const { return table_; }

  double operator()(Cell v, Cell goal) const {
    if (!has_table_) return euclidean_h(v, goal);
    return table_.contains(v) ? table_[v] : kInfinity;
  }

 private:
  HeuristicSource() = default;
  explicit HeuristicSource(CostField values) : has_table_(true), table_(std::move(values)) {}

  bool has_table_ = false;
  CostField table_;
};

enum class Planner { Dijkstra, AStar, Greedy };

std::string_view to_string(Planner planner);
Planner parse_planner(std::string_view name);

/// Score(v) = g (Dijkstra), g + h (AStar) or h (Greedy).
struct ScorePolicy {
  Planner planner = Planner::Dijkstra;
  HeuristicSource heuristic = HeuristicSource::euclidean();

  static ScorePolicy dijkstra() { return {Planner::Dijkstra, HeuristicSource::euclidean()}; }
  static ScorePolicy astar(HeuristicSource h) { return {Planner::AStar, std::move(h)}; }
  static ScorePolicy greedy(HeuristicSource h) { return {Planner::Greedy, std::move(h)}; }
};

struct SearchResult {
  std::vector<Cell> path;  // start -> goal, empty when !found
  double path_cost = 0.0;
  std::int64_t expanded = 0;
  bool found = false;
};

class InvalidEndpoint : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

/// Best-first search over the 8-connected grid. The open list holds duplicate
/// entries ordered by (score, insertion sequence); stale entries are skipped
/// through the closed set, and a vertex reached with a strictly cheaper g
/// leaves the closed set so it can be expanded again. An exhausted open list
/// yields found == false (the NoPath outcome).
SearchResult graph_search(const GridMap& map, Cell start, Cell goal, const ScorePolicy& policy);

struct CostToGo {
  CostField values;  // +inf on cells that cannot reach the goal
  Mask valid;        // 1 exactly where values is finite
};

/// Dense cost-to-go from every cell to `goal` (Dijkstra propagated from the goal).
CostToGo backward_dijkstra(const GridMap& map, Cell goal);

/// Accumulated step cost along an 8-connected path. Throws on non-adjacent steps.
double path_quality(std::span<const Cell> path);

/// JSON object: {"found":..,"path":[[r,c],..],"cost":..,"expanded":..}
std::string to_json(const SearchResult& result);

}  // namespace heurplan
