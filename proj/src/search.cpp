#include "heurplan/search.hpp"

#include <algorithm>
#include <cmath>
#include <cstdlib>
#include <queue>
#include <sstream>

#include <json.hpp>

namespace heurplan {

double euclidean_h(Cell v, Cell goal) { return std::hypot(double(v.row - goal.row), double(v.col - goal.col)); }

std::string_view to_string(Planner planner) {
  switch (planner) {
    case Planner::Dijkstra: return "dijkstra";
    case Planner::AStar: return "astar";
    case Planner::Greedy: return "greedy";
  }
  return "unknown";
}

Planner parse_planner(std::string_view name) {
  if (name == "dijkstra") return Planner::Dijkstra;
  if (name == "astar") return Planner::AStar;
  if (name == "greedy") return Planner::Greedy;
  throw std::invalid_argument("unknown planner: " + std::string(name));
}

namespace {

struct OpenEntry {
  double score;
  std::uint64_t seq;
  std::int32_t index;
};

// Min-heap on score, FIFO among equal scores.
struct LaterFirst {
  bool operator()(const OpenEntry& a, const OpenEntry& b) const {
    if (a.score != b.score) return a.score > b.score;
    return a.seq > b.seq;
  }
};

using OpenList = std::priority_queue<OpenEntry, std::vector<OpenEntry>, LaterFirst>;

}  // namespace

SearchResult graph_search(const GridMap& map, Cell start, Cell goal, const ScorePolicy& policy) {
  if (!map.contains(start) || map.occupied(start)) throw InvalidEndpoint("start cell is outside the map or occupied");
  if (!map.contains(goal) || map.occupied(goal)) throw InvalidEndpoint("goal cell is outside the map or occupied");
  if (policy.planner != Planner::Dijkstra && policy.heuristic.is_table()) {
    const auto& t = policy.heuristic.values();
    if (t.height() != map.height() || t.width() != map.width())
      throw std::invalid_argument("graph_search: heuristic table does not cover the map");
  }

  const int h = map.height(), w = map.width();
  const std::size_t n = static_cast<std::size_t>(h) * w;
  std::vector<double> g(n, kInfinity);
  std::vector<std::int32_t> parent(n, -1);
  std::vector<std::uint8_t> closed(n, 0);

  auto score = [&](Cell v, double gv) {
    switch (policy.planner) {
      case Planner::Dijkstra: return gv;
      case Planner::AStar: return gv + policy.heuristic(v, goal);
      case Planner::Greedy: return policy.heuristic(v, goal);
    }
    return gv;
  };

  OpenList open;
  std::uint64_t seq = 0;
  const auto start_index = static_cast<std::int32_t>(map.index(start));
  const auto goal_index = static_cast<std::int32_t>(map.index(goal));
  g[start_index] = 0.0;
  open.push({score(start, 0.0), seq++, start_index});

  SearchResult result;
  while (!open.empty()) {
    const OpenEntry top = open.top();
    open.pop();
    if (closed[top.index]) continue;
    closed[top.index] = 1;
    ++result.expanded;
    if (top.index == goal_index) {
      result.found = true;
      break;
    }
    const Cell v{top.index / w, top.index % w};
    const double gv = g[top.index];
    for (const auto& nb : kNeighbors) {
      const Cell u{v.row + nb.drow, v.col + nb.dcol};
      if (u.row < 0 || u.col < 0 || u.row >= h || u.col >= w) continue;
      if (map.occupied(u)) continue;
      const auto ui = static_cast<std::int32_t>(map.index(u));
      const double gu = gv + nb.cost;
      if (gu >= g[ui]) continue;
      g[ui] = gu;
      parent[ui] = top.index;
      open.push({score(u, gu), seq++, ui});
      closed[ui] = 0;
    }
  }

  if (result.found) {
    for (std::int32_t i = goal_index; i != -1; i = parent[i]) result.path.push_back({i / w, i % w});
    std::reverse(result.path.begin(), result.path.end());
    result.path_cost = path_quality(result.path);
  }
  return result;
}

CostToGo backward_dijkstra(const GridMap& map, Cell goal) {
  if (!map.contains(goal) || map.occupied(goal)) throw InvalidEndpoint("backward_dijkstra: goal is outside the map or occupied");
  const int h = map.height(), w = map.width();
  CostToGo out{CostField(h, w, kInfinity), Mask(h, w, 0)};
  auto& dist = out.values.data();
  std::vector<std::uint8_t> done(dist.size(), 0);

  OpenList open;
  std::uint64_t seq = 0;
  const auto goal_index = static_cast<std::int32_t>(map.index(goal));
  dist[goal_index] = 0.0;
  open.push({0.0, seq++, goal_index});
  while (!open.empty()) {
    const OpenEntry top = open.top();
    open.pop();
    if (done[top.index]) continue;
    done[top.index] = 1;
    const Cell v{top.index / w, top.index % w};
    // Edge costs are symmetric and validity depends only on the entered cell,
    // so a predecessor u of v is any free neighbor.
    for (const auto& nb : kNeighbors) {
      const Cell u{v.row + nb.drow, v.col + nb.dcol};
      if (u.row < 0 || u.col < 0 || u.row >= h || u.col >= w || map.occupied(u)) continue;
      const auto ui = static_cast<std::int32_t>(map.index(u));
      const double du = dist[top.index] + nb.cost;
      if (du < dist[ui]) {
        dist[ui] = du;
        open.push({du, seq++, ui});
      }
    }
  }
  for (std::size_t i = 0; i < dist.size(); ++i) out.valid.data()[i] = std::isfinite(dist[i]) ? 1 : 0;
  return out;
}

double path_quality(std::span<const Cell> path) {
  if (path.empty()) throw std::invalid_argument("path_quality: empty path");
  double total = 0.0;
  for (std::size_t i = 1; i < path.size(); ++i) {
    const int dr = std::abs(path[i].row - path[i - 1].row);
    const int dc = std::abs(path[i].col - path[i - 1].col);
    if (dr > 1 || dc > 1 || (dr == 0 && dc == 0))
      throw std::invalid_argument("path_quality: consecutive cells are not 8-neighbors");
    total += (dr + dc == 2) ? kSqrt2 : 1.0;
  }
  return total;
}

std::string to_json(const SearchResult& result) {
  nlohmann::ordered_json j;
  j["found"] = result.found;
  auto path = nlohmann::json::array();
  for (const auto& c : result.path) path.push_back({c.row, c.col});
  j["path"] = std::move(path);
  j["cost"] = result.path_cost;
  j["expanded"] = result.expanded;
  return j.dump();
}

}  // namespace heurplan
