#include "heurplan/gridworld.hpp"

#include <algorithm>
#include <cmath>
#include <deque>
#include <fstream>
#include <istream>
#include <limits>
#include <ostream>
#include <random>
#include <sstream>

#include <json.hpp>

namespace heurplan {

std::size_t GridMap::occupied_count() const {
  return static_cast<std::size_t>(std::count(occupancy_.data().begin(), occupancy_.data().end(), 1));
}

std::string_view to_string(EnvironmentKind kind) {
  switch (kind) {
    case EnvironmentKind::ShiftingGap: return "shifting_gap";
    case EnvironmentKind::Forest: return "forest";
    case EnvironmentKind::BugtrapForest: return "bugtrap_forest";
    case EnvironmentKind::GapsForest: return "gaps_forest";
    case EnvironmentKind::SingleBugtrap: return "single_bugtrap";
    case EnvironmentKind::Mazes: return "mazes";
    case EnvironmentKind::MultipleBugtraps: return "multiple_bugtraps";
  }
  return "unknown";
}

EnvironmentKind parse_kind(std::string_view name) {
  for (auto kind : kAllKinds)
    if (to_string(kind) == name) return kind;
  throw std::invalid_argument("unknown environment kind: " + std::string(name));
}

GeneratorParams default_params(EnvironmentKind kind, int height, int width) {
  const int s = std::min(height, width);
  GeneratorParams p;
  p.gap_width = std::max(2, s / 16);
  p.wall_thickness = std::max(1, s / 32);
  p.corridor_width = std::max(1, s / 16);
  p.trap_count = 3;
  p.forest_density = 0.12;
  if (kind == EnvironmentKind::BugtrapForest || kind == EnvironmentKind::GapsForest) p.forest_density = 0.08;
  return p;
}

void validate_params(const GeneratorParams& p, int height, int width) {
  const int s = std::min(height, width);
  if (!(p.forest_density >= 0.05 && p.forest_density <= 0.30))
    throw std::invalid_argument("forest_density must lie in [0.05, 0.30]");
  if (p.gap_width < 2 || p.gap_width > height / 2) throw std::invalid_argument("gap_width out of range [2, height/2]");
  if (p.wall_thickness < 1 || p.wall_thickness > std::max(1, width / 8))
    throw std::invalid_argument("wall_thickness out of range [1, width/8]");
  if (p.corridor_width < 1 || p.corridor_width > s / 4)
    throw std::invalid_argument("corridor_width out of range [1, min(h,w)/4]");
  if (p.trap_count < 1 || p.trap_count > 8) throw std::invalid_argument("trap_count out of range [1, 8]");
}

namespace {

using Rng = std::mt19937_64;

int uniform_int(Rng& rng, int lo, int hi) {
  if (hi < lo) return lo;
  return std::uniform_int_distribution<int>(lo, hi)(rng);
}

double uniform_real(Rng& rng, double lo, double hi) { return std::uniform_real_distribution<double>(lo, hi)(rng); }

std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

void fill_rect(GridMap& map, int r0, int c0, int r1, int c1, bool value) {
  r0 = std::max(r0, 0);
  c0 = std::max(c0, 0);
  r1 = std::min(r1, map.height());
  c1 = std::min(c1, map.width());
  for (int r = r0; r < r1; ++r)
    for (int c = c0; c < c1; ++c) map.set(r, c, value);
}

void clear_corners(GridMap& map) {
  const int h = map.height(), w = map.width();
  fill_rect(map, 0, 0, 2, 2, false);
  fill_rect(map, 0, w - 2, 2, w, false);
  fill_rect(map, h - 2, 0, h, 2, false);
  fill_rect(map, h - 2, w - 2, h, w, false);
}

bool corners_connected(const GridMap& map) {
  const Cell start{0, 0}, goal{map.height() - 1, map.width() - 1};
  if (map.occupied(start) || map.occupied(goal)) return false;
  std::vector<std::uint8_t> seen(static_cast<std::size_t>(map.height()) * map.width(), 0);
  std::deque<Cell> queue{start};
  seen[map.index(start)] = 1;
  while (!queue.empty()) {
    const Cell v = queue.front();
    queue.pop_front();
    if (v == goal) return true;
    for (const auto& n : kNeighbors) {
      const Cell u{v.row + n.drow, v.col + n.dcol};
      if (!map.contains(u) || map.occupied(u) || seen[map.index(u)]) continue;
      seen[map.index(u)] = 1;
      queue.push_back(u);
    }
  }
  return false;
}

struct GapWall {
  int col0, col1;  // [col0, col1)
  int gap0, gap1;  // [gap0, gap1)
};

GapWall draw_gap_wall(GridMap& map, const GeneratorParams& p, Rng& rng) {
  const int h = map.height(), w = map.width();
  GapWall wall;
  wall.col0 = w / 2 - p.wall_thickness / 2;
  wall.col1 = wall.col0 + p.wall_thickness;
  wall.gap0 = uniform_int(rng, 1, h - 1 - p.gap_width);
  wall.gap1 = wall.gap0 + p.gap_width;
  fill_rect(map, 0, wall.col0, h, wall.col1, true);
  fill_rect(map, wall.gap0, wall.col0, wall.gap1, wall.col1, false);
  return wall;
}

void draw_forest(GridMap& map, double density, Rng& rng) {
  const int h = map.height(), w = map.width();
  const int max_radius = std::max(2, std::min(h, w) / 20);
  const auto total = static_cast<double>(h) * w;
  const double target = std::clamp(density * uniform_real(rng, 0.75, 1.25), 0.05, 0.28);
  std::size_t occupied = map.occupied_count();
  // Each blob is a filled disk; stop as soon as the target density is reached.
  while (static_cast<double>(occupied) / total < target) {
    const int radius = uniform_int(rng, 1, max_radius);
    const int cr = uniform_int(rng, 0, h - 1), cc = uniform_int(rng, 0, w - 1);
    for (int r = cr - radius; r <= cr + radius; ++r)
      for (int c = cc - radius; c <= cc + radius; ++c) {
        if (r < 0 || c < 0 || r >= h || c >= w) continue;
        const int dr = r - cr, dc = c - cc;
        if (dr * dr + dc * dc > radius * radius) continue;
        if (!map.occupied(r, c)) {
          map.set(r, c, true);
          ++occupied;
        }
      }
  }
}

enum class Side { Top, Bottom, Left, Right };

// Square cup of half-size `half` centered on (cr, cc) with a mouth on `mouth`.
void draw_bugtrap(GridMap& map, int cr, int cc, int half, int thickness, int mouth_width, Side mouth) {
  const int r0 = cr - half, r1 = cr + half + 1;
  const int c0 = cc - half, c1 = cc + half + 1;
  fill_rect(map, r0, c0, r0 + thickness, c1, true);
  fill_rect(map, r1 - thickness, c0, r1, c1, true);
  fill_rect(map, r0, c0, r1, c0 + thickness, true);
  fill_rect(map, r0, c1 - thickness, r1, c1, true);
  mouth_width = std::clamp(mouth_width, 1, 2 * half - 2 * thickness - 1);
  const int m0 = -mouth_width / 2, m1 = m0 + mouth_width;
  switch (mouth) {
    case Side::Top: fill_rect(map, r0, cc + m0, r0 + thickness, cc + m1, false); break;
    case Side::Bottom: fill_rect(map, r1 - thickness, cc + m0, r1, cc + m1, false); break;
    case Side::Left: fill_rect(map, cr + m0, c0, cr + m1, c0 + thickness, false); break;
    case Side::Right: fill_rect(map, cr + m0, c1 - thickness, cr + m1, c1, false); break;
  }
}

void draw_single_bugtrap(GridMap& map, const GeneratorParams& p, Rng& rng) {
  const int h = map.height(), w = map.width();
  const int s = std::min(h, w);
  const int half = std::max(3, s / 5);
  const int jitter = std::max(1, s / 10);
  const int cr = std::clamp(h / 2 + uniform_int(rng, -jitter, jitter), half + 2, h - half - 3);
  const int cc = std::clamp(w / 2 + uniform_int(rng, -jitter, jitter), half + 2, w - half - 3);
  // The mouth faces the (0,0) corner so a goal-directed search walks into the cup.
  const Side mouth = uniform_int(rng, 0, 1) == 0 ? Side::Top : Side::Left;
  draw_bugtrap(map, cr, cc, half, p.wall_thickness, p.gap_width, mouth);
}

void draw_multiple_bugtraps(GridMap& map, const GeneratorParams& p, Rng& rng) {
  const int h = map.height(), w = map.width();
  const int s = std::min(h, w);
  for (int i = 0; i < p.trap_count; ++i) {
    const int half = std::max(3, uniform_int(rng, s / 12, s / 7));
    const int cr = uniform_int(rng, half + 2, h - half - 3);
    const int cc = uniform_int(rng, half + 2, w - half - 3);
    const auto mouth = static_cast<Side>(uniform_int(rng, 0, 3));
    draw_bugtrap(map, cr, cc, half, std::max(1, p.wall_thickness / 2 + p.wall_thickness % 2), p.gap_width, mouth);
  }
}

// Recursive division over a coarse lattice of rooms. Walls sit on lattice
// boundaries and each split leaves one room-wide door, so the result is a
// perfect maze whose doors can never be blocked by later walls.
void draw_maze(GridMap& map, const GeneratorParams& p, Rng& rng) {
  const int h = map.height(), w = map.width();
  const int pitch = p.corridor_width + 1;
  const int rows = std::max(2, (h + 1) / pitch);
  const int cols = std::max(2, (w + 1) / pitch);
  // Pixel index of the wall line following coarse row/col i (i < count-1).
  auto row_line = [&](int i) { return (i + 1) * (h + 1) / rows - 1; };
  auto col_line = [&](int j) { return (j + 1) * (w + 1) / cols - 1; };
  auto row_begin = [&](int i) { return i == 0 ? 0 : row_line(i - 1) + 1; };
  auto col_begin = [&](int j) { return j == 0 ? 0 : col_line(j - 1) + 1; };
  auto row_end = [&](int i) { return i == rows - 1 ? h : row_line(i); };
  auto col_end = [&](int j) { return j == cols - 1 ? w : col_line(j); };

  struct Chamber {
    int r0, c0, r1, c1;  // coarse, inclusive-exclusive
  };
  std::vector<Chamber> stack{{0, 0, rows, cols}};
  while (!stack.empty()) {
    const Chamber ch = stack.back();
    stack.pop_back();
    const int nr = ch.r1 - ch.r0, nc = ch.c1 - ch.c0;
    if (nr < 2 && nc < 2) continue;
    bool horizontal = nr > nc || (nr == nc && uniform_int(rng, 0, 1) == 0);
    if (nr < 2) horizontal = false;
    if (nc < 2) horizontal = true;
    if (horizontal) {
      const int split = uniform_int(rng, ch.r0, ch.r1 - 2);  // wall after coarse row `split`
      const int door = uniform_int(rng, ch.c0, ch.c1 - 1);
      const int line = row_line(split);
      // Extend across the lattice boundaries on both ends so no diagonal slips past.
      const int x0 = ch.c0 == 0 ? 0 : col_line(ch.c0 - 1);
      const int x1 = ch.c1 == cols ? w : col_line(ch.c1 - 1) + 1;
      fill_rect(map, line, x0, line + 1, x1, true);
      fill_rect(map, line, col_begin(door), line + 1, col_end(door), false);
      stack.push_back({ch.r0, ch.c0, split + 1, ch.c1});
      stack.push_back({split + 1, ch.c0, ch.r1, ch.c1});
    } else {
      const int split = uniform_int(rng, ch.c0, ch.c1 - 2);
      const int door = uniform_int(rng, ch.r0, ch.r1 - 1);
      const int line = col_line(split);
      const int y0 = ch.r0 == 0 ? 0 : row_line(ch.r0 - 1);
      const int y1 = ch.r1 == rows ? h : row_line(ch.r1 - 1) + 1;
      fill_rect(map, y0, line, y1, line + 1, true);
      fill_rect(map, row_begin(door), line, row_end(door), line + 1, false);
      stack.push_back({ch.r0, ch.c0, ch.r1, split + 1});
      stack.push_back({ch.r0, split + 1, ch.r1, ch.c1});
    }
  }
}

GridMap generate_once(EnvironmentKind kind, int height, int width, const GeneratorParams& p, Rng& rng) {
  GridMap map(height, width);
  switch (kind) {
    case EnvironmentKind::ShiftingGap:
      draw_gap_wall(map, p, rng);
      break;
    case EnvironmentKind::Forest:
      draw_forest(map, p.forest_density, rng);
      break;
    case EnvironmentKind::BugtrapForest:
      draw_forest(map, p.forest_density, rng);
      draw_single_bugtrap(map, p, rng);
      break;
    case EnvironmentKind::GapsForest: {
      draw_forest(map, p.forest_density, rng);
      const GapWall wall = draw_gap_wall(map, p, rng);
      // Keep a clear approach on both sides of the opening.
      fill_rect(map, wall.gap0, wall.col0 - 1, wall.gap1, wall.col1 + 1, false);
      break;
    }
    case EnvironmentKind::SingleBugtrap:
      draw_single_bugtrap(map, p, rng);
      break;
    case EnvironmentKind::Mazes:
      draw_maze(map, p, rng);
      break;
    case EnvironmentKind::MultipleBugtraps:
      draw_multiple_bugtraps(map, p, rng);
      break;
  }
  if (kind != EnvironmentKind::ShiftingGap) clear_corners(map);
  return map;
}

}  // namespace

GridMap generate(EnvironmentKind kind, int height, int width, std::uint64_t seed) {
  return generate(kind, height, width, seed, default_params(kind, height, width));
}

GridMap generate(EnvironmentKind kind, int height, int width, std::uint64_t seed, const GeneratorParams& params) {
  if (height < 16 || width < 16) throw std::invalid_argument("generate: maps must be at least 16x16");
  validate_params(params, height, width);
  constexpr int kMaxAttempts = 256;
  const std::uint64_t base = splitmix64(seed ^ (static_cast<std::uint64_t>(kind) << 56));
  for (int attempt = 0; attempt < kMaxAttempts; ++attempt) {
    Rng rng(splitmix64(base + static_cast<std::uint64_t>(attempt)));
    GridMap map = generate_once(kind, height, width, params, rng);
    if (corners_connected(map)) return map;
  }
  throw std::runtime_error("generate: could not produce a corner-connected map for " + std::string(to_string(kind)));
}

std::vector<Edge> successors(const GridMap& map, Cell v) {
  std::vector<Edge> edges;
  edges.reserve(kNeighbors.size());
  for (const auto& n : kNeighbors) {
    const Cell u{v.row + n.drow, v.col + n.dcol};
    if (map.contains(u)) edges.push_back({v, u, n.cost});
  }
  return edges;
}

bool is_valid(const GridMap& map, const Edge& e) { return map.contains(e.to) && map.free(e.to); }

namespace {

// 1D squared distance transform of a sampled function (lower envelope of parabolas).
void edt_1d(const double* f, double* d, int n, std::vector<int>& v, std::vector<double>& z) {
  constexpr double inf = std::numeric_limits<double>::infinity();
  int k = 0;
  v[0] = 0;
  z[0] = -inf;
  z[1] = inf;
  for (int q = 1; q < n; ++q) {
    if (f[q] == inf) continue;
    if (f[v[k]] == inf) {
      v[k] = q;
      continue;
    }
    double s = ((f[q] + double(q) * q) - (f[v[k]] + double(v[k]) * v[k])) / (2.0 * q - 2.0 * v[k]);
    while (s <= z[k]) {
      --k;
      s = ((f[q] + double(q) * q) - (f[v[k]] + double(v[k]) * v[k])) / (2.0 * q - 2.0 * v[k]);
    }
    ++k;
    v[k] = q;
    z[k] = s;
    z[k + 1] = inf;
  }
  if (f[v[0]] == inf) {
    for (int q = 0; q < n; ++q) d[q] = inf;
    return;
  }
  k = 0;
  for (int q = 0; q < n; ++q) {
    while (z[k + 1] < q) ++k;
    const double dq = q - v[k];
    d[q] = dq * dq + f[v[k]];
  }
}

}  // namespace

CostField obstacle_distance(const GridMap& map) {
  const int h = map.height(), w = map.width();
  const double diagonal = std::sqrt(double(h) * h + double(w) * w);
  CostField out(h, w, diagonal);
  if (map.occupied_count() == 0) return out;

  constexpr double inf = std::numeric_limits<double>::infinity();
  CostField sq(h, w, inf);
  for (int r = 0; r < h; ++r)
    for (int c = 0; c < w; ++c)
      if (map.occupied(r, c)) sq(r, c) = 0.0;

  const int n = std::max(h, w);
  std::vector<double> f(n), d(n), z(n + 1);
  std::vector<int> v(n);
  for (int c = 0; c < w; ++c) {
    for (int r = 0; r < h; ++r) f[r] = sq(r, c);
    edt_1d(f.data(), d.data(), h, v, z);
    for (int r = 0; r < h; ++r) sq(r, c) = d[r];
  }
  for (int r = 0; r < h; ++r) {
    for (int c = 0; c < w; ++c) f[c] = sq(r, c);
    edt_1d(f.data(), d.data(), w, v, z);
    for (int c = 0; c < w; ++c) out(r, c) = std::sqrt(d[c]);
  }
  return out;
}

CostField goal_distance(int height, int width, Cell goal) {
  CostField out(height, width);
  if (!out.contains(goal)) throw std::invalid_argument("goal_distance: goal out of bounds");
  for (int r = 0; r < height; ++r)
    for (int c = 0; c < width; ++c) out(r, c) = std::hypot(double(r - goal.row), double(c - goal.col));
  return out;
}

FeatureStack build_features(const GridMap& map, Cell goal) {
  if (!map.contains(goal)) throw std::invalid_argument("build_features: goal out of bounds");
  if (map.occupied(goal)) throw std::invalid_argument("build_features: goal cell is occupied");
  const int h = map.height(), w = map.width();
  const double diagonal = std::sqrt(double(h) * h + double(w) * w);

  FeatureStack fs;
  fs.goal = goal;
  fs.channels[0] = CostField(h, w);
  for (int r = 0; r < h; ++r)
    for (int c = 0; c < w; ++c) fs.channels[0](r, c) = map.occupied(r, c) ? 1.0 : 0.0;
  fs.channels[1] = obstacle_distance(map);
  fs.channels[2] = goal_distance(h, w, goal);
  for (int ch = 1; ch < kFeatureChannels; ++ch)
    for (auto& x : fs.channels[ch].data()) x /= diagonal;
  return fs;
}

Placement place_features(const FeatureStack& fs, int target_h, int target_w, Cell offset) {
  const int h = fs.height(), w = fs.width();
  if (target_h < h || target_w < w) throw std::invalid_argument("place_features: canvas smaller than source");
  const double diagonal = std::sqrt(double(h) * h + double(w) * w);
  Placement out;
  out.offset = offset;
  out.features.goal = {fs.goal.row + offset.row, fs.goal.col + offset.col};
  out.features.channels[0] = translate_field(fs.channels[0], target_h, target_w, offset, 1.0);
  out.features.channels[1] = translate_field(fs.channels[1], target_h, target_w, offset, 0.0);
  CostField goal_channel(target_h, target_w);
  const Cell g = out.features.goal;
  for (int r = 0; r < target_h; ++r)
    for (int c = 0; c < target_w; ++c) goal_channel(r, c) = std::hypot(double(r - g.row), double(c - g.col)) / diagonal;
  // Source region is copied verbatim; only the padding uses the recomputed distance.
  for (int r = 0; r < h; ++r)
    for (int c = 0; c < w; ++c) goal_channel(r + offset.row, c + offset.col) = fs.channels[2](r, c);
  out.features.channels[2] = std::move(goal_channel);
  return out;
}

Placement translate_augment(const FeatureStack& fs, int target_h, int target_w, std::uint64_t seed) {
  if (target_h < fs.height() || target_w < fs.width())
    throw std::invalid_argument("translate_augment: canvas smaller than source");
  Rng rng(seed);
  const int dr = uniform_int(rng, 0, target_h - fs.height());
  const int dc = uniform_int(rng, 0, target_w - fs.width());
  return place_features(fs, target_h, target_w, {dr, dc});
}

// --- PGM --------------------------------------------------------------------

void write_pgm(std::ostream& out, const GridMap& map) {
  out << "P2\n" << map.width() << ' ' << map.height() << "\n1\n";
  for (int r = 0; r < map.height(); ++r) {
    std::string line;
    line.reserve(static_cast<std::size_t>(map.width()) * 2);
    for (int c = 0; c < map.width(); ++c) {
      if (c) line.push_back(' ');
      line.push_back(map.occupied(r, c) ? '1' : '0');
    }
    line.push_back('\n');
    out << line;
  }
}

namespace {

// Next whitespace-delimited token, skipping '#' comments.
bool next_token(std::istream& in, std::string& token) {
  token.clear();
  char ch;
  while (in.get(ch)) {
    if (ch == '#') {
      while (in.get(ch) && ch != '\n') {
      }
      continue;
    }
    if (std::isspace(static_cast<unsigned char>(ch))) {
      if (!token.empty()) return true;
      continue;
    }
    token.push_back(ch);
  }
  return !token.empty();
}

int parse_int(const std::string& token, const char* what) {
  try {
    std::size_t used = 0;
    const int value = std::stoi(token, &used);
    if (used != token.size()) throw std::invalid_argument(token);
    return value;
  } catch (const std::exception&) {
    throw FormatError(std::string("pgm: malformed ") + what + " '" + token + "'");
  }
}

}  // namespace

GridMap read_pgm(std::istream& in) {
  std::string token;
  if (!next_token(in, token) || token != "P2") throw FormatError("pgm: expected P2 magic");
  if (!next_token(in, token)) throw FormatError("pgm: missing width");
  const int width = parse_int(token, "width");
  if (!next_token(in, token)) throw FormatError("pgm: missing height");
  const int height = parse_int(token, "height");
  if (!next_token(in, token)) throw FormatError("pgm: missing maxval");
  if (parse_int(token, "maxval") != 1) throw FormatError("pgm: maxval must be 1");
  if (width <= 0 || height <= 0) throw FormatError("pgm: dimensions must be positive");
  GridMap map(height, width);
  for (int r = 0; r < height; ++r)
    for (int c = 0; c < width; ++c) {
      if (!next_token(in, token)) throw FormatError("pgm: truncated pixel data");
      const int value = parse_int(token, "pixel");
      if (value != 0 && value != 1) throw FormatError("pgm: pixel values must be 0 or 1");
      map.set(r, c, value == 1);
    }
  if (next_token(in, token)) throw FormatError("pgm: trailing data after pixels");
  return map;
}

void save_pgm(const std::string& path, const GridMap& map) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot open for writing: " + path);
  write_pgm(out, map);
  if (!out) throw std::runtime_error("write failed: " + path);
}

GridMap load_pgm(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot open map: " + path);
  return read_pgm(in);
}

// --- manifest ----------------------------------------------------------------

std::string manifest_line(const ManifestEntry& e) {
  nlohmann::ordered_json j;
  j["path"] = e.path;
  j["kind"] = std::string(to_string(e.kind));
  j["seed"] = e.seed;
  j["size"] = {e.height, e.width};
  return j.dump();
}

ManifestEntry parse_manifest_line(std::string_view line) {
  try {
    const auto j = nlohmann::json::parse(line);
    ManifestEntry e;
    e.path = j.at("path").get<std::string>();
    e.kind = parse_kind(j.at("kind").get<std::string>());
    e.seed = j.at("seed").get<std::uint64_t>();
    const auto& size = j.at("size");
    e.height = size.at(0).get<int>();
    e.width = size.at(1).get<int>();
    return e;
  } catch (const nlohmann::json::exception& ex) {
    throw FormatError(std::string("manifest: ") + ex.what());
  }
}

std::vector<ManifestEntry> read_manifest(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open manifest: " + path);
  std::vector<ManifestEntry> entries;
  std::string line;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    entries.push_back(parse_manifest_line(line));
  }
  return entries;
}

}  // namespace heurplan
