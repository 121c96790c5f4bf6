#pragma once

#include <array>
#include <cstddef>
#include <cstdint>
#include <iosfwd>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

namespace heurplan {

struct Cell {
  int row = 0;
  int col = 0;

  friend constexpr bool operator==(const Cell&, const Cell&) = default;
  friend constexpr auto operator<=>(const Cell&, const Cell&) = default;
};

/// Dense row-major 2D field. Used for cost fields (double) and masks (uint8_t).
template <typename T>
class Field2D {
 public:
  Field2D() = default;
  Field2D(int height, int width, T fill = T{})
      : height_(height), width_(width),
        data_(static_cast<std::size_t>(height) * static_cast<std::size_t>(width), fill) {
    if (height <= 0 || width <= 0) throw std::invalid_argument("Field2D: dimensions must be positive");
  }

  int height() const { return height_; }
  int width() const { return width_; }
  std::size_t size() const { return data_.size(); }

  bool contains(Cell c) const { return c.row >= 0 && c.col >= 0 && c.row < height_ && c.col < width_; }
  std::size_t index(Cell c) const {
    return static_cast<std::size_t>(c.row) * static_cast<std::size_t>(width_) + static_cast<std::size_t>(c.col);
  }

  T& operator()(int r, int c) { return data_[static_cast<std::size_t>(r) * width_ + c]; }
  const T& operator()(int r, int c) const { return data_[static_cast<std::size_t>(r) * width_ + c]; }
  T& operator[](Cell c) { return data_[index(c)]; }
  const T& operator[](Cell c) const { return data_[index(c)]; }

  std::vector<T>& data() { return data_; }
  const std::vector<T>& data() const { return data_; }

  friend bool operator==(const Field2D&, const Field2D&) = default;

 private:
  int height_ = 0;
  int width_ = 0;
  std::vector<T> data_;
};

using CostField = Field2D<double>;
using Mask = Field2D<std::uint8_t>;

/// Binary occupancy map. true = obstacle.
class GridMap {
 public:
  GridMap() = default;
  GridMap(int height, int width) : occupancy_(height, width, 0) {}

  int height() const { return occupancy_.height(); }
  int width() const { return occupancy_.width(); }
  bool contains(Cell c) const { return occupancy_.contains(c); }
  std::size_t index(Cell c) const { return occupancy_.index(c); }

  bool occupied(Cell c) const { return occupancy_[c] != 0; }
  bool occupied(int r, int c) const { return occupancy_(r, c) != 0; }
  bool free(Cell c) const { return occupancy_[c] == 0; }
  void set(Cell c, bool obstacle) { occupancy_[c] = obstacle ? 1 : 0; }
  void set(int r, int c, bool obstacle) { occupancy_(r, c) = obstacle ? 1 : 0; }

  std::size_t occupied_count() const;
  const Mask& occupancy() const { return occupancy_; }

  friend bool operator==(const GridMap&, const GridMap&) = default;

 private:
  Mask occupancy_;
};

struct Edge {
  Cell from;
  Cell to;
  double cost = 1.0;
};

inline constexpr double kSqrt2 = 1.41421356237309504880;

struct NeighborOffset {
  int drow;
  int dcol;
  double cost;
};

/// The 8-connected move set. Orthogonal moves first, then diagonals.
inline constexpr std::array<NeighborOffset, 8> kNeighbors{{
    {-1, 0, 1.0}, {1, 0, 1.0}, {0, -1, 1.0}, {0, 1, 1.0},
    {-1, -1, kSqrt2}, {-1, 1, kSqrt2}, {1, -1, kSqrt2}, {1, 1, kSqrt2},
}};

enum class EnvironmentKind {
  ShiftingGap,
  Forest,
  BugtrapForest,
  GapsForest,
  SingleBugtrap,
  Mazes,
  MultipleBugtraps,
};

inline constexpr std::array<EnvironmentKind, 7> kAllKinds{
    EnvironmentKind::ShiftingGap,   EnvironmentKind::Forest, EnvironmentKind::BugtrapForest,
    EnvironmentKind::GapsForest,    EnvironmentKind::SingleBugtrap, EnvironmentKind::Mazes,
    EnvironmentKind::MultipleBugtraps,
};

std::string_view to_string(EnvironmentKind kind);
/// Accepts the snake_case names produced by to_string ("shifting_gap", ...).
EnvironmentKind parse_kind(std::string_view name);

/// Per-kind generator knobs. Lengths are in cells.
///   forest_density  in [0.05, 0.30]   (fraction of cells covered by forest blobs)
///   gap_width       in [2, height/2]  (opening of gap walls and bugtrap mouths)
///   wall_thickness  in [1, width/8]
///   corridor_width  in [1, min(h,w)/4] (maze passages)
///   trap_count      in [1, 8]         (MultipleBugtraps only)
struct GeneratorParams {
  double forest_density = 0.12;
  int gap_width = 4;
  int wall_thickness = 2;
  int corridor_width = 3;
  int trap_count = 3;
};

/// Defaults scaled to the map size.
GeneratorParams default_params(EnvironmentKind kind, int height, int width);
void validate_params(const GeneratorParams& params, int height, int width);

/// Deterministic in (kind, height, width, seed, params). The four corners are
/// always free and (0,0) is connected to (height-1, width-1).
GridMap generate(EnvironmentKind kind, int height, int width, std::uint64_t seed);
GridMap generate(EnvironmentKind kind, int height, int width, std::uint64_t seed,
                 const GeneratorParams& params);

/// In-bounds 8-neighbors of v, regardless of occupancy.
std::vector<Edge> successors(const GridMap& map, Cell v);

/// Destination-only rule: an edge is invalid iff it enters an occupied cell.
bool is_valid(const GridMap& map, const Edge& e);

/// Exact Euclidean distance to the nearest occupied cell (0 on obstacles).
/// An obstacle-free map yields the map diagonal everywhere.
CostField obstacle_distance(const GridMap& map);

CostField goal_distance(int height, int width, Cell goal);

inline constexpr int kFeatureChannels = 3;

/// channel 0: occupancy (0/1), channel 1: obstacle distance / diagonal,
/// channel 2: straight-line goal distance / diagonal.
struct FeatureStack {
  std::array<CostField, kFeatureChannels> channels;
  Cell goal;

  int height() const { return channels[0].height(); }
  int width() const { return channels[0].width(); }
};

FeatureStack build_features(const GridMap& map, Cell goal);

struct Placement {
  FeatureStack features;
  Cell offset;
};

/// Copies fs into a target_h x target_w canvas at `offset`. Padding is treated
/// as obstacle: channel 0 = 1, channel 1 = 0, channel 2 continues the
/// normalized distance to the translated goal.
Placement place_features(const FeatureStack& fs, int target_h, int target_w, Cell offset);

/// place_features at a uniformly random offset.
Placement translate_augment(const FeatureStack& fs, int target_h, int target_w, std::uint64_t seed);

/// Translates a per-cell field into a larger canvas, filling the rest.
template <typename T>
Field2D<T> translate_field(const Field2D<T>& src, int target_h, int target_w, Cell offset, T fill) {
  if (offset.row < 0 || offset.col < 0 || offset.row + src.height() > target_h ||
      offset.col + src.width() > target_w)
    throw std::invalid_argument("translate_field: source does not fit at offset");
  Field2D<T> out(target_h, target_w, fill);
  for (int r = 0; r < src.height(); ++r)
    for (int c = 0; c < src.width(); ++c) out(r + offset.row, c + offset.col) = src(r, c);
  return out;
}

// --- file formats -----------------------------------------------------------

class FormatError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// ASCII PGM (P2), maxval 1, 1 = obstacle. One image row per text line.
void write_pgm(std::ostream& out, const GridMap& map);
GridMap read_pgm(std::istream& in);
void save_pgm(const std::string& path, const GridMap& map);
GridMap load_pgm(const std::string& path);

struct ManifestEntry {
  std::string path;
  EnvironmentKind kind = EnvironmentKind::ShiftingGap;
  std::uint64_t seed = 0;
  int height = 0;
  int width = 0;
};

/// JSON-lines: {"path":..,"kind":..,"seed":..,"size":[h,w]}
std::string manifest_line(const ManifestEntry& entry);
ManifestEntry parse_manifest_line(std::string_view line);
std::vector<ManifestEntry> read_manifest(const std::string& path);

}  // namespace heurplan
