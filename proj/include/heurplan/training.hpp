#pragma once

#include <cstdint>
#include <functional>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "heurplan/gridworld.hpp"
#include "heurplan/model.hpp"
#include "heurplan/nn.hpp"
#include "heurplan/search.hpp"

namespace heurplan {

enum class TargetKind { BD, Sparse, SparseTD };

std::string_view to_string(TargetKind kind);
/// "bd", "sparse" or "sparse-td".
TargetKind parse_target_kind(std::string_view name);

struct TargetSpec {
  TargetKind kind = TargetKind::Sparse;
  double td_lambda = 0.001;
  int td_steps = 3;
};

/// Supervision for one (map, goal) pair. `mask` selects cells with planner
/// targets, `td_mask` = valid minus mask (used by SparseTD only).
struct TrainingTargets {
  CostField target;
  Mask mask;
  Mask td_mask;
  Mask valid;
  Cell goal;
};

/// Dense targets: backward Dijkstra values on every cell that reaches the goal.
TrainingTargets targets_bd(const GridMap& map, Cell goal);

struct SparseSample {
  TrainingTargets targets;
  Cell start;
  Cell goal;
};

inline constexpr int kEndpointAttempts = 100;

/// Draws start/goal uniformly over free cells until A* (Euclidean) connects
/// them, then supervises only the path cells with their suffix cost to goal.
/// `valid` is the free-cell mask. Throws after kEndpointAttempts failures.
SparseSample targets_sparse(const GridMap& map, std::uint64_t seed);

class EndpointSamplingError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Samples a connected (start, goal) pair as targets_sparse does, returning the A* result too.
struct EndpointSample {
  Cell start;
  Cell goal;
  SearchResult path;
};
EndpointSample sample_endpoints(const GridMap& map, std::uint64_t seed);

/// Repeated Bellman backups of a heuristic map: before each backup the goal is
/// clamped to 0 and occupied cells to +inf; the result keeps those clamps.
CostField td_refine(const CostField& pred, const GridMap& map, Cell goal, int steps);

/// Squared error on `mask` plus, for SparseTD, lambda-weighted squared error
/// against `refined` on `td_mask`. The refined field is a constant target.
nn::LossResult target_loss(const CostField& pred, const TrainingTargets& targets, const TargetSpec& spec,
                           const CostField* refined = nullptr);

struct TrainConfig {
  TargetSpec target;
  int batch_size = 32;
  nn::AdamConfig adam{};  // lr 0.01, beta1 0.9, beta2 0.999
  int steps = 2000;       // one step = one minibatch update
  int canvas = 0;         // augmentation canvas edge; 0 = inference_canvas(largest map edge)
  std::uint64_t seed = 0;
  int eval_every = 100;   // 0 disables periodic eval
  ModelConfig model{};
  int jobs = 1;           // workers for per-map target generation
};

struct TrainLogRow {
  int step = 0;
  double loss = 0.0;
  double eval_mae = -1.0;  // negative when not evaluated at this step
  double wall_ms = 0.0;
};

struct TrainResult {
  ModelWeights weights;
  std::vector<TrainLogRow> log;
  std::int64_t skipped_maps = 0;  // maps for which no connected endpoint pair was found
};

using TrainObserver = std::function<void(const TrainLogRow&)>;

/// On-the-fly training: each step samples a batch of maps, draws endpoints,
/// builds targets, applies one random translation per item to features and
/// targets alike, then runs forward, loss, backward and an Adam step.
TrainResult train(const std::vector<GridMap>& dataset, const TrainConfig& config,
                  const std::vector<GridMap>& eval_maps = {}, const TrainObserver& observer = {});

/// Mean |pred - truth| over the cells where truth is valid (0 when none are).
double field_mae(const CostField& pred, const CostToGo& truth);

/// Mean absolute error over BD-valid cells (goal at the far corner), averaged across maps.
double eval_mae(const ModelWeights& weights, const std::vector<GridMap>& maps);

/// Eval MAE for maps with a given goal per map.
double eval_mae(const ModelWeights& weights, const std::vector<GridMap>& maps, const std::vector<Cell>& goals);

std::string train_log_csv(const std::vector<TrainLogRow>& log);

}  // namespace heurplan
