#include "heurplan/training.hpp"

#include <chrono>
#include <cmath>
#include <iomanip>
#include <random>
#include <sstream>

#include "heurplan/parallel.hpp"

namespace heurplan {

std::string_view to_string(TargetKind kind) {
  switch (kind) {
    case TargetKind::BD: return "bd";
    case TargetKind::Sparse: return "sparse";
    case TargetKind::SparseTD: return "sparse-td";
  }
  return "unknown";
}

TargetKind parse_target_kind(std::string_view name) {
  if (name == "bd") return TargetKind::BD;
  if (name == "sparse") return TargetKind::Sparse;
  if (name == "sparse-td") return TargetKind::SparseTD;
  throw std::invalid_argument("unknown target kind '" + std::string(name) + "' (expected bd, sparse or sparse-td)");
}

TrainingTargets targets_bd(const GridMap& map, Cell goal) {
  CostToGo bd = backward_dijkstra(map, goal);
  TrainingTargets t;
  t.goal = goal;
  t.mask = bd.valid;
  t.valid = bd.valid;
  t.td_mask = Mask(map.height(), map.width(), 0);
  t.target = std::move(bd.values);
  return t;
}

EndpointSample sample_endpoints(const GridMap& map, std::uint64_t seed) {
  std::vector<Cell> free_cells;
  for (int r = 0; r < map.height(); ++r)
    for (int c = 0; c < map.width(); ++c)
      if (!map.occupied(r, c)) free_cells.push_back({r, c});
  if (free_cells.size() < 2) throw EndpointSamplingError("map has fewer than two free cells");
  std::mt19937_64 rng(seed);
  std::uniform_int_distribution<std::size_t> pick(0, free_cells.size() - 1);
  for (int attempt = 0; attempt < kEndpointAttempts; ++attempt) {
    const Cell start = free_cells[pick(rng)];
    const Cell goal = free_cells[pick(rng)];
    if (start == goal) continue;
    SearchResult r = graph_search(map, start, goal, ScorePolicy::astar(HeuristicSource::euclidean()));
    if (r.found) return {start, goal, std::move(r)};
  }
  throw EndpointSamplingError("no connected start/goal pair found in " + std::to_string(kEndpointAttempts) +
                              " attempts");
}

namespace {

TrainingTargets path_targets(const GridMap& map, const SearchResult& path, Cell goal) {
  const int h = map.height(), w = map.width();
  TrainingTargets t;
  t.goal = goal;
  t.target = CostField(h, w, 0.0);
  t.mask = Mask(h, w, 0);
  t.valid = Mask(h, w, 0);
  t.td_mask = Mask(h, w, 0);
  for (int r = 0; r < h; ++r)
    for (int c = 0; c < w; ++c) t.valid(r, c) = map.occupied(r, c) ? 0 : 1;
  // Suffix cost from each path cell to the goal.
  double to_go = 0.0;
  for (std::size_t i = path.path.size(); i-- > 0;) {
    if (i + 1 < path.path.size()) to_go += path_quality(std::span(path.path).subspan(i, 2));
    t.target[path.path[i]] = to_go;
    t.mask[path.path[i]] = 1;
  }
  for (std::size_t i = 0; i < t.valid.size(); ++i)
    t.td_mask.data()[i] = (t.valid.data()[i] && !t.mask.data()[i]) ? 1 : 0;
  return t;
}

Tensor field_tensor(const CostField& f) {
  return Tensor({1, 1, f.height(), f.width()}, f.data());
}

template <typename T>
Tensor mask_tensor(const Field2D<T>& m) {
  Tensor t({1, 1, m.height(), m.width()});
  for (std::size_t i = 0; i < m.size(); ++i) t.values()[i] = m.data()[i] ? 1.0 : 0.0;
  return t;
}

}  // namespace

SparseSample targets_sparse(const GridMap& map, std::uint64_t seed) {
  EndpointSample s = sample_endpoints(map, seed);
  return {path_targets(map, s.path, s.goal), s.start, s.goal};
}

CostField td_refine(const CostField& pred, const GridMap& map, Cell goal, int steps) {
  if (pred.height() != map.height() || pred.width() != map.width())
    throw std::invalid_argument("td_refine: prediction does not cover the map");
  if (!map.contains(goal)) throw std::invalid_argument("td_refine: goal out of bounds");
  const auto shifts = nn::eight_connected_shifts();
  Tensor h = field_tensor(pred);
  auto clamp = [&](Tensor& t) {
    for (int r = 0; r < map.height(); ++r)
      for (int c = 0; c < map.width(); ++c)
        if (map.occupied(r, c)) t.at(0, 0, r, c) = kInfinity;
    t.at(0, 0, goal.row, goal.col) = 0.0;
  };
  clamp(h);
  for (int s = 0; s < steps; ++s) {
    h = nn::shift_min(h, shifts);
    clamp(h);
  }
  CostField out(map.height(), map.width());
  out.data() = std::move(h.values());
  return out;
}

nn::LossResult target_loss(const CostField& pred, const TrainingTargets& targets, const TargetSpec& spec,
                           const CostField* refined) {
  const Tensor p = field_tensor(pred);
  nn::LossResult total = nn::masked_sq_loss(p, field_tensor(targets.target), mask_tensor(targets.mask));
  if (spec.kind != TargetKind::SparseTD) return total;
  if (!refined) throw std::invalid_argument("target_loss: SparseTD requires the refined field");
  Tensor td_mask = mask_tensor(targets.td_mask);
  for (std::size_t i = 0; i < td_mask.size(); ++i)
    if (!std::isfinite(refined->data()[i])) td_mask.values()[i] = 0.0;
  const nn::LossResult td = nn::masked_sq_loss(p, field_tensor(*refined), td_mask);
  total.value += spec.td_lambda * td.value;
  for (std::size_t i = 0; i < total.grad.size(); ++i) total.grad.values()[i] += spec.td_lambda * td.grad.values()[i];
  return total;
}

namespace {

struct BatchItem {
  FeatureStack features;       // on the canvas
  TrainingTargets targets;     // on the canvas
  GridMap canvas_map;          // padding occupied
};

BatchItem make_item(const GridMap& map, const TargetSpec& spec, int canvas, std::uint64_t endpoint_seed,
                    std::uint64_t augment_seed) {
  const EndpointSample s = sample_endpoints(map, endpoint_seed);
  TrainingTargets t = spec.kind == TargetKind::BD ? targets_bd(map, s.goal) : path_targets(map, s.path, s.goal);
  const Placement placed = translate_augment(build_features(map, s.goal), canvas, canvas, augment_seed);
  const Cell off = placed.offset;

  BatchItem item;
  item.features = placed.features;
  item.targets.goal = placed.features.goal;
  item.targets.target = translate_field(t.target, canvas, canvas, off, 0.0);
  item.targets.mask = translate_field<std::uint8_t>(t.mask, canvas, canvas, off, 0);
  item.targets.td_mask = translate_field<std::uint8_t>(t.td_mask, canvas, canvas, off, 0);
  item.targets.valid = translate_field<std::uint8_t>(t.valid, canvas, canvas, off, 0);
  item.canvas_map = GridMap(canvas, canvas);
  for (int r = 0; r < canvas; ++r)
    for (int c = 0; c < canvas; ++c) {
      const int sr = r - off.row, sc = c - off.col;
      const bool inside = sr >= 0 && sc >= 0 && sr < map.height() && sc < map.width();
      item.canvas_map.set(r, c, !inside || map.occupied(sr, sc));
    }
  return item;
}

std::vector<std::span<double>> trainable_params(ModelWeights& w) {
  std::vector<std::span<double>> out;
  for (auto& e : w.entries)
    if (e.trainable) out.emplace_back(e.value.data(), e.value.size());
  return out;
}

}  // namespace

TrainResult train(const std::vector<GridMap>& dataset, const TrainConfig& cfg, const std::vector<GridMap>& eval_maps,
                  const TrainObserver& observer) {
  if (dataset.empty()) throw std::invalid_argument("train: dataset is empty");
  if (cfg.batch_size <= 0 || cfg.steps < 0) throw std::invalid_argument("train: batch size and steps must be positive");
  int largest = 0;
  for (const auto& m : dataset) largest = std::max({largest, m.height(), m.width()});
  const int canvas = cfg.canvas > 0 ? cfg.canvas : inference_canvas(largest);
  if (canvas % 8 != 0 || canvas < largest)
    throw std::invalid_argument("train: canvas must be a multiple of 8 no smaller than the largest map");
  const int jobs = resolve_jobs(cfg.jobs);

  TrainResult result;
  result.weights = build_model(cfg.model, cfg.seed);
  nn::AdamState adam;
  adam.config = cfg.adam;
  std::mt19937_64 rng(cfg.seed ^ 0x5eed5eed5eed5eedULL);
  std::uniform_int_distribution<std::size_t> pick_map(0, dataset.size() - 1);
  const auto clock_start = std::chrono::steady_clock::now();

  for (int step = 1; step <= cfg.steps; ++step) {
    // Draw every random choice for the step up front so item construction can run in parallel.
    struct Draw {
      std::size_t map;
      std::uint64_t endpoint_seed, augment_seed;
    };
    std::vector<BatchItem> items(cfg.batch_size);
    std::vector<std::uint8_t> ok(cfg.batch_size, 0);
    std::vector<Draw> draws(cfg.batch_size);
    for (auto& d : draws) d = {pick_map(rng), rng(), rng()};
    // Maps without a connected endpoint pair are skipped and redrawn.
    for (int round = 0;; ++round) {
      parallel_for(draws.size(), jobs, [&](std::size_t i) {
        if (ok[i]) return;
        try {
          items[i] = make_item(dataset[draws[i].map], cfg.target, canvas, draws[i].endpoint_seed, draws[i].augment_seed);
          ok[i] = 1;
        } catch (const EndpointSamplingError&) {
        }
      });
      bool all = true;
      for (std::size_t i = 0; i < draws.size(); ++i)
        if (!ok[i]) {
          all = false;
          ++result.skipped_maps;
          draws[i] = {pick_map(rng), rng(), rng()};
        }
      if (all) break;
      if (round > 1000) throw std::runtime_error("train: could not sample endpoints on any map");
    }

    std::vector<FeatureStack> features;
    features.reserve(items.size());
    for (const auto& it : items) features.push_back(it.features);
    const Tensor input = stack_features(features);
    ForwardCache cache;
    const Tensor pred = forward(result.weights, input, nn::Mode::Train, &cache);

    const Shape4 ps = pred.shape();
    Tensor target(ps), mask(ps), td_target(ps), td_mask(ps);
    for (int n = 0; n < ps.n; ++n) {
      const auto& t = items[n].targets;
      for (int r = 0; r < canvas; ++r)
        for (int c = 0; c < canvas; ++c) {
          target.at(n, 0, r, c) = t.target(r, c);
          mask.at(n, 0, r, c) = t.mask(r, c) ? 1.0 : 0.0;
        }
      if (cfg.target.kind == TargetKind::SparseTD) {
        CostField current(canvas, canvas);
        std::copy(pred.plane(n, 0), pred.plane(n, 0) + current.size(), current.data().begin());
        const CostField refined = td_refine(current, items[n].canvas_map, t.goal, cfg.target.td_steps);
        for (int r = 0; r < canvas; ++r)
          for (int c = 0; c < canvas; ++c) {
            const double v = refined(r, c);
            const bool use = t.td_mask(r, c) && std::isfinite(v);
            td_target.at(n, 0, r, c) = use ? v : 0.0;
            td_mask.at(n, 0, r, c) = use ? 1.0 : 0.0;
          }
      }
    }
    nn::LossResult loss = nn::masked_sq_loss(pred, target, mask);
    if (cfg.target.kind == TargetKind::SparseTD) {
      const nn::LossResult td = nn::masked_sq_loss(pred, td_target, td_mask);
      loss.value += cfg.target.td_lambda * td.value;
      for (std::size_t i = 0; i < loss.grad.size(); ++i)
        loss.grad.values()[i] += cfg.target.td_lambda * td.grad.values()[i];
    }

    const Gradients grads = backward(result.weights, cache, loss.grad);
    auto params = trainable_params(result.weights);
    std::vector<std::span<const double>> grad_spans;
    for (std::size_t k = 0; k < result.weights.entries.size(); ++k)
      if (result.weights.entries[k].trainable) grad_spans.emplace_back(grads.entries[k]);
    nn::adam_step(params, grad_spans, adam);

    TrainLogRow row;
    row.step = step;
    row.loss = loss.value;
    if (!eval_maps.empty() && ((cfg.eval_every > 0 && step % cfg.eval_every == 0) || step == cfg.steps))
      row.eval_mae = eval_mae(result.weights, eval_maps);
    row.wall_ms = std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - clock_start).count();
    result.log.push_back(row);
    if (observer) observer(row);
  }
  return result;
}

double field_mae(const CostField& pred, const CostToGo& truth) {
  if (pred.height() != truth.values.height() || pred.width() != truth.values.width())
    throw std::invalid_argument("field_mae: prediction does not cover the map");
  double sum = 0.0;
  std::size_t count = 0;
  for (std::size_t k = 0; k < truth.valid.size(); ++k)
    if (truth.valid.data()[k]) {
      sum += std::abs(pred.data()[k] - truth.values.data()[k]);
      ++count;
    }
  return count ? sum / static_cast<double>(count) : 0.0;
}

double eval_mae(const ModelWeights& weights, const std::vector<GridMap>& maps) {
  std::vector<Cell> goals;
  goals.reserve(maps.size());
  for (const auto& m : maps) goals.push_back({m.height() - 1, m.width() - 1});
  return eval_mae(weights, maps, goals);
}

double eval_mae(const ModelWeights& weights, const std::vector<GridMap>& maps, const std::vector<Cell>& goals) {
  if (maps.empty()) throw std::invalid_argument("eval_mae: no evaluation maps");
  if (goals.size() != maps.size()) throw std::invalid_argument("eval_mae: one goal per map required");
  double total = 0.0;
  for (std::size_t i = 0; i < maps.size(); ++i) {
    const CostToGo truth = backward_dijkstra(maps[i], goals[i]);
    total += field_mae(predict_heuristic_map(weights, maps[i], goals[i]), truth);
  }
  return total / static_cast<double>(maps.size());
}

std::string train_log_csv(const std::vector<TrainLogRow>& log) {
  std::ostringstream out;
  out << "step,loss,eval_mae,wall_ms\n";
  out << std::setprecision(17);
  for (const auto& r : log) {
    out << r.step << ',' << r.loss << ',';
    if (r.eval_mae >= 0.0) out << r.eval_mae;
    out << ',' << std::fixed << std::setprecision(3) << r.wall_ms << std::defaultfloat << std::setprecision(17)
        << '\n';
  }
  return out.str();
}

}  // namespace heurplan
