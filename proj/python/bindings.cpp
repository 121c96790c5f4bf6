#include <pybind11/numpy.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

#include "heurplan/evaluation.hpp"
#include "heurplan/training.hpp"

namespace py = pybind11;
using namespace heurplan;

namespace {

using OccupancyArray = py::array_t<std::uint8_t, py::array::c_style | py::array::forcecast>;
using FieldArray = py::array_t<double, py::array::c_style | py::array::forcecast>;

GridMap to_map(const OccupancyArray& a) {
  if (a.ndim() != 2) throw std::invalid_argument("occupancy must be a 2-D array");
  GridMap m(static_cast<int>(a.shape(0)), static_cast<int>(a.shape(1)));
  auto v = a.unchecked<2>();
  for (int r = 0; r < m.height(); ++r)
    for (int c = 0; c < m.width(); ++c) m.set(r, c, v(r, c) != 0);
  return m;
}

py::array_t<std::uint8_t> from_map(const GridMap& m) {
  py::array_t<std::uint8_t> out({m.height(), m.width()});
  std::copy(m.occupancy().data().begin(), m.occupancy().data().end(), out.mutable_data());
  return out;
}

CostField to_field(const FieldArray& a) {
  if (a.ndim() != 2) throw std::invalid_argument("heuristic table must be a 2-D array");
  CostField f(static_cast<int>(a.shape(0)), static_cast<int>(a.shape(1)));
  std::copy(a.data(), a.data() + f.size(), f.data().begin());
  return f;
}

py::array_t<double> from_field(const CostField& f) {
  py::array_t<double> out({f.height(), f.width()});
  std::copy(f.data().begin(), f.data().end(), out.mutable_data());
  return out;
}

Cell to_cell(const std::pair<int, int>& p) { return {p.first, p.second}; }

py::dict result_dict(const SearchResult& r) {
  py::list path;
  for (Cell c : r.path) path.append(py::make_tuple(c.row, c.col));
  py::dict d;
  d["found"] = r.found;
  d["path"] = path;
  d["cost"] = r.path_cost;
  d["expanded"] = r.expanded;
  return d;
}

}  // namespace

PYBIND11_MODULE(_core, m) {
  m.doc() = "Grid path planning with learned heuristics";

  py::register_exception<InvalidEndpoint>(m, "InvalidEndpoint", PyExc_ValueError);
  py::register_exception<FormatError>(m, "FormatError", PyExc_ValueError);
  py::register_exception<WeightFileError>(m, "WeightFileError", PyExc_ValueError);

  m.def("kinds", [] {
    std::vector<std::string> out;
    for (auto k : kAllKinds) out.emplace_back(to_string(k));
    return out;
  });

  m.def(
      "generate",
      [](const std::string& kind, int height, int width, std::uint64_t seed) {
        return from_map(generate(parse_kind(kind), height, width, seed));
      },
      py::arg("kind"), py::arg("height"), py::arg("width"), py::arg("seed"),
      "Occupancy grid (uint8, 1 = obstacle) for a named environment kind.");

  m.def("load_pgm", [](const std::string& path) { return from_map(load_pgm(path)); }, py::arg("path"));
  m.def(
      "save_pgm", [](const std::string& path, const OccupancyArray& occ) { save_pgm(path, to_map(occ)); },
      py::arg("path"), py::arg("occupancy"));

  m.def(
      "cost_to_go",
      [](const OccupancyArray& occ, std::pair<int, int> goal) {
        return from_field(backward_dijkstra(to_map(occ), to_cell(goal)).values);
      },
      py::arg("occupancy"), py::arg("goal"), "Exact cost-to-go to goal; inf where the goal is unreachable.");

  m.def(
      "plan",
      [](const OccupancyArray& occ, std::pair<int, int> start, std::pair<int, int> goal, const std::string& planner,
         std::optional<FieldArray> heuristic) {
        const GridMap map = to_map(occ);
        HeuristicSource h = heuristic ? HeuristicSource::table(to_field(*heuristic)) : HeuristicSource::euclidean();
        ScorePolicy policy{parse_planner(planner), std::move(h)};
        SearchResult r;
        {
          py::gil_scoped_release release;
          r = graph_search(map, to_cell(start), to_cell(goal), policy);
        }
        return result_dict(r);
      },
      py::arg("occupancy"), py::arg("start"), py::arg("goal"), py::arg("planner") = "greedy",
      py::arg("heuristic") = py::none(),
      "Best-first search. heuristic: per-cell table, or None for straight-line distance.");

  py::class_<ModelWeights>(m, "Model")
      .def(py::init([](std::uint64_t seed) { return build_model({}, seed); }), py::arg("seed") = 0)
      .def_static("load", [](const std::string& path) { return load_weights(path); }, py::arg("path"))
      .def("save", [](const ModelWeights& w, const std::string& path) { save_weights(w, path); }, py::arg("path"))
      .def_property_readonly("parameter_count", &ModelWeights::parameter_count)
      .def(
          "predict",
          [](const ModelWeights& w, const OccupancyArray& occ, std::pair<int, int> goal) {
            const GridMap map = to_map(occ);
            CostField f;
            {
              py::gil_scoped_release release;
              f = predict_heuristic_map(w, map, to_cell(goal));
            }
            return from_field(f);
          },
          py::arg("occupancy"), py::arg("goal"), "Heuristic map for one goal (eval mode).");

  m.def(
      "train",
      [](const std::vector<OccupancyArray>& maps, const std::string& target, int steps, int batch_size,
         std::uint64_t seed, double td_lambda, int td_steps, int jobs) {
        std::vector<GridMap> data;
        for (const auto& a : maps) data.push_back(to_map(a));
        TrainConfig cfg;
        cfg.target.kind = parse_target_kind(target);
        cfg.target.td_lambda = td_lambda;
        cfg.target.td_steps = td_steps;
        cfg.steps = steps;
        cfg.batch_size = batch_size;
        cfg.seed = seed;
        cfg.eval_every = 0;
        cfg.jobs = jobs;
        TrainResult r;
        {
          py::gil_scoped_release release;
          r = train(data, cfg);
        }
        std::vector<double> losses;
        for (const auto& row : r.log) losses.push_back(row.loss);
        return py::make_tuple(std::move(r.weights), losses);
      },
      py::arg("maps"), py::arg("target") = "sparse", py::arg("steps") = 2000, py::arg("batch_size") = 32,
      py::arg("seed") = 0, py::arg("td_lambda") = 0.001, py::arg("td_steps") = 3, py::arg("jobs") = 1,
      "Trains a heuristic network; returns (Model, per-step losses).");
}
