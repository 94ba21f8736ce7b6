// pybind11 module exposing the solver to python: dataset ingestion,
// simulation, fitting, cross-validation, bootstrap, and direct likelihood /
// derivative evaluation.  Heavy calls release the GIL; nothing here touches
// python objects off the main thread.

#include <pybind11/numpy.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "survscan/ccd.hpp"
#include "survscan/crossval.hpp"
#include "survscan/dataset.hpp"
#include "survscan/engine.hpp"
#include "survscan/errors.hpp"
#include "survscan/simgen.hpp"

namespace py = pybind11;
using namespace survscan;

namespace {

Model parse_model(const std::string& s) {
  if (s == "cox") return Model::cox;
  if (s == "finegray" || s == "fine_gray") return Model::fine_gray;
  throw DomainError("unknown model '" + s + "' (want 'cox' or 'finegray')");
}

PenaltySpec parse_penalty(const std::string& kind, double strength,
                          std::vector<std::size_t> exempt) {
  PenaltySpec spec;
  spec.strength = strength;
  spec.exempt = std::move(exempt);
  if (kind == "none")
    spec.kind = PenaltyKind::none;
  else if (kind == "l1")
    spec.kind = PenaltyKind::l1;
  else if (kind == "l2")
    spec.kind = PenaltyKind::l2;
  else
    throw DomainError("unknown penalty '" + kind + "' (want none/l1/l2)");
  return spec;
}

FitConfig make_config(double tol, std::size_t max_cycles, unsigned threads,
                      std::size_t chunk_size) {
  FitConfig cfg;
  cfg.tolerance = tol;
  cfg.max_cycles = max_cycles;
  cfg.plan.chunk_size = chunk_size;
  if (threads > 0) cfg.plan.worker_count = threads;
  return cfg;
}

py::array_t<double> to_array(const std::vector<double>& v) {
  py::array_t<double> out(static_cast<py::ssize_t>(v.size()));
  std::copy(v.begin(), v.end(), out.mutable_data());
  return out;
}

py::dict fit_dict(const FitResult& fr) {
  py::dict d;
  d["beta"] = to_array(fr.beta);
  d["objective"] = fr.objective;
  d["cycles"] = fr.cycles;
  d["converged"] = fr.converged;
  d["nonzero_count"] = fr.nonzero_count;
  d["objective_trace"] = to_array(fr.objective_trace);
  d["wall_seconds"] = fr.wall_seconds;
  d["grad_hess_seconds"] = fr.grad_hess_seconds;
  d["skipped_steps"] = fr.skipped_steps;
  d["monotonicity_violations"] = fr.monotonicity_violations;
  return d;
}

using DoubleArray = py::array_t<double, py::array::c_style | py::array::forcecast>;
using IndexArray = py::array_t<std::int64_t, py::array::c_style | py::array::forcecast>;

SurvivalDataset dataset_from_coo(DoubleArray times, IndexArray status,
                                 IndexArray rows, IndexArray cols,
                                 DoubleArray values, std::size_t n_cols) {
  if (times.size() != status.size())
    throw DomainError("times and status lengths differ");
  if (rows.size() != cols.size() || rows.size() != values.size())
    throw DomainError("rows, cols, values lengths differ");
  RawData raw;
  raw.n_cols = n_cols;
  raw.obs.reserve(static_cast<std::size_t>(times.size()));
  for (py::ssize_t i = 0; i < times.size(); ++i)
    raw.obs.push_back({times.at(i), static_cast<int>(status.at(i)),
                       static_cast<std::int64_t>(i)});
  raw.entries.reserve(static_cast<std::size_t>(rows.size()));
  for (py::ssize_t k = 0; k < rows.size(); ++k)
    raw.entries.push_back({rows.at(k), static_cast<std::size_t>(cols.at(k)),
                           values.at(k)});
  return sort_and_block(std::move(raw));
}

}  // namespace

PYBIND11_MODULE(_survscan, m) {
  m.doc() = "scan-based Cox / Fine-Gray regression core";

  py::register_exception<Error>(m, "SurvscanError", PyExc_RuntimeError);

  py::class_<SurvivalDataset>(m, "Dataset")
      .def_property_readonly("n", &SurvivalDataset::n)
      .def_property_readonly("p", &SurvivalDataset::p)
      .def_property_readonly("n_events", &SurvivalDataset::n_events)
      .def_property_readonly("has_competing", &SurvivalDataset::has_competing)
      .def_property_readonly("nnz_total", &SurvivalDataset::nnz_total)
      .def_property_readonly("content_hash", &SurvivalDataset::content_hash)
      .def_property_readonly("times",
                             [](const SurvivalDataset& ds) { return to_array(ds.times()); })
      .def_property_readonly("status",
                             [](const SurvivalDataset& ds) {
                               const auto& s = ds.status();
                               py::array_t<int> out(static_cast<py::ssize_t>(s.size()));
                               std::copy(s.begin(), s.end(), out.mutable_data());
                               return out;
                             })
      .def("covariate", &SurvivalDataset::covariate, py::arg("i"), py::arg("j"))
      .def("subset_rows",
           [](const SurvivalDataset& ds, const std::vector<std::uint32_t>& pos,
              bool fresh_row_ids) {
             return ds.subset_rows(pos, fresh_row_ids);
           },
           py::arg("positions"), py::arg("fresh_row_ids") = false)
      .def("__repr__", [](const SurvivalDataset& ds) {
        return "<survscan.Dataset n=" + std::to_string(ds.n()) +
               " p=" + std::to_string(ds.p()) +
               " events=" + std::to_string(ds.n_events()) + ">";
      });

  m.def("dataset_from_coo", &dataset_from_coo, py::arg("times"),
        py::arg("status"), py::arg("rows"), py::arg("cols"), py::arg("values"),
        py::arg("n_cols"),
        "Build a dataset from observation arrays plus COO covariate triplets.");
  m.def("load_sparse_coo", &load_sparse_coo, py::arg("obs_path"),
        py::arg("matrix_path"));
  m.def("load_dense_csv", &load_dense_csv, py::arg("path"));
  m.def("write_sparse_coo", &write_sparse_coo, py::arg("dataset"),
        py::arg("obs_path"), py::arg("matrix_path"));
  m.def("write_dense_csv", &write_dense_csv, py::arg("dataset"), py::arg("path"));

  m.def(
      "simulate_cox",
      [](std::size_t n, std::size_t p, double density, double beta_sparsity,
         std::uint64_t seed, std::optional<double> censoring_quantile) {
        CoxSim sim;
        {
          py::gil_scoped_release release;
          sim = simulate_cox({n, p, density, beta_sparsity, 0.5, seed,
                              censoring_quantile});
        }
        return py::make_tuple(std::move(sim.data), to_array(sim.true_beta));
      },
      py::arg("n"), py::arg("p"), py::arg("density") = 0.05,
      py::arg("beta_sparsity") = 0.80, py::arg("seed") = 0,
      py::arg("censoring_quantile") = std::nullopt,
      "Returns (dataset, true_beta).");

  m.def(
      "simulate_finegray",
      [](std::size_t n, std::size_t p, double density, double beta_sparsity,
         double p_mix, std::uint64_t seed,
         std::optional<double> censoring_quantile) {
        FineGraySim sim;
        {
          py::gil_scoped_release release;
          sim = simulate_finegray({n, p, density, beta_sparsity, p_mix, seed,
                                   censoring_quantile});
        }
        return py::make_tuple(std::move(sim.data), to_array(sim.true_beta1),
                              to_array(sim.true_beta2));
      },
      py::arg("n"), py::arg("p"), py::arg("density") = 0.05,
      py::arg("beta_sparsity") = 0.80, py::arg("p_mix") = 0.5,
      py::arg("seed") = 0, py::arg("censoring_quantile") = std::nullopt,
      "Returns (dataset, true_beta1, true_beta2).");

  m.def(
      "fit",
      [](const SurvivalDataset& ds, const std::string& model,
         const std::string& penalty, double strength,
         std::vector<std::size_t> exempt, double tol, std::size_t max_cycles,
         unsigned threads, std::size_t chunk_size) {
        FitResult fr;
        {
          py::gil_scoped_release release;
          fr = fit(ds, parse_model(model),
                   parse_penalty(penalty, strength, std::move(exempt)),
                   make_config(tol, max_cycles, threads, chunk_size));
        }
        return fit_dict(fr);
      },
      py::arg("dataset"), py::arg("model") = "cox", py::arg("penalty") = "none",
      py::arg("strength") = 0.0, py::arg("exempt") = std::vector<std::size_t>{},
      py::arg("tol") = 1e-6, py::arg("max_cycles") = 1000,
      py::arg("threads") = 0, py::arg("chunk_size") = 65536);

  m.def(
      "cross_validate",
      [](const SurvivalDataset& ds, const std::string& model,
         const std::string& penalty, std::vector<double> grid,
         std::uint32_t folds, std::uint32_t repetitions, std::uint64_t seed,
         std::uint32_t replicate_workers, double tol, std::size_t max_cycles,
         unsigned threads, std::size_t chunk_size) {
        CVConfig cv;
        cv.folds = folds;
        cv.repetitions = repetitions;
        cv.grid = std::move(grid);
        cv.seed = seed;
        cv.parallel_replicates = replicate_workers;
        CVResult res;
        {
          py::gil_scoped_release release;
          res = cross_validate(ds, parse_model(model),
                               parse_penalty(penalty, 0.0, {}).kind, cv,
                               make_config(tol, max_cycles, threads, chunk_size));
        }
        py::list curve;
        for (const auto& pt : res.points) {
          py::dict d;
          d["strength"] = pt.strength;
          d["mean_loglik"] = pt.mean_loglik;
          d["spread"] = pt.spread;
          d["evaluations"] = pt.evaluations;
          curve.append(std::move(d));
        }
        py::dict out;
        out["curve"] = std::move(curve);
        out["selected"] = res.selected_value;
        out["failed_replicates"] = res.failed_replicates;
        out["final_fit"] = fit_dict(res.final_fit);
        return out;
      },
      py::arg("dataset"), py::arg("model") = "cox", py::arg("penalty") = "l1",
      py::arg("grid") = std::vector<double>{}, py::arg("folds") = 10,
      py::arg("repetitions") = 10, py::arg("seed") = 0,
      py::arg("replicate_workers") = 1, py::arg("tol") = 1e-6,
      py::arg("max_cycles") = 1000, py::arg("threads") = 0,
      py::arg("chunk_size") = 65536,
      "Empty grid derives the default log-spaced one from gamma_max.");

  m.def(
      "bootstrap_interval",
      [](const SurvivalDataset& ds, const std::string& model,
         const std::string& penalty, double strength,
         std::vector<std::size_t> exempt, std::size_t coefficient,
         std::uint32_t resamples, std::uint64_t seed, double tol,
         std::size_t max_cycles, unsigned threads, std::size_t chunk_size) {
        BootstrapInterval iv;
        {
          py::gil_scoped_release release;
          iv = bootstrap_interval(
              ds, parse_model(model),
              parse_penalty(penalty, strength, std::move(exempt)),
              make_config(tol, max_cycles, threads, chunk_size), coefficient,
              resamples, seed);
        }
        return py::make_tuple(iv.lower, iv.upper, iv.failed_resamples);
      },
      py::arg("dataset"), py::arg("model"), py::arg("penalty"),
      py::arg("strength"), py::arg("exempt") = std::vector<std::size_t>{},
      py::arg("coefficient") = 0, py::arg("resamples") = 200,
      py::arg("seed") = 0, py::arg("tol") = 1e-6, py::arg("max_cycles") = 1000,
      py::arg("threads") = 0, py::arg("chunk_size") = 65536,
      "Returns (lower, upper, failed_resamples).");

  m.def(
      "gamma_max",
      [](const SurvivalDataset& ds, const std::string& model, unsigned threads,
         std::size_t chunk_size) {
        py::gil_scoped_release release;
        return gamma_max(ds, parse_model(model),
                         make_config(1e-6, 1, threads, chunk_size).plan);
      },
      py::arg("dataset"), py::arg("model") = "cox", py::arg("threads") = 0,
      py::arg("chunk_size") = 65536);
  m.def("auto_grid", &auto_grid, py::arg("top"));

  m.def(
      "log_likelihood",
      [](const SurvivalDataset& ds, const std::string& model,
         DoubleArray beta, unsigned threads, std::size_t chunk_size) {
        const std::vector<double> b(beta.data(), beta.data() + beta.size());
        py::gil_scoped_release release;
        Engine eng(ds, parse_model(model),
                   make_config(1e-6, 1, threads, chunk_size).plan);
        eng.load_beta(b);
        return eng.log_likelihood();
      },
      py::arg("dataset"), py::arg("model"), py::arg("beta"),
      py::arg("threads") = 0, py::arg("chunk_size") = 65536);

  m.def(
      "grad_hessian",
      [](const SurvivalDataset& ds, const std::string& model,
         DoubleArray beta, std::size_t column, unsigned threads,
         std::size_t chunk_size) {
        const std::vector<double> b(beta.data(), beta.data() + beta.size());
        GradHess gh;
        {
          py::gil_scoped_release release;
          Engine eng(ds, parse_model(model),
                     make_config(1e-6, 1, threads, chunk_size).plan);
          eng.load_beta(b);
          gh = eng.grad_hessian(column);
        }
        return py::make_tuple(gh.gradient, gh.hessian);
      },
      py::arg("dataset"), py::arg("model"), py::arg("beta"), py::arg("column"),
      py::arg("threads") = 0, py::arg("chunk_size") = 65536,
      "Returns (gradient, hessian) of the log-likelihood along one column.");

#ifdef SURVSCAN_VERSION
  m.attr("__version__") = SURVSCAN_VERSION;
#else
  m.attr("__version__") = "0.0.0";
#endif
}
