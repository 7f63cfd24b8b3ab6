#include <pybind11/eigen.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

#include "gpode/experiments.hpp"
#include "gpode/field_model.hpp"
#include "gpode/gp_core.hpp"
#include "gpode/linear_prototype.hpp"
#include "gpode/mc_oracle.hpp"
#include "gpode/moment_matching.hpp"
#include "gpode/pull_euler.hpp"

namespace py = pybind11;
using namespace gpode;

namespace {

pull::TruncationPolicy make_policy(const std::string& mode, double param) {
  if (mode == "full") return pull::TruncationPolicy::full();
  if (mode == "none") return pull::TruncationPolicy::none_history();
  if (mode == "window") return pull::TruncationPolicy::window(static_cast<std::size_t>(param));
  if (mode == "threshold") return pull::TruncationPolicy::product_threshold(param);
  throw std::invalid_argument("truncation must be full|none|window|threshold, got '" + mode + "'");
}

}  // namespace

PYBIND11_MODULE(_core, m) {
  m.doc() = "Uncertainty propagation for ODEs with Gaussian process vector fields";

  py::register_exception<FactorizationFailure>(m, "FactorizationFailure", PyExc_RuntimeError);
  py::register_exception<linear::InvalidStep>(m, "InvalidStep", PyExc_ValueError);
  py::register_exception<mc::GridEscape>(m, "GridEscape", PyExc_RuntimeError);
  py::register_exception<experiments::ConfigError>(m, "ConfigError", PyExc_ValueError);

  py::class_<GaussianState>(m, "GaussianState")
      .def(py::init<double, double>(), py::arg("mean") = 0.0, py::arg("var") = 0.0)
      .def_readwrite("mean", &GaussianState::mean)
      .def_readwrite("var", &GaussianState::var)
      .def("__repr__", [](const GaussianState& s) {
        return "GaussianState(mean=" + std::to_string(s.mean) + ", var=" + std::to_string(s.var) + ")";
      });

  py::class_<TrajectoryDistribution>(m, "TrajectoryDistribution")
      .def_readonly("times", &TrajectoryDistribution::times)
      .def_readonly("means", &TrajectoryDistribution::means)
      .def_readonly("vars", &TrajectoryDistribution::vars)
      .def_property_readonly("method", [](const TrajectoryDistribution& t) { return t.meta.method; })
      .def_property_readonly("step", [](const TrajectoryDistribution& t) { return t.meta.step; })
      .def_property_readonly("sample_count", [](const TrajectoryDistribution& t) { return t.meta.sample_count; })
      .def_property_readonly("clamp_events", [](const TrajectoryDistribution& t) { return t.meta.clamp_events; })
      .def("terminal", &TrajectoryDistribution::terminal)
      .def("__len__", &TrajectoryDistribution::size);

  // gp_core
  py::class_<KernelConfig>(m, "KernelConfig")
      .def(py::init([](double lengthscale, double amplitude) {
             KernelConfig k{lengthscale, amplitude};
             k.validate();
             return k;
           }),
           py::arg("lengthscale") = 1.0, py::arg("amplitude") = 1.0)
      .def_readonly("lengthscale", &KernelConfig::lengthscale)
      .def_readonly("amplitude", &KernelConfig::amplitude);

  py::class_<TrainingSet>(m, "TrainingSet")
      .def(py::init([](std::vector<double> x, std::vector<double> y, double noise_var) {
             TrainingSet t{std::move(x), std::move(y), noise_var};
             t.validate();
             return t;
           }),
           py::arg("inputs"), py::arg("outputs"), py::arg("noise_var") = 0.0)
      .def_readonly("inputs", &TrainingSet::inputs)
      .def_readonly("outputs", &TrainingSet::outputs)
      .def_readonly("noise_var", &TrainingSet::noise_var);

  py::class_<GpPosterior>(m, "GpPosterior")
      .def("mean", &GpPosterior::mean, py::arg("x"))
      .def("mean_deriv", &GpPosterior::mean_deriv, py::arg("x"))
      .def("var", &GpPosterior::var, py::arg("x"))
      .def("cov", &GpPosterior::cov, py::arg("x"), py::arg("xp"))
      .def_property_readonly("applied_jitter", &GpPosterior::applied_jitter)
      .def_property_readonly("training", &GpPosterior::training)
      .def_property_readonly("kernel", &GpPosterior::kernel);

  m.def(
      "condition", [](const TrainingSet& t, const KernelConfig& k) { return condition(t, k); }, py::arg("training"),
      py::arg("kernel") = KernelConfig{});
  m.def(
      "sample_on_grid",
      [](const GpPosterior& gp, const std::vector<double>& grid, std::size_t n, std::uint64_t seed) {
        return sample_on_grid(gp, grid, n, seed).values;
      },
      py::arg("gp"), py::arg("grid"), py::arg("n_samples"), py::arg("seed") = 0);

  // field models
  py::class_<FieldModel>(m, "FieldModel")
      .def("mean", &FieldModel::mean)
      .def("mean_deriv", &FieldModel::mean_deriv)
      .def("var", &FieldModel::var)
      .def("cov", &FieldModel::cov);
  py::class_<GpField, FieldModel>(m, "GpField").def(py::init<GpPosterior>(), py::arg("posterior"));
  py::class_<LinearField, FieldModel>(m, "LinearField")
      .def(py::init<double, double, double>(), py::arg("decay"), py::arg("beta"), py::arg("offset") = 0.0);

  // linear prototype
  auto lin = m.def_submodule("linear", "Closed-form linear prototype dx/dt = -a x + B");
  py::class_<linear::LinearModelDist>(lin, "LinearModelDist")
      .def(py::init([](double a, double beta) {
             linear::LinearModelDist d{a, beta};
             d.validate();
             return d;
           }),
           py::arg("a") = 1.0, py::arg("beta") = 1.0)
      .def_readonly("a", &linear::LinearModelDist::a)
      .def_readonly("beta", &linear::LinearModelDist::beta);
  lin.def("embed", &linear::embed);
  lin.def("analytic_moments", &linear::analytic_moments, py::arg("model"), py::arg("x0"), py::arg("t"));
  lin.def("exact_fixed_point_var", &linear::exact_fixed_point_var);
  lin.def("naive_euler_fixed_point", &linear::naive_euler_fixed_point, py::arg("model"), py::arg("h"));
  lin.def("iter_flow_fixed_point", &linear::iter_flow_fixed_point, py::arg("model"), py::arg("h"));
  lin.def("naive_euler_step", &linear::naive_euler_step);
  lin.def("naive_iter_flow_step", &linear::naive_iter_flow_step);
  lin.def("cov_xb_flow", &linear::cov_xb_flow);
  py::enum_<linear::Propagator>(lin, "Propagator")
      .value("analytic", linear::Propagator::analytic)
      .value("naive_euler", linear::Propagator::naive_euler)
      .value("naive_flow", linear::Propagator::naive_flow)
      .value("corrected_euler", linear::Propagator::corrected_euler)
      .value("corrected_flow", linear::Propagator::corrected_flow);
  lin.def("propagate", &linear::propagate, py::arg("model"), py::arg("x0"), py::arg("h"), py::arg("T"),
          py::arg("method"));
  lin.def("sample_prototype", &linear::sample_prototype, py::arg("model"), py::arg("x0"), py::arg("h"), py::arg("T"),
          py::arg("n_samples"), py::arg("seed") = 0);

  // moment matching
  py::class_<MomentTerms>(m, "MomentTerms")
      .def_readonly("e_mu", &MomentTerms::e_mu)
      .def_readonly("e_sigma2", &MomentTerms::e_sigma2)
      .def_readonly("e_mu2", &MomentTerms::e_mu2)
      .def_readonly("e_xmu", &MomentTerms::e_xmu);
  m.def("closed_form_moments", &mm::closed_form_moments, py::arg("gp"), py::arg("state"));
  m.def("quadrature_moments", &mm::quadrature_moments, py::arg("model"), py::arg("state"),
        py::arg("order") = mm::kDefaultQuadratureOrder);
  m.def("mm_trajectory", &mm::mm_trajectory, py::arg("model"), py::arg("x0"), py::arg("h"), py::arg("T"));

  // PULL Euler
  m.def(
      "pull_trajectory",
      [](const FieldModel& model, const GaussianState& x0, double h, double T, const std::string& truncation,
         double param) { return pull::pull_trajectory(model, x0, h, T, make_policy(truncation, param)); },
      py::arg("model"), py::arg("x0"), py::arg("h"), py::arg("T"), py::arg("truncation") = "full",
      py::arg("param") = 0.0,
      "truncation: 'full', 'none', 'window' (param = terms kept) or 'threshold' (param = epsilon)");

  // Monte Carlo
  m.def(
      "ensemble_stats",
      [](const FieldModel& model, const GaussianState& x0, std::size_t n_fields, std::size_t n_initial, double h,
         double T, std::uint64_t seed, double grid_lo, double grid_hi, std::size_t grid_points,
         const std::string& pairing, const std::string& integrator, const std::string& interpolation,
         std::size_t workers) {
        mc::EnsembleConfig cfg;
        cfg.n_fields = n_fields;
        cfg.n_initial = n_initial;
        cfg.h = h;
        cfg.T = T;
        cfg.seed = seed;
        cfg.grid_lo = grid_lo;
        cfg.grid_hi = grid_hi;
        cfg.grid_points = grid_points;
        cfg.pairing = mc::parse_pairing(pairing);
        cfg.integrator = mc::parse_integrator(integrator);
        cfg.interpolation = mc::parse_interpolation(interpolation);
        cfg.workers = workers;
        py::gil_scoped_release release;
        return mc::ensemble_stats(model, x0, cfg).stats;
      },
      py::arg("model"), py::arg("x0"), py::arg("n_fields") = 500, py::arg("n_initial") = 50, py::arg("h") = 0.05,
      py::arg("T") = 8.0, py::arg("seed") = 0, py::arg("grid_lo") = -4.0, py::arg("grid_hi") = 4.0,
      py::arg("grid_points") = 400, py::arg("pairing") = "cross_product", py::arg("integrator") = "rk4",
      py::arg("interpolation") = "cubic", py::arg("workers") = 1);

  // experiments
  m.def(
      "default_config",
      [](const std::string& kind) {
        return experiments::to_json(experiments::default_config(experiments::parse_kind(kind))).dump();
      },
      py::arg("experiment"), "Default config of an experiment as a JSON string");
  m.def(
      "run_experiment",
      [](const std::string& config_json, bool write_files) {
        const auto cfg = experiments::parse_config(nlohmann::json::parse(config_json));
        experiments::ExperimentResult result;
        {
          py::gil_scoped_release release;
          result = experiments::run_experiment(cfg, write_files);
        }
        return py::make_tuple(result.summary.dump(), result.trajectories);
      },
      py::arg("config_json"), py::arg("write_files") = false,
      "Runs an experiment from a JSON config; returns (summary JSON string, trajectories)");
  m.attr("__version__") = experiments::version();
}
