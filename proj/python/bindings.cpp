// JSON-string bridge: every structured argument and result crosses the
// boundary as a JSON document; python/rholab/__init__.py converts to dicts.
#include <optional>

#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

#include "rholab/errors.hpp"
#include "rholab/experiment.hpp"
#include "rholab/functions.hpp"
#include "rholab/generators.hpp"
#include "rholab/montecarlo.hpp"
#include "rholab/path.hpp"
#include "rholab/pde.hpp"
#include "rholab/sanov.hpp"
#include "rholab/schrodinger.hpp"
#include "rholab/variational.hpp"

namespace py = pybind11;
using json = nlohmann::json;
using namespace rholab;

namespace {

json parse(const std::string& s) {
    try {
        return json::parse(s);
    } catch (const json::exception& e) {
        throw ValidationError(e.what());
    }
}

generators::GeneratorSpec generator(const std::string& s) { return generators::generator_from_json(parse(s)); }
PathFunctional functional(const std::string& s) { return functional_from_json(parse(s)); }

std::string report_json(const ConvergenceReport& rep) {
    json rows = json::array();
    for (const auto& r : rep.rows) {
        rows.push_back({{"index", r.index}, {"prelimit", r.prelimit}, {"limit", r.limit}, {"gap", r.gap}, {"aux", r.aux}});
    }
    return json{{"index_name", rep.index_name},
                {"prelimit_name", rep.prelimit_name},
                {"limit_name", rep.limit_name},
                {"rows", rows},
                {"manifest", rep.manifest}}
        .dump();
}

std::pair<double, double> pair(const montecarlo::Estimate& e) { return {e.value, e.se}; }

}  // namespace

PYBIND11_MODULE(_rholab, m) {
    m.doc() = "rholab core bindings";
    static py::handle validation = py::register_exception<ValidationError>(m, "ValidationError", PyExc_ValueError);
    // Constructors of the core types report bad parameters as std::invalid_argument.
    py::register_exception_translator([](std::exception_ptr p) {
        try {
            if (p) std::rethrow_exception(p);
        } catch (const std::invalid_argument& e) {
            PyErr_SetString(validation.ptr(), e.what());
        }
    });
    py::register_exception<InfeasibleError>(m, "InfeasibleError", PyExc_RuntimeError);
    py::register_exception<NumericalError>(m, "NumericalError", PyExc_RuntimeError);

    m.def("run", [](const std::string& config, const std::string& out, std::optional<unsigned long long> seed) {
        auto r = experiment::run(parse(config), out, seed);
        return json{{"exit_code", r.exit_code},
                    {"message", r.message},
                    {"files", r.files},
                    {"manifest", r.manifest},
                    {"report_csv", r.report_csv}}
            .dump();
    });
    m.def("resolve_config", [](const std::string& c) { return experiment::resolve_config(parse(c)).dump(); });
    m.def("config_hash", [](const std::string& c) { return experiment::config_hash(parse(c)); });
    m.def("compare", [](const std::string& a, const std::string& b, double tol, double se_multiple) {
        auto r = experiment::compare(a, b, tol, se_multiple);
        return json{{"exit_code", r.exit_code}, {"message", r.message}, {"table", r.diff.str()}}.dump();
    });

    m.def("check_ti", [](const std::string& g) {
        json out = json::array();
        for (const auto& c : generators::check_ti(generator(g)).clauses) {
            out.push_back({{"name", c.name}, {"pass", c.pass}, {"detail", c.detail}});
        }
        return out.dump();
    });
    m.def("growth_exponent", [](const std::string& g) { return generators::growth_exponent(generator(g)); });
    m.def("eval_g", [](const std::string& g, double t, double q) {
        return generators::eval_g(generator(g), t, q).to_double();
    });

    m.def("pde_value", [](const std::string& f, const std::string& g, double viscosity, const std::string& grid,
                          double x) {
        auto fn = functions::from_json(parse(f));
        return pde::solve_semilinear(fn.fn, generators::conjugate(generator(g)), viscosity,
                                     pde::grid_from_json(parse(grid)))
            .value_at(x);
    });
    m.def("hopf_lax", [](const std::string& f, const std::string& g, double t, double x, double lo, double hi,
                         double step) {
        auto fn = functions::from_json(parse(f));
        auto ys = pde::uniform_grid(lo, hi, step);
        return pde::hopf_lax(fn.fn, generator(g), t, x, ys);
    });
    m.def("vanishing_viscosity_sweep", [](const std::string& f, const std::string& g, std::vector<int> n_list,
                                          const std::string& grid, double y_step, double x0) {
        auto fn = functions::from_json(parse(f));
        return report_json(pde::vanishing_viscosity_sweep(fn.fn, generator(g), std::move(n_list),
                                                          pde::grid_from_json(parse(grid)), {y_step, x0}));
    });

    m.def("action", [](std::vector<double> times, std::vector<double> values, const std::string& g) {
        return variational::action(PathPolyline{std::move(times), std::move(values)}, generator(g)).to_double();
    });
    m.def("maximize_schilder", [](const std::string& F, const std::string& g, int knots, int restarts,
                                  unsigned long long seed, const std::string& opts) {
        auto r = variational::maximize_schilder(functional(F), generator(g), knots, restarts, seed,
                                                variational::maximize_options_from_json(parse(opts)));
        return json{{"value", r.value},
                    {"functional", r.functional},
                    {"action", r.action},
                    {"converged", r.converged},
                    {"times", r.path.times},
                    {"values", r.path.values}}
            .dump();
    });

    m.def("log_mean_exp", [](const std::string& F, double n, int steps, int paths, unsigned long long seed) {
        return pair(montecarlo::log_mean_exp(functional(F), n, montecarlo::PathBatch(steps, paths, seed)));
    });
    m.def("cramer_average", [](const std::string& F, int n, int steps, int paths, unsigned long long seed) {
        return pair(montecarlo::cramer_average(functional(F), n, montecarlo::PathBatch(steps, paths, seed)));
    });
    m.def("girsanov_lower_bound", [](const std::string& F, const std::string& g, const std::string& control, int steps,
                                     int paths, unsigned long long seed) {
        return pair(montecarlo::girsanov_lower_bound(functional(F), generator(g),
                                                     montecarlo::control_from_json(parse(control)),
                                                     montecarlo::PathBatch(steps, paths, seed)));
    });
    m.def("lsmc_y0", [](const std::string& F, const std::string& g, double n, int steps, int paths,
                        unsigned long long seed, int degree) {
        return montecarlo::lsmc_bsde(functional(F), generators::conjugate(generator(g)), n,
                                     montecarlo::PathBatch(steps, paths, seed), degree)
            .y0;
    });
    m.def("bridge_moment_check", [](double x, double y, double eps, double delta, double r, int paths, int steps,
                                    unsigned long long seed) {
        auto c = montecarlo::bridge_moment_check(x, y, eps, delta, r, {paths, steps, seed});
        return json{{"moment", c.moment},     {"moment_se", c.moment_se},   {"k_r", c.k_r},
                    {"bound", c.bound},       {"bound_available", c.bound_available},
                    {"check_times", c.check_times}, {"mean", c.mean},      {"mean_se", c.mean_se},
                    {"mean_exact", c.mean_exact},   {"variance", c.variance}, {"variance_se", c.variance_se},
                    {"variance_exact", c.variance_exact}}
            .dump();
    });
    m.def("bridge_constant", &montecarlo::bridge_constant);

    m.def("iterate_L", [](const std::string& F, const std::string& g, int n, const std::string& grid) {
        return sanov::iterate_L(sanov::mean_field_from_json(parse(F)), generator(g), n,
                                sanov::iteration_grid_from_json(parse(grid)));
    });
    m.def("mean_field_limit", [](const std::string& F, const std::string& g, const std::string& grids, double t) {
        auto mf = sanov::mean_field_from_json(parse(F));
        auto lg = sanov::limit_grids_from_json(parse(grids));
        auto v = t == 0.0 ? sanov::mean_field_limit(mf, generator(g), lg)
                          : sanov::conditional_sanov_limit(t, mf, generator(g), lg);
        return json{{"value", v.value}, {"c_star", v.c_star}, {"lambda_star", v.lambda_star}, {"m_p", v.m_p}}.dump();
    });

    m.def("ot_oracle", [](const std::string& mu, const std::string& nu, const std::string& g) {
        return schrodinger::ot_oracle(measure_from_json(parse(mu)), measure_from_json(parse(nu)), generator(g)).value;
    });
    m.def("small_noise_sweep", [](const std::string& mu, const std::string& nu, const std::string& g,
                                  std::vector<double> eps, bool mollified, double grid_step, const std::string& opts) {
        return report_json(schrodinger::small_noise_sweep(measure_from_json(parse(mu)), measure_from_json(parse(nu)),
                                                          generator(g), eps, mollified, grid_step,
                                                          schrodinger::transport_options_from_json(parse(opts))));
    });
}
