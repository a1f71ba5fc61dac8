#include "rholab/experiment.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <functional>
#include <map>
#include <set>
#include <sstream>

#include <Eigen/Core>

#include "rholab/errors.hpp"
#include "rholab/functions.hpp"
#include "rholab/generators.hpp"
#include "rholab/measure.hpp"
#include "rholab/montecarlo.hpp"
#include "rholab/path.hpp"
#include "rholab/pde.hpp"
#include "rholab/sanov.hpp"
#include "rholab/schrodinger.hpp"
#include "rholab/variational.hpp"

#ifndef RHOLAB_VERSION
#define RHOLAB_VERSION "unknown"
#endif

namespace rholab::experiment {

using json = nlohmann::json;
namespace fs = std::filesystem;

namespace {

// Prefixes errors raised while handling one config section with its path.
template <class F>
auto at(const std::string& path, F&& f) -> decltype(f()) {
    auto prefixed = [&](const char* what) {
        std::string w = what;
        if (w.rfind(path + ":", 0) == 0) return w;
        return path + ": " + w;
    };
    try {
        return f();
    } catch (const ValidationError& e) {
        throw ValidationError(prefixed(e.what()));
    } catch (const json::exception& e) {
        throw ValidationError(prefixed(e.what()));
    } catch (const std::invalid_argument& e) {
        throw ValidationError(prefixed(e.what()));
    } catch (const InfeasibleError& e) {
        throw InfeasibleError(prefixed(e.what()));
    } catch (const NumericalError& e) {
        throw NumericalError(prefixed(e.what()));
    }
}

// Builds the resolved copy of one config object key by key.
class Resolver {
public:
    explicit Resolver(const json& in) : in_(in) {}

    json& out() { return out_; }

    bool has(const std::string& key) const { return in_.contains(key) && !in_.at(key).is_null(); }

    const json& require(const std::string& key) {
        used_.insert(key);
        if (!has(key)) throw ValidationError(key + ": missing");
        return in_.at(key);
    }

    template <class T>
    T get(const std::string& key, T def) {
        used_.insert(key);
        T v = has(key) ? at(key, [&] { return in_.at(key).get<T>(); }) : def;
        out_[key] = v;
        return v;
    }

    template <class T>
    T need(const std::string& key) {
        T v = at(key, [&] { return require(key).template get<T>(); });
        out_[key] = v;
        return v;
    }

    // Parses a sub-object and stores its canonical form.
    void section(const std::string& key, const std::function<json(const json&)>& canon, bool required = true,
                 const json& def = json()) {
        used_.insert(key);
        if (!has(key) && required) throw ValidationError(key + ": missing");
        const json& src = has(key) ? in_.at(key) : def;
        out_[key] = at(key, [&] { return canon(src); });
    }

    void finish() const {
        for (auto it = in_.begin(); it != in_.end(); ++it) {
            if (!used_.count(it.key())) throw ValidationError(it.key() + ": unknown key");
        }
    }

private:
    const json& in_;
    json out_ = json::object();
    std::set<std::string> used_;
};

json canon_generator(const json& j) { return generators::to_json(generators::generator_from_json(j)); }
json canon_function(const json& j) { return functions::from_json(j).spec; }
json canon_functional(const json& j) {
    functional_from_json(j);
    return j;
}
json canon_measure(const json& j) { return to_json(measure_from_json(j)); }

void positive_list(const std::string& key, const std::vector<int>& v) {
    if (v.empty()) throw ValidationError(key + ": empty list");
    for (int n : v) {
        if (n < 1) throw ValidationError(key + ": entries must be positive");
    }
}

void require_seed(Resolver& r) {
    if (!r.has("seed")) throw ValidationError("seed: missing (mandatory for stochastic experiments)");
    r.need<unsigned long long>("seed");
}

json resolve_kind(const std::string& kind, const json& c) {
    Resolver r(c);
    r.get<std::string>("kind", kind);
    if (kind == "pde-sweep") {
        r.section("generator", canon_generator);
        r.section("terminal", canon_function);
        r.section("grid", [](const json& j) { return pde::to_json(pde::grid_from_json(j)); }, false, json::object());
        positive_list("n_list", r.get<std::vector<int>>("n_list", {1, 2, 4, 8, 16, 32, 64}));
        if (!(r.get<double>("y_step", 1e-5) > 0.0)) throw ValidationError("y_step: must be positive");
        r.get<double>("x0", 0.0);
    } else if (kind == "schilder") {
        r.section("generator", canon_generator, false, json{{"variant", "quadratic"}});
        r.section("functional", canon_functional);
        if (r.get<int>("m", 64) < 1) throw ValidationError("m: must be positive");
        if (r.get<int>("restarts", 8) < 1) throw ValidationError("restarts: must be positive");
        r.get<unsigned long long>("seed", 1);
        r.section("options", [](const json& j) {
            return variational::to_json(variational::maximize_options_from_json(j));
        }, false, json::object());
    } else if (kind == "sanov-iterate") {
        r.section("generator", canon_generator, false, json{{"variant", "quadratic"}});
        r.section("functional", [](const json& j) { return sanov::to_json(sanov::mean_field_from_json(j)); });
        r.section("iteration_grid", [](const json& j) {
            return sanov::to_json(sanov::iteration_grid_from_json(j));
        }, false, json::object());
        r.section("limit_grids", [](const json& j) {
            return sanov::to_json(sanov::limit_grids_from_json(j));
        }, false, json::object());
        positive_list("n_list", r.get<std::vector<int>>("n_list", {1, 2, 4, 8}));
    } else if (kind == "schrodinger-sweep") {
        r.section("generator", canon_generator, false, json{{"variant", "quadratic"}});
        r.section("mu", canon_measure);
        r.section("nu", canon_measure);
        auto eps = r.need<std::vector<double>>("eps");
        if (eps.empty()) throw ValidationError("eps: empty list");
        r.get<bool>("mollified", true);
        if (!(r.get<double>("grid_step", 0.01) > 0.0)) throw ValidationError("grid_step: must be positive");
        r.section("options", [](const json& j) {
            return schrodinger::to_json(schrodinger::transport_options_from_json(j));
        }, false, json::object());
    } else if (kind == "mc-estimate") {
        auto est = r.get<std::string>("estimator", "log_mean_exp");
        if (est != "log_mean_exp" && est != "cramer" && est != "girsanov") {
            throw ValidationError("estimator: unknown estimator '" + est + "'");
        }
        r.section("functional", canon_functional);
        require_seed(r);
        if (r.get<int>("paths", 100000) < 2) throw ValidationError("paths: need at least 2");
        if (r.get<int>("steps", 256) < 1) throw ValidationError("steps: must be positive");
        if (est == "girsanov") {
            r.section("generator", canon_generator);
            r.section("control", [](const json& j) {
                montecarlo::control_from_json(j);
                return j;
            });
        } else {
            positive_list("n_list", r.get<std::vector<int>>("n_list", {1, 2, 4, 8, 16}));
        }
        r.get<bool>("oracle", true);
        r.section("oracle_grid", [](const json& j) { return pde::to_json(pde::grid_from_json(j)); }, false,
                  json::object());
    } else if (kind == "bsde-lsmc") {
        r.section("generator", canon_generator, false, json{{"variant", "quadratic"}});
        r.section("functional", canon_functional);
        require_seed(r);
        if (r.get<int>("paths", 100000) < 2) throw ValidationError("paths: need at least 2");
        if (r.get<int>("steps", 64) < 1) throw ValidationError("steps: must be positive");
        if (r.get<int>("degree", 3) < 0) throw ValidationError("degree: must be nonnegative");
        positive_list("n_list", r.get<std::vector<int>>("n_list", {1, 4, 16}));
        if (r.get<int>("m", 64) < 1) throw ValidationError("m: must be positive");
        if (r.get<int>("restarts", 4) < 1) throw ValidationError("restarts: must be positive");
        r.section("options", [](const json& j) {
            return variational::to_json(variational::maximize_options_from_json(j));
        }, false, json::object());
    } else if (kind == "ti-check") {
        r.section("generator", canon_generator);
    } else if (kind == "bridge-check") {
        require_seed(r);
        r.get<double>("x", 0.0);
        r.get<double>("y", 1.0);
        if (!(r.get<double>("epsilon", 1.0) > 0.0)) throw ValidationError("epsilon: must be positive");
        if (!(r.get<double>("delta", 1.0) > 0.0)) throw ValidationError("delta: must be positive");
        if (!(r.get<double>("r", 1.5) > 1.0)) throw ValidationError("r: must exceed 1");
        if (r.get<int>("paths", 100000) < 2) throw ValidationError("paths: need at least 2");
        if (r.get<int>("steps", 1000) < 2) throw ValidationError("steps: need at least 2");
        for (double e : r.get<std::vector<double>>("etas", {1e-1, 1e-2, 1e-3, 1e-4})) {
            if (!(e > 0.0)) throw ValidationError("etas: entries must be positive");
        }
    } else {
        throw ValidationError("kind: unknown experiment kind '" + kind + "'");
    }
    r.finish();
    return r.out();
}

// ---- execution ----

struct Output {
    CsvTable table;
    std::string csv_name;
    json report_manifest = json::object();
    std::vector<std::pair<std::string, std::string>> extra_files;  // name, content
    int exit_code = 0;
    std::string message;
};

std::vector<Cell> report_row(const ConvergenceRow& r) { return {r.index, r.prelimit, r.limit, r.gap}; }

CsvTable report_table(const ConvergenceReport& rep) {
    CsvTable t;
    t.header = {rep.index_name, rep.prelimit_name, rep.limit_name, "gap"};
    for (const auto& r : rep.rows) t.rows.push_back(report_row(r));
    return t;
}

json rows_aux(const ConvergenceReport& rep) {
    json a = json::array();
    for (const auto& r : rep.rows) a.push_back(r.aux);
    return a;
}

void run_pde_sweep(const json& c, Output& out) {
    auto g = generators::generator_from_json(c.at("generator"));
    auto f = functions::from_json(c.at("terminal"));
    auto grid = pde::grid_from_json(c.at("grid"));
    pde::SweepOptions so;
    so.y_step = c.at("y_step").get<double>();
    so.x0 = c.at("x0").get<double>();
    auto rep = at("grid", [&] {
        return pde::vanishing_viscosity_sweep(f.fn, g, c.at("n_list").get<std::vector<int>>(), grid, so);
    });
    rep.sort_rows();
    rep.recompute_gaps();
    out.table = report_table(rep);
    out.report_manifest = rep.manifest;
    out.report_manifest["rows"] = rows_aux(rep);
}

void run_schilder(const json& c, Output& out) {
    auto g = generators::generator_from_json(c.at("generator"));
    auto F = functional_from_json(c.at("functional"));
    auto opts = variational::maximize_options_from_json(c.at("options"));
    auto res = at("functional", [&] {
        return variational::maximize_schilder(F, g, c.at("m").get<int>(), c.at("restarts").get<int>(),
                                              c.at("seed").get<unsigned long long>(), opts);
    });
    out.csv_name = "path.csv";
    out.table.header = {"t", "omega"};
    for (std::size_t i = 0; i < res.path.times.size(); ++i) {
        out.table.rows.push_back({res.path.times[i], res.path.values[i]});
    }
    json value = {{"value", res.value},
                  {"functional", res.functional},
                  {"action", res.action},
                  {"converged", res.converged},
                  {"iterations", res.iterations},
                  {"best_restart", res.best_restart}};
    out.extra_files.emplace_back("value.json", value.dump(2) + "\n");
    out.report_manifest = value;
    if (!std::isfinite(res.value)) {
        out.exit_code = 4;
        out.message = "functional: the variational value is not finite";
    }
}

void run_sanov(const json& c, Output& out) {
    auto g = generators::generator_from_json(c.at("generator"));
    auto F = sanov::mean_field_from_json(c.at("functional"));
    auto grid = sanov::iteration_grid_from_json(c.at("iteration_grid"));
    auto lg = sanov::limit_grids_from_json(c.at("limit_grids"));
    auto rep = at("iteration_grid", [&] {
        return sanov::iterate_sweep(F, g, c.at("n_list").get<std::vector<int>>(), grid, lg);
    });
    rep.sort_rows();
    rep.recompute_gaps();
    out.table = report_table(rep);
    out.report_manifest = rep.manifest;
    out.report_manifest["rows"] = rows_aux(rep);
}

void run_schrodinger(const json& c, Output& out) {
    auto g = generators::generator_from_json(c.at("generator"));
    auto mu = measure_from_json(c.at("mu"));
    auto nu = measure_from_json(c.at("nu"));
    auto opts = schrodinger::transport_options_from_json(c.at("options"));
    auto eps = c.at("eps").get<std::vector<double>>();
    // The sweep runs from large to small noise.
    std::sort(eps.begin(), eps.end(), std::greater<>());
    auto rep = at("eps", [&] {
        return schrodinger::small_noise_sweep(mu, nu, g, eps, c.at("mollified").get<bool>(),
                                              c.at("grid_step").get<double>(), opts);
    });
    rep.sort_rows();
    rep.recompute_gaps();
    out.table.header = {"eps", "value", "ot", "gap", "feasible"};
    bool infeasible = false, unconverged = false;
    for (const auto& r : rep.rows) {
        bool feasible = r.aux.value("feasible", false);
        std::string status = r.aux.value("status", std::string());
        if (status == "infeasible") infeasible = true;
        if (status == "not_converged") unconverged = true;
        out.table.rows.push_back({r.index, r.prelimit, r.limit, r.gap, feasible});
    }
    out.report_manifest = rep.manifest;
    out.report_manifest["rows"] = rows_aux(rep);
    out.report_manifest["reference_measure"] =
        "heat kernel: K(x, y) = step / sqrt(2 pi eps) exp(-(y - x)^2 / (2 eps)); entropic values carry no "
        "additive constant relative to the drift cost";
    if (infeasible) {
        out.exit_code = 4;
        out.message = "nu: target unreachable at some eps (rows flagged feasible=false)";
    } else if (unconverged) {
        out.exit_code = 3;
        out.message = "options: the transport solver did not converge at some eps";
    }
}

double terminal_oracle(const PathFunctional& F, const generators::ConjugateSpec& gstar, double viscosity,
                       const pde::GridSpec& grid) {
    return at("oracle_grid", [&] {
        return pde::solve_semilinear([&](double x) { return F.terminal(x); }, gstar, viscosity, grid).value_at(0.0);
    });
}

void run_mc(const json& c, Output& out) {
    auto est = c.at("estimator").get<std::string>();
    auto F = functional_from_json(c.at("functional"));
    montecarlo::PathBatch batch(c.at("steps").get<int>(), c.at("paths").get<int>(),
                                c.at("seed").get<unsigned long long>());
    bool oracle = c.at("oracle").get<bool>() && F.kind() == PathFunctional::Kind::terminal_value;
    auto grid = pde::grid_from_json(c.at("oracle_grid"));
    out.table.header = {"estimator", "n", "estimate", "se", "oracle", "gap"};
    const double nan = std::numeric_limits<double>::quiet_NaN();
    auto add = [&](int n, const montecarlo::Estimate& e, double o) {
        out.table.rows.push_back({est, static_cast<long long>(n), e.value, e.se, o, std::abs(e.value - o)});
    };
    if (est == "girsanov") {
        auto g = generators::generator_from_json(c.at("generator"));
        auto q = montecarlo::control_from_json(c.at("control"));
        auto e = at("control", [&] { return montecarlo::girsanov_lower_bound(F, g, q, batch); });
        add(1, e, oracle ? terminal_oracle(F, generators::conjugate(g), 1.0, grid) : nan);
    } else {
        auto gstar = generators::conjugate(generators::GeneratorSpec::quadratic());
        auto ns = c.at("n_list").get<std::vector<int>>();
        std::sort(ns.begin(), ns.end());
        for (int n : ns) {
            auto e = at("n_list", [&] {
                return est == "cramer" ? montecarlo::cramer_average(F, n, batch)
                                       : montecarlo::log_mean_exp(F, n, batch);
            });
            add(n, e, oracle ? terminal_oracle(F, gstar, 1.0 / n, grid) : nan);
        }
    }
    out.report_manifest = {{"oracle", oracle ? "PDE value v(0, 0) at viscosity 1/n" : "none"},
                           {"block_size", montecarlo::PathBatch::block_size}};
}

void run_lsmc(const json& c, Output& out) {
    auto g = generators::generator_from_json(c.at("generator"));
    auto F = functional_from_json(c.at("functional"));
    auto seed = c.at("seed").get<unsigned long long>();
    montecarlo::PathBatch batch(c.at("steps").get<int>(), c.at("paths").get<int>(), seed);
    auto opts = variational::maximize_options_from_json(c.at("options"));
    auto lim = at("functional", [&] {
        return variational::maximize_schilder(F, g, c.at("m").get<int>(), c.at("restarts").get<int>(), seed, opts);
    });
    auto gstar = generators::conjugate(g);
    ConvergenceReport rep;
    rep.prelimit_name = "y0";
    auto ns = c.at("n_list").get<std::vector<int>>();
    std::sort(ns.begin(), ns.end());
    for (int n : ns) {
        auto sol = at("n_list", [&] { return montecarlo::lsmc_bsde(F, gstar, n, batch, c.at("degree").get<int>()); });
        rep.add(n, sol.y0, lim.value,
                {{"fallbacks", sol.fallbacks}, {"terminal_residual", sol.terminal_residual}});
    }
    out.table = report_table(rep);
    out.report_manifest = {{"limit", "variational maximum of F - action"},
                           {"limit_converged", lim.converged},
                           {"rows", rows_aux(rep)}};
}

void run_ti(const json& c, Output& out) {
    auto g = generators::generator_from_json(c.at("generator"));
    auto rep = generators::check_ti(g);
    out.table.header = {"clause", "pass", "detail"};
    std::string failed;
    for (const auto& cl : rep.clauses) {
        std::string detail = cl.detail;
        std::replace(detail.begin(), detail.end(), ',', ';');
        out.table.rows.push_back({cl.name, cl.pass, detail});
        if (!cl.pass && failed.empty()) failed = cl.name;
    }
    out.report_manifest = {{"growth_exponent", generators::growth_exponent(g)}};
    if (!failed.empty()) {
        out.exit_code = 2;
        out.message = "generator: clause '" + failed + "' fails";
    }
}

void run_bridge(const json& c, Output& out) {
    double x = c.at("x").get<double>(), y = c.at("y").get<double>();
    double eps = c.at("epsilon").get<double>(), delta = c.at("delta").get<double>(), r = c.at("r").get<double>();
    montecarlo::BridgeSampling s{c.at("paths").get<int>(), c.at("steps").get<int>(),
                                 c.at("seed").get<unsigned long long>()};
    auto chk = at("r", [&] { return montecarlo::bridge_moment_check(x, y, eps, delta, r, s); });
    out.table.header = {"quantity", "t", "value", "se", "reference"};
    const double nan = std::numeric_limits<double>::quiet_NaN();
    out.table.rows.push_back({std::string("moment"), delta, chk.moment, chk.moment_se,
                              chk.bound_available ? chk.bound : nan});
    for (std::size_t i = 0; i < chk.check_times.size(); ++i) {
        out.table.rows.push_back({std::string("mean"), chk.check_times[i], chk.mean[i], chk.mean_se[i],
                                  chk.mean_exact[i]});
    }
    for (std::size_t i = 0; i < chk.check_times.size(); ++i) {
        out.table.rows.push_back({std::string("variance"), chk.check_times[i], chk.variance[i],
                                  chk.variance_se[i], chk.variance_exact[i]});
    }
    for (double eta : c.at("etas").get<std::vector<double>>()) {
        auto e = at("etas", [&] { return montecarlo::bridge_truncated_moment(x, y, eps, delta, 2.0, eta, s); });
        out.table.rows.push_back({std::string("truncated_square_moment"), delta - eta, e.value, e.se,
                                  montecarlo::bridge_truncated_square_moment(x, y, eps, delta, eta)});
    }
    out.report_manifest = {{"k_r", chk.k_r}, {"bound_available", chk.bound_available}};
}

using Runner = void (*)(const json&, Output&);

const std::map<std::string, Runner>& runners() {
    static const std::map<std::string, Runner> m{
        {"pde-sweep", run_pde_sweep}, {"schilder", run_schilder},       {"sanov-iterate", run_sanov},
        {"schrodinger-sweep", run_schrodinger}, {"mc-estimate", run_mc}, {"bsde-lsmc", run_lsmc},
        {"ti-check", run_ti},         {"bridge-check", run_bridge}};
    return m;
}

void write_text(const fs::path& p, const std::string& s) {
    std::ofstream o(p, std::ios::binary);
    if (!o) throw ValidationError("output_dir: cannot write " + p.string());
    o << s;
}

json versions() {
    return {{"rholab", RHOLAB_VERSION},
            {"compiler", __VERSION__},
            {"eigen", std::to_string(EIGEN_WORLD_VERSION) + "." + std::to_string(EIGEN_MAJOR_VERSION) + "." +
                          std::to_string(EIGEN_MINOR_VERSION)},
            {"nlohmann_json", std::to_string(NLOHMANN_JSON_VERSION_MAJOR) + "." +
                                  std::to_string(NLOHMANN_JSON_VERSION_MINOR) + "." +
                                  std::to_string(NLOHMANN_JSON_VERSION_PATCH)}};
}

void absolutize_csv_paths(json& j, const fs::path& base) {
    if (j.is_object()) {
        for (auto it = j.begin(); it != j.end(); ++it) {
            if (it.key() == "csv" && it.value().is_string()) {
                fs::path p = it.value().get<std::string>();
                if (p.is_relative()) it.value() = (base / p).lexically_normal().string();
            } else {
                absolutize_csv_paths(it.value(), base);
            }
        }
    } else if (j.is_array()) {
        for (auto& v : j) absolutize_csv_paths(v, base);
    }
}

int column(const CsvTable& t, const std::string& name) {
    auto it = std::find(t.header.begin(), t.header.end(), name);
    return it == t.header.end() ? -1 : static_cast<int>(it - t.header.begin());
}

double as_double(const Cell& c) {
    if (const double* d = std::get_if<double>(&c)) return *d;
    if (const long long* l = std::get_if<long long>(&c)) return static_cast<double>(*l);
    return std::numeric_limits<double>::quiet_NaN();
}

}  // namespace

const std::vector<std::string>& kinds() {
    static const std::vector<std::string> k{"pde-sweep",   "schilder",  "sanov-iterate", "schrodinger-sweep",
                                            "mc-estimate", "bsde-lsmc", "ti-check",      "bridge-check"};
    return k;
}

json resolve_config(const json& config) {
    if (!config.is_object()) throw ValidationError("config: expected an object");
    if (!config.contains("kind") || !config.at("kind").is_string()) throw ValidationError("kind: missing");
    return resolve_kind(config.at("kind").get<std::string>(), config);
}

std::string config_hash(const json& resolved) { return hex64(fnv1a(resolved.dump())); }

json load_config(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw ValidationError("config: cannot open " + path);
    json j;
    try {
        j = json::parse(in);
    } catch (const json::exception& e) {
        throw ValidationError(std::string("config: ") + e.what());
    }
    absolutize_csv_paths(j, fs::absolute(path).parent_path());
    return j;
}

RunResult run(json config, const std::string& output_dir, std::optional<unsigned long long> seed) {
    RunResult res;
    auto start = std::chrono::steady_clock::now();
    json resolved;
    Output out;
    auto fail = [&](int code, const std::string& msg) {
        out.exit_code = code;
        out.message = msg;
    };
    try {
        static const std::set<std::string> seeded{"schilder", "mc-estimate", "bsde-lsmc", "bridge-check"};
        if (seed && config.is_object() && seeded.count(config.value("kind", std::string()))) config["seed"] = *seed;
        resolved = resolve_config(config);
        out.csv_name = resolved.at("kind").get<std::string>() + ".csv";
        runners().at(resolved.at("kind").get<std::string>())(resolved, out);
    } catch (const ValidationError& e) {
        fail(2, e.what());
    } catch (const InfeasibleError& e) {
        fail(4, e.what());
    } catch (const NumericalError& e) {
        fail(3, e.what());
    } catch (const std::exception& e) {
        fail(3, std::string("internal: ") + e.what());
    }
    res.exit_code = out.exit_code;
    res.message = out.message;
    if (resolved.is_null()) return res;  // nothing trustworthy to record

    double wall = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    res.manifest = {{"kind", resolved.at("kind")},
                    {"config", resolved},
                    {"config_hash", config_hash(resolved)},
                    {"versions", versions()},
                    {"wall_time_s", wall},
                    {"exit_code", out.exit_code},
                    {"message", out.message},
                    {"report", out.report_manifest}};
    try {
        fs::create_directories(output_dir);
        if (!out.table.header.empty()) {
            res.report_csv = out.table.str();
            write_text(fs::path(output_dir) / out.csv_name, res.report_csv);
            res.files.push_back(out.csv_name);
        }
        for (const auto& [name, content] : out.extra_files) {
            write_text(fs::path(output_dir) / name, content);
            res.files.push_back(name);
        }
        res.manifest["outputs"] = res.files;
        write_text(fs::path(output_dir) / "manifest.json", res.manifest.dump(2) + "\n");
        res.files.push_back("manifest.json");
    } catch (const std::exception& e) {
        res.exit_code = 2;
        res.message = std::string("output_dir: ") + e.what();
    }
    return res;
}

CsvTable load_report(const std::string& path) {
    CsvTable t = read_csv(path);
    int gap = column(t, "gap");
    int pre = -1, lim = -1;
    for (const char* name : {"u_n", "prelimit", "y0", "value", "estimate"}) {
        if (pre < 0) pre = column(t, name);
    }
    for (const char* name : {"limit", "ot", "oracle"}) {
        if (lim < 0) lim = column(t, name);
    }
    if (gap >= 0 && pre >= 0 && lim >= 0) {
        for (auto& r : t.rows) r[gap] = std::abs(as_double(r[pre]) - as_double(r[lim]));
    }
    int idx = -1;
    for (const char* name : {"n", "eps", "t"}) {
        if (idx < 0) idx = column(t, name);
    }
    if (idx >= 0) {
        std::stable_sort(t.rows.begin(), t.rows.end(), [&](const auto& a, const auto& b) {
            return as_double(a[idx]) < as_double(b[idx]);
        });
    }
    return t;
}

CompareResult compare(const std::string& report_a, const std::string& report_b, double tolerance,
                      double se_multiple) {
    CompareResult res;
    CsvTable a, b;
    try {
        a = load_report(report_a);
        b = load_report(report_b);
    } catch (const std::exception& e) {
        res.exit_code = 2;
        res.message = e.what();
        return res;
    }
    if (a.header != b.header) {
        res.exit_code = 2;
        res.message = "mismatched schemas: header differs";
        return res;
    }
    if (a.rows.size() != b.rows.size()) {
        res.exit_code = 2;
        res.message = "mismatched schemas: row counts differ";
        return res;
    }
    int val = column(a, "gap");
    if (val < 0) val = column(a, "value");
    if (val < 0) {
        res.exit_code = 2;
        res.message = "mismatched schemas: no gap or value column";
        return res;
    }
    int se = column(a, "se");
    int idx = -1;
    for (const char* name : {"n", "eps", "t"}) {
        if (idx < 0) idx = column(a, name);
    }
    res.diff.header = {"index", "gap_a", "gap_b", "delta", "tolerance", "exceeded"};
    int exceeded = 0;
    double worst = 0.0;
    for (std::size_t i = 0; i < a.rows.size(); ++i) {
        double ia = idx >= 0 ? as_double(a.rows[i][idx]) : static_cast<double>(i);
        double ib = idx >= 0 ? as_double(b.rows[i][idx]) : static_cast<double>(i);
        if (ia != ib && !(std::isnan(ia) && std::isnan(ib))) {
            res.exit_code = 2;
            res.message = "mismatched schemas: row " + std::to_string(i) + " has different index values";
            res.diff.rows.clear();
            return res;
        }
        double ga = as_double(a.rows[i][val]), gb = as_double(b.rows[i][val]);
        double delta = (ga == gb) ? 0.0 : gb - ga;
        double tol = tolerance;
        if (se >= 0 && se_multiple > 0.0) {
            double sa = as_double(a.rows[i][se]), sb = as_double(b.rows[i][se]);
            tol = std::max(tol, se_multiple * std::sqrt(sa * sa + sb * sb));
        }
        bool bad = !(std::abs(delta) <= tol);
        exceeded += bad;
        if (std::abs(delta) > worst || std::isnan(delta)) worst = std::abs(delta);
        res.diff.rows.push_back({ia, ga, gb, delta, tol, bad});
    }
    std::ostringstream msg;
    msg << a.rows.size() << " rows compared, max |delta| = " << format_double(worst) << ", " << exceeded
        << " above tolerance";
    res.message = msg.str();
    res.exit_code = exceeded ? 1 : 0;
    return res;
}

}  // namespace rholab::experiment
