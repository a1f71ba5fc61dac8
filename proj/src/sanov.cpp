#include "rholab/sanov.hpp"

#include <algorithm>
#include <cmath>
#include <random>

#include "rholab/errors.hpp"
#include "rholab/parallel.hpp"
#include "rholab/quadrature.hpp"
#include "rholab/variational.hpp"

namespace rholab::sanov {

using generators::ConjugateSpec;
using generators::GeneratorSpec;

MeanFieldFunctional mean_field_from_json(const nlohmann::json& j) {
    if (!j.is_object() || !j.contains("phi") || !j.contains("Phi")) {
        throw ValidationError("mean field functional: need 'phi' and 'Phi'");
    }
    return {functions::from_json(j.at("phi")), functions::from_json(j.at("Phi"))};
}

nlohmann::json to_json(const MeanFieldFunctional& F) { return {{"phi", F.phi.spec}, {"Phi", F.Phi.spec}}; }

IterationGrid iteration_grid_from_json(const nlohmann::json& j) {
    IterationGrid g;
    if (j.is_null()) return g;
    if (j.contains("x")) g.x = pde::grid_from_json(j.at("x"));
    g.s_per_stage = j.value("s_per_stage", g.s_per_stage);
    g.max_n = j.value("max_n", g.max_n);
    if (g.s_per_stage < 2) throw ValidationError("sanov grid: s_per_stage must be at least 2");
    if (g.max_n < 1) throw ValidationError("sanov grid: max_n must be positive");
    return g;
}

nlohmann::json to_json(const IterationGrid& g) {
    return {{"x", pde::to_json(g.x)}, {"s_per_stage", g.s_per_stage}, {"max_n", g.max_n}};
}

LimitGrids limit_grids_from_json(const nlohmann::json& j) {
    LimitGrids g;
    if (j.is_null()) return g;
    if (j.contains("x")) g.x = pde::grid_from_json(j.at("x"));
    g.lambda_min = j.value("lambda_min", g.lambda_min);
    g.lambda_max = j.value("lambda_max", g.lambda_max);
    g.lambda_count = j.value("lambda_count", g.lambda_count);
    g.c_count = j.value("c_count", g.c_count);
    if (!(g.lambda_min < 0.0 && g.lambda_max > 0.0)) {
        throw ValidationError("limit grids: the lambda range must contain 0 in its interior");
    }
    if (g.lambda_count < 3 || g.c_count < 2) throw ValidationError("limit grids: too few nodes");
    return g;
}

nlohmann::json to_json(const LimitGrids& g) {
    return {{"x", pde::to_json(g.x)},          {"lambda_min", g.lambda_min}, {"lambda_max", g.lambda_max},
            {"lambda_count", g.lambda_count}, {"c_count", g.c_count}};
}

std::pair<double, double> phi_range(const functions::ScalarFunction& phi, const pde::GridSpec& grid) {
    grid.validate();
    double lo = INFINITY, hi = -INFINITY;
    for (int i = 0; i < grid.nx; ++i) {
        double v = phi(grid.x(i));
        if (!std::isfinite(v)) throw ValidationError("sanov: phi is not finite on the grid");
        lo = std::min(lo, v);
        hi = std::max(hi, v);
    }
    return {lo, hi};
}

namespace {

double solve_at_origin(std::vector<double> terminal, const ConjugateSpec& gstar, const pde::GridSpec& grid) {
    pde::SolveOptions so;
    so.store_every = 1 << 30;
    return pde::solve_semilinear(std::move(terminal), gstar, 1.0, grid, so).value_at(0.0);
}

std::vector<double> uniform_nodes(double lo, double hi, int count) {
    if (!(hi > lo) || count < 2) return {lo};
    std::vector<double> s(count);
    for (int i = 0; i < count; ++i) s[i] = lo + (hi - lo) * i / (count - 1);
    s.back() = hi;
    return s;
}

double interpolate(const std::vector<double>& xs, const std::vector<double>& ys, double x) {
    if (xs.size() == 1 || x <= xs.front()) return ys.front();
    if (x >= xs.back()) return ys.back();
    double h = (xs.back() - xs.front()) / (xs.size() - 1);
    std::size_t k = std::min(static_cast<std::size_t>((x - xs.front()) / h), xs.size() - 2);
    double w = (x - xs[k]) / (xs[k + 1] - xs[k]);
    return ys[k] + w * (ys[k + 1] - ys[k]);
}

}  // namespace

std::vector<double> apply_L(const std::function<double(double, double)>& slice, const ConjugateSpec& gstar,
                            const pde::GridSpec& grid, std::span<const double> s_grid) {
    grid.validate();
    if (!(grid.x_min < 0.0 && grid.x_max > 0.0)) throw ValidationError("apply_L: grid must contain 0");
    std::vector<double> out(s_grid.size());
    parallel_for(s_grid.size(), [&](std::size_t j) {
        std::vector<double> terminal(grid.nx);
        for (int i = 0; i < grid.nx; ++i) terminal[i] = slice(grid.x(i), s_grid[j]);
        out[j] = solve_at_origin(std::move(terminal), gstar, grid);
    });
    return out;
}

double StageTable::operator()(double s_value) const { return interpolate(s, values, s_value); }

StageTable stage_table(const MeanFieldFunctional& F, const GeneratorSpec& g, int n, int k,
                       const IterationGrid& grid) {
    if (n < 1) throw ValidationError("iterate_L: n must be positive");
    if (n > grid.max_n) {
        throw ValidationError("iterate_L: n = " + std::to_string(n) + " exceeds max_n = " + std::to_string(grid.max_n));
    }
    if (k < 0 || k >= n) throw ValidationError("iterate_L: need 0 <= k < n");
    const ConjugateSpec gstar = generators::conjugate(g);
    auto [lo, hi] = phi_range(F.phi, grid.x);
    const int nodes = grid.s_per_stage * n;
    const double dn = n;

    // phi on the x-grid, shared by all stages.
    std::vector<double> phi_x(grid.x.nx);
    for (int i = 0; i < grid.x.nx; ++i) phi_x[i] = F.phi(grid.x.x(i));

    StageTable t;
    t.n = n;
    t.k = k;
    // Stage j eliminates x_j; its input depends on s_{j-1} = phi(x_1) + ... + phi(x_{j-1}).
    std::vector<double> prev_s, prev_v;
    for (int j = n; j > k; --j) {
        std::vector<double> s = uniform_nodes((j - 1) * lo, (j - 1) * hi, j == 1 ? 1 : nodes);
        std::vector<double> v(s.size());
        parallel_for(s.size(), [&](std::size_t a) {
            std::vector<double> terminal(grid.x.nx);
            for (int i = 0; i < grid.x.nx; ++i) {
                double acc = s[a] + phi_x[i];
                terminal[i] = j == n ? dn * F.Phi(acc / dn) : interpolate(prev_s, prev_v, acc);
            }
            v[a] = solve_at_origin(std::move(terminal), gstar, grid.x);
        });
        t.pde_solves += static_cast<int>(s.size());
        prev_s = std::move(s);
        prev_v = std::move(v);
    }
    t.s = std::move(prev_s);
    t.values = std::move(prev_v);
    for (double& v : t.values) v /= dn;
    return t;
}

double iterate_L(const MeanFieldFunctional& F, const GeneratorSpec& g, int n, const IterationGrid& grid) {
    return stage_table(F, g, n, 0, grid).values.front();
}

montecarlo::Estimate conditional_iterate(const MeanFieldFunctional& F, const GeneratorSpec& g, int n, int k,
                                         int samples, std::uint64_t seed, const IterationGrid& grid) {
    if (samples < 2) throw ValidationError("conditional_iterate: need at least two samples");
    StageTable t = stage_table(F, g, n, k, grid);
    if (k == 0) return {t.values.front(), 0.0};
    std::mt19937_64 rng(seed);
    std::normal_distribution<double> nd;
    std::vector<double> y(samples);
    for (int i = 0; i < samples; ++i) {
        double s = 0.0;
        for (int j = 0; j < k; ++j) s += F.phi(std::clamp(nd(rng), grid.x.x_min, grid.x.x_max));
        y[i] = t(s);
    }
    double mean = montecarlo::pairwise_sum(y) / samples;
    double ss = 0.0;
    for (double v : y) ss += (v - mean) * (v - mean);
    return {mean, std::sqrt(ss / (samples - 1) / samples)};
}

RateTable rate_table(const functions::ScalarFunction& phi, const GeneratorSpec& g, const LimitGrids& grids) {
    grids.x.validate();
    if (!(grids.x.x_min < 0.0 && grids.x.x_max > 0.0)) throw ValidationError("rate_table: grid must contain 0");
    const ConjugateSpec gstar = generators::conjugate(g);
    RateTable t;
    std::tie(t.phi_lo, t.phi_hi) = phi_range(phi, grids.x);
    t.lambdas = uniform_nodes(grids.lambda_min, grids.lambda_max, grids.lambda_count);
    std::vector<double> phi_x(grids.x.nx);
    for (int i = 0; i < grids.x.nx; ++i) phi_x[i] = phi(grids.x.x(i));
    t.rho.resize(t.lambdas.size());
    parallel_for(t.lambdas.size(), [&](std::size_t a) {
        std::vector<double> terminal(phi_x);
        for (double& v : terminal) v *= t.lambdas[a];
        t.rho[a] = solve_at_origin(std::move(terminal), gstar, grids.x);
    });
    t.c = uniform_nodes(t.phi_lo, t.phi_hi, grids.c_count);
    t.rate.resize(t.c.size());
    t.argmax.resize(t.c.size());
    for (std::size_t i = 0; i < t.c.size(); ++i) {
        double best = -INFINITY;
        int arg = 0;
        for (std::size_t a = 0; a < t.lambdas.size(); ++a) {
            double v = t.lambdas[a] * t.c[i] - t.rho[a];
            if (v > best) {
                best = v;
                arg = static_cast<int>(a);
            }
        }
        t.rate[i] = best;
        t.argmax[i] = arg;
    }
    return t;
}

namespace {

double gaussian_mean(const functions::ScalarFunction& phi) {
    static const quadrature::Rule rule = quadrature::gauss_hermite(96);
    return quadrature::integrate(rule, [&](double x) { return phi(x); });
}

}  // namespace

LimitValue conditional_sanov_limit(double t, const MeanFieldFunctional& F, const RateTable& table) {
    if (!(t >= 0.0 && t <= 1.0)) throw ValidationError("conditional_sanov_limit: t must lie in [0, 1]");
    LimitValue r;
    r.m_p = gaussian_mean(F.phi);
    if (t == 1.0) {
        r.value = F.Phi(r.m_p);
        r.c_star = r.m_p;
        return r;
    }
    r.value = -INFINITY;
    for (std::size_t i = 0; i < table.c.size(); ++i) {
        double v = F.Phi(t * r.m_p + (1.0 - t) * table.c[i]) - (1.0 - t) * table.rate[i];
        if (v > r.value) {
            r.value = v;
            r.c_star = table.c[i];
            r.lambda_star = table.lambdas[table.argmax[i]];
            r.lambda_at_boundary = table.at_lambda_boundary(i);
        }
    }
    return r;
}

LimitValue conditional_sanov_limit(double t, const MeanFieldFunctional& F, const GeneratorSpec& g,
                                   const LimitGrids& grids) {
    return conditional_sanov_limit(t, F, rate_table(F.phi, g, grids));
}

LimitValue mean_field_limit(const MeanFieldFunctional& F, const RateTable& table) {
    return conditional_sanov_limit(0.0, F, table);
}

LimitValue mean_field_limit(const MeanFieldFunctional& F, const GeneratorSpec& g, const LimitGrids& grids) {
    return mean_field_limit(F, rate_table(F.phi, g, grids));
}

montecarlo::Estimate constant_drift_lower_bound(const MeanFieldFunctional& F, const GeneratorSpec& g, double q,
                                                const montecarlo::PathBatch& batch) {
    double cost = variational::segment_cost(g, 0.0, 1.0, q).to_double();
    if (!std::isfinite(cost)) throw ValidationError("constant_drift_lower_bound: drift outside the domain of g");
    auto e = montecarlo::girsanov_lower_bound(PathFunctional::terminal_value(F.phi), g,
                                              montecarlo::FeedbackControl::constant(q), batch);
    double m = e.value + cost;
    double h = 1e-6 * (1.0 + std::abs(m));
    double slope = (F.Phi(m + h) - F.Phi(m - h)) / (2.0 * h);
    return {F.Phi(m) - cost, std::abs(slope) * e.se};
}

ConvergenceReport iterate_sweep(const MeanFieldFunctional& F, const GeneratorSpec& g, const std::vector<int>& n_list,
                                const IterationGrid& grid, const LimitGrids& limit_grids) {
    if (n_list.empty()) throw ValidationError("iterate_sweep: empty n list");
    LimitValue lim = mean_field_limit(F, g, limit_grids);
    ConvergenceReport rep;
    rep.index_name = "n";
    rep.prelimit_name = "prelimit";
    rep.limit_name = "limit";
    for (int n : n_list) {
        rep.add(n, iterate_L(F, g, n, grid), lim.value, {{"s_nodes", n == 1 ? 1 : grid.s_per_stage * n}});
    }
    rep.sort_rows();
    rep.manifest["functional"] = to_json(F);
    rep.manifest["generator"] = generators::to_json(g);
    rep.manifest["iteration_grid"] = to_json(grid);
    rep.manifest["limit_grids"] = to_json(limit_grids);
    rep.manifest["limit"] = {{"c_star", lim.c_star},
                             {"lambda_star", lim.lambda_star},
                             {"lambda_at_boundary", lim.lambda_at_boundary}};
    return rep;
}

}  // namespace rholab::sanov
