#include "rholab/pde.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <sstream>

#include "rholab/parallel.hpp"
#include "rholab/quadrature.hpp"

namespace rholab::pde {

using generators::ConjugateSpec;
using generators::GeneratorSpec;

void GridSpec::validate() const {
    if (!(x_min < x_max) || !std::isfinite(x_min) || !std::isfinite(x_max)) {
        throw ValidationError("grid: need finite x_min < x_max");
    }
    if (nx < 3) throw ValidationError("grid: nx must be at least 3");
    if (nt < 0) throw ValidationError("grid: nt must be nonnegative (0 = automatic)");
}

double ScalarField::value_at(double x) const {
    const auto& v = rows.front();
    double h = grid.dx();
    double s = (x - grid.x_min) / h;
    if (s < -1e-9 || s > grid.nx - 1 + 1e-9) {
        throw ValidationError("value_at: x outside the grid");
    }
    s = std::clamp(s, 0.0, static_cast<double>(grid.nx - 1));
    int i = std::min(static_cast<int>(s), grid.nx - 2);
    double w = s - i;
    return (1.0 - w) * v[i] + w * v[i + 1];
}

namespace {

double gstar_at(const ConjugateSpec& gs, double t, double z) {
    ExtendedReal v = gs.value(t, z);
    if (v.is_infinite()) {
        std::ostringstream os;
        os << "g* is +inf at gradient " << z << " (the cost is not coercive)";
        throw NumericalError(os.str());
    }
    return v.value();
}

double max_gradient(std::span<const double> v, double dx) {
    double m = 0.0;
    for (std::size_t i = 0; i + 1 < v.size(); ++i) m = std::max(m, std::abs(v[i + 1] - v[i]) / dx);
    return m;
}

}  // namespace

int minimal_stable_nt(std::span<const double> terminal, const ConjugateSpec& gstar, double viscosity,
                      const GridSpec& grid) {
    double dx = grid.dx();
    double zmax = 2.0 * max_gradient(terminal, dx);
    double lip = gstar.lipschitz_bound(zmax);
    double dt_diff = dx * dx / (2.0 * viscosity);
    double dt_mono = 1.0 / (viscosity / (dx * dx) + lip / dx);
    double dt = std::min(dt_diff, dt_mono);
    return std::max(1, static_cast<int>(std::ceil(1.0 / dt - 1e-9)));
}

ScalarField solve_semilinear(std::vector<double> terminal, const ConjugateSpec& gstar,
                             double viscosity, const GridSpec& grid_in, const SolveOptions& opts) {
    grid_in.validate();
    if (!(viscosity > 0.0) || !std::isfinite(viscosity)) {
        throw ValidationError("solve_semilinear: viscosity must be positive");
    }
    if (static_cast<int>(terminal.size()) != grid_in.nx) {
        throw ValidationError("solve_semilinear: terminal row has the wrong length");
    }
    for (double v : terminal) {
        if (!std::isfinite(v)) throw ValidationError("solve_semilinear: terminal datum is not bounded on the grid");
    }
    if (opts.store_every < 1) throw ValidationError("solve_semilinear: store_every must be >= 1");

    const int nx = grid_in.nx;
    const double dx = grid_in.dx();
    const int nmin = minimal_stable_nt(terminal, gstar, viscosity, grid_in);
    int nt = grid_in.nt == 0 ? nmin : grid_in.nt;
    if (nt < nmin) {
        std::ostringstream os;
        os << "CFL violated: nt=" << nt << " is below the minimal stable nt=" << nmin;
        throw CflError(os.str(), nmin);
    }
    const double dt = 1.0 / nt;

    ScalarField out;
    out.grid = grid_in;
    out.grid.nt = nt;
    out.cfl.nt = nt;
    out.cfl.dt = dt;
    out.cfl.dx = dx;
    out.cfl.gradient_range = 2.0 * max_gradient(terminal, dx);
    out.cfl.lipschitz = gstar.lipschitz_bound(out.cfl.gradient_range);
    out.cfl.diffusion_number = viscosity * dt / (dx * dx);
    out.cfl.advection_number = out.cfl.lipschitz * dt / dx;

    const bool tdep = gstar.time_dependent();
    double z0 = tdep ? 0.0 : gstar.argmin(0.0);
    const double half_visc = 0.5 * viscosity;
    const double inv_dx = 1.0 / dx;
    const double inv_dx2 = 1.0 / (dx * dx);
    const double left0 = terminal.front(), right0 = terminal.back();
    double drift_integral = 0.0;  // integral of g*(s, 0) over [t, 1]

    std::vector<double> v = std::move(terminal);
    std::vector<double> w(nx);
    std::vector<std::vector<double>> rows_rev;
    std::vector<double> times_rev;
    rows_rev.push_back(v);
    times_rev.push_back(1.0);

    for (int k = nt - 1; k >= 0; --k) {
        double t = (k + 0.5) * dt;
        if (tdep) z0 = gstar.argmin(t);
        double h0 = gstar_at(gstar, t, 0.0);
        for (int i = 1; i < nx - 1; ++i) {
            double pm = (v[i] - v[i - 1]) * inv_dx;
            double pp = (v[i + 1] - v[i]) * inv_dx;
            double lap = (v[i + 1] - 2.0 * v[i] + v[i - 1]) * inv_dx2;
            double ham = std::max(gstar_at(gstar, t, std::max(pp, z0)),
                                  gstar_at(gstar, t, std::min(pm, z0)));
            w[i] = v[i] + dt * (half_visc * lap + ham);
        }
        drift_integral += dt * h0;
        if (grid_in.boundary == Boundary::clamp_to_terminal) {
            // Exact for data that are constant near the edges.
            w[0] = left0 + drift_integral;
            w[nx - 1] = right0 + drift_integral;
        } else {
            w[0] = 2.0 * w[1] - w[2];
            w[nx - 1] = 2.0 * w[nx - 2] - w[nx - 3];
        }
        v.swap(w);
        if (k == 0 || k % opts.store_every == 0) {
            rows_rev.push_back(v);
            times_rev.push_back(k * dt);
        }
    }
    out.rows.assign(std::make_move_iterator(rows_rev.rbegin()), std::make_move_iterator(rows_rev.rend()));
    out.times.assign(times_rev.rbegin(), times_rev.rend());
    return out;
}

ScalarField solve_semilinear(const Terminal& f, const ConjugateSpec& gstar, double viscosity,
                             const GridSpec& grid, const SolveOptions& opts) {
    grid.validate();
    std::vector<double> term(grid.nx);
    for (int i = 0; i < grid.nx; ++i) term[i] = f(grid.x(i));
    return solve_semilinear(std::move(term), gstar, viscosity, grid, opts);
}

std::vector<double> uniform_grid(double lo, double hi, double step) {
    if (!(step > 0.0) || !(hi >= lo)) throw ValidationError("uniform_grid: need step > 0 and hi >= lo");
    auto n = static_cast<std::size_t>(std::floor((hi - lo) / step + 1e-9)) + 1;
    std::vector<double> y(n);
    for (std::size_t i = 0; i < n; ++i) y[i] = lo + static_cast<double>(i) * step;
    if (hi - y.back() > 1e-9 * step) y.push_back(hi);
    return y;
}

namespace {

// Minimal cost of moving by d over [t, 1]: (1-t) g(d/(1-t)) when g does not
// depend on time, otherwise the dual sup_l (l d - int_t^1 (w g)*(s, l) ds).
class TravelCost {
public:
    TravelCost(const GeneratorSpec& g, double t) : g_(g), gs_(generators::conjugate(g)), t_(t) {
        if (!g.time_dependent()) return;
        const auto& tm = std::get<generators::TimeModulated>(g.variant());
        std::vector<double> cuts{t};
        for (double s : tm.times) {
            if (s > t && s < 1.0) cuts.push_back(s);
        }
        cuts.push_back(1.0);
        for (std::size_t i = 0; i + 1 < cuts.size(); ++i) {
            auto r = quadrature::gauss_legendre(16, cuts[i], cuts[i + 1]);
            nodes_.insert(nodes_.end(), r.nodes.begin(), r.nodes.end());
            weights_.insert(weights_.end(), r.weights.begin(), r.weights.end());
        }
    }

    double operator()(double d) const {
        double len = 1.0 - t_;
        if (!g_.time_dependent()) return (len * generators::eval_g(g_, 0.0, d / len)).to_double();
        auto dual = [&](double l) {
            double acc = l * d;
            for (std::size_t j = 0; j < nodes_.size(); ++j) {
                ExtendedReal h = gs_.value(nodes_[j], l);
                if (h.is_infinite()) return -std::numeric_limits<double>::infinity();
                acc -= weights_[j] * h.value();
            }
            return acc;
        };
        // Concave in l: bracket the maximizer, then golden-section search.
        double lo = -1.0, hi = 1.0;
        double f0 = dual(0.0);
        while (dual(hi) > f0 && hi < 1e9) hi *= 2.0;
        while (dual(lo) > f0 && lo > -1e9) lo *= 2.0;
        if (hi >= 1e9 || lo <= -1e9) return std::numeric_limits<double>::infinity();
        const double phi = 0.5 * (std::sqrt(5.0) - 1.0);
        double a = lo, b = hi;
        double c = b - phi * (b - a), e = a + phi * (b - a);
        double fc = dual(c), fe = dual(e);
        for (int it = 0; it < 200 && b - a > 1e-12 * (1.0 + std::abs(a) + std::abs(b)); ++it) {
            if (fc < fe) {
                a = c;
                c = e;
                fc = fe;
                e = a + phi * (b - a);
                fe = dual(e);
            } else {
                b = e;
                e = c;
                fe = fc;
                c = b - phi * (b - a);
                fc = dual(c);
            }
        }
        return std::max({fc, fe, f0});
    }

private:
    const GeneratorSpec& g_;
    ConjugateSpec gs_;
    double t_;
    std::vector<double> nodes_, weights_;
};

}  // namespace

double hopf_lax(const Terminal& f, const GeneratorSpec& g, double t, double x,
                std::span<const double> y_grid) {
    if (!(t >= 0.0 && t <= 1.0)) throw ValidationError("hopf_lax: t must lie in [0,1]");
    if (y_grid.empty()) throw ValidationError("hopf_lax: empty search grid");
    if (t == 1.0) return f(x);
    TravelCost cost(g, t);
    double best = -std::numeric_limits<double>::infinity();
    for (double y : y_grid) {
        double c = cost(y - x);
        if (std::isinf(c)) continue;
        best = std::max(best, f(y) - c);
    }
    if (std::isinf(best)) throw ValidationError("hopf_lax: no admissible y in the search grid");
    return best;
}

ConvergenceReport vanishing_viscosity_sweep(const Terminal& f, const GeneratorSpec& g,
                                            std::vector<int> n_list, const GridSpec& grid,
                                            const SweepOptions& opts) {
    grid.validate();
    if (n_list.empty()) throw ValidationError("vanishing_viscosity_sweep: empty n list");
    for (int n : n_list) {
        if (n < 1) throw ValidationError("vanishing_viscosity_sweep: n must be positive");
    }
    std::sort(n_list.begin(), n_list.end());
    auto y = uniform_grid(grid.x_min, grid.x_max, opts.y_step);
    double limit = hopf_lax(f, g, 0.0, opts.x0, y);
    ConjugateSpec gs = generators::conjugate(g);
    std::vector<double> vals(n_list.size());
    std::vector<CflRecord> cfls(n_list.size());
    parallel_for(n_list.size(), [&](std::size_t i) {
        SolveOptions so;
        so.store_every = 1 << 30;
        ScalarField fld = solve_semilinear(f, gs, 1.0 / n_list[i], grid, so);
        vals[i] = fld.value_at(opts.x0);
        cfls[i] = fld.cfl;
    });
    ConvergenceReport rep;
    rep.index_name = "n";
    rep.prelimit_name = "u_n";
    rep.limit_name = "limit";
    for (std::size_t i = 0; i < n_list.size(); ++i) {
        rep.add(n_list[i], vals[i], limit, {{"cfl", to_json(cfls[i])}});
    }
    rep.manifest["grid"] = to_json(grid);
    rep.manifest["generator"] = generators::to_json(g);
    rep.manifest["scheme"] = "explicit monotone, upwind Hamiltonian, centered Laplacian";
    rep.manifest["hopf_lax_step"] = opts.y_step;
    return rep;
}

double rho_terminal_mixture(const Terminal& f, const ConjugateSpec& gstar, const DiscreteMeasure& mu,
                            double viscosity, const GridSpec& grid) {
    grid.validate();
    for (double x : mu.support()) {
        if (x < grid.x_min || x > grid.x_max) {
            throw ValidationError("rho_terminal_mixture: atom outside the grid");
        }
    }
    SolveOptions so;
    so.store_every = 1 << 30;
    ScalarField fld = solve_semilinear(f, gstar, viscosity, grid, so);
    double s = 0.0;
    for (std::size_t i = 0; i < mu.size(); ++i) s += mu.weights()[i] * fld.value_at(mu.support()[i]);
    return s;
}

double discretization_estimate(const Terminal& f, const ConjugateSpec& gstar, double viscosity,
                               const GridSpec& grid, double x0) {
    GridSpec fine = grid;
    fine.nt = 0;
    GridSpec coarse = fine;
    coarse.nx = (grid.nx + 1) / 2;
    SolveOptions so;
    so.store_every = 1 << 30;
    double a = solve_semilinear(f, gstar, viscosity, fine, so).value_at(x0);
    double b = solve_semilinear(f, gstar, viscosity, coarse, so).value_at(x0);
    return std::abs(a - b);
}

GridSpec grid_from_json(const nlohmann::json& j) {
    GridSpec g;
    g.x_min = j.value("x_min", g.x_min);
    g.x_max = j.value("x_max", g.x_max);
    g.nx = j.value("nx", g.nx);
    g.nt = j.value("nt", g.nt);
    std::string b = j.value("boundary", std::string("clamp_to_terminal"));
    if (b == "clamp_to_terminal") g.boundary = Boundary::clamp_to_terminal;
    else if (b == "one_sided_extrapolation") g.boundary = Boundary::one_sided_extrapolation;
    else throw ValidationError("grid: unknown boundary '" + b + "'");
    g.validate();
    return g;
}

nlohmann::json to_json(const GridSpec& g) {
    return {{"x_min", g.x_min},
            {"x_max", g.x_max},
            {"nx", g.nx},
            {"nt", g.nt},
            {"boundary", g.boundary == Boundary::clamp_to_terminal ? "clamp_to_terminal"
                                                                   : "one_sided_extrapolation"}};
}

nlohmann::json to_json(const CflRecord& c) {
    return {{"nt", c.nt},
            {"dt", c.dt},
            {"dx", c.dx},
            {"lipschitz", c.lipschitz},
            {"gradient_range", c.gradient_range},
            {"diffusion_number", c.diffusion_number},
            {"advection_number", c.advection_number}};
}

}  // namespace rholab::pde
