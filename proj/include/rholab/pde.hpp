#pragma once

#include <functional>
#include <span>
#include <vector>

#include <json.hpp>

#include "rholab/errors.hpp"
#include "rholab/generators.hpp"
#include "rholab/measure.hpp"
#include "rholab/report.hpp"

namespace rholab::pde {

using Terminal = std::function<double(double)>;

enum class Boundary { clamp_to_terminal, one_sided_extrapolation };

struct GridSpec {
    double x_min = -6.0;
    double x_max = 6.0;
    int nx = 1201;
    int nt = 0;  // 0 selects the smallest stable step count
    Boundary boundary = Boundary::clamp_to_terminal;

    double dx() const { return (x_max - x_min) / (nx - 1); }
    double x(int i) const { return x_min + i * dx(); }
    void validate() const;
};

// Stability numbers of the explicit scheme actually used.
struct CflRecord {
    int nt = 0;
    double dt = 0.0;
    double dx = 0.0;
    double lipschitz = 0.0;  // bound on |dg*/dz| over the gradient range
    double gradient_range = 0.0;
    double diffusion_number = 0.0;  // sigma^2 dt / dx^2
    double advection_number = 0.0;  // L dt / dx
};

class CflError : public NumericalError {
public:
    CflError(const std::string& what, int minimal_nt) : NumericalError(what), minimal_nt_(minimal_nt) {}
    int minimal_nt() const { return minimal_nt_; }

private:
    int minimal_nt_;
};

struct ScalarField {
    GridSpec grid;  // nt filled in with the step count used
    CflRecord cfl;
    std::vector<double> times;               // times of the stored rows, ascending
    std::vector<std::vector<double>> rows;   // rows[k][i] = v(times[k], x_i)

    const std::vector<double>& initial() const { return rows.front(); }
    const std::vector<double>& terminal() const { return rows.back(); }
    // v(0, x) by linear interpolation; throws outside the grid.
    double value_at(double x) const;
};

struct SolveOptions {
    // Keep every k-th time row (plus t=0 and t=1); 1 keeps the full field.
    int store_every = 1;
};

// Smallest step count meeting sigma^2 dt/dx^2 <= 1/2 and
// sigma^2 dt/dx^2 + L dt/dx <= 1, with L from the terminal gradient range.
int minimal_stable_nt(std::span<const double> terminal, const generators::ConjugateSpec& gstar,
                      double viscosity, const GridSpec& grid);

// Backward explicit monotone scheme for
//   v_t + (sigma^2 / 2) v_xx + g*(t, v_x) = 0,  v(1, .) = f.
// The Hamiltonian uses the upwind flux
//   max(g*(max(p+, z0)), g*(min(p-, z0))),  z0 = argmin g*(t, .).
ScalarField solve_semilinear(const Terminal& f, const generators::ConjugateSpec& gstar,
                             double viscosity, const GridSpec& grid, const SolveOptions& opts = {});

// Same, with the terminal row given directly (one value per grid node).
ScalarField solve_semilinear(std::vector<double> terminal, const generators::ConjugateSpec& gstar,
                             double viscosity, const GridSpec& grid, const SolveOptions& opts = {});

// Evenly spaced search grid [lo, hi] with the given step (hi included).
std::vector<double> uniform_grid(double lo, double hi, double step);

// max over y of f(y) - (1 - t) g((y - x) / (1 - t)); f(x) at t = 1.
double hopf_lax(const Terminal& f, const generators::GeneratorSpec& g, double t, double x,
                std::span<const double> y_grid);

struct SweepOptions {
    double y_step = 1e-5;  // Hopf-Lax search step over [x_min, x_max]
    double x0 = 0.0;
};

// Rows (n, u_n(0, x0), Hopf-Lax limit, gap) with u_n solved at viscosity 1/n.
ConvergenceReport vanishing_viscosity_sweep(const Terminal& f, const generators::GeneratorSpec& g,
                                            std::vector<int> n_list, const GridSpec& grid,
                                            const SweepOptions& opts = {});

// sum_x mu(x) v(0, x) from a single solve at the given viscosity.
double rho_terminal_mixture(const Terminal& f, const generators::ConjugateSpec& gstar,
                            const DiscreteMeasure& mu, double viscosity, const GridSpec& grid);

// |v_h(0, x0) - v_{2h}(0, x0)| between the grid and its coarsening by two in
// space (time steps re-selected for stability).
double discretization_estimate(const Terminal& f, const generators::ConjugateSpec& gstar,
                               double viscosity, const GridSpec& grid, double x0 = 0.0);

GridSpec grid_from_json(const nlohmann::json& j);
nlohmann::json to_json(const GridSpec& g);
nlohmann::json to_json(const CflRecord& c);

}  // namespace rholab::pde
