#pragma once

#include <cstdint>
#include <functional>
#include <span>
#include <vector>

#include <json.hpp>

#include "rholab/functions.hpp"
#include "rholab/generators.hpp"
#include "rholab/montecarlo.hpp"
#include "rholab/pde.hpp"
#include "rholab/report.hpp"

namespace rholab::sanov {

// F(m) = Phi(∫ phi dm) for probability measures m on the real line.
struct MeanFieldFunctional {
    functions::ScalarFunction phi;
    functions::ScalarFunction Phi;

    double operator()(double c) const { return Phi(c); }
};

MeanFieldFunctional mean_field_from_json(const nlohmann::json& j);
nlohmann::json to_json(const MeanFieldFunctional& F);

struct IterationGrid {
    pde::GridSpec x{-5.0, 5.0, 201, 0, pde::Boundary::clamp_to_terminal};
    int s_per_stage = 64;  // accumulator nodes per unit of n
    int max_n = 16;
};

IterationGrid iteration_grid_from_json(const nlohmann::json& j);
nlohmann::json to_json(const IterationGrid& g);

// min and max of phi over the x-grid nodes; the accumulator only ever sees
// these values.
std::pair<double, double> phi_range(const functions::ScalarFunction& phi, const pde::GridSpec& grid);

// One stage with the earlier coordinates collapsed into s: for every s on
// s_grid, v(0, 0) of the unit-time PDE with viscosity 1 and terminal
// x ↦ slice(x, s).
std::vector<double> apply_L(const std::function<double(double x, double s)>& slice,
                            const generators::ConjugateSpec& gstar, const pde::GridSpec& grid,
                            std::span<const double> s_grid);

// Values of (1/n) L_{k+1} ... L_n (n F^n) as a function of the partial sum
// s = phi(x_1) + ... + phi(x_k), tabulated on a uniform s-grid.
struct StageTable {
    int n = 0;
    int k = 0;
    std::vector<double> s;
    std::vector<double> values;
    int pde_solves = 0;

    // Linear interpolation; s is clamped to the table range.
    double operator()(double s_value) const;
};

StageTable stage_table(const MeanFieldFunctional& F, const generators::GeneratorSpec& g, int n, int k,
                       const IterationGrid& grid);

// (1/n) L_1 ... L_n (n F^n): the pre-limit value with n chopped blocks.
double iterate_L(const MeanFieldFunctional& F, const generators::GeneratorSpec& g, int n,
                 const IterationGrid& grid);

// E[(1/n) L_{k+1} ... L_n (n F^n)(X_1, ..., X_k)] over i.i.d. standard normal
// X_i, by Monte Carlo with the given sample count.
montecarlo::Estimate conditional_iterate(const MeanFieldFunctional& F, const generators::GeneratorSpec& g, int n,
                                         int k, int samples, std::uint64_t seed, const IterationGrid& grid);

struct LimitGrids {
    pde::GridSpec x{-6.0, 6.0, 241, 0, pde::Boundary::clamp_to_terminal};
    double lambda_min = -20.0;
    double lambda_max = 20.0;
    int lambda_count = 401;
    int c_count = 801;  // uniform over the phi range
};

LimitGrids limit_grids_from_json(const nlohmann::json& j);
nlohmann::json to_json(const LimitGrids& g);

// C(c) = max_lambda (lambda c - rho(lambda phi(W(1)))) on the c-grid, with
// one PDE solve per lambda.
struct RateTable {
    std::vector<double> lambdas, rho;
    std::vector<double> c, rate;
    std::vector<int> argmax;  // lambda index attaining C(c_i)
    double phi_lo = 0.0, phi_hi = 0.0;

    bool at_lambda_boundary(std::size_t i) const {
        return argmax[i] == 0 || argmax[i] + 1 == static_cast<int>(lambdas.size());
    }
};

RateTable rate_table(const functions::ScalarFunction& phi, const generators::GeneratorSpec& g,
                     const LimitGrids& grids);

struct LimitValue {
    double value = 0.0;
    double c_star = 0.0;
    double lambda_star = 0.0;
    bool lambda_at_boundary = false;
    double m_p = 0.0;  // E phi(W(1))
};

// max_c Phi(c) - C(c).
LimitValue mean_field_limit(const MeanFieldFunctional& F, const RateTable& table);
LimitValue mean_field_limit(const MeanFieldFunctional& F, const generators::GeneratorSpec& g,
                            const LimitGrids& grids);

// max_c Phi(t m_P + (1 - t) c) - (1 - t) C(c) with m_P = E phi(W(1)).
LimitValue conditional_sanov_limit(double t, const MeanFieldFunctional& F, const RateTable& table);
LimitValue conditional_sanov_limit(double t, const MeanFieldFunctional& F, const generators::GeneratorSpec& g,
                                   const LimitGrids& grids);

// Phi(E phi(W(1) + q)) - ∫ g(t, q) dt by Monte Carlo; the mean comes from
// montecarlo::girsanov_lower_bound. The standard error is propagated through
// Phi by a central difference.
montecarlo::Estimate constant_drift_lower_bound(const MeanFieldFunctional& F, const generators::GeneratorSpec& g,
                                                double q, const montecarlo::PathBatch& batch);

// Rows (n, iterate_L, mean_field_limit, gap).
ConvergenceReport iterate_sweep(const MeanFieldFunctional& F, const generators::GeneratorSpec& g,
                                const std::vector<int>& n_list, const IterationGrid& grid,
                                const LimitGrids& limit_grids);

}  // namespace rholab::sanov
