#pragma once

#include <cstdint>

#include <json.hpp>

#include "rholab/extended_real.hpp"
#include "rholab/generators.hpp"
#include "rholab/path.hpp"

namespace rholab::variational {

// ∫ g(t, omega'(t)) dt over the polyline: segment length times g(slope) for
// time-independent g, Gauss-Legendre between modulation knots otherwise.
// +inf as soon as one slope leaves the domain of g.
ExtendedReal action(const PathPolyline& path, const generators::GeneratorSpec& g);

// ∫_a^b g(t, slope) dt.
ExtendedReal segment_cost(const generators::GeneratorSpec& g, double a, double b, double slope);

// Closed interval of admissible slopes (possibly infinite ends).
std::pair<double, double> slope_domain(const generators::GeneratorSpec& g);

struct MaximizeOptions {
    int max_iterations = 5000;
    double tolerance = 1e-12;  // relative objective change that counts as stalled
    double fd_step = 1e-6;
    // Terminal grid search used to seed the restarts (displacements of the tail).
    double y_min = -10.0;
    double y_max = 10.0;
    double y_step = 1e-3;
    double perturbation = 0.5;  // std of the Gaussian slope perturbation per restart
};

struct MaximizeResult {
    PathPolyline path;    // full path on [0, 1]
    double value = 0.0;   // functional - action, recomputed on the returned path
    double functional = 0.0;
    double action = 0.0;  // of the optimized tail only
    bool converged = false;  // false when a restart hit the iteration cap
    int iterations = 0;      // of the winning restart
    int best_restart = 0;
};

// Multistart projected gradient ascent of F(omega) - ∫_0^1 g(t, omega') dt over
// polylines from 0 with m uniform knots. Restart 0 starts from the straight
// line to the best grid-searched endpoint; the others add seeded Gaussian
// perturbations to its slopes. The value is a lower bound of the supremum.
MaximizeResult maximize_schilder(const PathFunctional& F, const generators::GeneratorSpec& g, int m, int restarts,
                                 std::uint64_t seed, const MaximizeOptions& opts = {});

// Same over tails on [t, 1] spliced to `prefix` (a polyline on [0, t]):
// maximizes F(prefix ⊕ tail) - ∫_t^1 g. At t = 1 returns F(prefix).
MaximizeResult conditional_value(const PathFunctional& F, const generators::GeneratorSpec& g, double t,
                                 const PathPolyline& prefix, int m, int restarts, std::uint64_t seed,
                                 const MaximizeOptions& opts = {});

MaximizeOptions maximize_options_from_json(const nlohmann::json& j);
nlohmann::json to_json(const MaximizeOptions& o);

}  // namespace rholab::variational
