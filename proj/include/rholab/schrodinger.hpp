#pragma once

#include <string>
#include <vector>

#include <json.hpp>

#include "rholab/generators.hpp"
#include "rholab/measure.hpp"
#include "rholab/report.hpp"

namespace rholab::schrodinger {

// Uniform state grid x_i = x_min + i * step, i = 0..size-1.
struct StateGrid {
    double x_min = -2.0;
    double step = 0.01;
    int size = 501;

    double x(int i) const { return x_min + i * step; }
    double x_max() const { return x(size - 1); }
    // Index of the node at x; throws if x is not a node (relative tolerance 1e-6 of a step).
    int index_of(double x) const;
    void validate() const;

    // Smallest grid with the given step whose nodes include lo and hi snapped
    // outward, padded by `slack` on both sides.
    static StateGrid covering(double lo, double hi, double step, double slack);
};

// nu * N(0, epsilon) as cell masses on the grid: the mass of node i is the
// Gaussian mass of [x_i - step/2, x_i + step/2]. Mass outside the grid is
// reported and must stay below 1e-6; the result is renormalized.
struct Mollified {
    DiscreteMeasure measure;
    double truncation_loss = 0.0;
};
Mollified mollify(const DiscreteMeasure& nu, double epsilon, const StateGrid& grid);

struct Coupling {
    std::vector<double> x, y;            // supports of mu and nu
    std::vector<std::vector<double>> pi;  // pi[i][j]
};

struct OtResult {
    double value = 0.0;  // +inf if every coupling has infinite cost
    Coupling coupling;
    int iterations = 0;
};

// min over couplings of sum g(y - x) pi(x, y) by the transportation simplex.
OtResult ot_oracle(const DiscreteMeasure& mu, const DiscreteMeasure& nu, const generators::GeneratorSpec& g);

// Transportation simplex on a general cost matrix (entries may be +inf).
OtResult transportation_simplex(const std::vector<double>& supply, const std::vector<double>& demand,
                                const std::vector<std::vector<double>>& cost);

struct TransportOptions {
    int n_time = 32;
    double max_speed = 8.0;     // jump radius per step (except the last) = max_speed * dt
    double kernel_cutoff = 8.0;  // noise kernel truncated at this many standard deviations
    std::vector<double> temperatures{1e-1, 3e-2, 1e-2, 3e-3, 1e-3};
    double tolerance = 1e-9;     // terminal L1 error at the last temperature
    double stage_tolerance = 1e-6;
    double feasibility_tolerance = 1e-6;
    int max_newton = 60;
    double step_cap = 10.0;  // Newton steps are scaled to max |d psi| <= step_cap * temperature
    int max_sinkhorn = 100000;
    double sinkhorn_tolerance = 1e-9;
};

TransportOptions transport_options_from_json(const nlohmann::json& j);
nlohmann::json to_json(const TransportOptions& o);

struct TransportInstance {
    DiscreteMeasure mu, nu;  // supported on grid nodes
    generators::GeneratorSpec g = generators::GeneratorSpec::quadratic();
    double epsilon = 0.1;
    StateGrid grid;
};

enum class Status { optimal, infeasible, not_converged };
std::string status_name(Status s);

struct FlowSolution {
    Status status = Status::optimal;
    std::string reason;
    double value = 0.0;            // expected cost of the computed policy
    double drift_objective = 0.0;  // sum dt sum_x m(x) g(q(x)) with q the mean drift
    double dual = 0.0;
    double terminal_error = 0.0;   // L1 distance of the terminal marginal to nu
    double mass_error = 0.0;       // max_t |sum m_t - 1|
    std::vector<std::vector<double>> marginals;  // m_t on the grid, t = 0..n_time
    std::vector<std::vector<double>> drift;      // q_t on the grid, t = 0..n_time-1
    int newton_iterations = 0;
    int sinkhorn_iterations = 0;
    double contraction = 0.0;  // Sinkhorn: geometric mean error ratio over the last iterations
    Coupling coupling;         // Sinkhorn only

    bool feasible() const { return status == Status::optimal; }
};

// Rule for un-mollified targets: an atomic nu with a cost of growth exponent
// >= 2 cannot be reached by noise plus finite-cost drift. Empty string if
// the instance is not ruled out.
std::string infeasibility_reason(const TransportInstance& inst);

// Entropic transport with the heat-kernel reference: minimizes
// epsilon * H(pi | mu (x) K) with K(x, y_j) = step / sqrt(2 pi eps) exp(-(y_j - x)^2 / (2 eps)).
FlowSolution sinkhorn_bridge(const TransportInstance& inst, const TransportOptions& opts = {});

// Controlled chain on the grid: each step applies Gaussian noise of variance
// epsilon dt and then a jump of cost dt g(jump / dt); the terminal marginal
// must equal nu. Solved through the concave dual over the terminal potential
// (softmax Bellman recursion, Newton with temperature continuation).
FlowSolution solve_transport(const TransportInstance& inst, const TransportOptions& opts = {});

// Per epsilon: Sinkhorn (quadratic g) or solve_transport against nu_eps
// (mollified) or nu itself. Rows (eps, value, ot, gap) with aux
// feasible / status / terminal_error / w1_target.
ConvergenceReport small_noise_sweep(const DiscreteMeasure& mu, const DiscreteMeasure& nu,
                                    const generators::GeneratorSpec& g, const std::vector<double>& eps_list,
                                    bool mollified, double grid_step, const TransportOptions& opts = {});

}  // namespace rholab::schrodinger
