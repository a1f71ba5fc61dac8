#pragma once

#include <cstdint>
#include <functional>
#include <span>
#include <string>
#include <vector>

#include <json.hpp>

#include "rholab/generators.hpp"
#include "rholab/path.hpp"

namespace rholab::montecarlo {

// Gaussian increments of nPaths Brownian paths on a uniform grid of [0, 1],
// scaled by sqrt(epsilon). Paths are generated in blocks of `block_size`;
// block b draws from a generator seeded with derive_seed(seed, b), so the
// batch is bit-exact for given (seed, n_steps, n_paths, epsilon).
class PathBatch {
public:
    static constexpr int block_size = 4096;

    PathBatch(int n_steps, int n_paths, std::uint64_t seed, double epsilon = 1.0);

    int n_steps() const { return n_steps_; }
    int n_paths() const { return n_paths_; }
    std::uint64_t seed() const { return seed_; }
    double volatility() const { return volatility_; }
    double dt() const { return 1.0 / n_steps_; }

    std::span<const double> increments(int path) const {
        return {increments_.data() + static_cast<std::size_t>(path) * n_steps_, static_cast<std::size_t>(n_steps_)};
    }
    // Path values at the n_steps + 1 grid times, starting from 0, times `scale`.
    void path(int i, std::vector<double>& out, double scale = 1.0) const;

private:
    int n_steps_;
    int n_paths_;
    std::uint64_t seed_;
    double volatility_;
    std::vector<double> increments_;
};

struct Estimate {
    double value = 0.0;
    double se = 0.0;
};

// Pairwise sum: deterministic and accurate for long vectors.
double pairwise_sum(std::span<const double> x);

// (1/n) log mean exp(n v_i) with a max shift; delta-method standard error.
Estimate log_mean_exp_values(std::span<const double> v, double n);

// Chopped and rescaled subpaths: subpath k has values
// sqrt(n) (omega((k + j/m)/n) - omega(k/n)), j = 0..m, where the input has
// n*m + 1 values on a uniform grid of [0, 1].
std::vector<std::vector<double>> chopped_paths(std::span<const double> path, int n);

// (1/n) log E exp(n F(W / sqrt(n))) over the batch (the quadratic-case value).
Estimate log_mean_exp(const PathFunctional& F, double n, const PathBatch& batch);

// Same statistic with W/sqrt(n) replaced by the average of the n chopped
// paths of W. Needs n_steps divisible by n.
Estimate cramer_average(const PathFunctional& F, int n, const PathBatch& batch);

// Bounded feedback drift q(t_k, X_0..X_k).
struct FeedbackControl {
    std::function<double(double t, std::span<const double> history)> rule;
    double bound = 0.0;
    nlohmann::json spec;

    static FeedbackControl constant(double q);
    // clamp(gain * (target - x), -bound, bound)
    static FeedbackControl linear(double target, double gain, double bound);
    // bound * tanh(gain * (target - x))
    static FeedbackControl tanh(double target, double gain, double bound);
    // clamp(a + b t, -bound, bound)
    static FeedbackControl time_linear(double a, double b, double bound);
    // clamp(gain * (max_{s <= t} X_s - x) + offset, -bound, bound)
    static FeedbackControl running_max(double gain, double offset, double bound);
};

FeedbackControl control_from_json(const nlohmann::json& j);

// Mean of F(X) - ∑ g(t_k, q_k) dt with the Euler scheme X_{k+1} = X_k + q_k dt + dW_k.
// Throws ValidationError if the control leaves [-bound, bound] or dom g.
Estimate girsanov_lower_bound(const PathFunctional& F, const generators::GeneratorSpec& g,
                              const FeedbackControl& q, const PathBatch& batch);

struct LsmcStep {
    double time = 0.0;
    int degree = 0;  // basis degree actually used (after rank fallback)
    std::vector<double> y_coefficients;
    std::vector<double> z_coefficients;
    double y_mean = 0.0;
    double z_mean = 0.0;
    double residual_rms = 0.0;  // of the Y regression
};

struct LsmcSolution {
    std::vector<std::string> features;  // regression state variables
    int requested_degree = 0;
    std::vector<LsmcStep> steps;        // k = 0..n_steps-1
    double y0 = 0.0;
    double terminal_residual = 0.0;     // max |Y_N - F| in sample
    int fallbacks = 0;                  // steps that needed a lower degree
};

// Backward regression scheme for dY = -g*(t, sqrt(n) Z) dt + Z dW with
// Y(1) = F(W / sqrt(n)), in multi-step forward form: with
// S_k = F + sum_{j >= k} dt g*(t_j, sqrt(n) Z_j) realized along each path,
// Y_k = E[S_{k+1} | state_k] + dt g*(t_k, sqrt(n) Z_k) and Z_k is the
// regression of (S_{k+1} - E[S_{k+1} | state_k]) dW_k / dt. The state holds
// the current value and the running statistic F depends on. Y_k is truncated
// to its a-priori range [min F + ∫ min g*, max F + ∫ g*(., 0)] and Z_k to the
// bound that range implies.
LsmcSolution lsmc_bsde(const PathFunctional& F, const generators::ConjugateSpec& gstar, double n,
                       const PathBatch& batch, int degree);

struct BridgeSampling {
    int n_paths = 100000;
    int n_steps = 1000;
    std::uint64_t seed = 1;
};

struct BridgeCheck {
    double moment = 0.0;     // time-discretized E ∫_0^δ |q|^r dt
    double moment_se = 0.0;
    double k_r = 0.0;        // +inf outside (1, 2)
    double bound = 0.0;      // K_r |y-x|^r δ^{1-r} + K_r δ^{1-r/2} ε^{r/2}
    bool bound_available = false;
    std::vector<double> check_times;
    std::vector<double> mean, mean_se, mean_exact;
    std::vector<double> variance, variance_se, variance_exact;
};

// 2^{r-1} E|Z|^r ∫_0^1 (t / (1 - t))^{r/2} dt with the integral by quadrature.
double bridge_constant(double r);

// Brownian bridge of volatility sqrt(ε) on [0, δ] from x to y, sampled from
// its exact conditional Gaussian transitions; q(t) = (y - B(t)) / (δ - t).
BridgeCheck bridge_moment_check(double x, double y, double epsilon, double delta, double r,
                                const BridgeSampling& sampling);

// E ∫_0^{δ-η} |q|^r dt on a grid refined geometrically toward δ - η.
Estimate bridge_truncated_moment(double x, double y, double epsilon, double delta, double r, double eta,
                                 const BridgeSampling& sampling);

// Exact value of the same quantity for r = 2.
double bridge_truncated_square_moment(double x, double y, double epsilon, double delta, double eta);

}  // namespace rholab::montecarlo
