#pragma once

#include <functional>
#include <limits>
#include <span>
#include <string>
#include <vector>

#include <json.hpp>

#include "rholab/functions.hpp"

namespace rholab {

// Piecewise-linear path through (times[k], values[k]); values[0] is the start
// value. Paths on [0, 1] are the usual case, prefixes may end earlier.
struct PathPolyline {
    std::vector<double> times;
    std::vector<double> values;

    // Throws ValidationError unless times start at 0, increase strictly and end
    // at `end` (within 1e-12), with one value per time. A lone knot at 0 is a
    // valid prefix for end = 0.
    void validate(double end = 1.0) const;
    double end_time() const { return times.back(); }
    double value_at(double t) const;
    double slope(std::size_t k) const { return (values[k + 1] - values[k]) / (times[k + 1] - times[k]); }

    // Uniform knots k / (m - 1), k = 0..m-1.
    static PathPolyline straight(double start, double end_value, int m);
};

// Bounded path functionals F(omega). Every kind is evaluated on the polyline
// interpolating the given knots.
class PathFunctional {
public:
    enum class Kind { terminal_value, time_integral, running_max, finite_marginals };
    using Integrand = std::function<double(double t, double x)>;
    using Marginals = std::function<double(std::span<const double>)>;

    // f(omega(1))
    static PathFunctional terminal_value(functions::ScalarFunction f);
    // ∫_0^1 h(t, omega(t)) dt
    static PathFunctional time_integral(Integrand h, nlohmann::json spec = {});
    static PathFunctional time_integral(functions::ScalarFunction h);
    // transform(max_t omega(t))
    static PathFunctional running_max(functions::ScalarFunction transform);
    // f(omega(t_1), ..., omega(t_k)) with 0 < t_1 < ... < t_k <= 1
    static PathFunctional finite_marginals(std::vector<double> times, Marginals f, nlohmann::json spec = {});
    // f(sum_i w_i omega(t_i))
    static PathFunctional weighted_marginals(std::vector<double> times, std::vector<double> weights,
                                             functions::ScalarFunction f);

    Kind kind() const { return kind_; }
    std::string kind_name() const;

    // Boundedness certificate lo <= F <= hi; infinite when unknown.
    double lower() const { return lo_; }
    double upper() const { return hi_; }
    PathFunctional& with_bounds(double lo, double hi);

    double operator()(const PathPolyline& p) const { return evaluate(p.times, p.values); }
    double evaluate(std::span<const double> times, std::span<const double> values) const;
    // Knots at k / (values.size() - 1).
    double evaluate_uniform(std::span<const double> values) const;

    // Accessors used by the regression and Monte Carlo code.
    double terminal(double x) const { return scalar_(x); }
    double integrand(double t, double x) const { return integrand_(t, x); }
    const std::vector<double>& marginal_times() const { return times_; }
    double marginals(std::span<const double> xs) const { return marginals_(xs); }

    const nlohmann::json& spec() const { return spec_; }

private:
    PathFunctional() = default;

    Kind kind_ = Kind::terminal_value;
    functions::ScalarFunction scalar_;
    Integrand integrand_;
    std::vector<double> times_;
    Marginals marginals_;
    double lo_ = -std::numeric_limits<double>::infinity();
    double hi_ = std::numeric_limits<double>::infinity();
    nlohmann::json spec_;
};

// {"kind": "terminal_value", "f": {...}}, {"kind": "time_integral", "h": {...}},
// {"kind": "running_max", "transform": {...}}, {"kind": "finite_marginals",
// "times": [...], "weights": [...], "f": {...}}; optional "bounds": [lo, hi].
PathFunctional functional_from_json(const nlohmann::json& j);

PathPolyline polyline_from_json(const nlohmann::json& j);
nlohmann::json to_json(const PathPolyline& p);

}  // namespace rholab
