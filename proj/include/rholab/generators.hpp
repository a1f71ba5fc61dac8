#pragma once

#include <memory>
#include <optional>
#include <span>
#include <string>
#include <utility>
#include <variant>
#include <vector>

#include <json.hpp>

#include "rholab/extended_real.hpp"

namespace rholab::generators {

// Cost functions g(t, q) on drift values q ∈ R, convex in q for each t.

struct Quadratic {
    double curvature = 1.0;  // g(q) = c q² / 2
};

struct PowerLaw {
    double exponent = 2.0;  // r > 1
    double scale = 1.0;     // g(q) = a |q|^r
};

struct IndicatorInterval {
    double half_width = 1.0;  // 0 on [-K, K], +inf outside
};

// How a tabulated cost behaves outside its sample hull.
enum class Extrapolation { infinite, linear };

struct Tabulated {
    std::vector<double> q;  // strictly increasing
    std::vector<double> g;  // convex samples
    Extrapolation outside = Extrapolation::infinite;
};

class GeneratorSpec;

// w(t) · base(q); w is piecewise linear on its time grid and clamped outside.
struct TimeModulated {
    std::shared_ptr<const GeneratorSpec> base;
    std::vector<double> times;
    std::vector<double> weights;
};

class GeneratorSpec {
public:
    using Variant = std::variant<Quadratic, PowerLaw, IndicatorInterval, Tabulated, TimeModulated>;

    // Validates parameters (throws std::invalid_argument); lower_bound defaults
    // to the smallest b >= 0 with g >= -b that the variant guarantees.
    explicit GeneratorSpec(Variant v, std::optional<double> lower_bound = std::nullopt);

    static GeneratorSpec quadratic(double c = 1.0) { return GeneratorSpec(Quadratic{c}); }
    static GeneratorSpec power_law(double r, double a = 1.0) { return GeneratorSpec(PowerLaw{r, a}); }
    static GeneratorSpec indicator(double k) { return GeneratorSpec(IndicatorInterval{k}); }
    static GeneratorSpec tabulated(std::vector<double> q, std::vector<double> g,
                                   Extrapolation outside = Extrapolation::infinite);
    static GeneratorSpec time_modulated(GeneratorSpec base, std::vector<double> times,
                                        std::vector<double> weights);

    const Variant& variant() const { return variant_; }
    double lower_bound() const { return lower_bound_; }
    std::string name() const;
    bool time_dependent() const;

    // Smallest modulation weight over [0,1] (1 for time-independent specs).
    double min_weight() const;

private:
    Variant variant_;
    double lower_bound_ = 0.0;
};

// g(t, q) in R ∪ {+∞}; t must lie in [0, 1].
ExtendedReal eval_g(const GeneratorSpec& spec, double t, double q);

// Upper envelope max_j (q_j z - g_j) of finitely many affine pieces, stored so
// that evaluation is a binary search over breakpoints.
class LegendreTable {
public:
    LegendreTable() = default;
    LegendreTable(std::vector<double> q, std::vector<double> g);

    double value(double z) const;
    // Smallest and largest maximizing samples: the left and right derivatives
    // of the conjugate at z.
    double argmax(double z) const;
    double right_argmax(double z) const;
    const std::vector<double>& q() const { return q_; }
    const std::vector<double>& g() const { return g_; }

private:
    std::size_t index(double z) const;
    std::vector<double> q_, g_, slopes_;
};

// z ↦ g*(t, z) = sup_q (q z - g(t, q)).
class ConjugateSpec {
public:
    struct Quadratic { double curvature; };                 // z² / (2c)
    struct PowerLaw { double exponent; double scale; };     // a' |z|^{r'}
    struct Support { double half_width; };                  // K |z|
    struct Table {
        std::shared_ptr<const LegendreTable> table;
        Extrapolation outside;
    };
    struct Modulated {
        std::shared_ptr<const ConjugateSpec> base;
        std::vector<double> times;
        std::vector<double> weights;
    };
    using Variant = std::variant<Quadratic, PowerLaw, Support, Table, Modulated>;

    explicit ConjugateSpec(Variant v) : variant_(std::move(v)) {}

    const Variant& variant() const { return variant_; }
    bool closed_form() const;
    bool time_dependent() const;
    // The Legendre table when the conjugate was computed numerically.
    std::shared_ptr<const LegendreTable> table() const;

    ExtendedReal value(double t, double z) const;
    // Right derivative ∂_z g*(t, z).
    double derivative(double t, double z) const;
    // Bound on |∂_z g*(t, z)| over t ∈ [0,1], |z| <= zmax.
    double lipschitz_bound(double zmax) const;
    // A minimizer of g*(t, ·), i.e. an element of ∂g(t, 0).
    double argmin(double t) const;

private:
    Variant variant_;
};

ConjugateSpec conjugate(const GeneratorSpec& spec);

// Exact discrete conjugate max_j (q_j z - g_j) at each z, linear time after
// sorting z. Throws std::invalid_argument on empty input, non-increasing q or
// non-convex samples.
std::vector<double> discrete_legendre(std::span<const double> q, std::span<const double> g,
                                      std::span<const double> z);

struct TiClause {
    std::string name;
    bool pass = false;
    std::string detail;
};

struct TiReport {
    std::vector<TiClause> clauses;
    bool all_pass() const;
    const TiClause& clause(const std::string& name) const;
};

// Checks lower bound, coercivity, convexity, 0 ∈ ri(dom) and time
// integrability on finite samples. The coercivity test follows |q| = 2^0..2^20
// and is a heuristic: a slowly growing but coercive g can be misreported.
TiReport check_ti(const GeneratorSpec& spec);

// Heuristic growth exponent lim log g(q) / log|q| from the same ladder; +inf
// for costs that are +inf on part of the ladder.
double growth_exponent(const GeneratorSpec& spec);

// Config round trip: {"variant": "quadratic", "c": 1}, {"variant": "power_law",
// "r": 1.5, "a": 1}, {"variant": "indicator", "K": 1}, {"variant":
// "tabulated", "q": [...], "g": [...]} or {"variant": "tabulated", "csv":
// path}, {"variant": "time_modulated", "base": {...}, "times": [...],
// "weights": [...]}.
GeneratorSpec generator_from_json(const nlohmann::json& j);
nlohmann::json to_json(const GeneratorSpec& spec);

// Reads a two-column (q, g) CSV; a non-numeric first row is treated as header.
std::pair<std::vector<double>, std::vector<double>> read_two_column_csv(const std::string& path);

}  // namespace rholab::generators
