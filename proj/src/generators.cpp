#include "rholab/generators.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <limits>
#include <numeric>
#include <sstream>
#include <stdexcept>

namespace rholab::generators {

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();

// Piecewise-linear interpolation on (times, weights), clamped outside.
double interp_weight(const std::vector<double>& times, const std::vector<double>& weights,
                     double t) {
    if (times.size() == 1 || t <= times.front()) return weights.front();
    if (t >= times.back()) return weights.back();
    auto it = std::upper_bound(times.begin(), times.end(), t);
    std::size_t j = static_cast<std::size_t>(it - times.begin());
    double t0 = times[j - 1], t1 = times[j];
    double w = (t - t0) / (t1 - t0);
    return (1.0 - w) * weights[j - 1] + w * weights[j];
}

void check_time_grid(const std::vector<double>& times, const std::vector<double>& weights) {
    if (times.empty() || times.size() != weights.size()) {
        throw std::invalid_argument("time_modulated: times and weights must be non-empty and equal length");
    }
    for (std::size_t i = 1; i < times.size(); ++i) {
        if (!(times[i] > times[i - 1])) {
            throw std::invalid_argument("time_modulated: times must be strictly increasing");
        }
    }
    for (double w : weights) {
        if (!(w > 0.0) || !std::isfinite(w)) {
            throw std::invalid_argument("time_modulated: weights must be positive and finite");
        }
    }
}

// Slopes between consecutive samples; throws unless q is strictly increasing
// and the slopes are non-decreasing (up to a relative tolerance).
std::vector<double> convex_slopes(const std::vector<double>& q, const std::vector<double>& g) {
    if (q.empty() || q.size() != g.size()) {
        throw std::invalid_argument("tabulated: q and g must be non-empty and of equal length");
    }
    std::vector<double> s;
    s.reserve(q.size() - 1);
    for (std::size_t j = 0; j < q.size(); ++j) {
        if (!std::isfinite(q[j]) || !std::isfinite(g[j])) {
            throw std::invalid_argument("tabulated: samples must be finite");
        }
        if (j > 0) {
            if (!(q[j] > q[j - 1])) {
                throw std::invalid_argument("tabulated: q must be strictly increasing");
            }
            s.push_back((g[j] - g[j - 1]) / (q[j] - q[j - 1]));
        }
    }
    for (std::size_t j = 1; j < s.size(); ++j) {
        double tol = 1e-9 * (1.0 + std::abs(s[j]) + std::abs(s[j - 1]));
        if (s[j] < s[j - 1] - tol) {
            throw std::invalid_argument("tabulated: samples are not convex (slopes decrease at q=" +
                                        std::to_string(q[j]) + ")");
        }
        s[j] = std::max(s[j], s[j - 1]);
    }
    return s;
}

double tabulated_eval(const Tabulated& tab, double q) {
    const auto& qs = tab.q;
    const auto& gs = tab.g;
    std::size_t n = qs.size();
    if (q < qs.front() || q > qs.back()) {
        if (tab.outside == Extrapolation::infinite) return kInf;
        if (n == 1) return gs.front();
        if (q < qs.front()) {
            double s = (gs[1] - gs[0]) / (qs[1] - qs[0]);
            return gs[0] + s * (q - qs[0]);
        }
        double s = (gs[n - 1] - gs[n - 2]) / (qs[n - 1] - qs[n - 2]);
        return gs[n - 1] + s * (q - qs[n - 1]);
    }
    if (n == 1) return gs.front();
    auto it = std::upper_bound(qs.begin(), qs.end(), q);
    std::size_t j = std::min<std::size_t>(static_cast<std::size_t>(it - qs.begin()), n - 1);
    double w = (q - qs[j - 1]) / (qs[j] - qs[j - 1]);
    return (1.0 - w) * gs[j - 1] + w * gs[j];
}

double min_weight_of(const std::vector<double>& weights) {
    return *std::min_element(weights.begin(), weights.end());
}

double max_weight_of(const std::vector<double>& weights) {
    return *std::max_element(weights.begin(), weights.end());
}

std::string fmt_num(double x) {
    std::ostringstream os;
    os.precision(6);
    os << x;
    return os.str();
}

}  // namespace

GeneratorSpec::GeneratorSpec(Variant v, std::optional<double> lower_bound)
    : variant_(std::move(v)) {
    double lb = 0.0;
    std::visit(
        [&](const auto& s) {
            using T = std::decay_t<decltype(s)>;
            if constexpr (std::is_same_v<T, Quadratic>) {
                if (!(s.curvature > 0.0) || !std::isfinite(s.curvature)) {
                    throw std::invalid_argument("quadratic: curvature must be positive");
                }
            } else if constexpr (std::is_same_v<T, PowerLaw>) {
                if (!(s.exponent > 1.0) || !std::isfinite(s.exponent)) {
                    throw std::invalid_argument("power_law: exponent must exceed 1");
                }
                if (!(s.scale > 0.0) || !std::isfinite(s.scale)) {
                    throw std::invalid_argument("power_law: scale must be positive");
                }
            } else if constexpr (std::is_same_v<T, IndicatorInterval>) {
                if (!(s.half_width > 0.0) || !std::isfinite(s.half_width)) {
                    throw std::invalid_argument("indicator: half width must be positive");
                }
            } else if constexpr (std::is_same_v<T, Tabulated>) {
                auto slopes = convex_slopes(s.q, s.g);
                if (s.outside == Extrapolation::linear && !slopes.empty() &&
                    (slopes.front() > 0.0 || slopes.back() < 0.0)) {
                    throw std::invalid_argument(
                        "tabulated: linear extrapolation is unbounded below");
                }
                double gmin = *std::min_element(s.g.begin(), s.g.end());
                lb = std::max(0.0, -gmin);
            } else {
                if (!s.base) throw std::invalid_argument("time_modulated: missing base");
                check_time_grid(s.times, s.weights);
                lb = max_weight_of(s.weights) * s.base->lower_bound();
            }
        },
        variant_);
    if (lower_bound) {
        if (!(*lower_bound >= lb)) {
            throw std::invalid_argument("lower_bound " + fmt_num(*lower_bound) +
                                        " is smaller than the bound implied by the samples (" +
                                        fmt_num(lb) + ")");
        }
        lb = *lower_bound;
    }
    lower_bound_ = lb;
}

GeneratorSpec GeneratorSpec::tabulated(std::vector<double> q, std::vector<double> g,
                                       Extrapolation outside) {
    return GeneratorSpec(Tabulated{std::move(q), std::move(g), outside});
}

GeneratorSpec GeneratorSpec::time_modulated(GeneratorSpec base, std::vector<double> times,
                                            std::vector<double> weights) {
    return GeneratorSpec(TimeModulated{std::make_shared<const GeneratorSpec>(std::move(base)),
                                       std::move(times), std::move(weights)});
}

std::string GeneratorSpec::name() const {
    return std::visit(
        [](const auto& s) -> std::string {
            using T = std::decay_t<decltype(s)>;
            if constexpr (std::is_same_v<T, Quadratic>) {
                return "quadratic(c=" + fmt_num(s.curvature) + ")";
            } else if constexpr (std::is_same_v<T, PowerLaw>) {
                return "power_law(r=" + fmt_num(s.exponent) + ",a=" + fmt_num(s.scale) + ")";
            } else if constexpr (std::is_same_v<T, IndicatorInterval>) {
                return "indicator(K=" + fmt_num(s.half_width) + ")";
            } else if constexpr (std::is_same_v<T, Tabulated>) {
                return "tabulated(" + std::to_string(s.q.size()) + " samples)";
            } else {
                return "time_modulated(" + s.base->name() + ")";
            }
        },
        variant_);
}

bool GeneratorSpec::time_dependent() const {
    return std::holds_alternative<TimeModulated>(variant_);
}

double GeneratorSpec::min_weight() const {
    if (const auto* tm = std::get_if<TimeModulated>(&variant_)) {
        return min_weight_of(tm->weights) * tm->base->min_weight();
    }
    return 1.0;
}

ExtendedReal eval_g(const GeneratorSpec& spec, double t, double q) {
    if (!(t >= 0.0 && t <= 1.0)) {
        throw std::invalid_argument("eval_g: t must lie in [0,1]");
    }
    return std::visit(
        [&](const auto& s) -> ExtendedReal {
            using T = std::decay_t<decltype(s)>;
            if constexpr (std::is_same_v<T, Quadratic>) {
                return 0.5 * s.curvature * q * q;
            } else if constexpr (std::is_same_v<T, PowerLaw>) {
                return s.scale * std::pow(std::abs(q), s.exponent);
            } else if constexpr (std::is_same_v<T, IndicatorInterval>) {
                return std::abs(q) <= s.half_width ? ExtendedReal{0.0} : ExtendedReal::infinity();
            } else if constexpr (std::is_same_v<T, Tabulated>) {
                return tabulated_eval(s, q);
            } else {
                return interp_weight(s.times, s.weights, t) * eval_g(*s.base, t, q);
            }
        },
        spec.variant());
}

// ---------------------------------------------------------------------------
// Legendre tables

LegendreTable::LegendreTable(std::vector<double> q, std::vector<double> g)
    : q_(std::move(q)), g_(std::move(g)) {
    slopes_ = convex_slopes(q_, g_);
}

std::size_t LegendreTable::index(double z) const {
    // Sample j is optimal for z in [slope_{j-1}, slope_j].
    return static_cast<std::size_t>(std::lower_bound(slopes_.begin(), slopes_.end(), z) -
                                    slopes_.begin());
}

double LegendreTable::value(double z) const {
    std::size_t j = index(z);
    return q_[j] * z - g_[j];
}

double LegendreTable::argmax(double z) const {
    return q_[index(z)];
}

double LegendreTable::right_argmax(double z) const {
    auto j = std::upper_bound(slopes_.begin(), slopes_.end(), z) - slopes_.begin();
    return q_[static_cast<std::size_t>(j)];
}

std::vector<double> discrete_legendre(std::span<const double> q, std::span<const double> g,
                                      std::span<const double> z) {
    if (q.empty() || z.empty()) {
        throw std::invalid_argument("discrete_legendre: empty input");
    }
    std::vector<double> qv(q.begin(), q.end()), gv(g.begin(), g.end());
    auto slopes = convex_slopes(qv, gv);
    std::vector<std::size_t> order(z.size());
    std::iota(order.begin(), order.end(), std::size_t{0});
    std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return z[a] < z[b]; });
    // Monotone argmax: the optimal sample index is non-decreasing in z.
    std::vector<double> out(z.size());
    std::size_t j = 0;
    for (std::size_t i : order) {
        while (j < slopes.size() && slopes[j] < z[i]) ++j;
        out[i] = qv[j] * z[i] - gv[j];
    }
    return out;
}

// ---------------------------------------------------------------------------
// Conjugates

bool ConjugateSpec::closed_form() const {
    return std::visit(
        [](const auto& s) -> bool {
            using T = std::decay_t<decltype(s)>;
            if constexpr (std::is_same_v<T, Table>) {
                return false;
            } else if constexpr (std::is_same_v<T, Modulated>) {
                return s.base->closed_form();
            } else {
                return true;
            }
        },
        variant_);
}

bool ConjugateSpec::time_dependent() const {
    return std::holds_alternative<Modulated>(variant_);
}

std::shared_ptr<const LegendreTable> ConjugateSpec::table() const {
    if (const auto* t = std::get_if<Table>(&variant_)) return t->table;
    if (const auto* m = std::get_if<Modulated>(&variant_)) return m->base->table();
    return nullptr;
}

ExtendedReal ConjugateSpec::value(double t, double z) const {
    return std::visit(
        [&](const auto& s) -> ExtendedReal {
            using T = std::decay_t<decltype(s)>;
            if constexpr (std::is_same_v<T, Quadratic>) {
                return z * z / (2.0 * s.curvature);
            } else if constexpr (std::is_same_v<T, PowerLaw>) {
                return s.scale * std::pow(std::abs(z), s.exponent);
            } else if constexpr (std::is_same_v<T, Support>) {
                return s.half_width * std::abs(z);
            } else if constexpr (std::is_same_v<T, Table>) {
                const auto& tab = *s.table;
                if (s.outside == Extrapolation::linear && tab.q().size() > 1) {
                    // Linear tails add the end slopes as hard limits on z.
                    const auto& q = tab.q();
                    const auto& g = tab.g();
                    std::size_t n = q.size();
                    double lo = (g[1] - g[0]) / (q[1] - q[0]);
                    double hi = (g[n - 1] - g[n - 2]) / (q[n - 1] - q[n - 2]);
                    if (z < lo || z > hi) return ExtendedReal::infinity();
                } else if (s.outside == Extrapolation::linear && z != 0.0) {
                    return ExtendedReal::infinity();
                }
                return tab.value(z);
            } else {
                double w = interp_weight(s.times, s.weights, t);
                return w * s.base->value(t, z / w);
            }
        },
        variant_);
}

double ConjugateSpec::derivative(double t, double z) const {
    return std::visit(
        [&](const auto& s) -> double {
            using T = std::decay_t<decltype(s)>;
            if constexpr (std::is_same_v<T, Quadratic>) {
                return z / s.curvature;
            } else if constexpr (std::is_same_v<T, PowerLaw>) {
                double sgn = z < 0.0 ? -1.0 : 1.0;
                return sgn * s.scale * s.exponent * std::pow(std::abs(z), s.exponent - 1.0);
            } else if constexpr (std::is_same_v<T, Support>) {
                return z < 0.0 ? -s.half_width : s.half_width;
            } else if constexpr (std::is_same_v<T, Table>) {
                return s.table->right_argmax(z);
            } else {
                double w = interp_weight(s.times, s.weights, t);
                return s.base->derivative(t, z / w);
            }
        },
        variant_);
}

double ConjugateSpec::lipschitz_bound(double zmax) const {
    zmax = std::abs(zmax);
    return std::visit(
        [&](const auto& s) -> double {
            using T = std::decay_t<decltype(s)>;
            if constexpr (std::is_same_v<T, Quadratic>) {
                return zmax / s.curvature;
            } else if constexpr (std::is_same_v<T, PowerLaw>) {
                return s.scale * s.exponent * std::pow(zmax, s.exponent - 1.0);
            } else if constexpr (std::is_same_v<T, Support>) {
                return s.half_width;
            } else if constexpr (std::is_same_v<T, Table>) {
                return std::max(std::abs(s.table->argmax(-zmax)), std::abs(s.table->argmax(zmax)));
            } else {
                return s.base->lipschitz_bound(zmax / min_weight_of(s.weights));
            }
        },
        variant_);
}

double ConjugateSpec::argmin(double t) const {
    return std::visit(
        [&](const auto& s) -> double {
            using T = std::decay_t<decltype(s)>;
            if constexpr (std::is_same_v<T, Table>) {
                const auto& q = s.table->q();
                const auto& g = s.table->g();
                std::size_t n = q.size();
                if (n == 1) {
                    if (q[0] != 0.0) throw std::domain_error("conjugate has no minimizer");
                    return 0.0;
                }
                // The subdifferential of the tabulated cost at 0.
                auto it = std::lower_bound(q.begin(), q.end(), 0.0);
                std::size_t j = static_cast<std::size_t>(it - q.begin());
                auto slope = [&](std::size_t k) { return (g[k + 1] - g[k]) / (q[k + 1] - q[k]); };
                if (j < n && q[j] == 0.0) {
                    double lo = j > 0 ? slope(j - 1) : -kInf;
                    double hi = j + 1 < n ? slope(j) : kInf;
                    if (std::isfinite(lo) && std::isfinite(hi)) return 0.5 * (lo + hi);
                    if (lo <= 0.0 && 0.0 <= hi) return 0.0;
                    return std::isfinite(lo) ? lo : hi;
                }
                if (j == 0 || j == n) {
                    if (s.outside == Extrapolation::linear) {
                        return j == 0 ? slope(0) : slope(n - 2);
                    }
                    throw std::domain_error("conjugate has no minimizer: 0 outside the cost domain");
                }
                return slope(j - 1);
            } else if constexpr (std::is_same_v<T, Modulated>) {
                return interp_weight(s.times, s.weights, t) * s.base->argmin(t);
            } else {
                return 0.0;
            }
        },
        variant_);
}

ConjugateSpec conjugate(const GeneratorSpec& spec) {
    return std::visit(
        [](const auto& s) -> ConjugateSpec {
            using T = std::decay_t<decltype(s)>;
            if constexpr (std::is_same_v<T, Quadratic>) {
                return ConjugateSpec(ConjugateSpec::Quadratic{s.curvature});
            } else if constexpr (std::is_same_v<T, PowerLaw>) {
                double r = s.exponent;
                double rp = r / (r - 1.0);
                double ap = std::pow(s.scale * r, -rp / r) / rp;
                return ConjugateSpec(ConjugateSpec::PowerLaw{rp, ap});
            } else if constexpr (std::is_same_v<T, IndicatorInterval>) {
                return ConjugateSpec(ConjugateSpec::Support{s.half_width});
            } else if constexpr (std::is_same_v<T, Tabulated>) {
                return ConjugateSpec(ConjugateSpec::Table{
                    std::make_shared<const LegendreTable>(s.q, s.g), s.outside});
            } else {
                return ConjugateSpec(ConjugateSpec::Modulated{
                    std::make_shared<const ConjugateSpec>(conjugate(*s.base)), s.times,
                    s.weights});
            }
        },
        spec.variant());
}

// ---------------------------------------------------------------------------
// (TI) diagnostics

bool TiReport::all_pass() const {
    return std::all_of(clauses.begin(), clauses.end(), [](const TiClause& c) { return c.pass; });
}

const TiClause& TiReport::clause(const std::string& name) const {
    for (const auto& c : clauses) {
        if (c.name == name) return c;
    }
    throw std::out_of_range("no TI clause named " + name);
}

namespace {

std::vector<double> sample_times(const GeneratorSpec& spec) {
    if (!spec.time_dependent()) return {0.0};
    std::vector<double> ts;
    for (int i = 0; i <= 20; ++i) ts.push_back(i / 20.0);
    return ts;
}

std::vector<double> probe_points() {
    std::vector<double> qs;
    for (int k = -20; k <= 20; ++k) {
        double a = std::ldexp(1.0, k);
        qs.push_back(a);
        qs.push_back(-a);
        qs.push_back(0.75 * a);
        qs.push_back(-0.75 * a);
    }
    qs.push_back(0.0);
    std::sort(qs.begin(), qs.end());
    return qs;
}

// Coercivity along one direction of the ladder |q| = 2^0..2^20.
bool coercive_along(const GeneratorSpec& spec, double t, double sign, std::string& detail) {
    std::vector<double> ratio;
    for (int k = 0; k <= 20; ++k) {
        double q = sign * std::ldexp(1.0, k);
        ExtendedReal g = eval_g(spec, t, q);
        if (g.is_infinite()) return true;  // the domain is bounded in this direction
        ratio.push_back(g.value() / std::abs(q));
    }
    for (std::size_t k = 11; k < ratio.size(); ++k) {
        if (ratio[k] < ratio[k - 1] - 1e-12 * std::abs(ratio[k - 1])) {
            detail = "g/|q| decreases along the ladder";
            return false;
        }
    }
    double r10 = ratio[10], r20 = ratio[20];
    if (!(r20 > r10 + 1e-2 * std::max(1.0, std::abs(r10)))) {
        detail = "g/|q| stalls near " + fmt_num(r20) + " (linear growth)";
        return false;
    }
    return true;
}

}  // namespace

TiReport check_ti(const GeneratorSpec& spec) {
    TiReport rep;
    auto times = sample_times(spec);
    auto qs = probe_points();

    {
        TiClause c{"lower_bound", true, "g >= -" + fmt_num(spec.lower_bound())};
        for (double t : times) {
            for (double q : qs) {
                ExtendedReal g = eval_g(spec, t, q);
                if (g.is_finite() && g.value() < -spec.lower_bound() - 1e-12) {
                    c.pass = false;
                    c.detail = "g(" + fmt_num(t) + "," + fmt_num(q) + ") = " + fmt_num(g.value()) +
                               " below -lower_bound";
                    break;
                }
            }
            if (!c.pass) break;
        }
        rep.clauses.push_back(c);
    }
    {
        TiClause c{"coercivity", true, "g/|q| grows along 2^0..2^20 (finite heuristic)"};
        for (double t : times) {
            std::string d;
            if (!coercive_along(spec, t, 1.0, d) || !coercive_along(spec, t, -1.0, d)) {
                c.pass = false;
                c.detail = d + " at t=" + fmt_num(t);
                break;
            }
        }
        rep.clauses.push_back(c);
    }
    {
        TiClause c{"convexity", true, "midpoint test on sampled pairs"};
        for (double t : times) {
            for (std::size_t i = 0; i < qs.size() && c.pass; ++i) {
                for (std::size_t j = i + 1; j < qs.size(); j += 3) {
                    ExtendedReal a = eval_g(spec, t, qs[i]);
                    ExtendedReal b = eval_g(spec, t, qs[j]);
                    if (a.is_infinite() || b.is_infinite()) continue;
                    ExtendedReal m = eval_g(spec, t, 0.5 * (qs[i] + qs[j]));
                    double rhs = 0.5 * (a.value() + b.value());
                    if (m.is_infinite() ||
                        m.value() > rhs + 1e-9 * (1.0 + std::abs(rhs))) {
                        c.pass = false;
                        c.detail = "midpoint test fails between q=" + fmt_num(qs[i]) +
                                   " and q=" + fmt_num(qs[j]);
                        break;
                    }
                }
            }
            if (!c.pass) break;
        }
        rep.clauses.push_back(c);
    }
    {
        TiClause c{"zero_in_ri_domain", true, "g(t,0) finite with room on both sides"};
        for (double t : times) {
            if (eval_g(spec, t, 0.0).is_infinite()) {
                c.pass = false;
                c.detail = "g(" + fmt_num(t) + ",0) = +inf";
                break;
            }
            bool left = false, right = false;
            for (int k = 0; k <= 40; ++k) {
                double d = std::ldexp(1.0, -k);
                left = left || eval_g(spec, t, -d).is_finite();
                right = right || eval_g(spec, t, d).is_finite();
            }
            if (left != right) {
                c.pass = false;
                c.detail = "0 is an endpoint of the domain at t=" + fmt_num(t);
                break;
            }
        }
        rep.clauses.push_back(c);
    }
    {
        TiClause c{"time_integrability", true, ""};
        // Largest R in {1, 1/2, ...} with [-R, R] inside the domain at all times.
        double radius = 0.0;
        for (int k = 0; k <= 30 && radius == 0.0; ++k) {
            double r = std::ldexp(1.0, -k);
            bool ok = true;
            for (double t : times) {
                ok = ok && eval_g(spec, t, r).is_finite() && eval_g(spec, t, -r).is_finite();
            }
            if (ok) radius = r;
        }
        std::vector<double> tgrid;
        for (int i = 0; i <= 100; ++i) tgrid.push_back(i / 100.0);
        double integral = 0.0;
        bool finite = true;
        double prev = 0.0;
        for (std::size_t i = 0; i < tgrid.size(); ++i) {
            double sup = -kInf;
            for (int k = -8; k <= 8; ++k) {
                ExtendedReal g = eval_g(spec, tgrid[i], radius * k / 8.0);
                if (g.is_infinite()) {
                    finite = false;
                    break;
                }
                sup = std::max(sup, g.value());
            }
            if (!finite) break;
            if (i > 0) integral += 0.5 * (sup + prev) * (tgrid[i] - tgrid[i - 1]);
            prev = sup;
        }
        c.pass = finite && std::isfinite(integral);
        c.detail = finite ? "integral over t of sup_{|q|<=" + fmt_num(radius) + "} g = " +
                                fmt_num(integral)
                          : "sup over the q-range is +inf for some t";
        rep.clauses.push_back(c);
    }
    return rep;
}

double growth_exponent(const GeneratorSpec& spec) {
    double best = -kInf;
    for (double t : sample_times(spec)) {
        for (double sign : {1.0, -1.0}) {
            ExtendedReal lo = eval_g(spec, t, sign * std::ldexp(1.0, 10));
            ExtendedReal hi = eval_g(spec, t, sign * std::ldexp(1.0, 20));
            if (lo.is_infinite() || hi.is_infinite()) return kInf;
            double a = lo.value() + spec.lower_bound() + 1.0;
            double b = hi.value() + spec.lower_bound() + 1.0;
            best = std::max(best, std::log(b / a) / std::log(std::ldexp(1.0, 10)));
        }
    }
    return best;
}

// ---------------------------------------------------------------------------
// Config round trip

std::pair<std::vector<double>, std::vector<double>> read_two_column_csv(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw std::invalid_argument("cannot open CSV file " + path);
    std::vector<double> a, b;
    std::string line;
    bool first = true;
    while (std::getline(in, line)) {
        if (line.empty() || line[0] == '#') continue;
        std::replace(line.begin(), line.end(), ',', ' ');
        std::istringstream ls(line);
        double x, y;
        if (!(ls >> x >> y)) {
            if (first) {
                first = false;
                continue;
            }
            throw std::invalid_argument("malformed row in " + path + ": " + line);
        }
        first = false;
        a.push_back(x);
        b.push_back(y);
    }
    return {a, b};
}

GeneratorSpec generator_from_json(const nlohmann::json& j) {
    if (!j.is_object() || !j.contains("variant")) {
        throw std::invalid_argument("generator: missing 'variant'");
    }
    std::string v = j.at("variant").get<std::string>();
    std::optional<double> lb;
    if (j.contains("lower_bound")) lb = j.at("lower_bound").get<double>();
    if (v == "quadratic") {
        return GeneratorSpec(Quadratic{j.value("c", 1.0)}, lb);
    }
    if (v == "power_law") {
        if (!j.contains("r")) throw std::invalid_argument("generator: power_law needs 'r'");
        return GeneratorSpec(PowerLaw{j.at("r").get<double>(), j.value("a", 1.0)}, lb);
    }
    if (v == "indicator") {
        if (!j.contains("K")) throw std::invalid_argument("generator: indicator needs 'K'");
        return GeneratorSpec(IndicatorInterval{j.at("K").get<double>()}, lb);
    }
    if (v == "tabulated") {
        Extrapolation outside = Extrapolation::infinite;
        if (j.contains("extrapolation")) {
            std::string e = j.at("extrapolation").get<std::string>();
            if (e == "linear") outside = Extrapolation::linear;
            else if (e != "infinite") throw std::invalid_argument("generator: unknown extrapolation " + e);
        }
        if (j.contains("csv")) {
            auto [q, g] = read_two_column_csv(j.at("csv").get<std::string>());
            return GeneratorSpec(Tabulated{std::move(q), std::move(g), outside}, lb);
        }
        if (!j.contains("q") || !j.contains("g")) {
            throw std::invalid_argument("generator: tabulated needs 'q' and 'g' or 'csv'");
        }
        return GeneratorSpec(Tabulated{j.at("q").get<std::vector<double>>(),
                                       j.at("g").get<std::vector<double>>(), outside},
                             lb);
    }
    if (v == "time_modulated") {
        if (!j.contains("base") || !j.contains("times") || !j.contains("weights")) {
            throw std::invalid_argument("generator: time_modulated needs 'base', 'times', 'weights'");
        }
        auto base = std::make_shared<const GeneratorSpec>(generator_from_json(j.at("base")));
        return GeneratorSpec(TimeModulated{base, j.at("times").get<std::vector<double>>(),
                                           j.at("weights").get<std::vector<double>>()},
                             lb);
    }
    throw std::invalid_argument("generator: unknown variant '" + v + "'");
}

nlohmann::json to_json(const GeneratorSpec& spec) {
    nlohmann::json j = std::visit(
        [](const auto& s) -> nlohmann::json {
            using T = std::decay_t<decltype(s)>;
            if constexpr (std::is_same_v<T, Quadratic>) {
                return {{"variant", "quadratic"}, {"c", s.curvature}};
            } else if constexpr (std::is_same_v<T, PowerLaw>) {
                return {{"variant", "power_law"}, {"r", s.exponent}, {"a", s.scale}};
            } else if constexpr (std::is_same_v<T, IndicatorInterval>) {
                return {{"variant", "indicator"}, {"K", s.half_width}};
            } else if constexpr (std::is_same_v<T, Tabulated>) {
                return {{"variant", "tabulated"},
                        {"q", s.q},
                        {"g", s.g},
                        {"extrapolation", s.outside == Extrapolation::linear ? "linear" : "infinite"}};
            } else {
                return {{"variant", "time_modulated"},
                        {"base", to_json(*s.base)},
                        {"times", s.times},
                        {"weights", s.weights}};
            }
        },
        spec.variant());
    j["lower_bound"] = spec.lower_bound();
    return j;
}

}  // namespace rholab::generators
