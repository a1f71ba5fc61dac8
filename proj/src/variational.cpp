#include "rholab/variational.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <random>

#include "rholab/errors.hpp"
#include "rholab/parallel.hpp"
#include "rholab/quadrature.hpp"
#include "rholab/random.hpp"

namespace rholab::variational {

using generators::GeneratorSpec;

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();

}  // namespace

ExtendedReal segment_cost(const GeneratorSpec& g, double a, double b, double slope) {
    if (!g.time_dependent()) return (b - a) * generators::eval_g(g, 0.0, slope);
    const auto& tm = std::get<generators::TimeModulated>(g.variant());
    std::vector<double> cuts{a};
    for (double s : tm.times) {
        if (s > a && s < b) cuts.push_back(s);
    }
    cuts.push_back(b);
    double acc = 0.0;
    for (std::size_t i = 0; i + 1 < cuts.size(); ++i) {
        auto rule = quadrature::gauss_legendre(4, cuts[i], cuts[i + 1]);
        for (std::size_t j = 0; j < rule.nodes.size(); ++j) {
            ExtendedReal v = generators::eval_g(g, std::clamp(rule.nodes[j], 0.0, 1.0), slope);
            if (v.is_infinite()) return ExtendedReal::infinity();
            acc += rule.weights[j] * v.value();
        }
    }
    return ExtendedReal(acc);
}

ExtendedReal action(const PathPolyline& path, const GeneratorSpec& g) {
    path.validate(path.end_time());
    double acc = 0.0;
    for (std::size_t k = 0; k + 1 < path.times.size(); ++k) {
        ExtendedReal c = segment_cost(g, path.times[k], path.times[k + 1], path.slope(k));
        if (c.is_infinite()) return c;
        acc += c.value();
    }
    return ExtendedReal(acc);
}

std::pair<double, double> slope_domain(const GeneratorSpec& g) {
    return std::visit(
        [](const auto& v) -> std::pair<double, double> {
            using T = std::decay_t<decltype(v)>;
            if constexpr (std::is_same_v<T, generators::IndicatorInterval>) {
                return {-v.half_width, v.half_width};
            } else if constexpr (std::is_same_v<T, generators::Tabulated>) {
                if (v.outside == generators::Extrapolation::infinite) return {v.q.front(), v.q.back()};
                return {-kInf, kInf};
            } else if constexpr (std::is_same_v<T, generators::TimeModulated>) {
                return slope_domain(*v.base);
            } else {
                return {-kInf, kInf};
            }
        },
        g.variant());
}

namespace {

// Objective over the slopes of a uniform tail spliced to a fixed prefix.
class TailProblem {
public:
    TailProblem(const PathFunctional& F, const GeneratorSpec& g, const PathPolyline& prefix, int m)
        : F_(F), g_(g), m_(m) {
        const double t = prefix.end_time();
        dt_ = (1.0 - t) / (m - 1);
        times_ = prefix.times;
        values_ = prefix.values;
        n_prefix_ = prefix.times.size();
        tail_times_.resize(m);
        for (int k = 0; k < m; ++k) tail_times_[k] = t + k * dt_;
        tail_times_.back() = 1.0;
        for (int k = 1; k < m; ++k) {
            times_.push_back(tail_times_[k]);
            values_.push_back(0.0);
        }
        std::tie(lo_, hi_) = slope_domain(g);
        time_dependent_ = g.time_dependent();
    }

    int size() const { return m_ - 1; }
    double dt() const { return dt_; }
    double clip(double s) const { return std::clamp(s, lo_, hi_); }

    double cost(int k, double s) const {
        ExtendedReal c = time_dependent_ ? segment_cost(g_, tail_times_[k], tail_times_[k + 1], s)
                                         : dt_ * generators::eval_g(g_, 0.0, s);
        return c.to_double();
    }

    double functional(const std::vector<double>& s) {
        double x = values_[n_prefix_ - 1];
        for (int k = 0; k < size(); ++k) {
            x += s[k] * dt_;
            values_[n_prefix_ + k] = x;
        }
        return F_.evaluate(times_, values_);
    }

    double objective(const std::vector<double>& s) {
        double a = 0.0;
        for (int k = 0; k < size(); ++k) a += cost(k, s[k]);
        if (std::isinf(a)) return -kInf;
        return functional(s) - a;
    }

    // Finite-difference gradient of the objective divided by dt.
    void gradient(std::vector<double>& s, double h, std::vector<double>& out) {
        out.assign(size(), 0.0);
        for (int k = 0; k < size(); ++k) {
            double s0 = s[k];
            double sp = clip(s0 + h), sm = clip(s0 - h);
            if (sp == sm) continue;
            s[k] = sp;
            double fp = functional(s) - cost(k, sp);
            s[k] = sm;
            double fm = functional(s) - cost(k, sm);
            s[k] = s0;
            out[k] = std::isfinite(fp - fm) ? (fp - fm) / (sp - sm) / dt_ : 0.0;
        }
    }

    PathPolyline path(const std::vector<double>& s) {
        functional(s);
        return {times_, values_};
    }

private:
    const PathFunctional& F_;
    const GeneratorSpec& g_;
    int m_;
    double dt_ = 0.0;
    std::vector<double> times_, values_, tail_times_;
    std::size_t n_prefix_ = 0;
    double lo_ = -kInf, hi_ = kInf;
    bool time_dependent_ = false;
};

struct AscentResult {
    std::vector<double> slopes;
    double value = -kInf;
    int iterations = 0;
    bool converged = false;
};

AscentResult ascend(TailProblem& P, std::vector<double> s, const MaximizeOptions& o) {
    for (auto& v : s) v = P.clip(v);
    AscentResult r;
    double J = P.objective(s);
    std::vector<double> G, trial(s.size());
    double alpha = 1.0;
    int quiet = 0;
    int it = 0;
    for (; it < o.max_iterations; ++it) {
        P.gradient(s, o.fd_step, G);
        bool accepted = false;
        double Jn = J;
        while (alpha > 1e-14) {
            double slope = 0.0;
            for (std::size_t k = 0; k < s.size(); ++k) {
                trial[k] = P.clip(s[k] + alpha * G[k]);
                slope += G[k] * (trial[k] - s[k]);
            }
            Jn = P.objective(trial);
            if (slope > 0.0 && Jn >= J + 1e-4 * P.dt() * slope) {
                accepted = true;
                break;
            }
            alpha *= 0.5;
        }
        if (!accepted) {
            r.converged = true;
            break;
        }
        double gain = Jn - J;
        s.swap(trial);
        J = Jn;
        alpha = std::min(alpha * 2.0, 1e6);
        quiet = gain <= o.tolerance * (1.0 + std::abs(J)) ? quiet + 1 : 0;
        if (quiet >= 5) {
            r.converged = true;
            ++it;
            break;
        }
    }
    r.slopes = std::move(s);
    r.value = J;
    r.iterations = it;
    return r;
}

MaximizeResult solve_tail(const PathFunctional& F, const GeneratorSpec& g, const PathPolyline& prefix, int m,
                          int restarts, std::uint64_t seed, const MaximizeOptions& o) {
    if (m < 2) throw ValidationError("maximize: need m >= 2 knots");
    if (restarts < 1) throw ValidationError("maximize: need at least one restart");
    if (!(o.y_step > 0.0) || !(o.y_max > o.y_min)) throw ValidationError("maximize: bad endpoint search grid");
    const double t = prefix.end_time();
    const double len = 1.0 - t;

    // Straight tails: grid search over the displacement.
    double best_slope = 0.0;
    {
        TailProblem P(F, g, prefix, m);
        auto [lo, hi] = slope_domain(g);
        double best = -kInf;
        std::vector<double> s(P.size());
        std::size_t ny = static_cast<std::size_t>(std::floor((o.y_max - o.y_min) / o.y_step + 1e-9)) + 1;
        for (std::size_t i = 0; i < ny; ++i) {
            double q = (o.y_min + i * o.y_step) / len;
            if (q < lo || q > hi) continue;
            std::fill(s.begin(), s.end(), q);
            double v = P.objective(s);
            if (v > best) {
                best = v;
                best_slope = q;
            }
        }
        double z = P.clip(0.0);
        std::fill(s.begin(), s.end(), z);
        if (P.objective(s) > best) best_slope = z;
    }

    std::vector<AscentResult> results(restarts);
    parallel_for(static_cast<std::size_t>(restarts), [&](std::size_t r) {
        TailProblem P(F, g, prefix, m);
        std::vector<double> s(P.size(), best_slope);
        if (r > 0) {
            std::mt19937_64 rng(derive_seed(seed, r));
            std::normal_distribution<double> nd(0.0, o.perturbation);
            for (auto& v : s) v += nd(rng);
        }
        results[r] = ascend(P, std::move(s), o);
    });

    std::size_t best = 0;
    for (std::size_t r = 1; r < results.size(); ++r) {
        if (results[r].value > results[best].value) best = r;
    }
    TailProblem P(F, g, prefix, m);
    MaximizeResult out;
    out.path = P.path(results[best].slopes);
    out.functional = F(out.path);
    double a = 0.0;
    for (std::size_t k = prefix.times.size() - 1; k + 1 < out.path.times.size(); ++k) {
        a += segment_cost(g, out.path.times[k], out.path.times[k + 1], out.path.slope(k)).to_double();
    }
    out.action = a;
    out.value = out.functional - out.action;
    out.iterations = results[best].iterations;
    out.best_restart = static_cast<int>(best);
    out.converged = std::all_of(results.begin(), results.end(), [](const AscentResult& x) { return x.converged; });
    return out;
}

}  // namespace

MaximizeResult maximize_schilder(const PathFunctional& F, const GeneratorSpec& g, int m, int restarts,
                                 std::uint64_t seed, const MaximizeOptions& opts) {
    PathPolyline origin{{0.0}, {0.0}};
    return solve_tail(F, g, origin, m, restarts, seed, opts);
}

MaximizeResult conditional_value(const PathFunctional& F, const GeneratorSpec& g, double t,
                                 const PathPolyline& prefix, int m, int restarts, std::uint64_t seed,
                                 const MaximizeOptions& opts) {
    if (!(t >= 0.0 && t <= 1.0)) throw ValidationError("conditional_value: t must lie in [0, 1]");
    prefix.validate(t);
    if (t == 1.0) {
        MaximizeResult r;
        r.path = prefix;
        r.functional = F(prefix);
        r.value = r.functional;
        r.converged = true;
        return r;
    }
    return solve_tail(F, g, prefix, m, restarts, seed, opts);
}

MaximizeOptions maximize_options_from_json(const nlohmann::json& j) {
    MaximizeOptions o;
    if (j.is_null()) return o;
    o.max_iterations = j.value("max_iterations", o.max_iterations);
    o.tolerance = j.value("tolerance", o.tolerance);
    o.fd_step = j.value("fd_step", o.fd_step);
    o.y_min = j.value("y_min", o.y_min);
    o.y_max = j.value("y_max", o.y_max);
    o.y_step = j.value("y_step", o.y_step);
    o.perturbation = j.value("perturbation", o.perturbation);
    if (o.max_iterations < 1 || !(o.fd_step > 0.0) || !(o.perturbation >= 0.0)) {
        throw ValidationError("maximize options: invalid values");
    }
    return o;
}

nlohmann::json to_json(const MaximizeOptions& o) {
    return {{"max_iterations", o.max_iterations}, {"tolerance", o.tolerance}, {"fd_step", o.fd_step},
            {"y_min", o.y_min},                   {"y_max", o.y_max},         {"y_step", o.y_step},
            {"perturbation", o.perturbation}};
}

}  // namespace rholab::variational
