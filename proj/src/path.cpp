#include "rholab/path.hpp"

#include <algorithm>
#include <cmath>

#include "rholab/errors.hpp"

namespace rholab {

void PathPolyline::validate(double end) const {
    // A single knot is a prefix on [0, 0].
    if (times.empty() || (times.size() < 2 && end != 0.0)) throw ValidationError("path: need at least two knots");
    if (times.size() != values.size()) throw ValidationError("path: times and values differ in length");
    if (times.front() != 0.0) throw ValidationError("path: first knot time must be 0");
    for (std::size_t k = 1; k < times.size(); ++k) {
        if (!(times[k] > times[k - 1])) throw ValidationError("path: knot times must increase strictly");
    }
    if (std::abs(times.back() - end) > 1e-12) throw ValidationError("path: last knot time must be " + std::to_string(end));
    for (double v : values) {
        if (!std::isfinite(v)) throw ValidationError("path: non-finite knot value");
    }
}

double PathPolyline::value_at(double t) const {
    if (t <= times.front()) return values.front();
    if (t >= times.back()) return values.back();
    auto it = std::upper_bound(times.begin(), times.end(), t);
    std::size_t k = static_cast<std::size_t>(it - times.begin()) - 1;
    double w = (t - times[k]) / (times[k + 1] - times[k]);
    return values[k] + w * (values[k + 1] - values[k]);
}

PathPolyline PathPolyline::straight(double start, double end_value, int m) {
    if (m < 2) throw ValidationError("path: need m >= 2 knots");
    PathPolyline p;
    p.times.resize(m);
    p.values.resize(m);
    for (int k = 0; k < m; ++k) {
        double t = static_cast<double>(k) / (m - 1);
        p.times[k] = t;
        p.values[k] = start + t * (end_value - start);
    }
    p.times.back() = 1.0;
    p.values.back() = end_value;
    return p;
}

PathFunctional PathFunctional::terminal_value(functions::ScalarFunction f) {
    PathFunctional F;
    F.kind_ = Kind::terminal_value;
    F.spec_ = {{"kind", "terminal_value"}, {"f", f.spec}};
    F.scalar_ = std::move(f);
    return F;
}

PathFunctional PathFunctional::time_integral(Integrand h, nlohmann::json spec) {
    PathFunctional F;
    F.kind_ = Kind::time_integral;
    F.integrand_ = std::move(h);
    F.spec_ = {{"kind", "time_integral"}, {"h", std::move(spec)}};
    return F;
}

PathFunctional PathFunctional::time_integral(functions::ScalarFunction h) {
    auto spec = h.spec;
    return time_integral([h = std::move(h)](double, double x) { return h(x); }, spec);
}

PathFunctional PathFunctional::running_max(functions::ScalarFunction transform) {
    PathFunctional F;
    F.kind_ = Kind::running_max;
    F.spec_ = {{"kind", "running_max"}, {"transform", transform.spec}};
    F.scalar_ = std::move(transform);
    return F;
}

PathFunctional PathFunctional::finite_marginals(std::vector<double> times, Marginals f, nlohmann::json spec) {
    if (times.empty()) throw ValidationError("finite_marginals: need at least one time");
    for (std::size_t i = 0; i < times.size(); ++i) {
        if (!(times[i] > 0.0 && times[i] <= 1.0) || (i > 0 && !(times[i] > times[i - 1]))) {
            throw ValidationError("finite_marginals: times must increase within (0, 1]");
        }
    }
    PathFunctional F;
    F.kind_ = Kind::finite_marginals;
    F.spec_ = spec.is_null() ? nlohmann::json{{"kind", "finite_marginals"}, {"times", times}} : std::move(spec);
    F.times_ = std::move(times);
    F.marginals_ = std::move(f);
    return F;
}

PathFunctional PathFunctional::weighted_marginals(std::vector<double> times, std::vector<double> weights,
                                                  functions::ScalarFunction f) {
    if (weights.size() != times.size()) throw ValidationError("finite_marginals: one weight per time");
    nlohmann::json spec = {{"kind", "finite_marginals"}, {"times", times}, {"weights", weights}, {"f", f.spec}};
    auto fn = [w = weights, f = std::move(f)](std::span<const double> xs) {
        double s = 0.0;
        for (std::size_t i = 0; i < xs.size(); ++i) s += w[i] * xs[i];
        return f(s);
    };
    return finite_marginals(std::move(times), std::move(fn), std::move(spec));
}

std::string PathFunctional::kind_name() const {
    switch (kind_) {
        case Kind::terminal_value: return "terminal_value";
        case Kind::time_integral: return "time_integral";
        case Kind::running_max: return "running_max";
        case Kind::finite_marginals: return "finite_marginals";
    }
    return "";
}

PathFunctional& PathFunctional::with_bounds(double lo, double hi) {
    if (!(lo <= hi)) throw ValidationError("functional bounds: need lo <= hi");
    lo_ = lo;
    hi_ = hi;
    if (std::isfinite(lo) && std::isfinite(hi)) spec_["bounds"] = {lo, hi};
    return *this;
}

namespace {

// 3-point Gauss-Legendre on [0, 1].
constexpr double kGlNodes[3] = {0.5 - 0.3872983346207417, 0.5, 0.5 + 0.3872983346207417};
constexpr double kGlWeights[3] = {5.0 / 18.0, 8.0 / 18.0, 5.0 / 18.0};

template <class TimeOf>
double evaluate_impl(const PathFunctional& F, TimeOf time_of, std::span<const double> values) {
    const std::size_t n = values.size();
    switch (F.kind()) {
        case PathFunctional::Kind::terminal_value:
            return F.terminal(values[n - 1]);
        case PathFunctional::Kind::time_integral: {
            double s = 0.0;
            for (std::size_t k = 0; k + 1 < n; ++k) {
                double t0 = time_of(k), t1 = time_of(k + 1), h = t1 - t0;
                double part = 0.0;
                for (int q = 0; q < 3; ++q) {
                    double u = kGlNodes[q];
                    part += kGlWeights[q] * F.integrand(t0 + u * h, values[k] + u * (values[k + 1] - values[k]));
                }
                s += h * part;
            }
            return s;
        }
        case PathFunctional::Kind::running_max:
            return F.terminal(*std::max_element(values.begin(), values.end()));
        case PathFunctional::Kind::finite_marginals: {
            const auto& mt = F.marginal_times();
            std::vector<double> xs(mt.size());
            std::size_t k = 0;
            for (std::size_t i = 0; i < mt.size(); ++i) {
                while (k + 2 < n && time_of(k + 1) <= mt[i]) ++k;
                double t0 = time_of(k), t1 = time_of(k + 1);
                double w = std::clamp((mt[i] - t0) / (t1 - t0), 0.0, 1.0);
                xs[i] = values[k] + w * (values[k + 1] - values[k]);
            }
            return F.marginals(xs);
        }
    }
    return 0.0;
}

}  // namespace

double PathFunctional::evaluate(std::span<const double> times, std::span<const double> values) const {
    if (values.size() < 2 || times.size() != values.size()) {
        throw ValidationError("functional: need matching times and values with at least two knots");
    }
    return evaluate_impl(*this, [&](std::size_t k) { return times[k]; }, values);
}

double PathFunctional::evaluate_uniform(std::span<const double> values) const {
    if (values.size() < 2) throw ValidationError("functional: need at least two knots");
    const double n = static_cast<double>(values.size() - 1);
    return evaluate_impl(*this, [n](std::size_t k) { return static_cast<double>(k) / n; }, values);
}

PathFunctional functional_from_json(const nlohmann::json& j) {
    if (!j.is_object() || !j.contains("kind")) throw ValidationError("functional: expected an object with 'kind'");
    std::string k = j.at("kind").get<std::string>();
    auto fn = [&](const char* key) {
        if (!j.contains(key)) throw ValidationError("functional " + k + ": missing '" + key + "'");
        return functions::from_json(j.at(key));
    };
    PathFunctional F = [&] {
        if (k == "terminal_value") return PathFunctional::terminal_value(fn("f"));
        if (k == "time_integral") return PathFunctional::time_integral(fn("h"));
        if (k == "running_max") return PathFunctional::running_max(fn("transform"));
        if (k == "finite_marginals") {
            if (!j.contains("times")) throw ValidationError("functional finite_marginals: missing 'times'");
            auto times = j.at("times").get<std::vector<double>>();
            std::vector<double> w = j.contains("weights") ? j.at("weights").get<std::vector<double>>()
                                                           : std::vector<double>(times.size(), 1.0);
            return PathFunctional::weighted_marginals(std::move(times), std::move(w), fn("f"));
        }
        throw ValidationError("functional: unknown kind '" + k + "'");
    }();
    if (j.contains("bounds")) {
        auto b = j.at("bounds").get<std::vector<double>>();
        if (b.size() != 2) throw ValidationError("functional: bounds must be [lo, hi]");
        F.with_bounds(b[0], b[1]);
    }
    return F;
}

PathPolyline polyline_from_json(const nlohmann::json& j) {
    PathPolyline p;
    p.times = j.at("times").get<std::vector<double>>();
    p.values = j.at("values").get<std::vector<double>>();
    p.validate(p.times.empty() ? 1.0 : p.times.back());
    return p;
}

nlohmann::json to_json(const PathPolyline& p) { return {{"times", p.times}, {"values", p.values}}; }

}  // namespace rholab
