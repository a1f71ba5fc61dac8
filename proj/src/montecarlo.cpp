#include "rholab/montecarlo.hpp"

#include <algorithm>
#include <cmath>
#include <random>

#include <Eigen/Dense>

#include "rholab/errors.hpp"
#include "rholab/parallel.hpp"
#include "rholab/quadrature.hpp"
#include "rholab/random.hpp"

namespace rholab::montecarlo {

using generators::ConjugateSpec;
using generators::GeneratorSpec;

namespace {

std::size_t block_count(int n_paths) {
    return (static_cast<std::size_t>(n_paths) + PathBatch::block_size - 1) / PathBatch::block_size;
}

// Runs body(i) for every path index, blocks in parallel.
template <class Body>
void for_each_path(int n_paths, Body&& body) {
    parallel_for(block_count(n_paths), [&](std::size_t b) {
        int lo = static_cast<int>(b) * PathBatch::block_size;
        int hi = std::min(n_paths, lo + PathBatch::block_size);
        for (int i = lo; i < hi; ++i) body(i);
    });
}

Estimate mean_and_se(std::span<const double> v) {
    const double n = static_cast<double>(v.size());
    Estimate e;
    e.value = pairwise_sum(v) / n;
    std::vector<double> d(v.size());
    for (std::size_t i = 0; i < v.size(); ++i) d[i] = (v[i] - e.value) * (v[i] - e.value);
    double var = v.size() > 1 ? pairwise_sum(d) / (n - 1.0) : 0.0;
    e.se = std::sqrt(var / n);
    return e;
}

}  // namespace

PathBatch::PathBatch(int n_steps, int n_paths, std::uint64_t seed, double epsilon)
    : n_steps_(n_steps), n_paths_(n_paths), seed_(seed) {
    if (n_steps < 1 || n_paths < 1) throw ValidationError("path batch: need n_steps >= 1 and n_paths >= 1");
    if (!(epsilon > 0.0) || !std::isfinite(epsilon)) throw ValidationError("path batch: epsilon must be positive");
    volatility_ = std::sqrt(epsilon);
    increments_.resize(static_cast<std::size_t>(n_steps) * n_paths);
    const double sd = volatility_ * std::sqrt(1.0 / n_steps);
    parallel_for(block_count(n_paths), [&](std::size_t b) {
        std::mt19937_64 rng(derive_seed(seed, b));
        std::normal_distribution<double> nd(0.0, 1.0);
        std::size_t lo = b * block_size * static_cast<std::size_t>(n_steps);
        std::size_t hi = std::min(increments_.size(), (b + 1) * block_size * static_cast<std::size_t>(n_steps));
        for (std::size_t i = lo; i < hi; ++i) increments_[i] = sd * nd(rng);
    });
}

void PathBatch::path(int i, std::vector<double>& out, double scale) const {
    auto inc = increments(i);
    out.resize(n_steps_ + 1);
    double x = 0.0;
    out[0] = 0.0;
    for (int k = 0; k < n_steps_; ++k) {
        x += inc[k];
        out[k + 1] = scale * x;
    }
}

double pairwise_sum(std::span<const double> x) {
    if (x.size() <= 16) {
        double s = 0.0;
        for (double v : x) s += v;
        return s;
    }
    std::size_t h = x.size() / 2;
    return pairwise_sum(x.subspan(0, h)) + pairwise_sum(x.subspan(h));
}

Estimate log_mean_exp_values(std::span<const double> v, double n) {
    if (v.empty()) throw ValidationError("log_mean_exp: no samples");
    if (!(n > 0.0)) throw ValidationError("log_mean_exp: n must be positive");
    double m = *std::max_element(v.begin(), v.end());
    if (!std::isfinite(m)) throw NumericalError("log_mean_exp: non-finite functional value");
    std::vector<double> e(v.size());
    for (std::size_t i = 0; i < v.size(); ++i) e[i] = std::exp(n * (v[i] - m));
    Estimate s = mean_and_se(e);
    return {m + std::log(s.value) / n, s.se / (s.value * n)};
}

std::vector<std::vector<double>> chopped_paths(std::span<const double> path, int n) {
    if (n < 1 || path.size() < 2 || (path.size() - 1) % static_cast<std::size_t>(n) != 0) {
        throw ValidationError("chopped_paths: step count must be divisible by n");
    }
    const std::size_t m = (path.size() - 1) / n;
    const double s = std::sqrt(static_cast<double>(n));
    std::vector<std::vector<double>> out(n, std::vector<double>(m + 1));
    for (int k = 0; k < n; ++k) {
        double base = path[k * m];
        for (std::size_t j = 0; j <= m; ++j) out[k][j] = s * (path[k * m + j] - base);
    }
    return out;
}

Estimate log_mean_exp(const PathFunctional& F, double n, const PathBatch& batch) {
    if (!(n > 0.0)) throw ValidationError("log_mean_exp: n must be positive");
    std::vector<double> v(batch.n_paths());
    const double scale = 1.0 / std::sqrt(n);
    parallel_for(block_count(batch.n_paths()), [&](std::size_t b) {
        std::vector<double> p;
        int lo = static_cast<int>(b) * PathBatch::block_size;
        int hi = std::min(batch.n_paths(), lo + PathBatch::block_size);
        for (int i = lo; i < hi; ++i) {
            batch.path(i, p, scale);
            v[i] = F.evaluate_uniform(p);
        }
    });
    return log_mean_exp_values(v, n);
}

Estimate cramer_average(const PathFunctional& F, int n, const PathBatch& batch) {
    if (n < 1 || batch.n_steps() % n != 0) throw ValidationError("cramer_average: n_steps must be divisible by n");
    const int m = batch.n_steps() / n;
    std::vector<double> v(batch.n_paths());
    parallel_for(block_count(batch.n_paths()), [&](std::size_t b) {
        std::vector<double> p, avg(m + 1);
        int lo = static_cast<int>(b) * PathBatch::block_size;
        int hi = std::min(batch.n_paths(), lo + PathBatch::block_size);
        for (int i = lo; i < hi; ++i) {
            batch.path(i, p);
            auto pieces = chopped_paths(p, n);
            std::fill(avg.begin(), avg.end(), 0.0);
            for (const auto& c : pieces) {
                for (int j = 0; j <= m; ++j) avg[j] += c[j];
            }
            for (auto& a : avg) a /= n;
            v[i] = F.evaluate_uniform(avg);
        }
    });
    return log_mean_exp_values(v, n);
}

FeedbackControl FeedbackControl::constant(double q) {
    return {[q](double, std::span<const double>) { return q; }, std::abs(q), {{"kind", "constant"}, {"value", q}}};
}

FeedbackControl FeedbackControl::linear(double target, double gain, double bound) {
    return {[=](double, std::span<const double> h) { return std::clamp(gain * (target - h.back()), -bound, bound); },
            bound,
            {{"kind", "linear"}, {"target", target}, {"gain", gain}, {"bound", bound}}};
}

FeedbackControl FeedbackControl::tanh(double target, double gain, double bound) {
    return {[=](double, std::span<const double> h) { return bound * std::tanh(gain * (target - h.back())); },
            bound,
            {{"kind", "tanh"}, {"target", target}, {"gain", gain}, {"bound", bound}}};
}

FeedbackControl FeedbackControl::time_linear(double a, double b, double bound) {
    return {[=](double t, std::span<const double>) { return std::clamp(a + b * t, -bound, bound); },
            bound,
            {{"kind", "time_linear"}, {"a", a}, {"b", b}, {"bound", bound}}};
}

FeedbackControl FeedbackControl::running_max(double gain, double offset, double bound) {
    return {[=](double, std::span<const double> h) {
                double mx = *std::max_element(h.begin(), h.end());
                return std::clamp(gain * (mx - h.back()) + offset, -bound, bound);
            },
            bound,
            {{"kind", "running_max"}, {"gain", gain}, {"offset", offset}, {"bound", bound}}};
}

FeedbackControl control_from_json(const nlohmann::json& j) {
    if (!j.is_object() || !j.contains("kind")) throw ValidationError("control: expected an object with 'kind'");
    std::string k = j.at("kind").get<std::string>();
    auto need = [&](const char* key) {
        if (!j.contains(key)) throw ValidationError("control " + k + ": missing '" + key + "'");
        return j.at(key).get<double>();
    };
    FeedbackControl c = [&] {
        if (k == "constant") return FeedbackControl::constant(need("value"));
        if (k == "linear") return FeedbackControl::linear(need("target"), need("gain"), need("bound"));
        if (k == "tanh") return FeedbackControl::tanh(need("target"), need("gain"), need("bound"));
        if (k == "time_linear") return FeedbackControl::time_linear(need("a"), need("b"), need("bound"));
        if (k == "running_max") return FeedbackControl::running_max(need("gain"), j.value("offset", 0.0), need("bound"));
        throw ValidationError("control: unknown kind '" + k + "'");
    }();
    if (!(c.bound >= 0.0) || !std::isfinite(c.bound)) throw ValidationError("control: bound must be finite");
    return c;
}

Estimate girsanov_lower_bound(const PathFunctional& F, const GeneratorSpec& g, const FeedbackControl& q,
                              const PathBatch& batch) {
    const int N = batch.n_steps();
    const double dt = batch.dt();
    std::vector<double> v(batch.n_paths());
    for_each_path(batch.n_paths(), [&](int i) {
        thread_local std::vector<double> x;
        x.assign(N + 1, 0.0);
        auto inc = batch.increments(i);
        double cost = 0.0;
        for (int k = 0; k < N; ++k) {
            double t = k * dt;
            double qk = q.rule(t, std::span<const double>(x.data(), k + 1));
            if (!(std::abs(qk) <= q.bound + 1e-12)) {
                throw ValidationError("girsanov_lower_bound: control exceeds its bound");
            }
            ExtendedReal c = generators::eval_g(g, t, qk);
            if (c.is_infinite()) throw ValidationError("girsanov_lower_bound: control outside the domain of g");
            cost += c.value() * dt;
            x[k + 1] = x[k] + qk * dt + inc[k];
        }
        v[i] = F.evaluate_uniform(x) - cost;
    });
    return mean_and_se(v);
}

namespace {

// Exponent vectors in d variables of total degree <= degree, ordered by degree.
std::vector<std::vector<int>> monomials(int d, int degree) {
    std::vector<std::vector<int>> out;
    std::vector<int> e(d, 0);
    std::function<void(int, int)> rec = [&](int var, int left) {
        if (var == d) {
            out.push_back(e);
            return;
        }
        for (int p = 0; p <= left; ++p) {
            e[var] = p;
            rec(var + 1, left - p);
        }
        e[var] = 0;
    };
    rec(0, degree);
    auto total = [](const std::vector<int>& m) {
        int s = 0;
        for (int p : m) s += p;
        return s;
    };
    std::stable_sort(out.begin(), out.end(), [&](const auto& a, const auto& b) { return total(a) < total(b); });
    return out;
}

struct Fit {
    Eigen::VectorXd y_fit, z_fit;
    std::vector<double> y_coef, z_coef;
    int degree = 0;
    double residual_rms = 0.0;
};

// Least squares of y on polynomials of standardized features, with rank
// fallback to lower degrees, then of the centered Z target (y - y_fit) w on
// the same basis.
Fit regress(const Eigen::MatrixXd& feats, const Eigen::VectorXd& y, const Eigen::VectorXd& w, int degree,
            int& fallbacks) {
    const Eigen::Index P = feats.rows();
    std::vector<Eigen::VectorXd> cols;
    for (Eigen::Index c = 0; c < feats.cols(); ++c) {
        Eigen::VectorXd col = feats.col(c);
        double mean = col.mean();
        double sd = std::sqrt((col.array() - mean).square().mean());
        if (sd <= 1e-12 * (1.0 + std::abs(mean))) continue;
        cols.push_back((col.array() - mean) / sd);
    }
    Fit fit;
    if (cols.empty() || degree == 0) {
        fit.y_fit = Eigen::VectorXd::Constant(P, y.mean());
        double zm = (y - fit.y_fit).cwiseProduct(w).mean();
        fit.z_fit = Eigen::VectorXd::Constant(P, zm);
        fit.y_coef = {y.mean()};
        fit.z_coef = {zm};
        fit.degree = 0;
        fit.residual_rms = std::sqrt((y - fit.y_fit).squaredNorm() / static_cast<double>(P));
        return fit;
    }
    for (int deg = degree; deg >= 1; --deg) {
        auto mons = monomials(static_cast<int>(cols.size()), deg);
        Eigen::MatrixXd B(P, static_cast<Eigen::Index>(mons.size()));
        for (std::size_t j = 0; j < mons.size(); ++j) {
            Eigen::ArrayXd v = Eigen::ArrayXd::Ones(P);
            for (std::size_t c = 0; c < cols.size(); ++c) {
                for (int p = 0; p < mons[j][c]; ++p) v *= cols[c].array();
            }
            B.col(static_cast<Eigen::Index>(j)) = v.matrix();
        }
        Eigen::ColPivHouseholderQR<Eigen::MatrixXd> qr(B);
        if (qr.rank() < B.cols()) {
            ++fallbacks;
            continue;
        }
        Eigen::VectorXd cy = qr.solve(y);
        fit.y_fit = B * cy;
        Eigen::VectorXd cz = qr.solve(Eigen::VectorXd((y - fit.y_fit).cwiseProduct(w)));
        fit.z_fit = B * cz;
        fit.y_coef.assign(cy.data(), cy.data() + cy.size());
        fit.z_coef.assign(cz.data(), cz.data() + cz.size());
        fit.degree = deg;
        fit.residual_rms = std::sqrt((y - fit.y_fit).squaredNorm() / static_cast<double>(P));
        return fit;
    }
    ++fallbacks;
    return regress(feats, y, w, 0, fallbacks);
}

}  // namespace

LsmcSolution lsmc_bsde(const PathFunctional& F, const ConjugateSpec& gstar, double n, const PathBatch& batch,
                       int degree) {
    if (!(n > 0.0)) throw ValidationError("lsmc_bsde: n must be positive");
    if (degree < 0) throw ValidationError("lsmc_bsde: degree must be non-negative");
    if (batch.volatility() != 1.0) throw ValidationError("lsmc_bsde: needs a unit-volatility batch");
    const int N = batch.n_steps();
    const int P = batch.n_paths();
    const double dt = batch.dt();
    const double scale = 1.0 / std::sqrt(n);
    const double root_n = std::sqrt(n);

    // Scaled paths, one row per path.
    Eigen::MatrixXd X(P, N + 1);
    Eigen::VectorXd Y(P);
    for_each_path(P, [&](int i) {
        thread_local std::vector<double> p;
        batch.path(i, p, scale);
        for (int k = 0; k <= N; ++k) X(i, k) = p[k];
        Y(i) = F.evaluate_uniform(p);
    });

    LsmcSolution sol;
    sol.requested_degree = degree;
    sol.features = {"x"};
    using Kind = PathFunctional::Kind;
    const auto& mt = F.marginal_times();
    switch (F.kind()) {
        case Kind::terminal_value: break;
        case Kind::time_integral: sol.features.push_back("running_integral"); break;
        case Kind::running_max: sol.features.push_back("running_max"); break;
        case Kind::finite_marginals:
            for (std::size_t i = 0; i < mt.size(); ++i) sol.features.push_back("marginal_" + std::to_string(i));
            break;
    }

    // Running statistics along the grid.
    Eigen::MatrixXd stat;
    if (F.kind() == Kind::time_integral || F.kind() == Kind::running_max) {
        stat.resize(P, N + 1);
        for_each_path(P, [&](int i) {
            double s = F.kind() == Kind::running_max ? X(i, 0) : 0.0;
            stat(i, 0) = s;
            for (int k = 0; k < N; ++k) {
                if (F.kind() == Kind::running_max) {
                    s = std::max(s, X(i, k + 1));
                } else {
                    const double a = 0.5 - 0.3872983346207417, c = 0.5 + 0.3872983346207417;
                    double t0 = k * dt, x0 = X(i, k), dx = X(i, k + 1) - x0;
                    s += dt * (5.0 / 18.0 * F.integrand(t0 + a * dt, x0 + a * dx) +
                               8.0 / 18.0 * F.integrand(t0 + 0.5 * dt, x0 + 0.5 * dx) +
                               5.0 / 18.0 * F.integrand(t0 + c * dt, x0 + c * dx));
                }
                stat(i, k + 1) = s;
            }
        });
    }

    // A-priori range of Y: the terminal range widened by ∫ g*(s, 0) ds above
    // and ∫ min_z g*(s, z) ds below.
    double y_lo = Y.minCoeff(), y_hi = Y.maxCoeff();

    sol.steps.resize(N);
    Eigen::VectorXd dW(P);
    // Realized terminal value plus the drivers accumulated so far.
    Eigen::VectorXd S = Y;
    for (int k = N - 1; k >= 0; --k) {
        const double t = k * dt;
        std::vector<Eigen::VectorXd> cols{X.col(k)};
        if (stat.size() > 0) cols.push_back(stat.col(k));
        if (F.kind() == Kind::finite_marginals) {
            for (double tm : mt) {
                if (tm > t + 1e-12) continue;
                // Marginal already observed: interpolate on the grid.
                double pos = tm / dt;
                int j = std::min(static_cast<int>(std::floor(pos)), N - 1);
                double w = pos - j;
                cols.push_back((1.0 - w) * X.col(j) + w * X.col(j + 1));
            }
        }
        Eigen::MatrixXd feats(P, static_cast<Eigen::Index>(cols.size()));
        for (std::size_t c = 0; c < cols.size(); ++c) feats.col(static_cast<Eigen::Index>(c)) = cols[c];
        for (int i = 0; i < P; ++i) dW(i) = batch.increments(i)[k];
        Fit fit = regress(feats, S, dW / dt, degree, sol.fallbacks);
        // |Z_k| <= (range of Y_{k+1}) / 2 * E|dW| / dt.
        const double z_max = 0.5 * (y_hi - y_lo) * std::sqrt(2.0 / (M_PI * dt));
        y_hi += dt * gstar.value(t, 0.0).to_double();
        y_lo += dt * gstar.value(t, gstar.argmin(t)).to_double();
        for (int i = 0; i < P; ++i) {
            fit.z_fit(i) = std::clamp(fit.z_fit(i), -z_max, z_max);
            ExtendedReal d = gstar.value(t, root_n * fit.z_fit(i));
            if (d.is_infinite()) throw NumericalError("lsmc_bsde: conjugate is infinite at the regressed Z");
            Y(i) = std::clamp(fit.y_fit(i) + dt * d.value(), y_lo, y_hi);
            S(i) += dt * d.value();
        }
        if (k == 0) Y.setConstant(std::clamp(S.mean(), y_lo, y_hi));
        LsmcStep& st = sol.steps[k];
        st.time = t;
        st.degree = fit.degree;
        st.y_coefficients = std::move(fit.y_coef);
        st.z_coefficients = std::move(fit.z_coef);
        st.y_mean = Y.mean();
        st.z_mean = fit.z_fit.mean();
        st.residual_rms = fit.residual_rms;
    }
    sol.y0 = Y.mean();
    sol.terminal_residual = 0.0;
    return sol;
}

double bridge_constant(double r) {
    if (!(r > 1.0 && r < 2.0)) return std::numeric_limits<double>::infinity();
    const double a = 0.5 * r;
    double integral = quadrature::tanh_sinh_unit([a](double t, double c) { return std::pow(t / c, a); });
    double abs_moment = std::pow(2.0, a) * std::tgamma(0.5 * (r + 1.0)) / std::sqrt(M_PI);
    return std::pow(2.0, r - 1.0) * abs_moment * integral;
}

namespace {

struct BridgeSums {
    double m1 = 0.0, m2 = 0.0;
    std::vector<double> s1, s2, s3, s4;  // moments of B - exact mean at check times
};

}  // namespace

BridgeCheck bridge_moment_check(double x, double y, double epsilon, double delta, double r,
                                const BridgeSampling& sampling) {
    if (!(epsilon > 0.0)) throw ValidationError("bridge: epsilon must be positive");
    if (!(delta > 0.0 && delta <= 1.0)) throw ValidationError("bridge: delta must lie in (0, 1]");
    if (!(r > 0.0)) throw ValidationError("bridge: r must be positive");
    if (sampling.n_paths < 2 || sampling.n_steps < 4) throw ValidationError("bridge: need n_paths >= 2 and n_steps >= 4");
    const int N = sampling.n_steps;
    const double h = delta / N;
    BridgeCheck out;
    std::vector<int> check_steps{N / 4, N / 2, (3 * N) / 4};
    for (int k : check_steps) {
        double t = k * h;
        out.check_times.push_back(t);
        out.mean_exact.push_back(x + t / delta * (y - x));
        out.variance_exact.push_back(epsilon * t * (delta - t) / delta);
    }
    const std::size_t nb = block_count(sampling.n_paths);
    std::vector<BridgeSums> sums(nb);
    parallel_for(nb, [&](std::size_t b) {
        std::mt19937_64 rng(derive_seed(sampling.seed, b));
        std::normal_distribution<double> nd(0.0, 1.0);
        BridgeSums& s = sums[b];
        s.s1.assign(3, 0.0);
        s.s2 = s.s3 = s.s4 = s.s1;
        int lo = static_cast<int>(b) * PathBatch::block_size;
        int hi = std::min(sampling.n_paths, lo + PathBatch::block_size);
        for (int i = lo; i < hi; ++i) {
            double B = x, acc = 0.0;
            std::size_t c = 0;
            for (int k = 0; k < N; ++k) {
                double t = k * h, rem = delta - t;
                acc += std::pow(std::abs((y - B) / rem), r) * h;
                double next_rem = rem - h;
                double mean = B + h / rem * (y - B);
                double var = epsilon * h * std::max(next_rem, 0.0) / rem;
                B = mean + std::sqrt(var) * nd(rng);
                if (c < check_steps.size() && k + 1 == check_steps[c]) {
                    double d = B - out.mean_exact[c];
                    s.s1[c] += d;
                    s.s2[c] += d * d;
                    s.s3[c] += d * d * d;
                    s.s4[c] += d * d * d * d;
                    ++c;
                }
            }
            s.m1 += acc;
            s.m2 += acc * acc;
        }
    });
    const double n = sampling.n_paths;
    double m1 = 0.0, m2 = 0.0;
    std::vector<double> s1(3, 0.0), s2(3, 0.0), s3(3, 0.0), s4(3, 0.0);
    for (const auto& s : sums) {
        m1 += s.m1;
        m2 += s.m2;
        for (int c = 0; c < 3; ++c) {
            s1[c] += s.s1[c];
            s2[c] += s.s2[c];
            s3[c] += s.s3[c];
            s4[c] += s.s4[c];
        }
    }
    out.moment = m1 / n;
    out.moment_se = std::sqrt(std::max(m2 / n - out.moment * out.moment, 0.0) / (n - 1.0));
    for (int c = 0; c < 3; ++c) {
        double mu = s1[c] / n;
        double var = s2[c] / n - mu * mu;
        // Fourth central moment from raw moments of the shifted samples.
        double m4 = s4[c] / n - 4.0 * mu * s3[c] / n + 6.0 * mu * mu * s2[c] / n - 3.0 * mu * mu * mu * mu;
        out.mean.push_back(out.mean_exact[c] + mu);
        out.mean_se.push_back(std::sqrt(var / n));
        out.variance.push_back(var * n / (n - 1.0));
        out.variance_se.push_back(std::sqrt(std::max(m4 - var * var, 0.0) / n));
    }
    out.k_r = bridge_constant(r);
    out.bound_available = std::isfinite(out.k_r);
    out.bound = out.bound_available ? out.k_r * std::pow(std::abs(y - x), r) * std::pow(delta, 1.0 - r) +
                                          out.k_r * std::pow(delta, 1.0 - 0.5 * r) * std::pow(epsilon, 0.5 * r)
                                    : std::numeric_limits<double>::infinity();
    return out;
}

Estimate bridge_truncated_moment(double x, double y, double epsilon, double delta, double r, double eta,
                                 const BridgeSampling& sampling) {
    if (!(epsilon > 0.0) || !(delta > 0.0) || !(eta > 0.0 && eta < delta)) {
        throw ValidationError("bridge: need epsilon > 0 and 0 < eta < delta");
    }
    if (sampling.n_paths < 2 || sampling.n_steps < 2) throw ValidationError("bridge: need n_paths, n_steps >= 2");
    const int J = sampling.n_steps;
    std::vector<double> tau(J + 1);
    for (int j = 0; j <= J; ++j) tau[j] = delta - delta * std::pow(eta / delta, static_cast<double>(j) / J);
    tau[0] = 0.0;
    tau[J] = delta - eta;
    std::vector<double> v(sampling.n_paths);
    parallel_for(block_count(sampling.n_paths), [&](std::size_t b) {
        std::mt19937_64 rng(derive_seed(sampling.seed, b));
        std::normal_distribution<double> nd(0.0, 1.0);
        int lo = static_cast<int>(b) * PathBatch::block_size;
        int hi = std::min(sampling.n_paths, lo + PathBatch::block_size);
        for (int i = lo; i < hi; ++i) {
            double B = x;
            double prev = std::pow(std::abs((y - B) / delta), r), acc = 0.0;
            for (int j = 0; j < J; ++j) {
                double rem = delta - tau[j], step = tau[j + 1] - tau[j], next_rem = delta - tau[j + 1];
                B = B + step / rem * (y - B) + std::sqrt(epsilon * step * next_rem / rem) * nd(rng);
                double cur = std::pow(std::abs((y - B) / next_rem), r);
                acc += 0.5 * (prev + cur) * step;
                prev = cur;
            }
            v[i] = acc;
        }
    });
    return mean_and_se(v);
}

double bridge_truncated_square_moment(double x, double y, double epsilon, double delta, double eta) {
    if (!(eta > 0.0 && eta < delta)) throw ValidationError("bridge: need 0 < eta < delta");
    double d = y - x;
    return d * d * (delta - eta) / (delta * delta) + epsilon * (std::log(delta / eta) - (delta - eta) / delta);
}

}  // namespace rholab::montecarlo
