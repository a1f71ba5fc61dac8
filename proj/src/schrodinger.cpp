#include "rholab/schrodinger.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <queue>
#include <sstream>

#include <Eigen/Dense>

#include "rholab/errors.hpp"
#include "rholab/parallel.hpp"

namespace rholab::schrodinger {

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();

double logsumexp(const std::vector<double>& v) {
    double m = -kInf;
    for (double x : v) m = std::max(m, x);
    if (!std::isfinite(m)) return m;
    double s = 0.0;
    for (double x : v) s += std::exp(x - m);
    return m + std::log(s);
}

double cost_of(const generators::GeneratorSpec& g, double t, double q) {
    return generators::eval_g(g, t, q).to_double();
}

double normal_cdf(double z) { return 0.5 * std::erfc(-z / std::sqrt(2.0)); }

std::vector<int> node_indices(const DiscreteMeasure& m, const StateGrid& grid) {
    std::vector<int> idx;
    idx.reserve(m.size());
    for (double x : m.support()) idx.push_back(grid.index_of(x));
    return idx;
}

}  // namespace

int StateGrid::index_of(double x) const {
    double r = (x - x_min) / step;
    long i = std::lround(r);
    if (std::abs(r - static_cast<double>(i)) > 1e-6 || i < 0 || i >= size) {
        std::ostringstream os;
        os << "point " << x << " is not a node of the state grid [" << x_min << ", " << x_max() << "] with step "
           << step;
        throw ValidationError(os.str());
    }
    return static_cast<int>(i);
}

void StateGrid::validate() const {
    if (!(step > 0.0) || !std::isfinite(step) || !std::isfinite(x_min)) {
        throw ValidationError("state grid: step must be positive and x_min finite");
    }
    if (size < 2) throw ValidationError("state grid: need at least 2 nodes");
}

StateGrid StateGrid::covering(double lo, double hi, double step, double slack) {
    if (!(step > 0.0) || hi < lo || slack < 0.0) throw ValidationError("state grid: bad covering request");
    long pad = static_cast<long>(std::ceil(slack / step - 1e-9));
    long span = static_cast<long>(std::ceil((hi - lo) / step - 1e-9));
    StateGrid g;
    g.x_min = lo - static_cast<double>(pad) * step;
    g.step = step;
    g.size = static_cast<int>(span + 2 * pad + 1);
    return g;
}

Mollified mollify(const DiscreteMeasure& nu, double epsilon, const StateGrid& grid) {
    grid.validate();
    if (!(epsilon > 0.0)) throw ValidationError("mollify: epsilon must be positive");
    double sd = std::sqrt(epsilon);
    std::vector<double> mass(grid.size, 0.0);
    for (std::size_t a = 0; a < nu.size(); ++a) {
        double c = nu.support()[a], w = nu.weights()[a];
        for (int i = 0; i < grid.size; ++i) {
            double lo = (grid.x(i) - 0.5 * grid.step - c) / sd;
            double hi = (grid.x(i) + 0.5 * grid.step - c) / sd;
            // Difference of upper tails on the right side keeps small masses accurate.
            double p = hi <= 0.0 ? normal_cdf(hi) - normal_cdf(lo) : normal_cdf(-lo) - normal_cdf(-hi);
            mass[i] += w * p;
        }
    }
    double total = std::accumulate(mass.begin(), mass.end(), 0.0);
    Mollified out;
    out.truncation_loss = 1.0 - total;
    if (out.truncation_loss > 1e-6) {
        std::ostringstream os;
        os << "mollify: grid loses mass " << out.truncation_loss << " (> 1e-6); widen the grid";
        throw ValidationError(os.str());
    }
    // Cells far in the tails carry no usable information and only enlarge
    // the target support.
    const double cut = 1e-10 * *std::max_element(mass.begin(), mass.end());
    std::vector<double> xs, ws;
    double dropped = 0.0;
    for (int i = 0; i < grid.size; ++i) {
        if (mass[i] >= cut) {
            xs.push_back(grid.x(i));
            ws.push_back(mass[i]);
        } else {
            dropped += mass[i];
        }
    }
    out.truncation_loss += dropped;
    out.measure = DiscreteMeasure::normalized(std::move(xs), std::move(ws), DiscreteMeasure::Kind::grid_density);
    return out;
}

// ---------------------------------------------------------------------------
// Transportation simplex

OtResult transportation_simplex(const std::vector<double>& supply, const std::vector<double>& demand,
                                const std::vector<std::vector<double>>& cost) {
    const int m = static_cast<int>(supply.size()), n = static_cast<int>(demand.size());
    if (m == 0 || n == 0) throw ValidationError("transportation simplex: empty marginal");
    if (static_cast<int>(cost.size()) != m) throw ValidationError("transportation simplex: cost rows");
    double sa = 0.0, sb = 0.0, cmax = 0.0;
    for (double a : supply) {
        if (!(a >= 0.0)) throw ValidationError("transportation simplex: negative supply");
        sa += a;
    }
    for (double b : demand) {
        if (!(b >= 0.0)) throw ValidationError("transportation simplex: negative demand");
        sb += b;
    }
    if (std::abs(sa - sb) > 1e-9 * std::max(1.0, sa)) throw ValidationError("transportation simplex: unbalanced");
    for (const auto& row : cost) {
        if (static_cast<int>(row.size()) != n) throw ValidationError("transportation simplex: cost columns");
        for (double c : row) {
            if (std::isnan(c) || c == -kInf) throw ValidationError("transportation simplex: bad cost entry");
            if (std::isfinite(c)) cmax = std::max(cmax, std::abs(c));
        }
    }
    const double big = 1e6 * (cmax + 1.0);
    auto c_at = [&](int i, int j) { return std::isfinite(cost[i][j]) ? cost[i][j] : big; };

    struct Cell {
        int i, j;
        double flow;
    };
    std::vector<Cell> basis;
    {
        std::vector<double> ra = supply, rb = demand;
        int i = 0, j = 0;
        for (;;) {
            double f = std::min(ra[i], rb[j]);
            basis.push_back({i, j, f});
            ra[i] -= f;
            rb[j] -= f;
            if (i == m - 1 && j == n - 1) break;
            if (j == n - 1 || (i < m - 1 && ra[i] <= rb[j])) {
                ++i;
            } else {
                ++j;
            }
        }
    }

    const double tol = 1e-12 * (std::min(big, cmax * 1e6) + 1.0);
    const int nodes = m + n;
    int iterations = 0;
    const int max_iter = 1000 * (m + n) + 1000;
    std::vector<double> pot(nodes);
    for (;; ++iterations) {
        if (iterations > max_iter) throw NumericalError("transportation simplex: iteration limit");
        // adjacency of the basis tree: rows 0..m-1, columns m..m+n-1
        std::vector<std::vector<int>> adj(nodes);
        for (int e = 0; e < static_cast<int>(basis.size()); ++e) {
            adj[basis[e].i].push_back(e);
            adj[m + basis[e].j].push_back(e);
        }
        std::vector<char> seen(nodes, 0);
        std::queue<int> q;
        pot[0] = 0.0;
        seen[0] = 1;
        q.push(0);
        while (!q.empty()) {
            int v = q.front();
            q.pop();
            for (int e : adj[v]) {
                int r = basis[e].i, c = m + basis[e].j;
                int w = v == r ? c : r;
                if (seen[w]) continue;
                seen[w] = 1;
                // u_i + v_j = c_ij
                pot[w] = c_at(basis[e].i, basis[e].j) - pot[v];
                q.push(w);
            }
        }
        int ei = -1, ej = -1;
        double best = -tol;
        for (int i = 0; i < m; ++i) {
            for (int j = 0; j < n; ++j) {
                double rc = c_at(i, j) - pot[i] - pot[m + j];
                if (rc < best) {
                    best = rc;
                    ei = i;
                    ej = j;
                }
            }
        }
        if (ei < 0) break;

        // tree path from column node ej to row node ei
        std::vector<int> parent_edge(nodes, -1), parent(nodes, -1);
        std::fill(seen.begin(), seen.end(), 0);
        seen[ei] = 1;
        q.push(ei);
        while (!q.empty()) {
            int v = q.front();
            q.pop();
            for (int e : adj[v]) {
                int r = basis[e].i, c = m + basis[e].j;
                int w = v == r ? c : r;
                if (seen[w]) continue;
                seen[w] = 1;
                parent[w] = v;
                parent_edge[w] = e;
                q.push(w);
            }
        }
        std::vector<int> path;
        for (int v = m + ej; v != ei; v = parent[v]) path.push_back(parent_edge[v]);
        // signs along the path starting next to the entering cell: -, +, -, ...
        int leave = -1;
        double theta = kInf;
        for (std::size_t k = 0; k < path.size(); k += 2) {
            if (basis[path[k]].flow < theta) {
                theta = basis[path[k]].flow;
                leave = path[k];
            }
        }
        for (std::size_t k = 0; k < path.size(); ++k) basis[path[k]].flow += (k % 2 == 0 ? -theta : theta);
        basis[leave] = {ei, ej, theta};
    }

    OtResult out;
    out.iterations = iterations;
    out.coupling.pi.assign(m, std::vector<double>(n, 0.0));
    double value = 0.0;
    bool infinite = false;
    for (const auto& c : basis) {
        double f = std::max(c.flow, 0.0);
        out.coupling.pi[c.i][c.j] += f;
        if (f <= 0.0) continue;
        if (!std::isfinite(cost[c.i][c.j])) {
            if (f > 1e-12) infinite = true;
        } else {
            value += f * cost[c.i][c.j];
        }
    }
    out.value = infinite ? kInf : value;
    return out;
}

OtResult ot_oracle(const DiscreteMeasure& mu, const DiscreteMeasure& nu, const generators::GeneratorSpec& g) {
    if (g.time_dependent()) throw ValidationError("ot_oracle: time-dependent costs are not supported");
    if (mu.size() == 0 || nu.size() == 0) throw ValidationError("ot_oracle: empty measure");
    std::vector<std::vector<double>> cost(mu.size(), std::vector<double>(nu.size()));
    for (std::size_t i = 0; i < mu.size(); ++i) {
        for (std::size_t j = 0; j < nu.size(); ++j) cost[i][j] = cost_of(g, 0.0, nu.support()[j] - mu.support()[i]);
    }
    auto out = transportation_simplex(mu.weights(), nu.weights(), cost);
    out.coupling.x = mu.support();
    out.coupling.y = nu.support();
    return out;
}

// ---------------------------------------------------------------------------

TransportOptions transport_options_from_json(const nlohmann::json& j) {
    TransportOptions o;
    if (!j.is_object()) throw ValidationError("transport options must be an object");
    o.n_time = j.value("n_time", o.n_time);
    o.max_speed = j.value("max_speed", o.max_speed);
    o.kernel_cutoff = j.value("kernel_cutoff", o.kernel_cutoff);
    if (j.contains("temperatures")) o.temperatures = j.at("temperatures").get<std::vector<double>>();
    o.tolerance = j.value("tolerance", o.tolerance);
    o.stage_tolerance = j.value("stage_tolerance", o.stage_tolerance);
    o.feasibility_tolerance = j.value("feasibility_tolerance", o.feasibility_tolerance);
    o.max_newton = j.value("max_newton", o.max_newton);
    o.step_cap = j.value("step_cap", o.step_cap);
    o.max_sinkhorn = j.value("max_sinkhorn", o.max_sinkhorn);
    o.sinkhorn_tolerance = j.value("sinkhorn_tolerance", o.sinkhorn_tolerance);
    if (o.n_time < 1 || !(o.max_speed > 0.0) || !(o.kernel_cutoff > 0.0) || o.temperatures.empty() ||
        o.max_newton < 1 || o.max_sinkhorn < 1 || !(o.step_cap > 0.0)) {
        throw ValidationError("transport options: invalid values");
    }
    for (double t : o.temperatures) {
        if (!(t > 0.0)) throw ValidationError("transport options: temperatures must be positive");
    }
    return o;
}

nlohmann::json to_json(const TransportOptions& o) {
    return {{"n_time", o.n_time},
            {"max_speed", o.max_speed},
            {"kernel_cutoff", o.kernel_cutoff},
            {"temperatures", o.temperatures},
            {"tolerance", o.tolerance},
            {"stage_tolerance", o.stage_tolerance},
            {"feasibility_tolerance", o.feasibility_tolerance},
            {"max_newton", o.max_newton},
            {"step_cap", o.step_cap},
            {"max_sinkhorn", o.max_sinkhorn},
            {"sinkhorn_tolerance", o.sinkhorn_tolerance}};
}

std::string status_name(Status s) {
    switch (s) {
        case Status::optimal: return "optimal";
        case Status::infeasible: return "infeasible";
        case Status::not_converged: return "not_converged";
    }
    return "unknown";
}

std::string infeasibility_reason(const TransportInstance& inst) {
    if (inst.nu.kind() != DiscreteMeasure::Kind::atomic) return {};
    double r = generators::growth_exponent(inst.g);
    if (r >= 2.0 - 1e-3) {
        std::ostringstream os;
        os << "atomic target with cost growth exponent " << r
           << " >= 2: noisy paths of finite cost have absolutely continuous laws";
        return os.str();
    }
    return {};
}

namespace {

void validate_instance(const TransportInstance& inst) {
    inst.grid.validate();
    if (!(inst.epsilon > 0.0) || !std::isfinite(inst.epsilon)) throw ValidationError("epsilon must be positive");
    if (inst.mu.size() == 0 || inst.nu.size() == 0) throw ValidationError("transport: empty marginal");
}

FlowSolution infeasible_solution(std::string reason) {
    FlowSolution s;
    s.status = Status::infeasible;
    s.reason = std::move(reason);
    s.value = kInf;
    s.drift_objective = kInf;
    s.dual = kInf;
    return s;
}

}  // namespace

FlowSolution sinkhorn_bridge(const TransportInstance& inst, const TransportOptions& opts) {
    validate_instance(inst);
    if (auto reason = infeasibility_reason(inst); !reason.empty()) return infeasible_solution(reason);
    const auto& xs = inst.mu.support();
    const auto& ys = inst.nu.support();
    const std::size_t m = xs.size(), n = ys.size();
    const double eps = inst.epsilon;
    const double log_norm = std::log(inst.grid.step / std::sqrt(2.0 * M_PI * eps));
    std::vector<double> logK(m * n);
    for (std::size_t i = 0; i < m; ++i) {
        for (std::size_t j = 0; j < n; ++j) {
            double d = ys[j] - xs[i];
            logK[i * n + j] = log_norm - d * d / (2.0 * eps);
        }
    }
    std::vector<double> log_mu(m), log_nu(n);
    for (std::size_t i = 0; i < m; ++i) log_mu[i] = std::log(inst.mu.weights()[i]);
    for (std::size_t j = 0; j < n; ++j) log_nu[j] = std::log(inst.nu.weights()[j]);

    std::vector<double> f(m, 0.0), h(n, 0.0), buf;
    auto row_error = [&]() {
        double err = 0.0;
        for (std::size_t i = 0; i < m; ++i) {
            buf.assign(n, 0.0);
            for (std::size_t j = 0; j < n; ++j) buf[j] = f[i] + logK[i * n + j] + h[j];
            err += std::abs(std::exp(logsumexp(buf)) - inst.mu.weights()[i]);
        }
        return err;
    };

    FlowSolution sol;
    std::vector<double> errors;
    double err = kInf;
    int it = 0;
    for (; it < opts.max_sinkhorn; ++it) {
        for (std::size_t i = 0; i < m; ++i) {
            buf.assign(n, 0.0);
            for (std::size_t j = 0; j < n; ++j) buf[j] = logK[i * n + j] + h[j];
            f[i] = log_mu[i] - logsumexp(buf);
        }
        for (std::size_t j = 0; j < n; ++j) {
            buf.assign(m, 0.0);
            for (std::size_t i = 0; i < m; ++i) buf[i] = logK[i * n + j] + f[i];
            h[j] = log_nu[j] - logsumexp(buf);
        }
        err = row_error();
        errors.push_back(err);
        if (!std::isfinite(err)) break;
        if (err < opts.sinkhorn_tolerance) {
            ++it;
            break;
        }
    }
    sol.sinkhorn_iterations = it;
    // Geometric mean of the error ratios over the last (up to) ten iterations
    // before the error reached rounding level.
    {
        std::vector<double> e;
        for (double v : errors) {
            if (v > 1e-13) e.push_back(v);
        }
        std::size_t k = std::min<std::size_t>(10, e.size() > 0 ? e.size() - 1 : 0);
        sol.contraction = k > 0 ? std::pow(e.back() / e[e.size() - 1 - k], 1.0 / static_cast<double>(k)) : 0.0;
    }
    sol.terminal_error = err;

    sol.coupling.x = xs;
    sol.coupling.y = ys;
    sol.coupling.pi.assign(m, std::vector<double>(n, 0.0));
    double rel_ent = 0.0, transport = 0.0;
    for (std::size_t i = 0; i < m; ++i) {
        for (std::size_t j = 0; j < n; ++j) {
            double lp = f[i] + logK[i * n + j] + h[j];
            double p = std::exp(lp);
            sol.coupling.pi[i][j] = p;
            if (p > 0.0) {
                rel_ent += p * (lp - log_mu[i] - logK[i * n + j]);
                double d = ys[j] - xs[i];
                transport += p * 0.5 * d * d;
            }
        }
    }
    sol.value = eps * rel_ent;
    sol.dual = 0.0;
    for (std::size_t i = 0; i < m; ++i) sol.dual += inst.mu.weights()[i] * (f[i] - log_mu[i]);
    for (std::size_t j = 0; j < n; ++j) sol.dual += inst.nu.weights()[j] * h[j];
    sol.dual *= eps;
    sol.drift_objective = transport;
    if (!(err < opts.sinkhorn_tolerance)) {
        sol.status = Status::not_converged;
        std::ostringstream os;
        os << "Sinkhorn marginal error " << err << " after " << it << " iterations";
        sol.reason = os.str();
    }
    return sol;
}

// ---------------------------------------------------------------------------
// Controlled chain and its dual

namespace {

class ChainDual {
    using RowMat = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

public:
    ChainDual(const TransportInstance& inst, const TransportOptions& opts)
        : inst_(inst), nx_(inst.grid.size), steps_(opts.n_time), dt_(1.0 / opts.n_time) {
        const auto& grid = inst.grid;
        const double h = grid.step;
        width_ = std::max(1, static_cast<int>(std::ceil(opts.max_speed * dt_ / h - 1e-9)));
        width_ = std::min(width_, nx_ - 1);
        // noise kernel, banded and row-normalized
        double sd = std::sqrt(inst.epsilon * dt_);
        band_ = std::min(nx_ - 1, static_cast<int>(std::ceil(opts.kernel_cutoff * sd / h)));
        kw_.resize(2 * band_ + 1);
        for (int b = -band_; b <= band_; ++b) {
            double d = b * h;
            kw_[b + band_] = std::exp(-d * d / (2.0 * sd * sd));
        }
        krow_.resize(nx_);
        for (int i = 0; i < nx_; ++i) {
            double s = 0.0;
            for (int b = std::max(-band_, -i); b <= std::min(band_, nx_ - 1 - i); ++b) s += kw_[b + band_];
            krow_[i] = 1.0 / s;
        }
        // jump costs per step (the generator may depend on time)
        jump_cost_.assign(steps_, std::vector<double>(2 * width_ + 1));
        for (int k = 0; k < steps_ - 1; ++k) {
            double t = k * dt_;
            for (int o = -width_; o <= width_; ++o) jump_cost_[k][o + width_] = dt_ * cost_of(inst.g, t, o * h / dt_);
        }
        target_ = node_indices(inst.nu, grid);
        source_ = node_indices(inst.mu, grid);
        ns_ = static_cast<int>(target_.size());
        last_cost_.resize(static_cast<std::size_t>(nx_) * ns_);
        double t_last = (steps_ - 1) * dt_;
        for (int l = 0; l < nx_; ++l) {
            for (int j = 0; j < ns_; ++j) {
                last_cost_[l * ns_ + j] = dt_ * cost_of(inst.g, t_last, (grid.x(target_[j]) - grid.x(l)) / dt_);
            }
        }
        G_.assign(std::max(0, steps_ - 1), std::vector<double>(static_cast<std::size_t>(nx_) * (2 * width_ + 1)));
        G_last_.assign(static_cast<std::size_t>(nx_) * ns_, 0.0);
        ubar_.assign(steps_, std::vector<double>(nx_));
        p_.assign(steps_, std::vector<double>(nx_));
        m_.assign(steps_ + 1, std::vector<double>(nx_));
        mass_.assign(ns_, 0.0);
        lo_.assign(steps_, std::vector<int>(nx_, 0));
        hi_.assign(steps_, std::vector<int>(nx_, -1));
    }

    int dim() const { return ns_; }
    int steps() const { return steps_; }
    double dt() const { return dt_; }

    // u(x) = sum_l K(x, l) v(l)
    void apply_K(const std::vector<double>& v, std::vector<double>& out) const {
        out.assign(nx_, 0.0);
        for (int i = 0; i < nx_; ++i) {
            double s = 0.0;
            int lo = std::max(-band_, -i), hi = std::min(band_, nx_ - 1 - i);
            for (int b = lo; b <= hi; ++b) s += kw_[b + band_] * v[i + b];
            out[i] = s * krow_[i];
        }
    }

    // p(l) = sum_x m(x) K(x, l)
    void apply_KT(const std::vector<double>& m, std::vector<double>& out) const {
        out.assign(nx_, 0.0);
        for (int i = 0; i < nx_; ++i) {
            double w = m[i] * krow_[i];
            if (w == 0.0) continue;
            int lo = std::max(-band_, -i), hi = std::min(band_, nx_ - 1 - i);
            for (int b = lo; b <= hi; ++b) out[i + b] += w * kw_[b + band_];
        }
    }

    void apply_K(const RowMat& v, RowMat& out) const {
        out.setZero(nx_, v.cols());
        for (int i = 0; i < nx_; ++i) {
            int lo = std::max(-band_, -i), hi = std::min(band_, nx_ - 1 - i);
            for (int b = lo; b <= hi; ++b) out.row(i) += kw_[b + band_] * v.row(i + b);
            out.row(i) *= krow_[i];
        }
    }

    void apply_KT(const RowMat& m, RowMat& out) const {
        out.setZero(nx_, m.cols());
        for (int i = 0; i < nx_; ++i) {
            int lo = std::max(-band_, -i), hi = std::min(band_, nx_ - 1 - i);
            for (int b = lo; b <= hi; ++b) out.row(i + b) += (krow_[i] * kw_[b + band_]) * m.row(i);
        }
    }

    // Dual value, gradient nu - m_N(S) and cached policy at psi.
    double evaluate(const Eigen::VectorXd& psi, double tau, Eigen::VectorXd& grad) {
        tau_ = tau;
        std::vector<double> u(nx_), buf;
        // last step: jumps straight onto the target nodes
        {
            auto& ub = ubar_[steps_ - 1];
            buf.resize(ns_);
            for (int l = 0; l < nx_; ++l) {
                for (int j = 0; j < ns_; ++j) buf[j] = (psi[j] - last_cost_[l * ns_ + j]) / tau;
                double lse = logsumexp(buf);
                ub[l] = tau * lse;
                for (int j = 0; j < ns_; ++j) {
                    G_last_[l * ns_ + j] = std::isfinite(lse) ? std::exp(buf[j] - lse) : 0.0;
                }
                set_range(steps_ - 1, l, &G_last_[l * ns_], 0, ns_ - 1, 0);
            }
            apply_K(ub, u);
        }
        const int nw = 2 * width_ + 1;
        buf.resize(nw);
        for (int k = steps_ - 2; k >= 0; --k) {
            auto& ub = ubar_[k];
            auto& G = G_[k];
            const auto& C = jump_cost_[k];
            for (int l = 0; l < nx_; ++l) {
                for (int o = -width_; o <= width_; ++o) {
                    int t = l + o;
                    buf[o + width_] = (t < 0 || t >= nx_) ? -kInf : (u[t] - C[o + width_]) / tau;
                }
                double lse = logsumexp(buf);
                ub[l] = tau * lse;
                for (int o = 0; o < nw; ++o) G[l * nw + o] = std::isfinite(lse) ? std::exp(buf[o] - lse) : 0.0;
                set_range(k, l, &G[l * nw], std::max(-width_, -l), std::min(width_, nx_ - 1 - l), width_);
            }
            apply_K(ub, u);
        }
        u0_ = u;
        double dual = psi.dot(Eigen::Map<const Eigen::VectorXd>(inst_.nu.weights().data(), ns_));
        for (std::size_t a = 0; a < source_.size(); ++a) {
            double w = inst_.mu.weights()[a];
            if (w > 0.0) dual -= w * u[source_[a]];
        }
        forward();
        grad.resize(ns_);
        for (int j = 0; j < ns_; ++j) grad[j] = inst_.nu.weights()[j] - mass_[j];
        return dual;
    }

    // Hessian of the dual at the last evaluated point: the tangent recursions
    // for all unit directions at once, one row of the state per grid node.
    Eigen::MatrixXd hessian() const {
        const int nw = 2 * width_ + 1, n = ns_;
        const double tau = tau_;
        std::vector<RowMat> dub(steps_);
        dub[steps_ - 1] = Eigen::Map<const RowMat>(G_last_.data(), nx_, n);
        RowMat du, dp, dm, dm_next;
        apply_K(dub[steps_ - 1], du);
        for (int k = steps_ - 2; k >= 0; --k) {
            RowMat& d = dub[k];
            d.setZero(nx_, n);
            const auto& G = G_[k];
            for (int l = 0; l < nx_; ++l) {
                for (int o = lo_[k][l]; o <= hi_[k][l]; ++o) d.row(l) += G[l * nw + o + width_] * du.row(l + o);
            }
            if (k > 0) apply_K(d, du);
        }
        dm.setZero(nx_, n);
        for (int k = 0; k < steps_ - 1; ++k) {
            apply_KT(dm, dp);
            apply_K(dub[k + 1], du);
            dm_next.setZero(nx_, n);
            const auto& G = G_[k];
            const auto& p = p_[k];
            for (int l = 0; l < nx_; ++l) {
                for (int o = lo_[k][l]; o <= hi_[k][l]; ++o) {
                    double gw = G[l * nw + o + width_];
                    dm_next.row(l + o) += gw * dp.row(l) + (p[l] * gw / tau) * (du.row(l + o) - dub[k].row(l));
                }
            }
            dm.swap(dm_next);
        }
        apply_KT(dm, dp);
        Eigen::MatrixXd dM = Eigen::MatrixXd::Zero(n, n);
        const auto& p = p_[steps_ - 1];
        const RowMat& d = dub[steps_ - 1];
        for (int l = 0; l < nx_; ++l) {
            for (int j = lo_[steps_ - 1][l]; j <= hi_[steps_ - 1][l]; ++j) {
                double gw = G_last_[l * n + j];
                if (gw == 0.0) continue;
                double c = p[l] * gw / tau;
                dM.row(j) += gw * dp.row(l) - c * d.row(l);
                dM(j, j) += c;
            }
        }
        return -dM;
    }

    bool reachable() const {
        for (std::size_t a = 0; a < source_.size(); ++a) {
            if (inst_.mu.weights()[a] > 0.0 && !std::isfinite(u0_[source_[a]])) return false;
        }
        return true;
    }

    void fill(FlowSolution& sol) const {
        const int nw = 2 * width_ + 1;
        const double h = inst_.grid.step;
        sol.marginals = m_;
        sol.drift.assign(steps_, std::vector<double>(nx_, 0.0));
        sol.value = 0.0;
        sol.drift_objective = 0.0;
        for (int k = 0; k < steps_; ++k) {
            double t = k * dt_;
            auto& q = sol.drift[k];
            const auto& p = p_[k];
            for (int l = 0; l < nx_; ++l) {
                double mean = 0.0, cost = 0.0;
                if (k < steps_ - 1) {
                    for (int o = std::max(-width_, -l); o <= std::min(width_, nx_ - 1 - l); ++o) {
                        double gw = G_[k][l * nw + o + width_];
                        if (gw == 0.0) continue;
                        mean += gw * o * h / dt_;
                        cost += gw * jump_cost_[k][o + width_];
                    }
                } else {
                    for (int j = 0; j < ns_; ++j) {
                        double gw = G_last_[l * ns_ + j];
                        if (gw == 0.0) continue;
                        mean += gw * (inst_.grid.x(target_[j]) - inst_.grid.x(l)) / dt_;
                        cost += gw * last_cost_[l * ns_ + j];
                    }
                }
                q[l] = mean;
                if (p[l] > 0.0) {
                    sol.value += p[l] * cost;
                    sol.drift_objective += p[l] * dt_ * cost_of(inst_.g, t, mean);
                }
            }
        }
        sol.mass_error = 0.0;
        for (const auto& m : m_) {
            sol.mass_error = std::max(sol.mass_error, std::abs(std::accumulate(m.begin(), m.end(), 0.0) - 1.0));
        }
    }

private:

    // Offsets (or targets) in [first, last] whose weight is not negligible;
    // the Hessian skips the rest.
    void set_range(int k, int l, const double* w, int first, int last, int shift) {
        int lo = first, hi = last;
        while (lo < hi && w[lo + shift] < 1e-16) ++lo;
        while (hi > lo && w[hi + shift] < 1e-16) --hi;
        lo_[k][l] = lo;
        hi_[k][l] = hi;
    }

    void forward() {
        const int nw = 2 * width_ + 1;
        std::fill(m_[0].begin(), m_[0].end(), 0.0);
        for (std::size_t a = 0; a < source_.size(); ++a) m_[0][source_[a]] += inst_.mu.weights()[a];
        for (int k = 0; k < steps_ - 1; ++k) {
            apply_KT(m_[k], p_[k]);
            auto& next = m_[k + 1];
            std::fill(next.begin(), next.end(), 0.0);
            const auto& G = G_[k];
            const auto& p = p_[k];
            for (int l = 0; l < nx_; ++l) {
                if (p[l] == 0.0) continue;
                for (int o = std::max(-width_, -l); o <= std::min(width_, nx_ - 1 - l); ++o) {
                    next[l + o] += p[l] * G[l * nw + o + width_];
                }
            }
        }
        apply_KT(m_[steps_ - 1], p_[steps_ - 1]);
        std::fill(mass_.begin(), mass_.end(), 0.0);
        const auto& p = p_[steps_ - 1];
        for (int l = 0; l < nx_; ++l) {
            if (p[l] == 0.0) continue;
            for (int j = 0; j < ns_; ++j) mass_[j] += p[l] * G_last_[l * ns_ + j];
        }
        auto& last = m_[steps_];
        std::fill(last.begin(), last.end(), 0.0);
        for (int j = 0; j < ns_; ++j) last[target_[j]] += mass_[j];
    }

    const TransportInstance& inst_;
    int nx_, steps_;
    double dt_;
    int width_ = 1, band_ = 0, ns_ = 0;
    double tau_ = 1.0;
    std::vector<double> kw_, krow_;
    std::vector<std::vector<double>> jump_cost_;
    std::vector<double> last_cost_;
    std::vector<int> target_, source_;
    std::vector<std::vector<double>> G_;
    std::vector<double> G_last_;
    std::vector<std::vector<double>> ubar_, p_, m_;
    std::vector<double> mass_, u0_;
    std::vector<std::vector<int>> lo_, hi_;
};

void check_boundary_mass(const TransportInstance& inst) {
    // free diffusion over unit time from the source
    double sd = std::sqrt(inst.epsilon), out = 0.0;
    for (std::size_t a = 0; a < inst.mu.size(); ++a) {
        double x = inst.mu.support()[a];
        out += inst.mu.weights()[a] *
               (normal_cdf((inst.grid.x_min - x) / sd) + normal_cdf((x - inst.grid.x_max()) / sd));
    }
    if (out > 1e-10) {
        std::ostringstream os;
        os << "state grid too narrow: free diffusion leaves mass " << out << " (> 1e-10) outside";
        throw ValidationError(os.str());
    }
}


}  // namespace

FlowSolution solve_transport(const TransportInstance& inst, const TransportOptions& opts) {
    validate_instance(inst);
    if (opts.n_time < 1) throw ValidationError("transport: n_time must be >= 1");
    if (opts.temperatures.empty()) throw ValidationError("transport: empty temperature ladder");
    if (auto reason = infeasibility_reason(inst); !reason.empty()) return infeasible_solution(reason);
    check_boundary_mass(inst);

    ChainDual chain(inst, opts);
    const int n = chain.dim();
    Eigen::VectorXd psi = Eigen::VectorXd::Zero(n), grad, trial_grad;
    FlowSolution sol;
    double dual = chain.evaluate(psi, opts.temperatures.front(), grad);
    if (!chain.reachable()) return infeasible_solution("target unreachable under the cost's drift constraints");

    int newton = 0;
    for (std::size_t stage = 0; stage < opts.temperatures.size(); ++stage) {
        const double tau = opts.temperatures[stage];
        const bool final_stage = stage + 1 == opts.temperatures.size();
        const double tol = final_stage ? opts.tolerance : opts.stage_tolerance;
        dual = chain.evaluate(psi, tau, grad);
        for (int it = 0; it < opts.max_newton; ++it) {
            if (grad.lpNorm<1>() <= tol) break;
            ++newton;
            Eigen::MatrixXd A = chain.hessian();
            A = -0.5 * (A + A.transpose());
            double scale = std::max(A.diagonal().maxCoeff(), 1e-300);
            // constant shifts of psi leave the dual unchanged
            A.array() += scale / n;
            A.diagonal().array() += 1e-12 * scale;
            Eigen::VectorXd step = A.ldlt().solve(grad);
            step.array() -= step.mean();
            double slope = grad.dot(step);
            if (!(slope > 0.0)) {
                step = grad;
                slope = grad.squaredNorm();
            }
            // The dual is exponential in psi / tau; a quadratic model is only
            // trusted over a few temperatures.
            double cap = opts.step_cap * tau, big = step.cwiseAbs().maxCoeff();
            if (big > cap) {
                step *= cap / big;
                slope *= cap / big;
            }
            double a = 1.0;
            bool accepted = false;
            for (int ls = 0; ls < 40; ++ls, a *= 0.5) {
                Eigen::VectorXd trial = psi + a * step;
                double d = chain.evaluate(trial, tau, trial_grad);
                if (d >= dual + 1e-4 * a * slope || (d >= dual && trial_grad.lpNorm<1>() < grad.lpNorm<1>())) {
                    psi = trial;
                    dual = d;
                    grad = trial_grad;
                    accepted = true;
                    break;
                }
            }
            if (!accepted) {
                dual = chain.evaluate(psi, tau, grad);
                break;
            }
        }
    }
    sol.newton_iterations = newton;
    sol.dual = dual;
    sol.terminal_error = grad.lpNorm<1>();
    chain.fill(sol);
    if (!(sol.terminal_error <= opts.feasibility_tolerance)) {
        sol.status = Status::not_converged;
        std::ostringstream os;
        os << "terminal marginal error " << sol.terminal_error << " above " << opts.feasibility_tolerance;
        sol.reason = os.str();
    }
    return sol;
}

// ---------------------------------------------------------------------------

ConvergenceReport small_noise_sweep(const DiscreteMeasure& mu, const DiscreteMeasure& nu,
                                    const generators::GeneratorSpec& g, const std::vector<double>& eps_list,
                                    bool mollified, double grid_step, const TransportOptions& opts) {
    if (eps_list.empty()) throw ValidationError("small_noise_sweep: empty epsilon list");
    for (std::size_t i = 0; i < eps_list.size(); ++i) {
        if (!(eps_list[i] > 0.0)) throw ValidationError("small_noise_sweep: epsilon must be positive");
        if (i > 0 && !(eps_list[i] < eps_list[i - 1])) {
            throw ValidationError("small_noise_sweep: epsilon list must be strictly decreasing");
        }
    }
    if (!(grid_step > 0.0)) throw ValidationError("small_noise_sweep: grid step must be positive");
    const double ot = ot_oracle(mu, nu, g).value;
    const bool use_sinkhorn =
        std::holds_alternative<generators::Quadratic>(g.variant()) &&
        std::get<generators::Quadratic>(g.variant()).curvature == 1.0;
    double lo = std::min(mu.support().front(), nu.support().front());
    double hi = std::max(mu.support().back(), nu.support().back());

    struct Row {
        double value, dual, terminal_error, w1;
        Status status;
        std::string reason;
    };
    std::vector<Row> rows(eps_list.size());
    parallel_for(eps_list.size(), [&](std::size_t i) {
        double eps = eps_list[i];
        TransportInstance inst;
        inst.mu = mu;
        inst.g = g;
        inst.epsilon = eps;
        inst.grid = StateGrid::covering(lo, hi, grid_step, std::max(0.5, 6.5 * std::sqrt(eps)));
        double w1 = 0.0;
        if (mollified) {
            inst.nu = mollify(nu, eps, inst.grid).measure;
            w1 = wasserstein1(inst.nu, nu);
        } else {
            inst.nu = nu;
        }
        FlowSolution s = use_sinkhorn ? sinkhorn_bridge(inst, opts) : solve_transport(inst, opts);
        rows[i] = {s.value, s.dual, s.terminal_error, w1, s.status, s.reason};
    });

    ConvergenceReport rep;
    rep.index_name = "eps";
    rep.prelimit_name = "value";
    rep.limit_name = "ot";
    for (std::size_t i = 0; i < eps_list.size(); ++i) {
        const auto& r = rows[i];
        nlohmann::json aux = {{"feasible", r.status == Status::optimal},
                              {"status", status_name(r.status)},
                              {"terminal_error", r.terminal_error},
                              {"w1_target", r.w1},
                              {"solver", use_sinkhorn ? "sinkhorn" : "chain"}};
        if (std::isfinite(r.dual)) aux["dual"] = r.dual;
        if (!r.reason.empty()) aux["reason"] = r.reason;
        rep.add(eps_list[i], r.value, ot, aux);
    }
    rep.recompute_gaps();
    rep.manifest = {{"mollified", mollified},
                    {"grid_step", grid_step},
                    {"generator", generators::to_json(g)},
                    {"options", to_json(opts)}};
    return rep;
}

}  // namespace rholab::schrodinger
