#include "rholab/quadrature.hpp"

#include <cmath>
#include <stdexcept>

#include <Eigen/Eigenvalues>

namespace rholab::quadrature {

namespace {

// Golub-Welsch: nodes are eigenvalues of the Jacobi matrix, weights the squared
// first eigenvector components times the total mass.
Rule golub_welsch(const Eigen::VectorXd& offdiag, int n, double mass) {
    Eigen::MatrixXd J = Eigen::MatrixXd::Zero(n, n);
    for (int k = 0; k + 1 < n; ++k) {
        J(k, k + 1) = offdiag(k);
        J(k + 1, k) = offdiag(k);
    }
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(J);
    Rule r;
    r.nodes.resize(n);
    r.weights.resize(n);
    for (int i = 0; i < n; ++i) {
        r.nodes[i] = es.eigenvalues()(i);
        double v0 = es.eigenvectors()(0, i);
        r.weights[i] = mass * v0 * v0;
    }
    return r;
}

}  // namespace

Rule gauss_hermite(int n) {
    if (n < 1) throw std::invalid_argument("gauss_hermite: n must be positive");
    Eigen::VectorXd off(std::max(n - 1, 0));
    for (int k = 1; k < n; ++k) off(k - 1) = std::sqrt(static_cast<double>(k));
    return golub_welsch(off, n, 1.0);
}

Rule gauss_legendre(int n, double a, double b) {
    if (n < 1) throw std::invalid_argument("gauss_legendre: n must be positive");
    Eigen::VectorXd off(std::max(n - 1, 0));
    for (int k = 1; k < n; ++k) off(k - 1) = k / std::sqrt(4.0 * k * k - 1.0);
    Rule r = golub_welsch(off, n, 2.0);
    double half = 0.5 * (b - a), mid = 0.5 * (a + b);
    for (int i = 0; i < n; ++i) {
        r.nodes[i] = mid + half * r.nodes[i];
        r.weights[i] *= half;
    }
    return r;
}

double tanh_sinh_unit(const std::function<double(double, double)>& f, double h) {
    // Nodes reach within 1e-300 of the endpoints, enough for (1 - t)^{-a}
    // singularities with a close to 1. The weight pi/2 cosh(s) / (2 cosh^2 u)
    // is written as pi cosh(s) t (1 - t) to avoid overflow.
    const double half_pi = 0.5 * M_PI;
    const int K = static_cast<int>(std::ceil(6.5 / h));
    double acc = 0.0;
    for (int k = -K; k <= K; ++k) {
        double s = k * h;
        double u = half_pi * std::sinh(s);
        double t = 1.0 / (1.0 + std::exp(-2.0 * u));
        double c = 1.0 / (1.0 + std::exp(2.0 * u));
        if (t < 1e-300 || c < 1e-300) continue;
        acc += M_PI * std::cosh(s) * t * c * f(t, c);
    }
    return acc * h;
}

}  // namespace rholab::quadrature
