#pragma once

#include <functional>
#include <vector>

namespace rholab::quadrature {

struct Rule {
    std::vector<double> nodes;
    std::vector<double> weights;
};

// n-point Gauss rule for E f(Z), Z ~ N(0, 1); weights sum to 1.
Rule gauss_hermite(int n);

// n-point Gauss-Legendre rule on [a, b].
Rule gauss_legendre(int n, double a, double b);

// ∫_0^1 f(t, 1 - t) dt by tanh-sinh quadrature; f receives the complement
// computed without cancellation, so endpoint singularities are tolerated.
double tanh_sinh_unit(const std::function<double(double, double)>& f, double h = 1.0 / 64.0);

template <class F>
double integrate(const Rule& r, F&& f) {
    double s = 0.0;
    for (std::size_t i = 0; i < r.nodes.size(); ++i) s += r.weights[i] * f(r.nodes[i]);
    return s;
}

}  // namespace rholab::quadrature
