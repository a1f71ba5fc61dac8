#include <doctest.h>

#include <cmath>
#include <random>

#include "rholab/pde.hpp"
#include "rholab/variational.hpp"

using namespace rholab;
using namespace rholab::variational;
using generators::GeneratorSpec;

namespace {

constexpr double kHopfLaxBump = 0.67365903971240119;

// omega(t) = ∫_0^t s^{-3/4} 1{s > 1/n} ds sampled on `knots` uniform knots.
PathPolyline truncated_drift_path(double n, int knots) {
    PathPolyline p;
    for (int k = 0; k < knots; ++k) {
        double t = static_cast<double>(k) / (knots - 1);
        p.times.push_back(t);
        p.values.push_back(4.0 * (std::pow(std::max(t, 1.0 / n), 0.25) - std::pow(n, -0.25)));
    }
    p.times.back() = 1.0;
    return p;
}

double check_soundness(const MaximizeResult& r, const PathFunctional& F, const GeneratorSpec& g) {
    double recomputed = F(r.path) - action(r.path, g).to_double();
    CHECK(std::abs(recomputed - r.value) <= 1e-12);
    return recomputed;
}

}  // namespace

TEST_CASE("action") {
    auto line = PathPolyline::straight(0.0, 1.3, 5);
    CHECK(action(line, GeneratorSpec::quadratic()).value() == doctest::Approx(0.5 * 1.3 * 1.3).epsilon(1e-14));
    PathPolyline steep{{0.0, 0.5, 1.0}, {0.0, 0.75, 0.5}};  // slope 1.5 then -0.5
    CHECK(action(steep, GeneratorSpec::indicator(1.0)).is_infinite());
    CHECK(action(PathPolyline::straight(0.0, 0.9, 3), GeneratorSpec::indicator(1.0)).value() == 0.0);
    // Time-modulated cost: ∫ w(t) dt * g(slope) for a straight line.
    auto tm = GeneratorSpec::time_modulated(GeneratorSpec::quadratic(), {0.0, 1.0}, {1.0, 3.0});
    CHECK(action(PathPolyline::straight(0.0, 1.0, 7), tm).value() == doctest::Approx(2.0 * 0.5).epsilon(1e-12));
    CHECK_THROWS_AS(action(PathPolyline{{0.0, 0.5, 0.5}, {0.0, 1.0, 1.0}}, GeneratorSpec::quadratic()), ValidationError);
}

TEST_CASE("action of the truncated singular drift") {
    auto g = GeneratorSpec::power_law(1.25);
    for (double n : {16.0, 256.0}) {
        double exact = 16.0 * (1.0 - std::pow(n, -1.0 / 16.0));
        double a = action(truncated_drift_path(n, 4097), g).value();
        CHECK(std::abs(a - exact) <= 1e-2);
        CHECK(a <= 16.0);
    }
    // Frozen closed forms.
    CHECK(16.0 * (1.0 - std::pow(16.0, -1.0 / 16.0)) == doctest::Approx(2.5456573559405675).epsilon(1e-15));
    CHECK(16.0 * (1.0 - std::pow(256.0, -1.0 / 16.0)) == doctest::Approx(4.68629150101524).epsilon(1e-13));
}

TEST_CASE("polyline and functional evaluation") {
    PathPolyline p{{0.0, 0.25, 1.0}, {0.0, 1.0, -0.5}};
    CHECK(p.value_at(0.125) == doctest::Approx(0.5));
    CHECK(p.value_at(0.625) == doctest::Approx(0.25));
    CHECK(PathFunctional::terminal_value(functions::identity())(p) == -0.5);
    CHECK(PathFunctional::running_max(functions::identity())(p) == 1.0);
    // ∫ omega: triangle areas 0.125 + (1 - 0.5) * 0.75 / 2
    CHECK(PathFunctional::time_integral(functions::identity())(p) == doctest::Approx(0.125 + 0.1875));
    auto fm = PathFunctional::weighted_marginals({0.125, 1.0}, {2.0, 1.0}, functions::identity());
    CHECK(fm(p) == doctest::Approx(2.0 * 0.5 - 0.5));
    CHECK(fm.evaluate_uniform(std::vector<double>{0.0, 1.0, 2.0}) == doctest::Approx(2.0 * 0.25 + 2.0));
    auto F = functional_from_json({{"kind", "running_max"}, {"transform", {{"kind", "clipped_linear"}, {"slope", 1}, {"hi", 1}}},
                                   {"bounds", {-10, 1}}});
    CHECK(F(p) == 1.0);
    CHECK(F.upper() == 1.0);
    CHECK(functional_from_json(F.spec()).spec() == F.spec());
    CHECK_THROWS_AS(functional_from_json({{"kind", "nope"}}), ValidationError);
    CHECK_THROWS_AS(PathFunctional::weighted_marginals({0.5, 0.25}, {1, 1}, functions::identity()), ValidationError);
}

TEST_CASE("maximize_schilder: terminal functional matches Hopf-Lax") {
    auto F = PathFunctional::terminal_value(functions::gaussian_bump());
    auto g = GeneratorSpec::quadratic();
    auto r = maximize_schilder(F, g, 16, 4, 7);
    CHECK(r.converged);
    CHECK(std::abs(r.value - kHopfLaxBump) <= 1e-3);
    check_soundness(r, F, g);
    // Straight-line optimizer.
    for (std::size_t k = 1; k + 1 < r.path.times.size(); ++k) {
        CHECK(std::abs(r.path.slope(k) - r.path.slope(0)) <= 1e-3);
    }
}

TEST_CASE("maximize_schilder: zero is optimal for a negative quadratic functional") {
    auto F = PathFunctional::time_integral(functions::square(-1.0));
    auto r = maximize_schilder(F, GeneratorSpec::quadratic(), 12, 3, 1);
    CHECK(std::abs(r.value) <= 1e-6);
    for (double v : r.path.values) CHECK(std::abs(v) <= 1e-3);
}

TEST_CASE("maximize_schilder: terminal value against a one-dimensional grid search") {
    auto h = functions::sum(functions::gaussian_bump(1.5, 0.7, 2.0), functions::gaussian_bump(-1.0, 0.5, 1.0));
    auto g = GeneratorSpec::power_law(1.5);
    double oracle = -1e300;
    for (int i = -600000; i <= 600000; ++i) {
        double x = i * 1e-5;
        oracle = std::max(oracle, h(x) - std::pow(std::abs(x), 1.5));
    }
    auto r = maximize_schilder(PathFunctional::terminal_value(h), g, 9, 4, 3);
    CHECK(std::abs(r.value - oracle) <= 1e-3);
    CHECK(r.value <= oracle + 1e-9);
}

TEST_CASE("maximize_schilder: path-dependent functionals") {
    auto g = GeneratorSpec::quadratic();
    SUBCASE("capped running maximum") {
        auto F = PathFunctional::running_max(functions::clipped_linear(1.0, -INFINITY, 1.0));
        auto r = maximize_schilder(F, g, 9, 3, 5);
        CHECK(std::abs(r.value - 0.5) <= 1e-3);
        check_soundness(r, F, g);
    }
    SUBCASE("time integral") {
        // Euler-Lagrange: omega = t - t^2/2, value 1/3 - 1/6.
        auto F = PathFunctional::time_integral(functions::identity());
        auto r = maximize_schilder(F, g, 33, 2, 5);
        CHECK(std::abs(r.value - 1.0 / 6.0) <= 1e-3);
        CHECK(r.value <= 1.0 / 6.0 + 1e-12);
        CHECK(r.path.value_at(0.5) == doctest::Approx(0.375).epsilon(1e-2));
    }
    SUBCASE("constrained drifts") {
        auto F = PathFunctional::terminal_value(functions::gaussian_bump());
        auto r = maximize_schilder(F, GeneratorSpec::indicator(1.0), 8, 2, 5);
        CHECK(r.value == doctest::Approx(1.0).epsilon(1e-9));
    }
    SUBCASE("constant modulation equals rescaled curvature") {
        auto F = PathFunctional::terminal_value(functions::gaussian_bump());
        auto tm = GeneratorSpec::time_modulated(g, {0.0, 1.0}, {2.0, 2.0});
        auto a = maximize_schilder(F, tm, 8, 1, 5);
        auto b = maximize_schilder(F, GeneratorSpec::quadratic(2.0), 8, 1, 5);
        CHECK(a.value == doctest::Approx(b.value).epsilon(1e-9));
    }
}

TEST_CASE("conditional_value") {
    auto f = functions::gaussian_bump();
    auto F = PathFunctional::terminal_value(f);
    auto g = GeneratorSpec::quadratic();
    PathPolyline origin{{0.0}, {0.0}};
    auto full = maximize_schilder(F, g, 10, 3, 9);
    auto c0 = conditional_value(F, g, 0.0, origin, 10, 3, 9);
    CHECK(c0.value == full.value);

    PathPolyline prefix{{0.0, 0.5}, {0.0, 0.0}};
    auto c = conditional_value(F, g, 0.5, prefix, 10, 3, 9);
    auto y = pde::uniform_grid(-6.0, 6.0, 1e-5);
    CHECK(std::abs(c.value - pde::hopf_lax(f, g, 0.5, 0.0, y)) <= 1e-3);
    CHECK(c.path.times.size() == 11);
    CHECK(c.path.value_at(0.25) == 0.0);

    PathPolyline whole{{0.0, 1.0}, {0.0, 0.4}};
    CHECK(conditional_value(F, g, 1.0, whole, 10, 3, 9).value == f(0.4));
    CHECK_THROWS_AS(conditional_value(F, g, 0.5, whole, 10, 3, 9), ValidationError);
}

TEST_CASE("property: refinement never loses value") {
    std::mt19937_64 rng(21);
    std::uniform_real_distribution<double> c(-1.5, 1.5), w(0.4, 1.5);
    auto g = GeneratorSpec::quadratic();
    for (int trial = 0; trial < 4; ++trial) {
        auto F = PathFunctional::time_integral(functions::gaussian_bump(c(rng), w(rng), 1.0));
        double prev = -1e300;
        for (int m : {3, 5, 9, 17}) {
            auto r = maximize_schilder(F, g, m, 2, 4);
            check_soundness(r, F, g);
            CHECK(r.value >= prev - 1e-6);
            prev = r.value;
        }
    }
}

TEST_CASE("property: deterministic given the seed") {
    auto F = PathFunctional::running_max(functions::gaussian_bump(0.8, 0.3, 1.0));
    auto g = GeneratorSpec::power_law(1.5);
    auto a = maximize_schilder(F, g, 9, 5, 123);
    auto b = maximize_schilder(F, g, 9, 5, 123);
    CHECK(a.value == b.value);
    CHECK(a.path.values == b.path.values);
    CHECK(a.best_restart == b.best_restart);
}
