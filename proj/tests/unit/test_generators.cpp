#include <doctest.h>

#include <cmath>
#include <random>

#include "rholab/generators.hpp"

using namespace rholab;
using namespace rholab::generators;

namespace {

// Brute-force conjugate: max over a uniform q-grid.
double brute_conjugate(const GeneratorSpec& g, double t, double z, double lo, double hi, double step) {
    double best = -INFINITY;
    for (double q = lo; q <= hi; q += step) {
        ExtendedReal v = eval_g(g, t, q);
        if (v.is_finite()) best = std::max(best, q * z - v.value());
    }
    return best;
}

// Random convex samples: cumulative sums of sorted random slopes.
GeneratorSpec random_convex_table(std::mt19937_64& rng, int n) {
    std::uniform_real_distribution<double> u(-3.0, 3.0);
    std::uniform_real_distribution<double> gap(0.05, 0.5);
    std::vector<double> slopes(n - 1);
    for (auto& s : slopes) s = u(rng);
    std::sort(slopes.begin(), slopes.end());
    std::vector<double> q(n), g(n);
    q[0] = -2.0 + 0.1 * u(rng);
    g[0] = std::abs(u(rng));
    for (int j = 1; j < n; ++j) {
        q[j] = q[j - 1] + gap(rng);
        g[j] = g[j - 1] + slopes[j - 1] * (q[j] - q[j - 1]);
    }
    return GeneratorSpec::tabulated(q, g);
}

}  // namespace

TEST_CASE("extended reals absorb infinity and refuse NaN") {
    ExtendedReal a = 2.0, inf = ExtendedReal::infinity();
    CHECK((a + inf).is_infinite());
    CHECK((a + 3.0).value() == 5.0);
    CHECK((0.0 * inf).value() == 0.0);
    CHECK((2.0 * inf).is_infinite());
    CHECK(a < inf);
    CHECK(ExtendedReal(INFINITY).is_infinite());
    CHECK_THROWS_AS(ExtendedReal(NAN), std::domain_error);
    CHECK_THROWS_AS(ExtendedReal(-INFINITY), std::domain_error);
    CHECK_THROWS_AS(inf.value(), std::domain_error);
    CHECK_THROWS_AS(-1.0 * a, std::domain_error);
}

TEST_CASE("eval_g on the basic variants") {
    CHECK(eval_g(GeneratorSpec::quadratic(1.0), 0.3, 2.0).value() == doctest::Approx(2.0).epsilon(1e-15));
    CHECK(eval_g(GeneratorSpec::indicator(1.0), 0.3, 1.5).is_infinite());
    CHECK(eval_g(GeneratorSpec::indicator(1.0), 0.3, -1.0).value() == 0.0);
    CHECK(eval_g(GeneratorSpec::power_law(1.5, 2.0), 0.0, -4.0).value() == doctest::Approx(16.0));
    CHECK_THROWS_AS(eval_g(GeneratorSpec::quadratic(), 1.5, 0.0), std::invalid_argument);
    CHECK_THROWS_AS(GeneratorSpec::quadratic(-1.0), std::invalid_argument);
    CHECK_THROWS_AS(GeneratorSpec::power_law(1.0), std::invalid_argument);
}

TEST_CASE("power-law action of the t^(-3/4) drift") {
    // int_{1/n}^1 (t^{-3/4})^{5/4} dt = 16 (1 - n^{-1/16}); frozen closed-form values.
    auto g = GeneratorSpec::power_law(1.25, 1.0);
    for (auto [n, expected] : {std::pair{16.0, 2.5456573559405675}, std::pair{256.0, 4.68629150101524}}) {
        // Midpoint rule in log-time, where the integrand t * t^{-15/16} is smooth.
        const int m = 20000;
        double a = std::log(1.0 / n), b = 0.0, h = (b - a) / m, s = 0.0;
        for (int i = 0; i < m; ++i) {
            double t = std::exp(a + (i + 0.5) * h);
            s += eval_g(g, t, std::pow(t, -0.75)).value() * t * h;
        }
        CHECK(s == doctest::Approx(expected).epsilon(1e-8));
        CHECK(16.0 * (1.0 - std::pow(n, -1.0 / 16.0)) == doctest::Approx(expected).epsilon(1e-14));
    }
}

TEST_CASE("closed-form conjugates") {
    SUBCASE("quadratic is exact") {
        for (double c : {0.5, 1.0, 3.0}) {
            auto cs = conjugate(GeneratorSpec::quadratic(c));
            CHECK(cs.closed_form());
            for (double z : {-2.0, 0.0, 0.3, 7.0}) CHECK(cs.value(0.0, z).value() == z * z / (2.0 * c));
        }
    }
    SUBCASE("indicator gives the support function") {
        auto cs = conjugate(GeneratorSpec::indicator(1.0));
        for (double z : {-2.0, 0.0, 0.5}) CHECK(cs.value(0.0, z).value() == doctest::Approx(std::abs(z)));
    }
    SUBCASE("power law r=3/2, a=2/3 against a brute-force grid") {
        auto g = GeneratorSpec::power_law(1.5, 2.0 / 3.0);
        auto cs = conjugate(g);
        // |z|^3 / 3 at z = 0.5, 1, 2.
        const double frozen[] = {0.041666666666666664, 0.3333333333333333, 2.6666666666666665};
        const double zs[] = {0.5, 1.0, 2.0};
        for (int i = 0; i < 3; ++i) {
            CHECK(cs.value(0.0, zs[i]).value() == doctest::Approx(frozen[i]).epsilon(1e-12));
            double brute = brute_conjugate(g, 0.0, zs[i], -10.0, 10.0, 1e-4);
            CHECK(cs.value(0.0, zs[i]).value() == doctest::Approx(brute).epsilon(1e-6));
        }
    }
    SUBCASE("general power law matches brute force") {
        auto g = GeneratorSpec::power_law(1.25, 1.0);
        auto cs = conjugate(g);
        double brute = brute_conjugate(g, 0.0, 2.0, -40.0, 40.0, 1e-4);
        CHECK(cs.value(0.0, 2.0).value() == doctest::Approx(brute).epsilon(1e-6));
    }
}

TEST_CASE("time-modulated conjugate is w g*(z/w)") {
    auto g = GeneratorSpec::time_modulated(GeneratorSpec::power_law(1.5, 1.0), {0.0, 1.0}, {1.0, 3.0});
    auto cs = conjugate(g);
    CHECK(cs.time_dependent());
    for (double t : {0.0, 0.4, 1.0}) {
        for (double z : {-1.5, 0.7}) {
            double brute = brute_conjugate(g, t, z, -10.0, 10.0, 1e-4);
            CHECK(cs.value(t, z).value() == doctest::Approx(brute).epsilon(1e-6));
        }
    }
    CHECK(g.min_weight() == 1.0);
}

TEST_CASE("discrete_legendre") {
    SUBCASE("self-dual quadratic samples") {
        std::vector<double> q, g;
        for (int i = -5000; i <= 5000; ++i) {
            q.push_back(i * 1e-3);
            g.push_back(0.5 * q.back() * q.back());
        }
        std::vector<double> z{1.0};
        CHECK(discrete_legendre(q, g, z)[0] == doctest::Approx(0.5).epsilon(1e-3));
    }
    SUBCASE("single sample at the origin") {
        std::vector<double> q{0.0}, g{0.0}, z{-3.0, 0.0, 11.0};
        for (double v : discrete_legendre(q, g, z)) CHECK(v == 0.0);
    }
    SUBCASE("|q|^(5/4) against the quadratic-time loop") {
        std::vector<double> q, g;
        for (int i = -1000; i <= 1000; ++i) {
            q.push_back(i * 1e-2);
            g.push_back(std::pow(std::abs(q.back()), 1.25));
        }
        std::vector<double> z{2.0, -0.3, 0.0, 1.1};
        auto fast = discrete_legendre(q, g, z);
        for (std::size_t k = 0; k < z.size(); ++k) {
            double slow = -INFINITY;
            for (std::size_t j = 0; j < q.size(); ++j) slow = std::max(slow, q[j] * z[k] - g[j]);
            CHECK(fast[k] == doctest::Approx(slow).epsilon(1e-13));
        }
    }
    SUBCASE("rejections") {
        std::vector<double> q{0.0, 1.0, 2.0}, g{0.0, 1.0, 1.5}, z{0.0};
        CHECK_THROWS_AS(discrete_legendre(q, g, z), std::invalid_argument);
        std::vector<double> e;
        CHECK_THROWS_AS(discrete_legendre(e, e, z), std::invalid_argument);
        std::vector<double> q2{0.0, 0.0}, g2{0.0, 0.0};
        CHECK_THROWS_AS(discrete_legendre(q2, g2, z), std::invalid_argument);
    }
}

TEST_CASE("check_ti") {
    CHECK(check_ti(GeneratorSpec::quadratic(1.0)).all_pass());
    CHECK(check_ti(GeneratorSpec::indicator(2.0)).all_pass());
    CHECK(check_ti(GeneratorSpec::power_law(1.25)).all_pass());

    auto abs_q = GeneratorSpec::tabulated({-1.0, 0.0, 1.0}, {1.0, 0.0, 1.0}, Extrapolation::linear);
    auto rep = check_ti(abs_q);
    CHECK_FALSE(rep.clause("coercivity").pass);
    CHECK(rep.clause("convexity").pass);
    CHECK(rep.clause("zero_in_ri_domain").pass);

    // Outside the sample hull the cost is +inf, which is coercive.
    auto bounded = GeneratorSpec::tabulated({-1.0, 0.0, 1.0}, {1.0, 0.0, 1.0});
    CHECK(check_ti(bounded).all_pass());

    auto shifted = GeneratorSpec::tabulated({0.0, 1.0, 2.0}, {0.0, 0.0, 1.0});
    CHECK_FALSE(check_ti(shifted).clause("zero_in_ri_domain").pass);

    auto modulated = GeneratorSpec::time_modulated(GeneratorSpec::quadratic(), {0.0, 0.5, 1.0}, {1.0, 2.0, 0.5});
    CHECK(check_ti(modulated).all_pass());
}

TEST_CASE("growth exponents") {
    CHECK(growth_exponent(GeneratorSpec::quadratic()) == doctest::Approx(2.0).epsilon(1e-3));
    CHECK(growth_exponent(GeneratorSpec::power_law(1.5)) == doctest::Approx(1.5).epsilon(1e-3));
    CHECK(std::isinf(growth_exponent(GeneratorSpec::indicator(1.0))));
}

TEST_CASE("property: Fenchel-Young inequality and equality at the subgradient") {
    std::mt19937_64 rng(20240611);
    std::uniform_real_distribution<double> u(-4.0, 4.0);
    std::vector<GeneratorSpec> specs{GeneratorSpec::quadratic(0.7), GeneratorSpec::power_law(1.5),
                                     GeneratorSpec::power_law(3.0, 0.2), GeneratorSpec::indicator(1.5)};
    for (const auto& g : specs) {
        auto cs = conjugate(g);
        for (int k = 0; k < 500; ++k) {
            double q = u(rng), z = u(rng);
            ExtendedReal gq = eval_g(g, 0.0, q);
            if (gq.is_infinite()) continue;
            CHECK(gq.value() + cs.value(0.0, z).value() >= q * z - 1e-12);
            // z = g'(q) for differentiable variants: equality.
            double zq = cs.derivative(0.0, z);
            ExtendedReal gzq = eval_g(g, 0.0, zq);
            if (gzq.is_finite()) {
                CHECK(gzq.value() + cs.value(0.0, z).value() == doctest::Approx(zq * z).epsilon(1e-8));
            }
        }
    }
}

TEST_CASE("property: double conjugation of random convex tables") {
    std::mt19937_64 rng(7);
    for (int trial = 0; trial < 20; ++trial) {
        auto spec = random_convex_table(rng, 12);
        const auto& tab = std::get<Tabulated>(spec.variant());
        // The conjugate is piecewise linear with breakpoints at the slopes;
        // sampling it on its breakpoints and transforming back recovers g.
        std::vector<double> z;
        for (std::size_t j = 0; j + 1 < tab.q.size(); ++j) {
            z.push_back((tab.g[j + 1] - tab.g[j]) / (tab.q[j + 1] - tab.q[j]));
        }
        z.insert(z.begin(), z.front() - 1.0);
        z.push_back(z.back() + 1.0);
        std::sort(z.begin(), z.end());
        z.erase(std::unique(z.begin(), z.end()), z.end());
        auto gstar = discrete_legendre(tab.q, tab.g, z);
        auto back = discrete_legendre(z, gstar, tab.q);
        for (std::size_t j = 0; j < tab.q.size(); ++j) {
            CHECK(back[j] == doctest::Approx(tab.g[j]).epsilon(1e-9));
        }
    }
}

TEST_CASE("property: tabulated conjugates are convex and dominate affine minorants") {
    std::mt19937_64 rng(99);
    for (int trial = 0; trial < 20; ++trial) {
        auto spec = random_convex_table(rng, 9);
        auto cs = conjugate(spec);
        CHECK_FALSE(cs.closed_form());
        const auto& tab = std::get<Tabulated>(spec.variant());
        for (double z = -4.0; z <= 4.0; z += 0.37) {
            double v = cs.value(0.0, z).value();
            double vl = cs.value(0.0, z - 0.1).value(), vr = cs.value(0.0, z + 0.1).value();
            CHECK(v <= 0.5 * (vl + vr) + 1e-12);
            for (std::size_t j = 0; j < tab.q.size(); ++j) CHECK(v >= tab.q[j] * z - tab.g[j] - 1e-12);
        }
    }
}

TEST_CASE("tabulated conjugate minimizer and Lipschitz bound") {
    auto g = GeneratorSpec::tabulated({-2.0, -1.0, 0.0, 1.0, 2.0}, {2.0, 0.5, 0.0, 0.5, 2.0});
    auto cs = conjugate(g);
    CHECK(cs.argmin(0.0) == doctest::Approx(0.0));
    CHECK(cs.lipschitz_bound(100.0) == 2.0);
    CHECK(cs.derivative(0.0, 0.5) == 1.0);
    CHECK(cs.derivative(0.0, 0.49) == 0.0);
}

TEST_CASE("json round trip") {
    auto g = GeneratorSpec::time_modulated(GeneratorSpec::power_law(1.5, 0.5), {0.0, 1.0}, {1.0, 2.0});
    auto j = to_json(g);
    auto g2 = generator_from_json(j);
    CHECK(to_json(g2) == j);
    CHECK(g2.name() == g.name());
    CHECK_THROWS_AS(generator_from_json({{"variant", "cubic"}}), std::invalid_argument);
    CHECK_THROWS_AS(generator_from_json({{"variant", "power_law"}}), std::invalid_argument);
    auto t = generator_from_json({{"variant", "tabulated"}, {"q", {-1, 0, 1}}, {"g", {1, 0, 1}},
                                  {"extrapolation", "linear"}});
    CHECK(eval_g(t, 0.0, 3.0).value() == doctest::Approx(3.0));
}
