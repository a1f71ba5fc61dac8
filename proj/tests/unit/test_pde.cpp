#include <doctest.h>

#include <cmath>
#include <random>

#include "rholab/functions.hpp"
#include "rholab/pde.hpp"

using namespace rholab;
using namespace rholab::pde;
using generators::conjugate;
using generators::GeneratorSpec;

namespace {

// Oracles frozen from adaptive quadrature / root finding at 30 digits.
constexpr double kRhoBump = 0.47957870739176044;      // log E exp(exp(-(W1-1)^2))
constexpr double kHopfLaxBump = 0.67365903971240119;  // max_y exp(-(y-1)^2) - y^2/2
constexpr double kMixtureBump = 0.55733397062070205;  // 0.3 rho(f(W1)) + 0.7 rho(f(0.5+W1))

GridSpec wide_grid(int nx = 1201) { return GridSpec{-6.0, 6.0, nx, 0, Boundary::clamp_to_terminal}; }

// Random smooth bounded terminal data: small sums of bumps.
functions::ScalarFunction random_bumps(std::mt19937_64& rng) {
    std::uniform_real_distribution<double> c(-2.0, 2.0), w(0.5, 2.0), a(-1.0, 1.0);
    auto f = functions::gaussian_bump(c(rng), w(rng), a(rng));
    for (int k = 0; k < 2; ++k) f = functions::sum(f, functions::gaussian_bump(c(rng), w(rng), a(rng)));
    return f;
}

}  // namespace

TEST_CASE("constants are invariant") {
    auto fld = solve_semilinear(functions::constant(3.0), conjugate(GeneratorSpec::quadratic()), 1.0, wide_grid(241));
    for (double v : fld.initial()) CHECK(v == doctest::Approx(3.0).epsilon(1e-12));
    CHECK(fld.value_at(0.0) == doctest::Approx(3.0).epsilon(1e-9));
}

TEST_CASE("linear data reproduce the Gaussian moment generating function") {
    GridSpec grid{-8.0, 8.0, 801, 0, Boundary::clamp_to_terminal};
    auto fld = solve_semilinear(functions::linear(0.7), conjugate(GeneratorSpec::quadratic()), 1.0, grid);
    CHECK(std::abs(fld.value_at(0.0) - 0.245) <= 2e-3);
    GridSpec one_sided = grid;
    one_sided.boundary = Boundary::one_sided_extrapolation;
    auto fld2 = solve_semilinear(functions::linear(0.7), conjugate(GeneratorSpec::quadratic()), 1.0, one_sided);
    CHECK(std::abs(fld2.value_at(0.0) - 0.245) <= 2e-3);
}

TEST_CASE("bump datum against the quadrature oracle") {
    auto fld = solve_semilinear(functions::gaussian_bump(), conjugate(GeneratorSpec::quadratic()), 1.0, wide_grid());
    CHECK(std::abs(fld.value_at(0.0) - kRhoBump) <= 5e-4);
    CHECK(fld.rows.size() == static_cast<std::size_t>(fld.cfl.nt + 1));
    CHECK(fld.times.front() == 0.0);
    CHECK(fld.times.back() == 1.0);
    // Terminal row is the sampled datum exactly.
    for (int i = 0; i < fld.grid.nx; ++i) CHECK(fld.terminal()[i] == functions::gaussian_bump()(fld.grid.x(i)));
}

TEST_CASE("thinned storage keeps the endpoints") {
    SolveOptions so;
    so.store_every = 100;
    auto fld = solve_semilinear(functions::gaussian_bump(), conjugate(GeneratorSpec::quadratic()), 1.0, wide_grid(301), so);
    auto full = solve_semilinear(functions::gaussian_bump(), conjugate(GeneratorSpec::quadratic()), 1.0, wide_grid(301));
    CHECK(fld.rows.size() < full.rows.size());
    CHECK(fld.initial() == full.initial());
}

TEST_CASE("CFL is enforced") {
    GridSpec grid = wide_grid();
    grid.nt = 10;
    try {
        solve_semilinear(functions::gaussian_bump(), conjugate(GeneratorSpec::quadratic()), 1.0, grid);
        FAIL("expected a CFL error");
    } catch (const CflError& e) {
        CHECK(e.minimal_nt() > 10);
        grid.nt = e.minimal_nt();
        auto fld = solve_semilinear(functions::gaussian_bump(), conjugate(GeneratorSpec::quadratic()), 1.0, grid);
        CHECK(fld.cfl.diffusion_number <= 0.5 + 1e-12);
        CHECK(fld.cfl.diffusion_number + fld.cfl.advection_number <= 1.0 + 1e-12);
    }
}

TEST_CASE("unbounded terminal samples are rejected") {
    auto bad = [](double x) { return x > 1.0 ? INFINITY : 0.0; };
    CHECK_THROWS_AS(solve_semilinear(bad, conjugate(GeneratorSpec::quadratic()), 1.0, wide_grid(101)), ValidationError);
    CHECK_THROWS_AS(solve_semilinear(functions::constant(0.0), conjugate(GeneratorSpec::quadratic()), 0.0, wide_grid(101)),
                    ValidationError);
}

TEST_CASE("hopf_lax") {
    auto y = uniform_grid(-6.0, 6.0, 1e-5);
    auto g = GeneratorSpec::quadratic();
    CHECK(hopf_lax(functions::constant(2.5), g, 0.0, 0.0, y) == doctest::Approx(2.5));
    auto bump = functions::gaussian_bump();
    CHECK(hopf_lax(bump, g, 1.0, 0.3, y) == bump(0.3));
    double v = hopf_lax(bump, g, 0.0, 0.0, y);
    CHECK(std::abs(v - kHopfLaxBump) <= 1e-6);
    // Supremum property on the grid.
    for (std::size_t i = 0; i < y.size(); i += 997) CHECK(v >= bump(y[i]) - 0.5 * y[i] * y[i]);
    // Constrained drifts: sup over |y| <= 1.
    CHECK(hopf_lax(bump, GeneratorSpec::indicator(1.0), 0.0, 0.0, y) == doctest::Approx(1.0).epsilon(1e-9));
    CHECK_THROWS_AS(hopf_lax(bump, g, 0.0, 0.0, std::vector<double>{}), ValidationError);
}

TEST_CASE("hopf_lax with a constant time modulation equals the rescaled cost") {
    auto y = uniform_grid(-3.0, 3.0, 1e-3);
    auto bump = functions::gaussian_bump();
    auto tm = GeneratorSpec::time_modulated(GeneratorSpec::quadratic(), {0.0, 1.0}, {2.0, 2.0});
    double a = hopf_lax(bump, tm, 0.25, 0.1, y);
    double b = hopf_lax(bump, GeneratorSpec::quadratic(2.0), 0.25, 0.1, y);
    CHECK(a == doctest::Approx(b).epsilon(1e-9));
}

TEST_CASE("vanishing viscosity sweep") {
    SUBCASE("zero datum") {
        auto rep = vanishing_viscosity_sweep(functions::constant(0.0), GeneratorSpec::quadratic(), {1, 4, 16},
                                             wide_grid(241), {1e-3, 0.0});
        CHECK(rep.rows.size() == 3);
        for (const auto& r : rep.rows) CHECK(r.gap <= 1e-9);
    }
    SUBCASE("bump datum") {
        auto rep = vanishing_viscosity_sweep(functions::gaussian_bump(), GeneratorSpec::quadratic(),
                                             {64, 1, 2, 4, 8, 16, 32}, wide_grid());
        REQUIRE(rep.rows.size() == 7);
        CHECK(rep.rows.front().index == 1);
        CHECK(std::abs(rep.rows.front().prelimit - kRhoBump) <= 5e-4);
        CHECK(rep.rows.back().gap <= 5e-2);
        for (std::size_t i = 3; i < rep.rows.size(); ++i) CHECK(rep.rows[i].gap <= rep.rows[i - 1].gap);
    }
    SUBCASE("indicator generator") {
        auto rep = vanishing_viscosity_sweep(functions::gaussian_bump(), GeneratorSpec::indicator(1.0), {1, 4, 16, 64},
                                             wide_grid());
        CHECK(rep.rows.back().limit == doctest::Approx(1.0).epsilon(1e-9));
        CHECK(rep.rows.back().gap <= 1e-2 + 0.05);
    }
}

TEST_CASE("terminal mixtures over initial atoms") {
    auto bump = functions::gaussian_bump();
    auto gs = conjugate(GeneratorSpec::quadratic());
    auto grid = wide_grid();
    double single = rho_terminal_mixture(bump, gs, DiscreteMeasure::dirac(0.0), 1.0, grid);
    CHECK(single == solve_semilinear(bump, gs, 1.0, grid).value_at(0.0));

    auto even = functions::gaussian_bump(0.0, 1.0, 1.0);
    DiscreteMeasure sym({-1.0, 1.0}, {0.5, 0.5});
    auto fld = solve_semilinear(even, gs, 1.0, grid);
    CHECK(std::abs(fld.value_at(-1.0) - fld.value_at(1.0)) <= 1e-9);
    CHECK(rho_terminal_mixture(even, gs, sym, 1.0, grid) == doctest::Approx(fld.value_at(1.0)).epsilon(1e-12));

    DiscreteMeasure mix({0.0, 0.5}, {0.3, 0.7});
    CHECK(std::abs(rho_terminal_mixture(bump, gs, mix, 1.0, grid) - kMixtureBump) <= 5e-4);
    CHECK_THROWS_AS(rho_terminal_mixture(bump, gs, DiscreteMeasure::dirac(9.0), 1.0, grid), ValidationError);
}

TEST_CASE("property: comparison principle") {
    std::mt19937_64 rng(11);
    auto gs = conjugate(GeneratorSpec::power_law(1.5));
    for (int trial = 0; trial < 8; ++trial) {
        auto f1 = random_bumps(rng);
        auto f2 = functions::sum(f1, functions::gaussian_bump(0.0, 1.5, 0.3));  // f2 >= f1
        GridSpec grid = wide_grid(241);
        std::vector<double> t1(grid.nx), t2(grid.nx);
        for (int i = 0; i < grid.nx; ++i) {
            t1[i] = f1(grid.x(i));
            t2[i] = f2(grid.x(i));
        }
        // A common stable step count for both data.
        grid.nt = std::max(minimal_stable_nt(t1, gs, 0.5, grid), minimal_stable_nt(t2, gs, 0.5, grid));
        auto a = solve_semilinear(t1, gs, 0.5, grid);
        auto b = solve_semilinear(t2, gs, 0.5, grid);
        for (std::size_t k = 0; k < a.rows.size(); k += 17) {
            for (int i = 0; i < grid.nx; ++i) CHECK(a.rows[k][i] <= b.rows[k][i] + 1e-14);
        }
    }
}

TEST_CASE("property: cash invariance") {
    std::mt19937_64 rng(12);
    auto gs = conjugate(GeneratorSpec::quadratic());
    for (int trial = 0; trial < 5; ++trial) {
        auto f = random_bumps(rng);
        double c = std::uniform_real_distribution<double>(-3.0, 3.0)(rng);
        auto g = functions::sum(f, functions::constant(c));
        auto a = solve_semilinear(f, gs, 1.0, wide_grid(241));
        auto b = solve_semilinear(g, gs, 1.0, wide_grid(241));
        REQUIRE(a.cfl.nt == b.cfl.nt);
        for (int i = 0; i < 241; ++i) CHECK(std::abs(b.initial()[i] - a.initial()[i] - c) <= 1e-12);
    }
}

TEST_CASE("property: grid refinement stays within the discretization estimate") {
    auto gs = conjugate(GeneratorSpec::quadratic());
    auto bump = functions::gaussian_bump();
    GridSpec coarse = wide_grid(301);
    double est = discretization_estimate(bump, gs, 1.0, coarse);
    GridSpec fine = wide_grid(601);
    double change = std::abs(solve_semilinear(bump, gs, 1.0, fine).value_at(0.0) -
                             solve_semilinear(bump, gs, 1.0, coarse).value_at(0.0));
    CHECK(est > 0.0);
    CHECK(change < est);
}

TEST_CASE("grid json") {
    auto g = grid_from_json({{"x_min", -2}, {"x_max", 2}, {"nx", 41}, {"boundary", "one_sided_extrapolation"}});
    CHECK(g.boundary == Boundary::one_sided_extrapolation);
    CHECK(grid_from_json(to_json(g)).nx == 41);
    CHECK_THROWS_AS(grid_from_json({{"nx", 2}}), ValidationError);
    CHECK_THROWS_AS(grid_from_json({{"boundary", "periodic"}}), ValidationError);
}
