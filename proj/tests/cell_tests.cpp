#include <cmath>
#include <cstring>
#include <numbers>
#include <string>

#include <doctest.h>

#include "ergolab/cell.hpp"

using namespace ergolab;

namespace {
const Vec kZero = Vec::Zero();
HamiltonianModel pendulum() { return HamiltonianModel::make_mechanical(1, 2, 1.0); }
}  // namespace

TEST_CASE("free Hamiltonian is solved exactly with a flat corrector") {
    const auto m = HamiltonianModel::make_free(1);
    const auto g = TorusGrid::make_1d(128);
    const Vec p(0.7, 0.0);
    const auto sol = solve_cell(m, g, p, 0.1);
    CHECK(std::abs(sol.c - 0.245) < 1e-14);
    CHECK(max_abs(sol.u) < 1e-13);
    CHECK(sol.residual_linf < 1e-14);
    CHECK(cell_residual(m, p, 0.1, sol.u, sol.c) < 1e-14);
}

TEST_CASE("newton and parabolic marching agree on the cell constant") {
    const auto m = pendulum();
    const auto g = TorusGrid::make_1d(128);
    SUBCASE("eps 0.2, p 0") {
        const auto a = solve_cell(m, g, kZero, 0.2);
        const auto b = parabolic_march(m, g, kZero, 0.2);
        CHECK(std::abs(a.c - b.c) < 1e-6);
    }
    SUBCASE("eps 0.1, p 0.3") {
        const Vec p(0.3, 0.0);
        const auto a = solve_cell(m, g, p, 0.1);
        const auto b = parabolic_march(m, g, p, 0.1);
        CHECK(std::abs(a.c - b.c) < 1e-6);
    }
}

TEST_CASE("solution is pinned at the first node and has small residual") {
    const auto sol = solve_cell(pendulum(), TorusGrid::make_1d(256), Vec(0.4, 0.0), 0.15);
    CHECK(sol.u[0] == 0.0);
    CHECK(sol.residual_linf <= 1e-10);
    CHECK(sol.u.all_finite());
    CHECK(sol.iterations <= 60);
}

TEST_CASE("hopf-cole eigenvalue of the zero potential is zero") {
    const auto m = HamiltonianModel::make_mechanical(1, 2, 0.0);
    const auto hc = hopf_cole_eigenvalue(m, TorusGrid::make_1d(128), 0.2);
    CHECK(std::abs(hc.eigenvalue) < 1e-12);
    double spread = 0.0;
    for (std::size_t k = 1; k < hc.phi.size(); ++k)
        spread = std::max(spread, std::abs(hc.phi[k] - hc.phi[0]));
    CHECK(spread < 1e-10);
}

TEST_CASE("pendulum cell constant matches the eigenvalue oracle on one grid") {
    const auto m = pendulum();
    const auto g = TorusGrid::make_1d(512);
    const auto sol = solve_cell(m, g, kZero, 0.1);
    const auto hc = hopf_cole_eigenvalue(m, g, 0.1);
    // The two discretizations differ at O(h^2) with different constants.
    CHECK(std::abs(sol.c - hc.eigenvalue) < 2e-5);
}

TEST_CASE("mesh-peclet guard rejects under-resolved grids and names a fix") {
    const auto m = pendulum();
    const auto g = TorusGrid::make_1d(16);
    CHECK(mesh_peclet(m, g, kZero, 0.004) > 2.0);
    try {
        solve_cell(m, g, kZero, 0.004);
        FAIL("expected PreconditionError");
    } catch (const PreconditionError& e) {
        CHECK(std::string(e.what()).find("refine to at least N = ") != std::string::npos);
    }
}

TEST_CASE("eps must be positive") {
    CHECK_THROWS_AS(solve_cell(pendulum(), TorusGrid::make_1d(64), kZero, 0.0),
                    PreconditionError);
    CHECK_THROWS_AS(solve_cell(pendulum(), TorusGrid::make_1d(64), kZero, -0.1),
                    PreconditionError);
}

TEST_CASE("gradient bounds stay below the a-priori ceiling; growth is flagged") {
    // Halving eps from 0.4 to 0.1 genuinely steepens the corrector toward the
    // inviscid profile, so the >20% growth warning must fire ...
    const auto steep = bernstein_report(pendulum(), TorusGrid::make_1d(256), kZero,
                                        {0.4, 0.2, 0.1});
    REQUIRE(steep.entries.size() == 3);
    CHECK(steep.growth_flag);
    for (const auto& e : steep.entries) CHECK(e.grad_linf < 2.2);  // sup sqrt(2 V) = 2
    // ... while a narrow eps window stays within the 20% band.
    const auto flat = bernstein_report(pendulum(), TorusGrid::make_1d(256), kZero,
                                       {0.22, 0.2});
    CHECK_FALSE(flat.growth_flag);
}

TEST_CASE("shifting the potential table by one node shifts nothing but the phase") {
    const int n = 128;
    const auto g = TorusGrid::make_1d(n);
    GridField table(g, 1), shifted(g, 1);
    for (int i = 0; i < n; ++i)
        table[i] = 1.0 - std::cos(2.0 * std::numbers::pi * i / n);
    for (int i = 0; i < n; ++i) shifted[i] = table.at((i + 1) % n);
    const auto a = solve_cell(HamiltonianModel::make_tabulated(table), g, kZero, 0.2);
    const auto b = solve_cell(HamiltonianModel::make_tabulated(shifted), g, kZero, 0.2);
    CHECK(std::abs(a.c - b.c) < 1e-11);
}

TEST_CASE("solver options are validated") {
    SolverOptions bad;
    bad.damping = 1.5;
    CHECK_THROWS_AS(solve_cell(pendulum(), TorusGrid::make_1d(64), kZero, 0.2, bad),
                    ConfigError);
}

TEST_CASE("2d anisotropic model solves and keeps the free value at zero potential") {
    const auto m = HamiltonianModel::make_anisotropic_2d(1.0, 2.0, 0.0);
    const Vec p(0.3, 0.5);
    const auto sol = solve_cell(m, TorusGrid::make_2d(32, 32), p, 0.2);
    const double exact = 0.5 * (1.0 * p[0] * p[0] + 2.0 * p[1] * p[1]);
    CHECK(std::abs(sol.c - exact) < 1e-12);
    CHECK(max_abs(sol.u) < 1e-11);
}
