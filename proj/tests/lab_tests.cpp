#include <algorithm>
#include <cmath>
#include <numbers>

#include <doctest.h>

#include "ergolab/lab.hpp"

using namespace ergolab;

namespace {
const Vec kZero = Vec::Zero();
HamiltonianModel pendulum() { return HamiltonianModel::make_mechanical(1, 2, 1.0); }
}  // namespace

TEST_CASE("the viscosity derivative vanishes for the free Hamiltonian") {
    const auto m = HamiltonianModel::make_free(1);
    const auto sol = solve_cell(m, TorusGrid::make_1d(128), Vec(0.4, 0.0), 0.1);
    const auto mu = invariant_density(m, sol);
    const auto rep = c_prime(m, sol, mu);
    CHECK(std::abs(rep.c_prime_formula_laplacian) < 1e-12);
    CHECK(std::abs(rep.c_prime_formula_lagrangian) < 1e-12);
    CHECK(std::abs(rep.c_prime_fd) < 1e-10);
}

TEST_CASE("both derivative formulas agree to round-off at nonzero p") {
    const auto m = pendulum();
    const auto sol = solve_cell(m, TorusGrid::make_1d(256), Vec(0.4, 0.0), 0.15);
    const auto mu = invariant_density(m, sol);
    const auto rep = c_prime(m, sol, mu);
    CHECK(rep.discrepancy_forms < 1e-11);
}

TEST_CASE("the derivative formula matches differentiating the eigenvalue oracle") {
    const auto m = pendulum();
    const auto g = TorusGrid::make_1d(512);
    const auto sol = solve_cell(m, g, kZero, 0.1);
    const auto mu = invariant_density(m, sol);
    const auto rep = c_prime(m, sol, mu);
    const double h = 1e-4;
    const double lam_p = hopf_cole_eigenvalue(m, g, 0.1 + h).eigenvalue;
    const double lam_m = hopf_cole_eigenvalue(m, g, 0.1 - h).eigenvalue;
    const double oracle = (lam_p - lam_m) / (2 * h);
    CHECK(std::abs(rep.c_prime_formula_laplacian - oracle) < 1e-4);
    // Mechanical sign law: c is non-increasing in eps.
    CHECK(rep.c_prime_formula_laplacian <= 1e-10);
}

TEST_CASE("semiconvexity holds and the bound scales quadratically in eta") {
    const auto rows = semiconvexity_probe(pendulum(), TorusGrid::make_1d(256), kZero, 0.2,
                                          {0.05, 0.025});
    REQUIRE(rows.size() == 2);
    for (const auto& r : rows) {
        CHECK(r.second_difference >= r.bound - 1e-8);
        CHECK(r.bound <= 0.0);
    }
    const double exponent = std::log2(rows[0].bound / rows[1].bound);
    CHECK(exponent > 1.8);
    CHECK(exponent < 2.2);
}

TEST_CASE("the free model has a flat viscosity rate") {
    const auto m = HamiltonianModel::make_mechanical(1, 2, 0.0);
    const auto fit = rate_probe(m, TorusGrid::make_1d(128), {0.5, 0.25});
    CHECK(fit.c0_reference == doctest::Approx(0.0).epsilon(1e-12));
    CHECK(fit.slope_bound < 1e-9);
    CHECK(fit.sandwich_ok);
}

TEST_CASE("the pendulum rate is sandwiched by its fitted slope") {
    const auto fit = rate_probe(pendulum(), TorusGrid::make_1d(256), {0.25, 0.125});
    REQUIRE(fit.c_values.size() == 2);
    CHECK(fit.sandwich_ok);
    CHECK(std::isfinite(fit.slope_bound));
    for (double c : fit.c_values) CHECK(c <= 1e-10);  // c(eps) <= c(0) = 0 at p = 0
}

TEST_CASE("the measure barycenter is the gradient of the effective Hamiltonian") {
    const auto m = HamiltonianModel::make_free(1);
    const auto free_rep = grad_hbar_eps(m, TorusGrid::make_1d(128), Vec(0.7, 0.0), 0.1);
    CHECK(std::abs(free_rep.gradient[0] - 0.7) < 1e-12);
    CHECK(free_rep.gap < 1e-9);

    const auto rep = grad_hbar_eps(pendulum(), TorusGrid::make_1d(256), kZero, 0.2);
    CHECK(std::abs(rep.gradient[0]) < 1e-8);  // even potential: Hbar is even in p
    CHECK(rep.gap < 1e-7);
}

TEST_CASE("the inviscid oracle knows the pendulum flat piece exactly") {
    const auto m = pendulum();
    const double pstar = 4.0 / std::numbers::pi;
    SUBCASE("flat half-width") {
        const auto iv = inviscid_oracle(m, 0.5);
        CHECK(std::abs(iv.flat_halfwidth - pstar) < 1e-9);
        CHECK(iv.hbar == 0.0);
        CHECK(iv.dhbar_dp == 0.0);
    }
    SUBCASE("outside the flat piece") {
        const auto iv = inviscid_oracle(m, 2.0);
        CHECK(iv.hbar > 0.0);
        CHECK(iv.dhbar_dp > 1.5);
        CHECK(iv.dhbar_dp < 2.5);
        const auto neg = inviscid_oracle(m, -2.0);
        CHECK(std::abs(neg.hbar - iv.hbar) < 1e-10);
        CHECK(std::abs(neg.dhbar_dp + iv.dhbar_dp) < 1e-10);
    }
    SUBCASE("zero potential") {
        const auto flat = inviscid_oracle(HamiltonianModel::make_mechanical(1, 2, 0.0), 1.0);
        CHECK(std::abs(flat.hbar - 0.5) < 1e-10);
        CHECK(std::abs(flat.flat_halfwidth) < 1e-12);
        CHECK(std::abs(flat.dhbar_dp - 1.0) < 1e-10);
    }
}

TEST_CASE("one-sided derivatives collapse to the classical slope when smooth") {
    const auto m = HamiltonianModel::make_free(1);
    const auto rep = one_sided_dhbar_inviscid(m, TorusGrid::make_1d(16), {1.4, 9},
                                              Vec(0.7, 0.0), Vec(1.0, 0.0));
    CHECK(std::abs(rep.dminus - 0.7) < 1e-6);
    CHECK(std::abs(rep.dplus - 0.7) < 1e-6);
    REQUIRE(rep.oracle_dhbar.has_value());
    CHECK(std::abs(*rep.oracle_dhbar - 0.7) < 1e-9);
}

TEST_CASE("the hessian integral bound is trivial for the free model") {
    const auto m = HamiltonianModel::make_free(1);
    const auto sol = solve_cell(m, TorusGrid::make_1d(128), Vec(0.3, 0.0), 0.1);
    const auto mu = invariant_density(m, sol);
    const auto hb = hessian_integral_bound(m, sol, mu);
    CHECK(hb.lhs < 1e-12);
    CHECK(hb.gamma == doctest::Approx(1.0).epsilon(1e-9));
    CHECK(hb.lhs <= hb.rhs);
}

TEST_CASE("the pendulum satisfies its own hessian bound with margin") {
    const auto m = pendulum();
    const auto sol = solve_cell(m, TorusGrid::make_1d(256), kZero, 0.2);
    const auto mu = invariant_density(m, sol);
    const auto hb = hessian_integral_bound(m, sol, mu);
    CHECK(hb.lhs > 0.0);
    CHECK(hb.lhs <= hb.rhs);
    // gamma = 1, n = 1, C = sup |V''| = 4 pi^2 for the unit pendulum.
    CHECK(hb.rhs == doctest::Approx(4.0 * std::numbers::pi * std::numbers::pi).epsilon(1e-2));
}

TEST_CASE("csv writers emit one header and one row per sample") {
    const auto m = pendulum();
    const auto g = TorusGrid::make_1d(128);
    std::vector<DerivativeReport> reps;
    for (double eps : {0.2, 0.4}) {
        const auto sol = solve_cell(m, g, kZero, eps);
        reps.push_back(c_prime(m, sol, invariant_density(m, sol)));
    }
    const auto text = derivative_csv(reps);
    CHECK(std::count(text.begin(), text.end(), '\n') == 3);
    CHECK(text.rfind("eps,", 0) == 0);
}
