#include <cmath>
#include <sstream>

#include <doctest.h>

#include "ergolab/lp.hpp"

using namespace ergolab;

namespace {
const Vec kZero = Vec::Zero();
HamiltonianModel pendulum() { return HamiltonianModel::make_mechanical(1, 2, 1.0); }
}  // namespace

TEST_CASE("problem sizes follow from the grids") {
    const auto m = pendulum();
    const auto lp = HolonomicLP::build(m, TorusGrid::make_1d(16), {3.0, 9}, kZero, 0.0);
    CHECK(lp.num_variables() == 144);
    CHECK(lp.num_constraints() == 17);
    const auto big = HolonomicLP::build(m, TorusGrid::make_1d(64), {3.0, 33}, kZero, 0.0);
    CHECK(big.num_variables() == 2112);
    CHECK(big.num_constraints() == 65);
}

TEST_CASE("even velocity counts and undersized boxes are rejected") {
    const auto m = pendulum();
    CHECK_THROWS_AS(HolonomicLP::build(m, TorusGrid::make_1d(16), {3.0, 8}, kZero, 0.0),
                    ConfigError);
    CHECK_THROWS_AS(HolonomicLP::build(m, TorusGrid::make_1d(16), {1.0, 9}, kZero, 0.0),
                    ConfigError);
    CHECK(recommended_vradius(m, kZero) >= 2.0);
}

TEST_CASE("free model at p = 0 has value zero with mass at rest") {
    const auto m = HamiltonianModel::make_free(1);
    const auto lp = HolonomicLP::build(m, TorusGrid::make_1d(16), {1.0, 9}, kZero, 0.0);
    const auto res = solve_lp(lp);
    REQUIRE(res.status == LPStatus::optimal);
    CHECK(std::abs(res.value) < 1e-9);
    REQUIRE(res.measure.has_value());
    const double spread = measure_integrate(
        *res.measure, [](const Vec&, const Vec& v) { return v[0] * v[0]; });
    CHECK(spread < 1e-9);
}

TEST_CASE("free model at p = 0.7 reproduces minus half p squared") {
    const auto m = HamiltonianModel::make_free(1);
    const auto lp =
        HolonomicLP::build(m, TorusGrid::make_1d(16), {1.4, 9}, Vec(0.7, 0.0), 0.0);
    const auto res = solve_lp(lp);
    REQUIRE(res.status == LPStatus::optimal);
    CHECK(std::abs(res.value + 0.245) < 1e-9);
    const auto [dminus, dplus] = optimal_face_extremize(lp, res, Vec(1.0, 0.0));
    CHECK(std::abs(dminus - 0.7) < 1e-6);
    CHECK(std::abs(dplus - 0.7) < 1e-6);
}

TEST_CASE("pendulum at p = 0 sits at the bottom of the well") {
    const auto lp =
        HolonomicLP::build(pendulum(), TorusGrid::make_1d(32), {3.0, 17}, kZero, 0.0);
    const auto res = solve_lp(lp);
    REQUIRE(res.status == LPStatus::optimal);
    // Cost density L(x,v) >= 0 with equality only at (0,0), which is a node.
    CHECK(res.value >= -1e-10);
    CHECK(res.value < 1e-9);
}

TEST_CASE("face extremization is antisymmetric in the direction") {
    const auto lp =
        HolonomicLP::build(pendulum(), TorusGrid::make_1d(32), {3.0, 17}, kZero, 0.0);
    const auto res = solve_lp(lp);
    REQUIRE(res.status == LPStatus::optimal);
    const auto [am, ap] = optimal_face_extremize(lp, res, Vec(1.0, 0.0));
    const auto [bm, bp] = optimal_face_extremize(lp, res, Vec(-1.0, 0.0));
    CHECK(std::abs(ap + bm) < 1e-7);
    CHECK(std::abs(am + bp) < 1e-7);
    CHECK(am <= ap + 1e-12);
}

TEST_CASE("the dual certificate closes the gap") {
    const auto lp =
        HolonomicLP::build(pendulum(), TorusGrid::make_1d(32), {3.0, 33}, kZero, 0.2);
    const auto res = solve_lp(lp);
    REQUIRE(res.status == LPStatus::optimal);
    REQUIRE(static_cast<int>(res.dual_certificate.size()) == lp.num_constraints());
    CHECK(res.feasibility_residual <= 1e-9);
    CHECK(res.comp_slack_gap <= 1e-8);
    CHECK(res.iterations > 0);
}

TEST_CASE("lp value tracks the pde cell constant on a shared grid") {
    const auto gap = lp_vs_pde_gap(pendulum(), kZero, 0.2, TorusGrid::make_1d(32), {3.0, 33});
    CHECK(gap.gap == std::abs(gap.hbar_lp - gap.pde_c));
    CHECK(gap.gap < 1e-2);
}

TEST_CASE("scaled optimizers stay feasible for the scaled problem") {
    const auto m = pendulum();
    const auto g = TorusGrid::make_1d(32);
    const Vec p = kZero;
    const auto lp = HolonomicLP::build(m, g, {3.0, 33}, p, 0.2);
    const auto res = solve_lp(lp);
    REQUIRE(res.status == LPStatus::optimal);
    const auto scaled = scale_measure(*res.measure, 2.0);
    CHECK(holonomy_residual(scaled, scaled.eps()) < 1e-8);
    const auto lp2 = HolonomicLP::build(m, g, {6.0, 33}, p, 0.4);
    const auto res2 = solve_lp(lp2);
    REQUIRE(res2.status == LPStatus::optimal);
    const double cost = measure_integrate(scaled, [&](const Vec& x, const Vec& v) {
        return m.legendre(x, v).value - p.dot(v);
    });
    CHECK(cost >= res2.value - 1e-8);
}

TEST_CASE("text export lists the dimensions and equality senses") {
    const auto lp = HolonomicLP::build(pendulum(), TorusGrid::make_1d(16), {3.0, 9}, kZero, 0.0);
    std::ostringstream os;
    lp.export_text(os);
    const auto text = os.str();
    CHECK(text.find("variables 144") != std::string::npos);
    CHECK(text.find("constraints 17") != std::string::npos);
    CHECK(text.find("senses") != std::string::npos);
}
