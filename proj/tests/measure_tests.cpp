#include <cmath>
#include <vector>

#include <doctest.h>

#include "ergolab/measure.hpp"

using namespace ergolab;

namespace {
const Vec kZero = Vec::Zero();
HamiltonianModel pendulum() { return HamiltonianModel::make_mechanical(1, 2, 1.0); }

GraphMeasure pendulum_measure(int n = 256, double eps = 0.1) {
    const auto m = pendulum();
    const auto sol = solve_cell(m, TorusGrid::make_1d(n), kZero, eps);
    return invariant_density(m, sol);
}
}  // namespace

TEST_CASE("free invariant density is uniform with velocity p") {
    const auto m = HamiltonianModel::make_free(1);
    const Vec p(0.7, 0.0);
    const auto sol = solve_cell(m, TorusGrid::make_1d(128), p, 0.1);
    const auto mu = invariant_density(m, sol);
    for (std::size_t k = 0; k < mu.theta().size(); ++k)
        CHECK(std::abs(mu.theta()[k] - 1.0) < 1e-12);
    const double mean_v = measure_integrate(mu, [](const Vec&, const Vec& v) { return v[0]; });
    CHECK(std::abs(mean_v - 0.7) < 1e-12);
    CHECK(mu.clipped_mass() == 0.0);
}

TEST_CASE("invariant density integrates to one and satisfies holonomy") {
    const auto mu = pendulum_measure();
    const double mass = measure_integrate(mu, [](const Vec&, const Vec&) { return 1.0; });
    CHECK(std::abs(mass - 1.0) < 1e-13);
    CHECK(holonomy_residual(mu, mu.eps()) < 1e-10);
    CHECK(mu.clipped_mass() <= 1e-10);
}

TEST_CASE("uniform density with the pendulum drift is not invariant") {
    const auto mu = pendulum_measure();
    GridField uniform(mu.grid(), 1, 1.0);
    const GraphMeasure fake(uniform, mu.vfield_base(), mu.eps(), mu.p());
    CHECK(holonomy_residual(fake, fake.eps()) > 1e-2);
}

TEST_CASE("measure scaling is exact in floating point") {
    const auto mu = pendulum_measure();
    const double base = holonomy_residual(mu, mu.eps());
    for (double lam : {0.5, 2.0, 10.0}) {
        const auto nu = scale_measure(mu, lam);
        CHECK(nu.eps() == lam * mu.eps());
        CHECK(nu.velocity(37)[0] == lam * mu.velocity(37)[0]);
        const double scaled = holonomy_residual(nu, nu.eps());
        CHECK(scaled == lam * base);
    }
    const auto same = scale_measure(mu, 1.0);
    CHECK(same.eps() == mu.eps());
    CHECK(holonomy_residual(same, same.eps()) == base);
}

TEST_CASE("observables only ever see points on the support graph") {
    const auto mu = pendulum_measure();
    const auto& g = mu.grid();
    const double a = measure_integrate(mu, [](const Vec&, const Vec& v) { return v[0] * v[0]; });
    // Add a term that vanishes identically on the graph {(x, v(x))}.
    const double b = measure_integrate(mu, [&](const Vec& x, const Vec& v) {
        const int node = g.wrap(static_cast<int>(std::lround(x[0] * g.size(0))), 0);
        return v[0] * v[0] + 42.0 * (v[0] - mu.velocity(node)[0]);
    });
    CHECK(a == b);
}

TEST_CASE("uniform symmetric product measure is holonomic at eps zero") {
    const auto g = TorusGrid::make_1d(16);
    const int mv = 9;
    std::vector<double> w(16 * mv, 1.0 / (16 * mv));
    const ProductMeasure mu(g, 2.0, mv, w, 0.0);
    CHECK(mu.num_vnodes() == mv);
    CHECK(holonomy_residual(mu, 0.0) < 1e-12);
    const double mass = measure_integrate(mu, [](const Vec&, const Vec&) { return 1.0; });
    CHECK(std::abs(mass - 1.0) < 1e-13);
}

TEST_CASE("product measure scaling rescales velocities and eps together") {
    const auto g = TorusGrid::make_1d(16);
    std::vector<double> w(16 * 9, 1.0 / (16 * 9));
    const ProductMeasure mu(g, 2.0, 9, w, 0.1);
    const auto nu = scale_measure(mu, 2.0);
    CHECK(nu.radius() == 4.0);
    CHECK(nu.eps() == 0.2);
    CHECK(nu.velocity(3)[0] == 2.0 * mu.velocity(3)[0]);
    CHECK(nu.weights() == mu.weights());
}

TEST_CASE("product measure requires an odd velocity count") {
    const auto g = TorusGrid::make_1d(16);
    std::vector<double> w(16 * 8, 1.0 / (16 * 8));
    CHECK_THROWS_AS(ProductMeasure(g, 2.0, 8, w, 0.0), ConfigError);
}

TEST_CASE("support radius matches hand values on the catalog") {
    CHECK(support_radius(HamiltonianModel::make_free(1), 1.0, 0.0) ==
          doctest::Approx(1.0).epsilon(1e-12));
    CHECK(support_radius(pendulum(), 0.0, 2.0) == doctest::Approx(2.0).epsilon(1e-12));
    CHECK(support_radius(HamiltonianModel::make_drifted_quadratic(1.0, 1.0), 0.0, 2.0) ==
          doctest::Approx(3.0).epsilon(1e-12));
}
