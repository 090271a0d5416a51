#include <cmath>
#include <numbers>
#include <random>

#include <doctest.h>

#include "ergolab/model.hpp"

using namespace ergolab;

namespace {

std::vector<HamiltonianModel> catalog() {
    std::vector<HamiltonianModel> ms;
    ms.push_back(HamiltonianModel::make_free(1));
    ms.push_back(HamiltonianModel::make_free(2));
    ms.push_back(HamiltonianModel::make_mechanical(1, 2, 1.0));
    ms.push_back(HamiltonianModel::make_mechanical(1, 4, 0.5));
    ms.push_back(HamiltonianModel::make_drifted_quadratic(1.0, 1.0));
    ms.push_back(HamiltonianModel::make_anisotropic_2d(1.0, 2.5, 0.7));
    return ms;
}

Vec rand_vec(std::mt19937_64& rng, int dim, double r) {
    std::uniform_real_distribution<double> uni(-r, r);
    Vec v = Vec::Zero();
    for (int a = 0; a < dim; ++a) v[a] = uni(rng);
    return v;
}

}  // namespace

TEST_CASE("legendre transform satisfies the duality identity") {
    std::mt19937_64 rng(101);
    for (const auto& m : catalog()) {
        for (int t = 0; t < 200; ++t) {
            const Vec x = rand_vec(rng, m.dim(), 0.5) + Vec::Constant(0.5) * (m.dim() == 1 ? 1 : 1);
            const Vec v = rand_vec(rng, m.dim(), 2.0);
            const auto lv = m.legendre(x, v);
            // Definition: L = v.xi* - H(x, xi*) at the reported maximizer.
            CHECK(std::abs(lv.value - (v.dot(lv.argmax_xi) - m.eval_h(x, lv.argmax_xi))) <
                  1e-9 * (1.0 + std::abs(lv.value)));
            // Fenchel inequality against random competitors.
            for (int s = 0; s < 5; ++s) {
                const Vec xi = rand_vec(rng, m.dim(), 3.0);
                CHECK(v.dot(xi) - m.eval_h(x, xi) <= lv.value + 1e-9);
            }
            // First-order condition: v = D_xi H at the maximizer.
            CHECK((m.eval_dxi_h(x, lv.argmax_xi) - v).norm() < 1e-7);
        }
    }
}

TEST_CASE("legendre involution recovers the covector") {
    std::mt19937_64 rng(102);
    for (const auto& m : catalog()) {
        for (int t = 0; t < 100; ++t) {
            const Vec x = rand_vec(rng, m.dim(), 0.5);
            const Vec xi = rand_vec(rng, m.dim(), 2.0);
            const Vec v = m.eval_dxi_h(x, xi);
            const auto lv = m.legendre(x, v);
            CHECK((lv.argmax_xi - xi).norm() < 1e-6);
            CHECK((lv.dval_dv - xi).norm() < 1e-6);
        }
    }
}

TEST_CASE("analytic derivatives match finite differences") {
    std::mt19937_64 rng(103);
    const double h = 1e-5;
    for (const auto& m : catalog()) {
        for (int t = 0; t < 50; ++t) {
            const Vec x = rand_vec(rng, m.dim(), 0.5);
            const Vec xi = rand_vec(rng, m.dim(), 2.0);
            for (int a = 0; a < m.dim(); ++a) {
                Vec e = Vec::Zero();
                e[a] = h;
                const double dxi_fd = (m.eval_h(x, xi + e) - m.eval_h(x, xi - e)) / (2 * h);
                CHECK(std::abs(dxi_fd - m.eval_dxi_h(x, xi)[a]) < 1e-7);
                const double dx_fd = (m.eval_h(x + e, xi) - m.eval_h(x - e, xi)) / (2 * h);
                CHECK(std::abs(dx_fd - m.eval_dx_h(x, xi)[a]) < 1e-6);
            }
        }
    }
}

TEST_CASE("quartic legendre agrees with brute-force maximization") {
    const auto m = HamiltonianModel::make_mechanical(1, 4, 0.5);
    for (double v0 : {-1.7, -0.3, 0.0, 0.9, 2.4}) {
        const Vec x(0.31, 0.0);
        const Vec v(v0, 0.0);
        const auto lv = m.legendre(x, v);
        double best = -1e30;
        for (double xi = -5.0; xi <= 5.0; xi += 1e-4) {
            best = std::max(best, v0 * xi - m.eval_h(x, Vec(xi, 0.0)));
        }
        CHECK(std::abs(lv.value - best) < 1e-6);
    }
}

TEST_CASE("potential is normalized to min zero") {
    const auto m = HamiltonianModel::make_mechanical(1, 2, 1.0);
    CHECK(m.potential(Vec(0.0, 0.0)) == doctest::Approx(0.0).epsilon(1e-15));
    CHECK(m.potential(Vec(0.5, 0.0)) == doctest::Approx(2.0).epsilon(1e-12));
    double vmin = 1e30;
    for (int i = 0; i < 1000; ++i) vmin = std::min(vmin, m.potential(Vec(i / 1000.0, 0.0)));
    CHECK(vmin >= 0.0);
}

TEST_CASE("assumption report certifies the catalog") {
    for (const auto& m : catalog()) {
        // The superlinearity and growth margins are asymptotic statements; sample
        // far enough out that the kinetic term dominates every potential term.
        const auto rep = m.check_assumptions(8.0, 2000);
        CHECK(rep.h1_convexity_ok);
        CHECK(rep.h1_superlinearity_ok);
        CHECK(rep.h2_growth_ok);
        CHECK(rep.min_eig_dxixi_h > 0.0);
    }
}

TEST_CASE("model json round trip is stable") {
    for (const auto& m : catalog()) {
        const auto m2 = HamiltonianModel::from_json(m.to_json());
        CHECK(m2.to_json() == m.to_json());
        CHECK(m2.family() == m.family());
        CHECK(m2.dim() == m.dim());
        const Vec x(0.27, m.dim() == 2 ? 0.64 : 0.0);
        const Vec xi(1.3, m.dim() == 2 ? -0.4 : 0.0);
        CHECK(m2.eval_h(x, xi) == m.eval_h(x, xi));
    }
}

TEST_CASE("tabulated potential reproduces its sample values at nodes") {
    const int n = 256;
    GridField table(TorusGrid::make_1d(n), 1);
    for (int i = 0; i < n; ++i)
        table[i] = 1.0 - std::cos(2.0 * std::numbers::pi * i / n);
    const auto m = HamiltonianModel::make_tabulated(table);
    const auto ref = HamiltonianModel::make_mechanical(1, 2, 1.0);
    for (int i = 0; i < n; i += 17) {
        const Vec x(static_cast<double>(i) / n, 0.0);
        CHECK(std::abs(m.potential(x) - ref.potential(x)) < 1e-12);
    }
}

TEST_CASE("model rejects invalid parameters") {
    CHECK_THROWS_AS(HamiltonianModel::make_mechanical(1, 3, 1.0), ConfigError);
    CHECK_THROWS_AS(HamiltonianModel::make_free(3), ConfigError);
    CHECK_THROWS_AS(HamiltonianModel::from_json("{\"family\": \"nope\", \"dim\": 1}"),
                    ConfigError);
}
