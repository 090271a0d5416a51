#include <cmath>
#include <numbers>
#include <random>
#include <sstream>

#include <doctest.h>

#include "ergolab/grid.hpp"

using namespace ergolab;

namespace {

GridField sine_field(const TorusGrid& g, int k) {
    GridField f(g, 1);
    for (int i = 0; i < g.num_nodes(); ++i) {
        double s = 0.0;
        for (int a = 0; a < g.dim(); ++a)
            s += std::sin(2.0 * std::numbers::pi * k * g.coord(i, a));
        f[i] = s;
    }
    return f;
}

}  // namespace

TEST_CASE("index arithmetic wraps mod N on both axes") {
    const auto g = TorusGrid::make_2d(8, 12);
    CHECK(g.wrap(-1, 0) == 7);
    CHECK(g.wrap(8, 0) == 0);
    CHECK(g.wrap(-13, 1) == 11);
    CHECK(g.index_wrapped(-1, 12) == g.index(7, 0));
    CHECK(g.num_nodes() == 96);
    CHECK(g.cell_volume() == doctest::Approx(1.0 / 96).epsilon(1e-15));
}

TEST_CASE("integrate is exact for constants and mean-free sines") {
    const auto g = TorusGrid::make_1d(64);
    GridField one(g, 1, 3.5);
    CHECK(integrate(one) == doctest::Approx(3.5).epsilon(1e-15));
    CHECK(std::abs(integrate(sine_field(g, 3))) < 1e-14);
}

TEST_CASE("divergence is the exact negative transpose of gradient") {
    std::mt19937_64 rng(7);
    std::uniform_real_distribution<double> uni(-1.0, 1.0);
    for (const auto& g : {TorusGrid::make_1d(64), TorusGrid::make_2d(16, 24)}) {
        GridField phi(g, 1);
        GridField vec(g, g.dim());
        for (auto& v : phi.values()) v = uni(rng);
        for (auto& v : vec.values()) v = uni(rng);
        const double lhs = inner(phi, divergence(vec));
        const auto gp = gradient(phi);
        double rhs = 0.0;
        for (int c = 0; c < g.dim(); ++c) {
            GridField a(g, 1), b(g, 1);
            for (int i = 0; i < g.num_nodes(); ++i) {
                a[i] = gp.at(i, c);
                b[i] = vec.at(i, c);
            }
            rhs += inner(a, b);
        }
        CHECK(std::abs(lhs + rhs) < 1e-13);
    }
}

TEST_CASE("gradient and laplacian converge at second order") {
    auto err = [](int n) {
        const auto g = TorusGrid::make_1d(n);
        const auto f = sine_field(g, 1);
        const auto df = gradient(f);
        const auto lf = laplacian(f);
        const double w = 2.0 * std::numbers::pi;
        double e = 0.0;
        for (int i = 0; i < n; ++i) {
            const double x = g.coord(i, 0);
            e = std::max(e, std::abs(df.at(i, 0) - w * std::cos(w * x)));
            e = std::max(e, std::abs(lf[i] + w * w * std::sin(w * x)) / (w * w));
        }
        return e;
    };
    const double order = std::log2(err(32) / err(64));
    CHECK(order > 1.8);
    CHECK(order < 2.2);
}

TEST_CASE("sparse operators match the stencil evaluators") {
    const auto g = TorusGrid::make_2d(12, 10);
    GridField f(g, 1);
    std::mt19937_64 rng(11);
    std::uniform_real_distribution<double> uni(-1.0, 1.0);
    for (auto& v : f.values()) v = uni(rng);
    Eigen::Map<const Eigen::VectorXd> fv(f.values().data(), g.num_nodes());

    const auto grad = gradient(f);
    for (int a = 0; a < 2; ++a) {
        const Eigen::VectorXd gm = gradient_matrix(g, a) * fv;
        for (int i = 0; i < g.num_nodes(); ++i)
            CHECK(gm[i] == doctest::Approx(grad.at(i, a)).epsilon(1e-14));
    }
    const auto lap = laplacian(f);
    const Eigen::VectorXd lm = laplacian_matrix(g) * fv;
    for (int i = 0; i < g.num_nodes(); ++i)
        CHECK(lm[i] == doctest::Approx(lap[i]).epsilon(1e-13));
}

TEST_CASE("csv and json round trips reproduce fields bit for bit") {
    const auto g = TorusGrid::make_2d(8, 12);
    GridField f(g, 2);
    std::mt19937_64 rng(23);
    std::uniform_real_distribution<double> uni(-5.0, 5.0);
    for (auto& v : f.values()) v = uni(rng);

    std::stringstream ss;
    write_csv(f, ss);
    const std::string first = ss.str();
    const auto f2 = read_csv(ss);
    REQUIRE(f2.size() == f.size());
    for (std::size_t k = 0; k < f.size(); ++k) CHECK(f2[k] == f[k]);
    std::stringstream ss2;
    write_csv(f2, ss2);
    CHECK(ss2.str() == first);

    const auto f3 = field_from_json(to_json(f));
    REQUIRE(f3.size() == f.size());
    for (std::size_t k = 0; k < f.size(); ++k) CHECK(f3[k] == f[k]);
}

TEST_CASE("format_double round trips doubles exactly") {
    for (double v : {1.0 / 3.0, 0.1, -2.5e-17, 1e300, 0.0, 7.0, 6.25443e-5}) {
        CHECK(std::stod(format_double(v)) == v);
    }
}

TEST_CASE("pairwise sum is deterministic and accurate") {
    std::vector<double> xs(1 << 12);
    std::mt19937_64 rng(5);
    std::uniform_real_distribution<double> uni(0.0, 1.0);
    double naive = 0.0;
    for (auto& v : xs) {
        v = uni(rng);
        naive += v;
    }
    const double s1 = pairwise_sum(xs);
    const double s2 = pairwise_sum(xs);
    CHECK(s1 == s2);
    CHECK(std::abs(s1 - naive) < 1e-9 * std::abs(naive));
}

TEST_CASE("grid rejects invalid shapes") {
    CHECK_THROWS_AS(TorusGrid(3, {4, 4}), ConfigError);
    CHECK_THROWS_AS(TorusGrid(1, {0, 1}), ConfigError);
}
