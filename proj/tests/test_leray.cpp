#include "doctest.h"

#include "cfh/configuration.hpp"
#include "cfh/leray.hpp"

using namespace cfh;

TEST_CASE("leray pairing basics") {
    auto cfg = build_convex_config(2, 1, {}, 0.3);
    // g2 at z=0, zeta=(r2,0): pairing = r2^2
    Pt z = pt(), zeta = pt();
    zeta[0] = cplx{0.3, 0.0};
    CHECK(std::abs(cfg.map_g2().pairing(z, zeta) - cplx{0.09, 0.0}) < 1e-15);
    // g0: pairing = -|zeta - z|^2
    Pt a = pt(), b = pt();
    a[0] = cplx{0.1, -0.2};
    b[0] = cplx{-0.3, 0.4};
    b[1] = cplx{0.05, 0.0};
    double d2 = 0;
    for (int j = 0; j < 2; ++j) d2 += std::norm(b[j] - a[j]);
    CHECK(std::abs(cfg.map_g0().pairing(a, b) - cplx{-d2, 0.0}) < 1e-15);
}

TEST_CASE("convex g1 pairing example from the quadric") {
    auto cfg = build_convex_config(2, 1, {}, 0.3);
    double eps = 0.05;
    Pt z = pt(), zeta = pt();
    zeta[1] = cplx{0.0, eps};
    cplx p = cfg.map_g1().pairing(z, zeta);
    CHECK(2 * p.real() == doctest::Approx(-eps + 2 * eps * eps).epsilon(1e-13));
    double rhs = cfg.rho1().eval(zeta) - cfg.rho1().eval(z) + 0.5 * eps * eps;
    CHECK(rhs == doctest::Approx(-eps + 1.5 * eps * eps).epsilon(1e-13));
    CHECK(2 * p.real() >= rhs);
}

TEST_CASE("W1-dist slack nonnegative on samples") {
    auto cfg = build_convex_config(2, 1, {}, 0.3);
    auto rep = bound_check("W1-dist", cfg, 2000, 17);
    CHECK(rep.ok);
    CHECK(rep.min_slack >= 0.0);
    auto cfg3 = build_convex_config(3, 2, {-0.2}, 0.3);
    auto rep3 = bound_check("W1-dist", cfg3, 2000, 18);
    CHECK(rep3.ok);
}

TEST_CASE("HH identity is exact for g3") {
    auto cfg = build_concave_config(4, 1, {0.1}, 0.8, 0.15);
    auto rep = bound_check("HH", cfg, 10000, 23);
    CHECK(rep.ok);
    CHECK(rep.max_deviation <= 1e-12);
}

TEST_CASE("concave g1 inequality with probed constant") {
    auto cfg = build_concave_config(4, 1, {0.1}, 0.8, 0.15);
    auto rep = bound_check("W1s-dist", cfg, 4000, 29);
    CHECK(rep.ok);
    CHECK(rep.probed_constant <= 4.0 / 3.0 + 1e-9);
    // stable under resampling
    auto rep2 = bound_check("W1s-dist", cfg, 4000, 31);
    CHECK(rep2.probed_constant == doctest::Approx(rep.probed_constant).epsilon(0.2));
}

TEST_CASE("giest lower bounds hold on the convex configuration") {
    auto cfg = build_convex_config(2, 1, {}, 0.3);
    for (std::string which : {"giest0", "giest1", "giest2"}) {
        auto rep = bound_check(which, cfg, 500, 37);
        CHECK(rep.ok);
        CHECK(rep.probed_constant < 50.0);
    }
}

TEST_CASE("g3theta margin on the shrunken domain") {
    auto cfg = build_concave_config(4, 1, {0.1}, 0.8, 0.15);
    auto rep = bound_check("g3theta", cfg, 300, 41);
    CHECK(rep.ok);
    CHECK(rep.min_slack >= 0.0);
}

TEST_CASE("holomorphy structure flags") {
    auto cfg = build_concave_config(4, 1, {0.1}, 0.8, 0.15);
    CHECK(cfg.map_g2().independent_of_zbar());  // g2 = zetabar only
    CHECK_FALSE(cfg.map_g1().independent_of_zbar());
    CHECK(LerayMap::g3_hat(4, 1).independent_of_zbar());
}

TEST_CASE("custom map uses Richardson finite differences") {
    auto m = LerayMap::custom(2, [](const Pt& z, const Pt& zeta, cplx* g) {
        g[0] = std::conj(z[0]) * std::conj(z[0]) - std::conj(zeta[0]);
        g[1] = std::conj(z[1] - zeta[1]);
    });
    Pt z = pt(), zeta = pt();
    z[0] = cplx{0.3, -0.1};
    zeta[0] = cplx{-0.2, 0.4};
    // d g_0 / d x_0 (z): d/dx conj(z0)^2 = 2 conj(z0)
    cplx d = m.deriv_z(z, zeta, 0, 0);
    CHECK(std::abs(d - 2.0 * std::conj(z[0])) < 1e-9);
    // d g_0 / d y_0 (z) = -2i conj(z0)
    cplx dy = m.deriv_z(z, zeta, 0, 1);
    CHECK(std::abs(dy - cplx{0, -2} * std::conj(z[0])) < 1e-9);
}
