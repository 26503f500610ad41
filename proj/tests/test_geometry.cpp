#include "doctest.h"

#include "cfh/configuration.hpp"
#include "cfh/geometry.hpp"

using namespace cfh;

TEST_CASE("convex rho1 quadric values") {
    // n=2, q=1, no lambda terms, R == 0: rho1(0, it) = -t + t^2
    auto cfg = build_convex_config(2, 1, {}, 0.3);
    Pt z = pt();
    z[1] = cplx{0.0, 0.1};
    CHECK(cfg.rho1().eval(z) == doctest::Approx(-0.09).epsilon(1e-14));
    // rho2((r2,0)) = 0 on the sphere
    Pt b = pt();
    b[0] = cplx{0.3, 0.0};
    CHECK(cfg.rho2().eval(b) == doctest::Approx(0.0).epsilon(1e-15));
}

TEST_CASE("lambda bound is strict") {
    CHECK_THROWS_AS(build_convex_config(3, 2, {0.3}, 0.3), std::invalid_argument);
    CHECK_THROWS_AS(build_convex_config(3, 2, {0.25}, 0.3), std::invalid_argument);
    CHECK_NOTHROW(build_convex_config(3, 2, {0.2}, 0.3));
    CHECK_THROWS_AS(build_convex_config(3, 3, {0.1, 0.1}, 0.3), std::invalid_argument);
}

TEST_CASE("concave configuration values") {
    auto cfg = build_concave_config(4, 1, {0.0}, 0.8, 0.15);
    // rho1(0,0,it,0) = -t - t^2 < 0 for t > 0 (interior along the concave direction)
    Pt z = pt();
    z[2] = cplx{0.0, 0.2};
    CHECK(cfg.rho1().eval(z) == doctest::Approx(-0.2 - 0.04).epsilon(1e-14));
    // rho3(0) = -r3^2 < 0, so 0 in D3
    Pt zero = pt();
    CHECK(cfg.rho3().eval(zero) == doctest::Approx(-0.15 * 0.15).epsilon(1e-14));
    // q > n-3 rejected
    CHECK_THROWS_AS(build_concave_config(4, 2, {}, 0.8, 0.15), std::invalid_argument);
    // r3 >= r2/C_n rejected
    CHECK_THROWS_AS(build_concave_config(4, 1, {0.0}, 0.8, 0.25), std::invalid_argument);
}

TEST_CASE("gradients match finite differences at random interior points") {
    Rng rng(7);
    auto check_grad = [&](const DefiningFunction& rho, int n) {
        for (int s = 0; s < 20; ++s) {
            Pt z = pt();
            for (int j = 0; j < n; ++j) z[j] = rng.uniform_complex(0.2);
            double g[8];
            rho.gradient(z, g);
            const double h = 1e-5;
            for (int r = 0; r < 2 * n; ++r) {
                Pt zp = z, zm = z;
                set_real_coord(zp, r, real_coord(z, r) + h);
                set_real_coord(zm, r, real_coord(z, r) - h);
                double fd = (rho.eval(zp) - rho.eval(zm)) / (2 * h);
                CHECK(g[r] == doctest::Approx(fd).epsilon(1e-7));
            }
        }
    };
    auto cvx = build_convex_config(3, 2, {-0.2}, 0.3);
    check_grad(cvx.rho1(), 3);
    check_grad(cvx.rho2(), 3);
    auto ccv = build_concave_config(4, 1, {0.1}, 0.8, 0.15);
    check_grad(ccv.rho1(), 4);
    check_grad(ccv.rho3(), 4);
}

TEST_CASE("shrink scales radii and keeps D1") {
    auto cfg = build_convex_config(2, 1, {}, 1.0);
    auto s = cfg.shrink(0.25);
    CHECK(s.r2 == doctest::Approx(0.75).epsilon(1e-15));
    CHECK_THROWS_AS(cfg.shrink(0.0), std::invalid_argument);
    Pt z = pt();
    z[1] = cplx{0.0, 0.1};
    CHECK(s.rho1().eval(z) == doctest::Approx(cfg.rho1().eval(z)).epsilon(1e-15));
}

TEST_CASE("shrink schedule telescopes to r0/2") {
    ShrinkSchedule sch{1.0};
    // closed form agrees with the recurrence
    double r = sch.r0;
    for (int k = 0; k < 40; ++k) {
        CHECK(sch.radius(k) == doctest::Approx(r).epsilon(1e-14));
        CHECK(sch.radius(k) > sch.limit());
        if (k) CHECK(sch.radius(k) < sch.radius(k - 1));
        r *= 1.0 - sch.theta(k);
    }
    CHECK(sch.radius(4000) == doctest::Approx(0.5).epsilon(1e-4));
    CHECK(sch.limit() == doctest::Approx(0.5).epsilon(1e-15));
}

TEST_CASE("transversality gram determinant healthy on canonical configs") {
    auto cvx = build_convex_config(2, 1, {}, 0.3);
    CHECK(min_corner_gram(cvx, 40, 5) > 1e-6);
    auto ccv = build_concave_config(4, 1, {0.1}, 0.8, 0.15);
    CHECK(min_corner_gram(ccv, 25, 5) > 1e-6);
}

TEST_CASE("transversality radius probe returns a positive radius") {
    auto rho1 = DefiningFunction::convex_rho1(2, 1, {});
    double r = probe_transversality_radius(rho1, 0.9, 1e-6, 25, 11);
    CHECK(r > 0.05);
}

TEST_CASE("configuration JSON round trip") {
    auto cfg = build_concave_config(4, 1, {0.1}, 0.8, 0.15);
    auto text = cfg.to_json();
    auto back = Configuration::from_json(text);
    CHECK(back.n == 4);
    CHECK(back.q == 1);
    CHECK(back.r2 == doctest::Approx(0.8));
    CHECK(back.r3 == doctest::Approx(0.15));
    CHECK(back.lambdas.size() == 1);
}

TEST_CASE("remainder smallness probe") {
    Rng rng(3);
    Remainder ok{[](const Pt& z, int n) {
                     double s = 0;
                     for (int j = 0; j < n; ++j) s += std::norm(z[j]);
                     return s * std::sqrt(s);  // |z|^3 = o(|z|^2)
                 },
                 nullptr};
    CHECK(remainder_is_small(ok, 2, 0.5, rng));
    Remainder bad{[](const Pt& z, int) { return std::abs(z[0]); }, nullptr};  // |z1| is not o(|z|^2)
    Rng rng2(3);
    CHECK_FALSE(remainder_is_small(bad, 2, 0.5, rng2));
}
