#include "doctest.h"

#include "cfh/regularity.hpp"

using namespace cfh;

TEST_CASE("zygmund seminorm of affine functions vanishes") {
    auto dom = GridDomain::interval(-1.0, 1.0, 201);
    auto f = [](const std::array<double, 4>& x) { return cplx{3.0 * x[0] - 0.7, 0.0}; };
    auto rep = zygmund_seminorm(f, dom, 1.0);
    CHECK(rep.seminorm < 1e-12);
    CHECK_THROWS_AS(zygmund_seminorm(f, dom, 0.0), std::invalid_argument);
}

TEST_CASE("zygmund seminorm of |x| is 2, attained at the kink") {
    auto dom = GridDomain::interval(-1.0, 1.0, 201);  // even count of cells, node at 0
    auto f = [](const std::array<double, 4>& x) { return cplx{std::abs(x[0]), 0.0}; };
    auto rep = zygmund_seminorm(f, dom, 1.0);
    CHECK(rep.seminorm == doctest::Approx(2.0).epsilon(0.02));
    CHECK(std::abs(rep.argmax[0]) < 1e-12);
}

TEST_CASE("zygmund second difference of x^2 is exactly 2 h^2") {
    auto dom = GridDomain::interval(0.0, 1.0, 101);
    auto f = [](const std::array<double, 4>& x) { return cplx{x[0] * x[0], 0.0}; };
    auto rep = zygmund_seminorm(f, dom, 1.0);
    // ratio 2|h| attains its sup at the largest admissible step
    double hmax = 0;
    for (auto [s, v] : rep.per_scale) {
        hmax = std::max(hmax, s);
        CHECK(v == doctest::Approx(2 * s * s).epsilon(1e-9));
    }
    CHECK(rep.seminorm == doctest::Approx(2 * hmax).epsilon(1e-9));
    // estimate grows monotonically as the grid refines (sup over a growing set)
    auto coarse = zygmund_seminorm(f, GridDomain::interval(0.0, 1.0, 51), 1.0);
    CHECK(coarse.seminorm <= rep.seminorm + 1e-12);
}

TEST_CASE("zygmund seminorm scaling and subadditivity") {
    auto dom = GridDomain::interval(-1.0, 1.0, 151);
    auto f = [](const std::array<double, 4>& x) { return cplx{std::abs(x[0]), 0.0}; };
    auto g = [](const std::array<double, 4>& x) { return cplx{std::cos(3 * x[0]), 0.0}; };
    auto fg = [&](const std::array<double, 4>& x) { return f(x) + g(x); };
    auto lf = [&](const std::array<double, 4>& x) { return cplx{-2.5, 0.0} * f(x); };
    double sf = zygmund_seminorm(f, dom, 1.0).seminorm;
    double sg = zygmund_seminorm(g, dom, 1.0).seminorm;
    double sfg = zygmund_seminorm(fg, dom, 1.0).seminorm;
    double slf = zygmund_seminorm(lf, dom, 1.0).seminorm;
    CHECK(sfg <= sf + sg + 1e-10);
    CHECK(slf == doctest::Approx(2.5 * sf).epsilon(1e-12));
}

TEST_CASE("holder exponent fits") {
    auto dom = GridDomain::interval(-1.0, 1.0, 4097);
    std::vector<double> scales;
    for (int k = 1; k <= 10; ++k) scales.push_back(std::ldexp(1.0, -k));
    // |x| -> alpha = 1
    auto f = [](const std::array<double, 4>& x) { return cplx{std::abs(x[0]), 0.0}; };
    auto fit = holder_exponent_fit(f, dom, scales);
    CHECK(fit.alpha == doctest::Approx(1.0).epsilon(0.05));
    // Re sqrt(z) on a half-disc -> alpha = 0.5
    auto half = GridDomain::half_disc(1.0, 257);
    auto g = [](const std::array<double, 4>& x) {
        cplx z{x[0], x[1]};
        return cplx{std::sqrt(std::abs(z)) * std::cos(std::arg(z) / 2), 0.0};
    };
    std::vector<double> scales2;
    for (int k = 1; k <= 8; ++k) scales2.push_back(std::ldexp(1.0, -k));
    auto fit2 = holder_exponent_fit(g, half, scales2);
    CHECK(fit2.alpha == doctest::Approx(0.5).epsilon(0.1));
    // constant -> sentinel
    auto c = [](const std::array<double, 4>&) { return cplx{4.2, 0.0}; };
    auto fit3 = holder_exponent_fit(c, dom, scales);
    CHECK(fit3.sentinel);
    CHECK(std::isinf(fit3.alpha));
    CHECK_THROWS_AS(holder_exponent_fit(f, dom, {0.5, 0.25, 0.125}), std::invalid_argument);
}

TEST_CASE("branch utilities and the stein coefficient") {
    // arg in [0, 2pi): log(-eps) = ln(eps) + i pi
    double eps = 1e-3;
    auto L = branch::log02pi(cplx{-eps, 0.0});
    CHECK(L.real() == doctest::Approx(std::log(eps)));
    CHECK(L.imag() == doctest::Approx(kPi));
    // r = 0 coefficient at z1 = 1 - eps: 1/(ln eps + i pi)
    auto om = stein_form(2, 0.0);
    Pt z = pt();
    z[0] = cplx{1 - eps, 0.0};
    CompVals v;
    om.eval(z, v);
    cplx expect = 1.0 / cplx{std::log(eps), kPi};
    CHECK(std::abs(v[1](0, 0) - expect) < 1e-15);
    CHECK(std::abs(v[0](0, 0)) == 0.0);
    // coefficient -> 0 as z1 -> 1
    Pt z2 = pt();
    z2[0] = cplx{1 - 1e-7, 0.0};
    om.eval(z2, v);
    CHECK(std::abs(v[1](0, 0)) < 0.07);
    // branch locus excluded
    Pt bad = pt();
    bad[0] = cplx{1.5, 0.0};
    CHECK_THROWS_AS(om.eval(bad, v), std::domain_error);
    // dbar residual of the built form: closed-form zero, and the numerical
    // Wirtinger derivative of the coefficient vanishes to high order
    Pt w = pt();
    w[0] = cplx{0.3, 0.4};
    auto db = om.closed_dbar();
    CompVals dv;
    db.eval(w, dv);
    for (auto& m : dv) CHECK(m.norm_inf() == 0.0);
    auto coeff = [&](cplx z1) {
        Pt p = pt();
        p[0] = z1;
        CompVals vv;
        om.eval(p, vv);
        return vv[1](0, 0);
    };
    // Richardson-extrapolated central differences of the CR combination
    auto dzbar = [&](double h) {
        cplx dx = (coeff(w[0] + h) - coeff(w[0] - h)) / (2 * h);
        cplx dy = (coeff(w[0] + cplx{0, h}) - coeff(w[0] - cplx{0, h})) / (2 * h);
        return 0.5 * (dx + cplx{0, 1} * dy);
    };
    cplx d1 = dzbar(1e-2), d2 = dzbar(5e-3);
    cplx rich = (4.0 * d2 - d1) / 3.0;
    CHECK(std::abs(rich) <= 1e-10);
}

TEST_CASE("stein sharpness diagnostic verdicts and ratio band") {
    std::vector<double> eps;
    for (int j = 6; j <= 20; ++j) eps.push_back(std::ldexp(1.0, -j));
    auto d = stein_sharpness_diagnostic(0.0, eps);
    REQUIRE(d.eps.size() == eps.size());
    // measured against the asymptotic prediction: ratio in [0.8, 1.2] for eps <= 2^-10
    for (std::size_t i = 0; i < d.eps.size(); ++i) {
        if (d.eps[i] > std::ldexp(1.0, -10) * 1.0001) continue;
        double ratio = d.F[i] / d.predicted[i];
        CAPTURE(d.eps[i]);
        CHECK(ratio >= 0.8);
        CHECK(ratio <= 1.2);
    }
    CHECK(d.verdict.at(0.6) == "growth");
    CHECK(d.verdict.at(0.4) == "decay");
    // verdicts match the closed-form asymptotics for r in {0, 0.5, 1}
    for (double r : {0.5, 1.0}) {
        auto dr = stein_sharpness_diagnostic(r, eps);
        CAPTURE(r);
        CHECK(dr.verdict.at(0.6) == "growth");
        CHECK(dr.verdict.at(0.4) == "decay");
    }
    // eps below 1e-8 rejected
    CHECK_THROWS_AS(stein_sharpness_diagnostic(0.0, {1e-9}), std::invalid_argument);
    // csv carries verdict rows
    CHECK(d.csv().find("verdict,alpha=") != std::string::npos);
}
