#include "doctest.h"

#include "cfh/forms.hpp"
#include "fixtures.hpp"

using namespace cfh;
using namespace cfh::fixtures;

namespace {

// brute-force wedge oracle on explicit index expansions (independent of the
// implementation path in forms.cpp)
Mat oracle_wedge_coeff(const FormField& a, const FormField& b, const Pt& z,
                       const std::vector<int>& K) {
    CompVals va, vb;
    a.eval(z, va);
    b.eval(z, vb);
    const int n = a.n(), qa = a.q(), qb = b.q();
    Mat acc(a.k0());
    // expand over all ordered index tuples
    std::vector<int> merged;
    for (int ra = 0; ra < binom(n, qa); ++ra) {
        auto Ja = comb_unrank(n, qa, ra);
        for (int rb = 0; rb < binom(n, qb); ++rb) {
            auto Jb = comb_unrank(n, qb, rb);
            int s = merge_sign(Ja, Jb, merged);
            if (!s || merged != K) continue;
            Mat t = va[ra] * vb[rb];
            if (s < 0) t = t * cplx{-1.0, 0.0};
            acc += t;
        }
    }
    return acc;
}

Pt test_point() {
    Pt z = pt();
    z[0] = cplx{0.21, -0.13};
    z[1] = cplx{-0.07, 0.19};
    return z;
}

}  // namespace

TEST_CASE("wedge basics: dzb1^dzb1 = 0 and antisymmetry") {
    auto a = const_dzbar(2, 0);
    auto b = const_dzbar(2, 0);
    auto w = wedge(a, b);
    CHECK(w.value(test_point()).norm_inf() == doctest::Approx(0.0));
    auto c = const_dzbar(2, 1);
    auto w2 = wedge(a, c);        // dzb1 ^ dzb2
    auto w3 = wedge(c, a);        // dzb2 ^ dzb1 = -dzb1 ^ dzb2
    CompVals v2, v3;
    w2.eval(test_point(), v2);
    w3.eval(test_point(), v3);
    CHECK(std::abs(v2[0](0, 0) - cplx{1.0, 0.0}) < 1e-15);
    CHECK(std::abs(v3[0](0, 0) + cplx{1.0, 0.0}) < 1e-15);
}

TEST_CASE("matrix self-wedge gives the commutator coefficient") {
    // a = M dzb1 + N dzb2, a ^ a = (MN - NM) dzb1^dzb2
    int k0 = 2;
    Mat M(k0), N(k0);
    M(0, 0) = 1;
    M(0, 1) = 2;
    M(1, 0) = cplx{0, 1};
    N(0, 1) = cplx{3, -1};
    N(1, 1) = 2;
    auto a = FormField::closed(2, 1, k0, [M, N](const Pt&, CompVals& out) {
        out = {M, N};
    });
    auto w = wedge(a, a);
    CompVals v;
    w.eval(test_point(), v);
    Mat expect = M * N - N * M;
    Mat diff = v[0] - expect;
    CHECK(diff.norm_inf() < 1e-14);
    // against the brute-force oracle as well
    Mat oracle = oracle_wedge_coeff(a, a, test_point(), {0, 1});
    CHECK((v[0] - oracle).norm_inf() < 1e-14);
}

TEST_CASE("wedge is associative and bilinear on random fields (oracle)") {
    Rng rng(71);
    int n = 3;
    auto rnd_field = [&](int q) {
        std::vector<Mat> coefs(binom(n, q), Mat(2));
        for (auto& m : coefs)
            for (int i = 0; i < 2; ++i)
                for (int j = 0; j < 2; ++j) m(i, j) = rng.uniform_complex(1.0);
        return FormField::closed(n, q, 2, [coefs](const Pt&, CompVals& out) { out = coefs; });
    };
    auto a = rnd_field(1), b = rnd_field(1), c = rnd_field(1);
    auto lhs = wedge(wedge(a, b), c);
    auto rhs = wedge(a, wedge(b, c));
    Pt z = test_point();
    CompVals vl, vr;
    lhs.eval(z, vl);
    rhs.eval(z, vr);
    for (std::size_t i = 0; i < vl.size(); ++i) CHECK((vl[i] - vr[i]).norm_inf() < 1e-13);
    // oracle on the (0,2) pieces
    auto ab = wedge(a, b);
    for (int rk = 0; rk < binom(n, 2); ++rk) {
        CompVals v;
        ab.eval(z, v);
        Mat oracle = oracle_wedge_coeff(a, b, z, comb_unrank(n, 2, rk));
        CHECK((v[rk] - oracle).norm_inf() < 1e-13);
    }
}

TEST_CASE("dbar closed form on basic fields") {
    // f = zb1 -> dzb1 ; f = z1 -> 0 ; f = |z1|^2 -> z1 dzb1
    auto zb1 = scalar_function(2, [](const Pt& z) { return std::conj(z[0]); },
                               [](const Pt&, int j) { return j == 0 ? cplx{1, 0} : cplx{}; });
    auto d = dbar(zb1, DbarMode::closed_form);
    CompVals v;
    d.eval(test_point(), v);
    CHECK(std::abs(v[0](0, 0) - cplx{1, 0}) < 1e-15);
    CHECK(std::abs(v[1](0, 0)) < 1e-15);

    auto hol = scalar_function(2, [](const Pt& z) { return z[0]; },
                               [](const Pt&, int) { return cplx{}; });
    CHECK(dbar(hol, DbarMode::closed_form).value(test_point()).norm_inf() == doctest::Approx(0.0));

    auto sq = scalar_function(2, [](const Pt& z) { return std::norm(z[0]); },
                              [](const Pt& z, int j) { return j == 0 ? z[0] : cplx{}; });
    // finite differences agree to O(h^2)
    Pt z = test_point();
    auto fd1 = dbar(sq, DbarMode::finite_difference, 2e-3);
    auto fd2 = dbar(sq, DbarMode::finite_difference, 1e-3);
    CompVals c1, c2, cc;
    fd1.eval(z, c1);
    fd2.eval(z, c2);
    dbar(sq, DbarMode::closed_form).eval(z, cc);
    double e1 = std::abs(c1[0](0, 0) - cc[0](0, 0));
    double e2 = std::abs(c2[0](0, 0) - cc[0](0, 0));
    CHECK(e1 < 1e-5);
    CHECK(std::abs(c1[0](0, 0) - z[0]) < 1e-5);
    if (e2 > 1e-14) CHECK(e1 / e2 > 3.0);
}

TEST_CASE("dbar of dbar = 0") {
    auto f = scalar_function(2, [](const Pt& z) { return std::norm(z[0]) * std::conj(z[1]); },
                             nullptr);
    auto dd = dbar(dbar(f, DbarMode::finite_difference, 1e-3), DbarMode::finite_difference, 1e-3);
    CHECK(dd.value(test_point()).norm_inf() < 1e-6);
}

TEST_CASE("gauge transform identities") {
    int n = 2;
    // A == I keeps omega
    auto omega = one_form(n, [](const Pt& z, int j) { return j == 0 ? std::conj(z[1]) : cplx{}; },
                          [](const Pt&, int j, int m) { return (j == 0 && m == 1) ? cplx{1, 0} : cplx{}; });
    auto id = GaugeMatrix::identity(n, 1);
    auto same = gauge_transform(omega, id);
    Pt z = test_point();
    CompVals a, b;
    omega.eval(z, a);
    same.eval(z, b);
    for (int j = 0; j < n; ++j) CHECK(std::abs(a[j](0, 0) - b[j](0, 0)) < 1e-14);

    // omega = 0, A = e^{zb1}: result = dzb1
    GaugeMatrix A;
    A.n = n;
    A.k0 = 1;
    A.eval = [](const Pt& z) {
        Mat m(1);
        m(0, 0) = std::exp(std::conj(z[0]));
        return m;
    };
    A.dbar = [](const Pt& z, std::vector<Mat>& out) {
        out.assign(2, Mat(1));
        out[0](0, 0) = std::exp(std::conj(z[0]));
    };
    auto res = gauge_transform(FormField::zero(n, 1, 1), A);
    CompVals v;
    res.eval(z, v);
    CHECK(std::abs(v[0](0, 0) - cplx{1, 0}) < 1e-13);
    CHECK(std::abs(v[1](0, 0)) < 1e-13);

    // holomorphic A conjugates: A = diag(1, exp(z1)) with dbar A = 0
    GaugeMatrix H;
    H.n = n;
    H.k0 = 2;
    H.eval = [](const Pt& z) {
        Mat m(2);
        m(0, 0) = 1;
        m(1, 1) = std::exp(z[0]);
        m(0, 1) = z[1];
        return m;
    };
    H.dbar = [](const Pt&, std::vector<Mat>& out) { out.assign(2, Mat(2)); };
    Mat M0(2);
    M0(0, 1) = 1;
    M0(1, 0) = cplx{0, 2};
    auto om2 = FormField::constant(n, 1, 2, {0}, M0);
    auto tr = gauge_transform(om2, H);
    CompVals w;
    tr.eval(z, w);
    Mat expect = H.eval(z) * M0 * H.eval(z).inverse();
    CHECK((w[0] - expect).norm_inf() < 1e-12);
}

TEST_CASE("gauge cocycle: (B after A) equals BA") {
    int n = 2;
    auto omega = one_form(n, [](const Pt& z, int j) { return j == 1 ? z[0] * std::conj(z[0]) : cplx{}; },
                          nullptr);
    GaugeMatrix A, B, BA;
    A.n = B.n = BA.n = n;
    A.k0 = B.k0 = BA.k0 = 1;
    A.eval = [](const Pt& z) {
        Mat m(1);
        m(0, 0) = std::exp(std::conj(z[0]) * 0.3);
        return m;
    };
    B.eval = [](const Pt& z) {
        Mat m(1);
        m(0, 0) = 1.0 + 0.2 * std::conj(z[1]);
        return m;
    };
    BA.eval = [A, B](const Pt& z) { return B.eval(z) * A.eval(z); };
    double h = 1e-3;
    auto two = gauge_transform(gauge_transform(omega, A, h), B, h);
    auto one = gauge_transform(omega, BA, h);
    Pt z = test_point();
    CompVals u, v;
    two.eval(z, u);
    one.eval(z, v);
    for (int j = 0; j < n; ++j) CHECK(std::abs(u[j](0, 0) - v[j](0, 0)) < 1e-5);
}

TEST_CASE("integrability residual examples") {
    int n = 2;
    std::vector<Pt> probes = {test_point()};
    // omega = dbar u for scalar u -> residual ~ 0
    auto u = scalar_function(n, [](const Pt& z) { return std::conj(z[0]) * z[1] * std::conj(z[1]); },
                             nullptr);
    auto om = dbar(u, DbarMode::finite_difference, 1e-3);
    auto [rep, field] = integrability_residual(om, 1e-3, probes);
    CHECK(rep.norm < 1e-5);
    (void)field;

    // omega = zb2 dzb1: residual norm 1 (coefficient of dzb1^dzb2 is -1)
    auto bad = one_form(n, [](const Pt& z, int j) { return j == 0 ? std::conj(z[1]) : cplx{}; },
                        [](const Pt&, int j, int m) { return (j == 0 && m == 1) ? cplx{1, 0} : cplx{}; });
    auto [rep2, f2] = integrability_residual(bad, 1e-3, probes, DbarMode::closed_form);
    CHECK(rep2.norm == doctest::Approx(1.0).epsilon(1e-10));
    (void)f2;

    // omega = (dbar A) A^{-1} for k0=2 smooth A: residual near 0 (db2=0 echo)
    GaugeMatrix A;
    A.n = n;
    A.k0 = 2;
    A.eval = [](const Pt& z) {
        Mat m(2);
        m(0, 0) = 1.0 + 0.3 * std::conj(z[0]);
        m(0, 1) = 0.2 * std::conj(z[1]) * std::conj(z[1]);
        m(1, 0) = 0.1 * std::conj(z[0] * z[1]);
        m(1, 1) = 1.0;
        return m;
    };
    auto omA = gauge_transform(FormField::zero(n, 1, 2), A, 1e-3);
    auto [rep3, f3] = integrability_residual(omA, 1e-3, probes);
    CHECK(rep3.norm < 2e-5);
    (void)f3;
}

TEST_CASE("conjugation identity residual is O(h^2)") {
    int n = 2;
    std::vector<Pt> probes = {test_point()};
    auto omega = FormField::closed(n, 1, 2, [](const Pt& z, CompVals& out) {
        out.assign(2, Mat(2));
        out[0](0, 0) = std::exp(0.5 * std::conj(z[1]));
        out[0](0, 1) = 0.4 * std::conj(z[0]) * std::conj(z[0]);
        out[0](1, 0) = z[0];
        out[1](1, 1) = std::sin(std::conj(z[0]).real()) + std::conj(z[0]) * std::conj(z[1]);
    });
    GaugeMatrix A;
    A.n = n;
    A.k0 = 2;
    A.eval = [](const Pt& z) {
        Mat m(2);
        m(0, 0) = std::exp(0.3 * std::conj(z[0]) + 0.1 * std::conj(z[1]) * std::conj(z[1]));
        m(0, 1) = 0.2 * std::conj(z[1]) * std::conj(z[0]);
        m(1, 0) = 0.1 * std::exp(0.4 * std::conj(z[1]));
        m(1, 1) = 1.0 + 0.1 * std::conj(z[0]) * std::conj(z[0]) * std::conj(z[1]);
        return m;
    };
    double r1 = conjugation_identity_check(omega, A, 4e-3, probes);
    double r2 = conjugation_identity_check(omega, A, 2e-3, probes);
    CHECK(r1 > 1e-12);
    CHECK(r1 / r2 >= 3.0);
    CHECK(r1 / r2 <= 5.0);
    // identity gauge: exactly zero
    auto om1 = one_form(n, [](const Pt& z, int j) { return j == 0 ? std::conj(z[1]) + z[0] : cplx{}; },
                        nullptr);
    CHECK(conjugation_identity_check(om1, GaugeMatrix::identity(n, 1), 1e-3, probes) < 1e-12);
}

TEST_CASE("grid field interpolates its samples exactly at nodes") {
    GridSpec spec;
    spec.n = 2;
    spec.h = 0.1;
    spec.origin = pt();
    set_real_coord(spec.origin, 0, -0.2);
    set_real_coord(spec.origin, 1, -0.2);
    set_real_coord(spec.origin, 2, -0.2);
    set_real_coord(spec.origin, 3, -0.2);
    spec.dims = {5, 5, 5, 5, 0, 0, 0, 0};
    auto f = one_form(2, [](const Pt& z, int j) { return j == 0 ? z[0] * std::conj(z[1]) : cplx{0.5, 0}; },
                      nullptr);
    auto g = sample_to_grid(f, spec, [](const Pt&) { return true; });
    for (std::size_t node = 0; node < spec.num_nodes(); node += 37) {
        Pt p = g.node_point(node);
        CompVals a, b;
        g.eval(p, a);
        f.eval(p, b);
        for (int j = 0; j < 2; ++j) CHECK(std::abs(a[j](0, 0) - b[j](0, 0)) < 1e-14);
    }
    // csv round trip
    auto csv = g.to_csv();
    auto back = GridField::from_csv(csv);
    Pt mid = pt();
    CompVals a, b;
    CHECK(back.eval(mid, a));
    CHECK(g.eval(mid, b));
    for (int j = 0; j < 2; ++j) CHECK(std::abs(a[j](0, 0) - b[j](0, 0)) < 1e-14);
}

TEST_CASE("gauge matrix determinant probe and singularity reporting") {
    GaugeMatrix A;
    A.n = 1;
    A.k0 = 1;
    A.eval = [](const Pt& z) {
        Mat m(1);
        m(0, 0) = z[0];  // singular at 0
        return m;
    };
    std::vector<Pt> probes = {pt()};
    CHECK(A.min_abs_det(probes) == doctest::Approx(0.0));
    auto om = FormField::zero(1, 1, 1);
    auto g = gauge_transform(om, A);
    CHECK_THROWS_WITH_AS(g.value(pt()), doctest::Contains("singular gauge matrix at"),
                         std::runtime_error);
}
