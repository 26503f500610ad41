#ifndef CFH_TEST_FIXTURES_HPP
#define CFH_TEST_FIXTURES_HPP

// Closed-form fixture fields shared by the unit and acceptance suites.

#include <functional>

#include "cfh/forms.hpp"

namespace cfh::fixtures {

// scalar (0,0) field from a lambda, with supplied dzbar derivatives
inline FormField scalar_function(int n, std::function<cplx(const Pt&)> f,
                                 std::function<cplx(const Pt&, int)> dzb) {
    auto value = FormField::closed(n, 0, 1, [f](const Pt& z, CompVals& out) {
        out.assign(1, Mat(1));
        out[0](0, 0) = f(z);
    });
    if (!dzb) return value;
    auto d = FormField::closed(n, 1, 1, [dzb, n](const Pt& z, CompVals& out) {
        out.assign(n, Mat(1));
        for (int j = 0; j < n; ++j) out[j](0, 0) = dzb(z, j);
    });
    return FormField::closed_with_dbar(n, 0, 1, [f](const Pt& z, CompVals& out) {
        out.assign(1, Mat(1));
        out[0](0, 0) = f(z);
    }, d);
}

// scalar (0,1) field with supplied coefficient functions c_j and their dzbar
// derivatives dc[j][m] = d c_j / d zbar_m (for the closed-form dbar)
inline FormField one_form(int n, std::function<cplx(const Pt&, int)> c,
                          std::function<cplx(const Pt&, int, int)> dc) {
    auto val = [c, n](const Pt& z, CompVals& out) {
        out.assign(n, Mat(1));
        for (int j = 0; j < n; ++j) out[j](0, 0) = c(z, j);
    };
    if (!dc) return FormField::closed(n, 1, 1, val);
    auto d = FormField::closed(n, 2, 1, [dc, n](const Pt& z, CompVals& out) {
        out.assign(binom(n, 2), Mat(1));
        for (int rk = 0; rk < binom(n, 2); ++rk) {
            auto K = comb_unrank(n, 2, rk);
            // dbar(sum c_j dzb_j) = sum_{m<j} (dc_j/dzb_m - dc_m/dzb_j) dzb_m ^ dzb_j
            out[rk](0, 0) = dc(z, K[1], K[0]) - dc(z, K[0], K[1]);
        }
    });
    return FormField::closed_with_dbar(n, 1, 1, val, d);
}

// f = dzbar_a with constant coefficient c (closed)
inline FormField const_dzbar(int n, int a, cplx cv = {1.0, 0.0}) {
    Mat m(1);
    m(0, 0) = cv;
    return FormField::constant(n, 1, 1, {a}, m);
}

// smooth compactly supported scalar u with closed-form dbar: u = chi(|z|^2) * zb1
inline FormField bump_times_zb1(int n, double R, double sharp = 1.0) {
    double R2 = R * R;
    auto chi = [R2, sharp](double r2) { return r2 < R2 ? std::exp(-sharp / (1 - r2 / R2)) : 0.0; };
    auto dchi = [R2, sharp](double r2) {  // d chi / d(r2)
        if (r2 >= R2) return 0.0;
        double t = r2 / R2, d = 1 - t;
        return std::exp(-sharp / d) * (-sharp / (d * d)) / R2;
    };
    auto f = [chi](const Pt& z) {
        double r2 = 0;
        for (int j = 0; j < 4; ++j) r2 += std::norm(z[j]);
        return chi(r2) * std::conj(z[0]);
    };
    auto dzb = [chi, dchi, n](const Pt& z, int j) {
        double r2 = 0;
        for (int t = 0; t < n; ++t) r2 += std::norm(z[t]);
        cplx v = dchi(r2) * z[j] * std::conj(z[0]);
        if (j == 0) v += chi(r2);
        return v;
    };
    return scalar_function(n, f, dzb);
}

}  // namespace cfh::fixtures

#endif
