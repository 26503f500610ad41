#ifndef CFH_REGULARITY_HPP
#define CFH_REGULARITY_HPP

#include <array>
#include <functional>
#include <map>
#include <string>
#include <vector>

#include "cfh/forms.hpp"
#include "cfh/util.hpp"

namespace cfh {

/// Uniform lattice on a box in R^d (d <= 4) with an optional mask; the
/// sampling domain of the Holder-Zygmund estimators.
struct GridDomain {
    int d = 1;
    std::array<double, 4> origin{};
    double h = 0;
    std::array<int, 4> dims{};
    std::function<bool(const std::array<double, 4>&)> inside;  // null: whole box

    static GridDomain interval(double a, double b, int npts);
    static GridDomain half_disc(double radius, int npts_per_axis);

    std::array<double, 4> point(const std::array<int, 4>& iv) const;
    bool contains(const std::array<int, 4>& iv) const;
};

using RealFn = std::function<cplx(const std::array<double, 4>&)>;

struct ZygmundReport {
    double r = 0, beta = 0;
    int k = 0;
    double seminorm = 0;  // sup |f(x+h)+f(x-h)-2f(x)| / |h|^beta over the grid
    std::vector<std::pair<double, double>> per_scale;  // (|h|, sup second difference)
    double fitted_exponent = 0;
    bool attained = false;
    std::array<double, 4> argmax{};
};

/// Second-difference seminorm of order r = k + beta (derivatives up to k by
/// central differences; fixtures use k <= 1). Rejects r <= 0.
ZygmundReport zygmund_seminorm(const RealFn& f, const GridDomain& dom, double r);

struct ExponentFit {
    double alpha = 0;
    double stderr_ = 0;
    double fit_residual = 0;
    bool sentinel = false;  // constant input: exponent reported as infinity
    std::vector<std::pair<double, double>> table;  // (scale, modulus)
};

/// Least-squares slope of log sup-difference against log scale; the two
/// largest and two smallest scales are excluded from the fit window.
ExponentFit holder_exponent_fit(const RealFn& f, const GridDomain& dom,
                                const std::vector<double>& scales);

/// Same estimator on a 1-d sampled segment with spacing h.
ExponentFit holder_exponent_fit_1d(const std::vector<cplx>& vals, double h);

// ---------------------------------------------------------------------------
// Branch utilities and the Stein example

namespace branch {
/// log with arg in [0, 2 pi).
cplx log02pi(cplx w);
/// w^a = exp(a log02pi(w)).
cplx pow_r(cplx w, double a);
}  // namespace branch

/// omega(z) = (z1-1)^r / log(z1-1) dzbar_2 on the ball fixture, branch
/// arg log(z1-1) in [0, 2 pi); dbar omega = 0 by construction. Evaluation on
/// the branch locus z1 in [1, inf) throws.
FormField stein_form(int n, double r);

/// Derivative coefficient Q_k(z1) = d^k/dz1^k [(z1-1)^r / log(z1-1)], k <= 1.
cplx stein_Q(double r, int k, cplx z1);

struct SteinDiagnostic {
    double r = 0;
    int k = 0;
    std::vector<double> eps;
    std::vector<double> F;          // |I(eps)| / eps, trapezoid contour values
    std::vector<double> predicted;  // 2 pi ln2 / ln^2(eps) for r = 0, else NaN
    std::map<double, std::vector<double>> growth;  // alpha -> normalized G(eps)
    std::map<double, std::string> verdict;         // alpha -> growth | decay
    std::string csv() const;
};

/// Contour diagnostic of the sharpness example: I(eps) over |z2| = sqrt(eps)
/// of u_k(1-eps, z2) - u_k(1-2eps, z2); verdicts from the normalized quantity
/// F(eps) eps^{k-r} L(eps) eps^{-(alpha-1/2)} with L = ln^2(1/eps) when the
/// leading powers cancel (integer r) and ln(1/eps) otherwise.
SteinDiagnostic stein_sharpness_diagnostic(double r, const std::vector<double>& eps_list,
                                           const std::vector<double>& alphas = {0.6, 0.4},
                                           int contour_points = 128);

}  // namespace cfh

#endif
