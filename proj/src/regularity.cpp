#include "cfh/regularity.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <sstream>

namespace cfh {

GridDomain GridDomain::interval(double a, double b, int npts) {
    GridDomain d;
    d.d = 1;
    d.origin[0] = a;
    d.h = (b - a) / (npts - 1);
    d.dims[0] = npts;
    return d;
}

GridDomain GridDomain::half_disc(double radius, int npts_per_axis) {
    GridDomain d;
    d.d = 2;
    d.origin = {0.0, -radius, 0, 0};
    d.h = radius / (npts_per_axis - 1);
    d.dims = {npts_per_axis, 2 * npts_per_axis - 1, 0, 0};
    double r2 = radius * radius;
    d.inside = [r2](const std::array<double, 4>& x) {
        return x[0] * x[0] + x[1] * x[1] <= r2 * (1 + 1e-12) && x[0] >= -1e-15;
    };
    return d;
}

std::array<double, 4> GridDomain::point(const std::array<int, 4>& iv) const {
    std::array<double, 4> x{};
    for (int i = 0; i < d; ++i) x[i] = origin[i] + iv[i] * h;
    return x;
}

bool GridDomain::contains(const std::array<int, 4>& iv) const {
    for (int i = 0; i < d; ++i)
        if (iv[i] < 0 || iv[i] >= dims[i]) return false;
    if (inside) return inside(point(iv));
    return true;
}

namespace {

template <typename Body>
void for_each_index(const GridDomain& dom, const Body& body) {
    std::array<int, 4> iv{};
    while (true) {
        if (dom.contains(iv)) body(iv);
        int i = 0;
        for (; i < dom.d; ++i) {
            if (++iv[i] < dom.dims[i]) break;
            iv[i] = 0;
        }
        if (i == dom.d) break;
    }
}

// k-th central-difference derivative along an axis (k <= 1 used here)
cplx sample_deriv(const RealFn& f, const GridDomain& dom, const std::array<int, 4>& iv, int k,
                  int axis) {
    if (k == 0) return f(dom.point(iv));
    std::array<int, 4> p = iv, m = iv;
    p[axis] += 1;
    m[axis] -= 1;
    if (!dom.contains(p) || !dom.contains(m)) return cplx{std::nan(""), 0};
    return (f(dom.point(p)) - f(dom.point(m))) / (2 * dom.h);
}

struct Slope {
    double slope = 0, stderr_ = 0, resid = 0;
};

Slope loglog_fit(const std::vector<std::pair<double, double>>& pts) {
    double sx = 0, sy = 0, sxx = 0, sxy = 0;
    int n = 0;
    for (auto [s, v] : pts) {
        if (v <= 0) continue;
        double x = std::log(s), y = std::log(v);
        sx += x;
        sy += y;
        sxx += x * x;
        sxy += x * y;
        ++n;
    }
    Slope out;
    if (n < 2) return out;
    double det = n * sxx - sx * sx;
    out.slope = (n * sxy - sx * sy) / det;
    double b = (sy - out.slope * sx) / n;
    double ss = 0;
    for (auto [s, v] : pts) {
        if (v <= 0) continue;
        double e = std::log(v) - (out.slope * std::log(s) + b);
        ss += e * e;
    }
    out.resid = std::sqrt(ss / n);
    out.stderr_ = n > 2 ? std::sqrt(ss / (n - 2) / (sxx - sx * sx / n)) : 0.0;
    return out;
}

}  // namespace

ZygmundReport zygmund_seminorm(const RealFn& f, const GridDomain& dom, double r) {
    if (r <= 0) throw std::invalid_argument("zygmund_seminorm: r > 0 required");
    ZygmundReport rep;
    rep.r = r;
    rep.k = static_cast<int>(std::ceil(r)) - 1;
    rep.beta = r - rep.k;
    if (rep.k > 1) throw std::invalid_argument("zygmund_seminorm: orders above k = 1 not supported");

    std::map<long long, double> per_scale;
    const int max_step = *std::max_element(dom.dims.begin(), dom.dims.begin() + dom.d) / 2;
    for (int step = 1; step <= std::max(1, max_step); step *= 2) {
        double sup = 0;
        for_each_index(dom, [&](const std::array<int, 4>& iv) {
            for (int axis = 0; axis < dom.d; ++axis) {
                std::array<int, 4> p = iv, m = iv;
                p[axis] += step;
                m[axis] -= step;
                if (!dom.contains(p) || !dom.contains(m)) continue;
                int kd = rep.k;
                for (int daxis = 0; daxis < (kd ? dom.d : 1); ++daxis) {
                    cplx a = sample_deriv(f, dom, p, kd, daxis);
                    cplx b = sample_deriv(f, dom, m, kd, daxis);
                    cplx c = sample_deriv(f, dom, iv, kd, daxis);
                    if (std::isnan(a.real()) || std::isnan(b.real()) || std::isnan(c.real())) continue;
                    double v = std::abs(a + b - 2.0 * c);
                    double ratio = v / std::pow(step * dom.h, rep.beta);
                    if (ratio > rep.seminorm) {
                        rep.seminorm = ratio;
                        rep.argmax = dom.point(iv);
                        rep.attained = true;
                    }
                    sup = std::max(sup, v);
                }
            }
        });
        per_scale[step] = sup;
    }
    for (auto [step, sup] : per_scale) rep.per_scale.push_back({step * dom.h, sup});
    rep.fitted_exponent = loglog_fit(rep.per_scale).slope;
    return rep;
}

ExponentFit holder_exponent_fit(const RealFn& f, const GridDomain& dom,
                                const std::vector<double>& scales) {
    if (static_cast<int>(scales.size()) < 4)
        throw std::invalid_argument("holder_exponent_fit: at least 4 dyadic scales required");
    ExponentFit out;
    double fmax = 0;
    for (double s : scales) {
        int step = std::max(1, static_cast<int>(std::llround(s / dom.h)));
        double sup = 0;
        for_each_index(dom, [&](const std::array<int, 4>& iv) {
            for (int axis = 0; axis < dom.d; ++axis) {
                std::array<int, 4> p = iv;
                p[axis] += step;
                if (!dom.contains(p)) continue;
                cplx a = f(dom.point(p)), b = f(dom.point(iv));
                sup = std::max(sup, std::abs(a - b));
                fmax = std::max({fmax, std::abs(a), std::abs(b)});
            }
        });
        out.table.push_back({step * dom.h, sup});
    }
    double top = 0;
    for (auto [s, v] : out.table) top = std::max(top, v);
    if (top <= 1e-14 * std::max(1.0, fmax)) {
        out.sentinel = true;
        out.alpha = std::numeric_limits<double>::infinity();
        return out;
    }
    // exclusion window: drop the two largest and two smallest scales when the
    // list is long enough (boundary truncation and conditioning contaminate
    // the extremes)
    std::vector<std::pair<double, double>> window = out.table;
    std::sort(window.begin(), window.end());
    if (window.size() >= 8) window = {window.begin() + 2, window.end() - 2};
    auto fit = loglog_fit(window);
    out.alpha = fit.slope;
    out.stderr_ = fit.stderr_;
    out.fit_residual = fit.resid;
    return out;
}

ExponentFit holder_exponent_fit_1d(const std::vector<cplx>& vals, double h) {
    GridDomain dom = GridDomain::interval(0.0, h * (vals.size() - 1), static_cast<int>(vals.size()));
    std::vector<double> scales;
    for (int s = 1; s < static_cast<int>(vals.size()) / 2; s *= 2) scales.push_back(s * h);
    if (scales.size() < 4) throw std::invalid_argument("holder_exponent_fit_1d: segment too short");
    auto f = [&vals, h](const std::array<double, 4>& x) {
        int i = static_cast<int>(std::llround(x[0] / h));
        i = std::max(0, std::min(static_cast<int>(vals.size()) - 1, i));
        return vals[i];
    };
    return holder_exponent_fit(f, dom, scales);
}

// ---------------------------------------------------------------------------

namespace branch {

cplx log02pi(cplx w) {
    double a = std::arg(w);  // (-pi, pi]
    if (a < 0) a += 2 * kPi;
    return cplx{std::log(std::abs(w)), a};
}

cplx pow_r(cplx w, double a) {
    if (a == 0.0) return cplx{1.0, 0.0};
    return std::exp(a * log02pi(w));
}

}  // namespace branch

namespace {

void reject_branch_locus(cplx z1) {
    if (std::abs(z1.imag()) < 1e-14 && z1.real() >= 1.0)
        throw std::domain_error("stein_form: evaluation on the branch locus z1 in [1, inf)");
}

}  // namespace

FormField stein_form(int n, double r) {
    if (r < 0) throw std::invalid_argument("stein_form: r >= 0 required");
    auto eval = [r, n](const Pt& z, CompVals& out) {
        out.assign(n, Mat(1));
        reject_branch_locus(z[0]);
        cplx w = z[0] - 1.0;
        out[1](0, 0) = branch::pow_r(w, r) / branch::log02pi(w);
    };
    // the coefficient is holomorphic in z1 off the cut and independent of the
    // conjugates, so dbar omega = 0 in closed form
    return FormField::closed_with_dbar(n, 1, 1, eval, FormField::zero(n, 2, 1));
}

cplx stein_Q(double r, int k, cplx z1) {
    reject_branch_locus(z1);
    cplx w = z1 - 1.0;
    cplx L = branch::log02pi(w);
    if (k == 0) return branch::pow_r(w, r) / L;
    if (k == 1) return branch::pow_r(w, r - 1.0) * (r / L - 1.0 / (L * L));
    throw std::invalid_argument("stein_Q: k <= 1 supported");
}

std::string SteinDiagnostic::csv() const {
    std::ostringstream os;
    os << "eps,F,predicted";
    for (const auto& [a, g] : growth) os << ",G_alpha" << fmt_g(a);
    os << "\n";
    for (std::size_t i = 0; i < eps.size(); ++i) {
        os << fmt_g(eps[i]) << "," << fmt_g(F[i]) << "," << fmt_g(predicted[i]);
        for (const auto& [a, g] : growth) os << "," << fmt_g(g[i]);
        os << "\n";
    }
    for (const auto& [a, v] : verdict) os << "verdict,alpha=" << fmt_g(a) << "," << v << "\n";
    return os.str();
}

SteinDiagnostic stein_sharpness_diagnostic(double r, const std::vector<double>& eps_list,
                                           const std::vector<double>& alphas, int contour_points) {
    SteinDiagnostic d;
    d.r = r;
    int ir = static_cast<int>(std::floor(r));
    d.k = (r - ir < 0.5) ? ir : ir + 1;
    if (d.k > 1) throw std::invalid_argument("stein_sharpness_diagnostic: r with k <= 1 supported");
    const bool cancel = std::abs(r - d.k) < 1e-12;  // leading powers cancel

    for (double eps : eps_list) {
        if (eps < 1e-8)
            throw std::invalid_argument("stein_sharpness_diagnostic: eps below 1e-8 rejected");
        // trapezoid of u_k(1-eps, z2) - u_k(1-2eps, z2) over |z2| = sqrt(eps),
        // u_k = Q_k(z1) zbar2
        cplx I{};
        double rho = std::sqrt(eps);
        cplx qd = stein_Q(r, d.k, cplx{1 - eps, 0.0}) - stein_Q(r, d.k, cplx{1 - 2 * eps, 0.0});
        for (int m = 0; m < contour_points; ++m) {
            double th = 2 * kPi * m / contour_points;
            cplx z2 = rho * std::exp(cplx{0, th});
            I += qd * std::conj(z2) * cplx{0, 1} * z2 * (2 * kPi / contour_points);
        }
        d.eps.push_back(eps);
        d.F.push_back(std::abs(I) / eps);
        d.predicted.push_back(r == 0.0 ? 2 * kPi * std::log(2.0) / std::pow(std::log(eps), 2)
                                       : std::nan(""));
    }
    for (double a : alphas) {
        std::vector<double> g;
        for (std::size_t i = 0; i < d.eps.size(); ++i) {
            double eps = d.eps[i];
            double L = cancel ? std::pow(std::log(1 / eps), 2) : std::log(1 / eps);
            g.push_back(d.F[i] * std::pow(eps, d.k - r) * L * std::pow(eps, -(a - 0.5)));
        }
        std::vector<std::size_t> order(d.eps.size());
        for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
        std::sort(order.begin(), order.end(),
                  [&](std::size_t x, std::size_t y) { return d.eps[x] > d.eps[y]; });
        bool increasing = order.size() >= 4;
        for (std::size_t i = 3; i < order.size() && increasing; ++i)
            if (g[order[i]] <= g[order[i - 1]]) increasing = false;
        bool decay = g[order.back()] <= 0.9 * g[order.front()];
        for (std::size_t i = order.size() / 2 + 1; i < order.size() && decay; ++i)
            if (g[order[i]] >= g[order[i - 1]]) decay = false;
        d.growth[a] = std::move(g);
        d.verdict[a] = increasing ? "growth" : (decay ? "decay" : "indeterminate");
    }
    return d;
}

}  // namespace cfh
