#include "cfh/geometry.hpp"

#include <cmath>

namespace cfh {

DefiningFunction DefiningFunction::convex_rho1(int n, int q, std::vector<double> lambdas,
                                               std::shared_ptr<Remainder> rem) {
    if (n < 2) throw std::invalid_argument("convex_rho1: n >= 2 required");
    if (q < 1 || q > n - 1) throw std::invalid_argument("convex_rho1: 1 <= q <= n-1 required");
    if (static_cast<int>(lambdas.size()) != q - 1)
        throw std::invalid_argument("convex_rho1: expected q-1 lambda coefficients");
    for (double l : lambdas)
        if (!(std::abs(l) < 0.25)) throw std::invalid_argument("coefficient bound violated: |lambda_j| < 1/4");
    DefiningFunction d;
    d.kind_ = RhoKind::convex_rho1;
    d.n_ = n;
    d.q_ = q;
    d.dist_ = n - 1;
    d.lambdas_ = lambdas;
    d.coef_.assign(n, 1.0);
    for (int j = 0; j < q - 1; ++j) d.coef_[j] = lambdas[j];
    d.rem_ = std::move(rem);
    return d;
}

DefiningFunction DefiningFunction::ball_rho2(int n, double r2) {
    if (r2 <= 0) throw std::invalid_argument("ball_rho2: r2 > 0 required");
    DefiningFunction d;
    d.kind_ = RhoKind::ball_rho2;
    d.n_ = n;
    d.radius_ = r2;
    d.coef_.assign(n, 1.0);
    return d;
}

DefiningFunction DefiningFunction::concave_rho1(int n, int q, std::vector<double> lambdas,
                                                std::shared_ptr<Remainder> rem) {
    if (q < 1) throw std::invalid_argument("concave_rho1: q >= 1 required");
    if (q > n - 3) throw std::invalid_argument("concave_rho1: q <= n-3 required");
    if (static_cast<int>(lambdas.size()) != n - q - 2)
        throw std::invalid_argument("concave_rho1: expected n-q-2 lambda coefficients");
    for (double l : lambdas)
        if (!(std::abs(l) < 0.25)) throw std::invalid_argument("coefficient bound violated: |lambda_j| < 1/4");
    DefiningFunction d;
    d.kind_ = RhoKind::concave_rho1;
    d.n_ = n;
    d.q_ = q;
    d.dist_ = q + 1;  // z_{q+2} in 1-based labels
    d.lambdas_ = lambdas;
    d.coef_.assign(n, 0.0);
    for (int j = 0; j <= q + 1; ++j) d.coef_[j] = -1.0;
    for (int j = q + 2; j < n; ++j) d.coef_[j] = lambdas[j - (q + 2)];
    d.rem_ = std::move(rem);
    return d;
}

DefiningFunction DefiningFunction::concave_rho3(int n, int q, double r3) {
    if (r3 <= 0) throw std::invalid_argument("concave_rho3: r3 > 0 required");
    DefiningFunction d;
    d.kind_ = RhoKind::concave_rho3;
    d.n_ = n;
    d.q_ = q;
    d.dist_ = q + 1;
    d.radius_ = r3;
    d.coef_.assign(n, 0.0);
    for (int j = q + 2; j < n; ++j) d.coef_[j] = 3.0;
    return d;
}

DefiningFunction DefiningFunction::custom(int n, std::function<double(const Pt&)> f,
                                          std::function<void(const Pt&, double*)> grad) {
    DefiningFunction d;
    d.kind_ = RhoKind::custom;
    d.n_ = n;
    d.custom_f_ = std::move(f);
    d.custom_grad_ = std::move(grad);
    return d;
}

double DefiningFunction::eval(const Pt& z) const {
    switch (kind_) {
        case RhoKind::custom:
            return custom_f_(z);
        case RhoKind::ball_rho2: {
            return abs2(z, n_) - radius_ * radius_;
        }
        default: {
            double v = dist_ >= 0 ? -z[dist_].imag() : 0.0;
            for (int j = 0; j < n_; ++j) v += coef_[j] * std::norm(z[j]);
            if (kind_ == RhoKind::concave_rho3) v -= radius_ * radius_;
            if (rem_) v += rem_->value(z, n_);
            return v;
        }
    }
}

void DefiningFunction::gradient(const Pt& z, double* g) const {
    if (kind_ == RhoKind::custom) {
        if (custom_grad_) {
            custom_grad_(z, g);
            return;
        }
        // central differences, O(h^2)
        const double h = 1e-6;
        for (int r = 0; r < 2 * n_; ++r) {
            Pt zp = z, zm = z;
            set_real_coord(zp, r, real_coord(z, r) + h);
            set_real_coord(zm, r, real_coord(z, r) - h);
            g[r] = (custom_f_(zp) - custom_f_(zm)) / (2 * h);
        }
        return;
    }
    for (int j = 0; j < n_; ++j) {
        double c = kind_ == RhoKind::ball_rho2 ? 1.0 : coef_[j];
        g[2 * j] = 2.0 * c * z[j].real();
        g[2 * j + 1] = 2.0 * c * z[j].imag();
    }
    if (kind_ != RhoKind::ball_rho2 && dist_ >= 0) g[2 * dist_ + 1] -= 1.0;
    if (rem_ && rem_->gradient) {
        double gr[8];
        rem_->gradient(z, n_, gr);
        for (int r = 0; r < 2 * n_; ++r) g[r] += gr[r];
    } else if (rem_) {
        const double h = 1e-6;
        for (int r = 0; r < 2 * n_; ++r) {
            Pt zp = z, zm = z;
            set_real_coord(zp, r, real_coord(z, r) + h);
            set_real_coord(zm, r, real_coord(z, r) - h);
            g[r] += (rem_->value(zp, n_) - rem_->value(zm, n_)) / (2 * h);
        }
    }
}

Mat DefiningFunction::complex_hessian(const Pt& z) const {
    Mat h(n_);
    if (kind_ == RhoKind::custom) {
        // d^2/dz_j dzbar_k by second differences of the value
        const double s = 1e-4;
        for (int j = 0; j < n_; ++j)
            for (int k = 0; k < n_; ++k) {
                // d/dzbar_k then d/dz_j via 4-point real stencils
                auto dzj_dzbk = [&](const Pt& w) {
                    auto dzb = [&](const Pt& u) {
                        Pt a = u, b = u, c = u, d = u;
                        a[k] += s; b[k] -= s; c[k] += cplx{0, s}; d[k] -= cplx{0, s};
                        return cplx{(eval(a) - eval(b)) / (2 * s), (eval(c) - eval(d)) / (2 * s)} * 0.5;
                    };
                    Pt a = w, b = w, c = w, d = w;
                    a[j] += s; b[j] -= s; c[j] += cplx{0, s}; d[j] -= cplx{0, s};
                    return (dzb(a) - dzb(b)) / (2 * s) * 0.5 - cplx{0, 1} * ((dzb(c) - dzb(d)) / (2 * s)) * 0.5;
                };
                h(j, k) = dzj_dzbk(z);
            }
        return h;
    }
    for (int j = 0; j < n_; ++j) h(j, j) = kind_ == RhoKind::ball_rho2 ? 1.0 : coef_[j];
    return h;
}

cplx DefiningFunction::dz(const Pt& z, int j) const {
    if (kind_ == RhoKind::custom) {
        double g[8];
        gradient(z, g);
        return 0.5 * cplx{g[2 * j], -g[2 * j + 1]};
    }
    double c = kind_ == RhoKind::ball_rho2 ? 1.0 : coef_[j];
    cplx v = c * std::conj(z[j]);
    if (kind_ != RhoKind::ball_rho2 && j == dist_) v += cplx{0.0, 0.5};
    if (rem_) {
        double g[8];
        Pt zz = z;
        DefiningFunction tmp;  // gradient of remainder alone
        if (rem_->gradient) {
            double gr[8];
            rem_->gradient(zz, n_, gr);
            v += 0.5 * cplx{gr[2 * j], -gr[2 * j + 1]};
        } else {
            const double h = 1e-6;
            Pt a = z, b = z, c2 = z, d = z;
            a[j] += h; b[j] -= h; c2[j] += cplx{0, h}; d[j] -= cplx{0, h};
            double gx = (rem_->value(a, n_) - rem_->value(b, n_)) / (2 * h);
            double gy = (rem_->value(c2, n_) - rem_->value(d, n_)) / (2 * h);
            v += 0.5 * cplx{gx, -gy};
        }
        (void)g;
    }
    return v;
}

bool remainder_is_small(const Remainder& rem, int n, double scale0, Rng& rng) {
    for (int dir = 0; dir < 4; ++dir) {
        Pt u = pt();
        double s = 0;
        for (int j = 0; j < n; ++j) {
            u[j] = rng.uniform_complex(1.0);
            s += std::norm(u[j]);
        }
        s = std::sqrt(s);
        for (int j = 0; j < n; ++j) u[j] /= s;
        double prev = 1e300;
        for (int k = 1; k <= 10; ++k) {
            double t = scale0 * std::ldexp(1.0, -k);
            Pt z = pt();
            for (int j = 0; j < n; ++j) z[j] = t * u[j];
            double ratio = std::abs(rem.value(z, n)) / (t * t);
            if (ratio > prev * 1.5 + 1e-12) return false;
            prev = std::max(ratio, 1e-14);
        }
        if (prev > 0.05) return false;  // has not decayed below a token threshold
    }
    return true;
}

}  // namespace cfh
