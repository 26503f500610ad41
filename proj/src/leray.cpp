#include "cfh/leray.hpp"

namespace cfh {

using sym::Poly;

std::string leray_name(LerayId id) {
    switch (id) {
        case LerayId::g0: return "g0";
        case LerayId::g1_convex: return "g1_convex";
        case LerayId::g1_concave: return "g1_concave";
        case LerayId::g2: return "g2";
        case LerayId::g3: return "g3";
        case LerayId::g3_hat: return "g3_hat";
        default: return "custom";
    }
}

LerayMap LerayMap::g0(int n) {
    LerayMap m;
    m.id_ = LerayId::g0;
    m.n_ = n;
    for (int j = 0; j < n; ++j)
        m.comps_.push_back(Poly::variable(sym::var_zb(n, j)) - Poly::variable(sym::var_zetab(n, j)));
    return m;
}

LerayMap LerayMap::g2(int n) {
    LerayMap m;
    m.id_ = LerayId::g2;
    m.n_ = n;
    for (int j = 0; j < n; ++j) m.comps_.push_back(Poly::variable(sym::var_zetab(n, j)));
    return m;
}

LerayMap LerayMap::g1_convex(int n, int q, const std::vector<double>& lambdas) {
    LerayMap m;
    m.id_ = LerayId::g1_convex;
    m.n_ = n;
    for (int j = 0; j < n; ++j) {
        Poly p;
        if (j < q - 1) {
            // lambda_j wb_j + (wb_j - zb_j)
            p = Poly::variable(sym::var_zetab(n, j), cplx{1.0 + lambdas[j], 0.0}) -
                Poly::variable(sym::var_zb(n, j));
        } else {
            p = Poly::variable(sym::var_zetab(n, j));
            if (j == n - 1) p += Poly(cplx{0.0, 0.5});
        }
        m.comps_.push_back(p);
    }
    return m;
}

// Note: the correction term on the lambda block is (zetabar_j - zbar_j); with
// this choice 2 Re{g1.(zeta-z)} = rho1(zeta) - rho1(z) + sum_{j<=q+2}|w_j|^2
// + sum_{j>q+2}(2-lambda_j)|w_j|^2 holds exactly for the quadric model.
LerayMap LerayMap::g1_concave(int n, int q, const std::vector<double>& lambdas) {
    LerayMap m;
    m.id_ = LerayId::g1_concave;
    m.n_ = n;
    const int dm = q + 1;
    for (int j = 0; j < n; ++j) {
        Poly p;
        if (j <= dm) {
            p = Poly::variable(sym::var_zb(n, j), cplx{-1.0, 0.0});
            if (j == dm) p += Poly(cplx{0.0, 0.5});
        } else {
            double lam = lambdas[j - (q + 2)];
            p = Poly::variable(sym::var_zb(n, j), cplx{lam - 1.0, 0.0}) +
                Poly::variable(sym::var_zetab(n, j));
        }
        m.comps_.push_back(p);
    }
    return m;
}

LerayMap LerayMap::g3(int n, int q) {
    LerayMap m;
    m.id_ = LerayId::g3;
    m.n_ = n;
    const int dm = q + 1;
    for (int j = 0; j < n; ++j) {
        Poly p;
        if (j == dm)
            p = Poly(cplx{0.0, 1.0});
        else if (j > dm)
            p = Poly::variable(sym::var_zetab(n, j), cplx{3.0, 0.0}) +
                Poly::variable(sym::var_zb(n, j), cplx{3.0, 0.0});
        m.comps_.push_back(p);
    }
    return m;
}

LerayMap LerayMap::g3_hat(int n, int q) {
    LerayMap m;
    m.id_ = LerayId::g3_hat;
    m.n_ = n;
    const int dm = q + 1;
    for (int j = 0; j < n; ++j) {
        Poly p;
        if (j == dm)
            p = Poly(cplx{0.0, 0.5});
        else if (j > dm)
            p = Poly::variable(sym::var_zetab(n, j), cplx{3.0, 0.0});
        m.comps_.push_back(p);
    }
    return m;
}

LerayMap LerayMap::custom(int n, std::function<void(const Pt&, const Pt&, cplx*)> eval) {
    LerayMap m;
    m.n_ = n;
    m.eval_ = std::move(eval);
    return m;
}

LerayMap LerayMap::custom_poly(int n, std::vector<Poly> comps) {
    LerayMap m;
    m.n_ = n;
    m.comps_ = std::move(comps);
    return m;
}

Poly LerayMap::pairing_poly() const {
    if (!has_symbolic()) throw std::runtime_error("pairing_poly: map has no polynomial components");
    Poly phi;
    for (int j = 0; j < n_; ++j) {
        Poly w = Poly::variable(sym::var_zeta(n_, j)) - Poly::variable(sym::var_z(n_, j));
        phi += comps_[j] * w;
    }
    return phi;
}

void LerayMap::eval(const Pt& z, const Pt& zeta, cplx* g) const {
    if (!comps_.empty()) {
        cplx x[sym::kMaxVars];
        bind_vars(n_, z, zeta, x);
        for (int j = 0; j < n_; ++j) g[j] = comps_[j].eval(x);
        return;
    }
    eval_(z, zeta, g);
}

cplx LerayMap::pairing(const Pt& z, const Pt& zeta) const {
    cplx g[4];
    eval(z, zeta, g);
    cplx s{};
    for (int j = 0; j < n_; ++j) s += g[j] * (zeta[j] - z[j]);
    return s;
}

namespace {
cplx richardson_deriv(const std::function<cplx(double)>& f, double h) {
    // 4th-order Richardson of the central difference
    cplx d1 = (f(h) - f(-h)) / (2 * h);
    cplx d2 = (f(h / 2) - f(-h / 2)) / h;
    return (4.0 * d2 - d1) / 3.0;
}
}  // namespace

cplx LerayMap::deriv_z(const Pt& z, const Pt& zeta, int c, int r) const {
    if (!comps_.empty()) {
        cplx x[sym::kMaxVars];
        bind_vars(n_, z, zeta, x);
        // d/dx_j = d/dz + d/dzb ; d/dy_j = i (d/dz - d/dzb)
        int j = r / 2;
        Poly dz = comps_[c].derivative(sym::var_z(n_, j));
        Poly db = comps_[c].derivative(sym::var_zb(n_, j));
        cplx a = dz.eval(x), b = db.eval(x);
        return r % 2 == 0 ? a + b : cplx{0, 1} * (a - b);
    }
    return richardson_deriv(
        [&](double t) {
            Pt zz = z;
            set_real_coord(zz, r, real_coord(z, r) + t);
            cplx g[4];
            eval_(zz, zeta, g);
            return g[c];
        },
        1e-4);
}

cplx LerayMap::deriv_zeta(const Pt& z, const Pt& zeta, int c, int r) const {
    if (!comps_.empty()) {
        cplx x[sym::kMaxVars];
        bind_vars(n_, z, zeta, x);
        int j = r / 2;
        Poly dz = comps_[c].derivative(sym::var_zeta(n_, j));
        Poly db = comps_[c].derivative(sym::var_zetab(n_, j));
        cplx a = dz.eval(x), b = db.eval(x);
        return r % 2 == 0 ? a + b : cplx{0, 1} * (a - b);
    }
    return richardson_deriv(
        [&](double t) {
            Pt zz = zeta;
            set_real_coord(zz, r, real_coord(zeta, r) + t);
            cplx g[4];
            eval_(z, zz, g);
            return g[c];
        },
        1e-4);
}

bool LerayMap::independent_of_zbar() const {
    for (const auto& c : comps_)
        for (const auto& t : c.terms())
            for (int j = 0; j < n_; ++j)
                if (t.e[sym::var_zb(n_, j)]) return false;
    return !comps_.empty();
}

bool LerayMap::independent_of_zetabar() const {
    for (const auto& c : comps_)
        for (const auto& t : c.terms())
            for (int j = 0; j < n_; ++j)
                if (t.e[sym::var_zetab(n_, j)]) return false;
    return !comps_.empty();
}

}  // namespace cfh
