#include "cfh/forms.hpp"

#include <cmath>
#include <sstream>

namespace cfh {

int merge_sign(const std::vector<int>& a, const std::vector<int>& b, std::vector<int>& merged) {
    merged.clear();
    int inv = 0;
    std::size_t i = 0, j = 0;
    // count inversions of concatenation (a, b) relative to sorted order
    for (int x : a)
        for (int y : b) {
            if (x == y) return 0;
            if (y < x) ++inv;
        }
    while (i < a.size() || j < b.size()) {
        if (j == b.size() || (i < a.size() && a[i] < b[j]))
            merged.push_back(a[i++]);
        else
            merged.push_back(b[j++]);
    }
    return inv % 2 == 0 ? 1 : -1;
}

FormField FormField::closed(int n, int q, int k0, Eval eval) {
    FormField f;
    f.n_ = n;
    f.q_ = q;
    f.k0_ = k0;
    f.eval_ = std::move(eval);
    return f;
}

FormField FormField::closed_with_dbar(int n, int q, int k0, Eval eval, FormField db) {
    FormField f = closed(n, q, k0, std::move(eval));
    f.dbar_ = std::make_shared<FormField>(std::move(db));
    return f;
}

FormField FormField::zero(int n, int q, int k0) {
    auto z = closed(n, q, k0, [k0, n, q](const Pt&, CompVals& out) {
        out.assign(binom(n, q), Mat(k0));
    });
    if (q < n) z.dbar_ = std::make_shared<FormField>(closed(n, q + 1, k0, [k0, n, q](const Pt&, CompVals& out) {
        out.assign(binom(n, q + 1), Mat(k0));
    }));
    return z;
}

FormField FormField::constant(int n, int q, int k0, const std::vector<int>& J, const Mat& coeff) {
    int rank = comb_rank(n, J);
    auto f = closed(n, q, k0, [n, q, k0, rank, coeff](const Pt&, CompVals& out) {
        out.assign(binom(n, q), Mat(k0));
        out[rank] = coeff;
    });
    if (q < n) f.dbar_ = std::make_shared<FormField>(FormField::zero(n, q + 1, k0));
    return f;
}

void FormField::eval(const Pt& z, CompVals& out) const { eval_(z, out); }

MatForm FormField::value(const Pt& z) const {
    MatForm m(n_, q_, k0_);
    CompVals v;
    eval(z, v);
    m.comp = std::move(v);
    return m;
}

const FormField& FormField::closed_dbar() const {
    if (!dbar_) throw std::runtime_error("FormField: no closed-form dbar available");
    return *dbar_;
}

double FormField::sup_norm(const std::vector<Pt>& probes) const {
    double s = 0;
    CompVals v;
    for (const auto& p : probes) {
        eval(p, v);
        for (const auto& m : v) s = std::max(s, m.norm_inf());
    }
    return s;
}

GaugeMatrix GaugeMatrix::identity(int n, int k0) {
    GaugeMatrix g;
    g.n = n;
    g.k0 = k0;
    g.eval = [k0](const Pt&) { return Mat::identity(k0); };
    g.dbar = [n, k0](const Pt&, std::vector<Mat>& out) { out.assign(n, Mat(k0)); };
    return g;
}

double GaugeMatrix::min_abs_det(const std::vector<Pt>& probes) const {
    double m = 1e300;
    for (const auto& p : probes) {
        Mat a = eval(p);
        std::vector<cplx> buf = a.data();
        m = std::min(m, std::abs(det_small(buf.data(), a.dim())));
    }
    return m;
}

CompVals wedge_vals(int n, int qa, int qb, const CompVals& a, const CompVals& b, int k0) {
    CompVals out(binom(n, qa + qb), Mat(k0));
    std::vector<int> merged;
    for (int ra = 0; ra < binom(n, qa); ++ra) {
        auto Ja = comb_unrank(n, qa, ra);
        for (int rb = 0; rb < binom(n, qb); ++rb) {
            auto Jb = comb_unrank(n, qb, rb);
            int s = merge_sign(Ja, Jb, merged);
            if (!s) continue;
            Mat prod = a[ra] * b[rb];
            if (s < 0) prod = prod * cplx{-1.0, 0.0};
            out[comb_rank(n, merged)] += prod;
        }
    }
    return out;
}

FormField wedge(const FormField& a, const FormField& b) {
    if (a.n() != b.n() || a.k0() != b.k0()) throw std::invalid_argument("wedge: incompatible fields");
    const int n = a.n(), q = a.q() + b.q(), k0 = a.k0();
    if (q > n) throw std::invalid_argument("wedge: degree overflow");
    const int qa = a.q(), qb = b.q();
    // precompute the pairing table once per call
    struct Entry {
        int ja, jb, jout, sign;
    };
    auto table = std::make_shared<std::vector<Entry>>();
    std::vector<int> merged;
    for (int ra = 0; ra < binom(n, qa); ++ra) {
        auto Ja = comb_unrank(n, qa, ra);
        for (int rb = 0; rb < binom(n, qb); ++rb) {
            auto Jb = comb_unrank(n, qb, rb);
            int s = merge_sign(Ja, Jb, merged);
            if (s) table->push_back({ra, rb, comb_rank(n, merged), s});
        }
    }
    auto af = a, bf = b;
    return FormField::closed(n, q, k0, [af, bf, table, n, q, k0](const Pt& z, CompVals& out) {
        CompVals va, vb;
        af.eval(z, va);
        bf.eval(z, vb);
        out.assign(binom(n, q), Mat(k0));
        for (const auto& e : *table) {
            Mat prod = va[e.ja] * vb[e.jb];
            if (e.sign < 0) prod = prod * cplx{-1.0, 0.0};
            out[e.jout] += prod;
        }
    });
}

namespace {

// coefficient of dzbar_m applied by FD: d/dzbar = (d/dx + i d/dy)/2
void fd_dzbar(const FormField& f, const Pt& z, int m, double h, int order, CompVals& out) {
    auto shift = [&](int axis, double t) {
        Pt p = z;
        set_real_coord(p, axis, real_coord(z, axis) + t);
        return p;
    };
    const int nc = f.ncomp();
    CompVals xp, xm, yp, ym;
    out.assign(nc, Mat(f.k0()));
    if (order <= 2) {
        f.eval(shift(2 * m, h), xp);
        f.eval(shift(2 * m, -h), xm);
        f.eval(shift(2 * m + 1, h), yp);
        f.eval(shift(2 * m + 1, -h), ym);
        for (int c = 0; c < nc; ++c) {
            Mat dx = (xp[c] - xm[c]) * cplx{1.0 / (2 * h), 0.0};
            Mat dy = (yp[c] - ym[c]) * cplx{1.0 / (2 * h), 0.0};
            out[c] = (dx + dy * cplx{0.0, 1.0}) * cplx{0.5, 0.0};
        }
        return;
    }
    CompVals xp2, xm2, yp2, ym2;
    f.eval(shift(2 * m, h), xp);
    f.eval(shift(2 * m, -h), xm);
    f.eval(shift(2 * m, 2 * h), xp2);
    f.eval(shift(2 * m, -2 * h), xm2);
    f.eval(shift(2 * m + 1, h), yp);
    f.eval(shift(2 * m + 1, -h), ym);
    f.eval(shift(2 * m + 1, 2 * h), yp2);
    f.eval(shift(2 * m + 1, -2 * h), ym2);
    for (int c = 0; c < nc; ++c) {
        Mat dx = (xm2[c] - xp2[c] + (xp[c] - xm[c]) * cplx{8.0, 0.0}) * cplx{1.0 / (12 * h), 0.0};
        Mat dy = (ym2[c] - yp2[c] + (yp[c] - ym[c]) * cplx{8.0, 0.0}) * cplx{1.0 / (12 * h), 0.0};
        out[c] = (dx + dy * cplx{0.0, 1.0}) * cplx{0.5, 0.0};
    }
}

}  // namespace

FormField dbar(const FormField& f, DbarMode mode, double h, int order) {
    if (mode == DbarMode::closed_form) return f.closed_dbar();
    const int n = f.n(), q = f.q(), k0 = f.k0();
    if (q >= n) return FormField::zero(n, n, k0);  // top degree: FD dbar is 0-dim
    auto ff = f;
    return FormField::closed(n, q + 1, k0, [ff, n, q, k0, h, order](const Pt& z, CompVals& out) {
        out.assign(binom(n, q + 1), Mat(k0));
        std::vector<int> rest;
        CompVals d;
        for (int rk = 0; rk < binom(n, q + 1); ++rk) {
            auto K = comb_unrank(n, q + 1, rk);
            Mat acc(k0);
            for (std::size_t pos = 0; pos < K.size(); ++pos) {
                int m = K[pos];
                rest.clear();
                for (std::size_t t = 0; t < K.size(); ++t)
                    if (t != pos) rest.push_back(K[t]);
                fd_dzbar(ff, z, m, h, order, d);
                Mat term = d[comb_rank(n, rest)];
                if (pos % 2 == 1) term = term * cplx{-1.0, 0.0};
                acc += term;
            }
            out[rk] = acc;
        }
    });
}

FormField gauge_transform(const FormField& omega, const GaugeMatrix& A, double fd_h) {
    const int n = omega.n(), k0 = omega.k0();
    if (omega.q() != 1) throw std::invalid_argument("gauge_transform: omega must be a (0,1) form");
    auto Af = A;
    auto om = omega;
    return FormField::closed(n, 1, k0, [Af, om, n, k0, fd_h](const Pt& z, CompVals& out) {
        Mat a = Af.eval(z);
        Mat ai;
        try {
            ai = a.inverse();
        } catch (const std::exception&) {
            std::ostringstream os;
            os << "gauge_transform: singular gauge matrix at (";
            for (int j = 0; j < n; ++j) os << fmt_g(z[j].real()) << "+" << fmt_g(z[j].imag()) << "i ";
            os << ")";
            throw std::runtime_error(os.str());
        }
        std::vector<Mat> da;
        if (Af.dbar) {
            Af.dbar(z, da);
        } else {
            da.assign(n, Mat(k0));
            for (int m = 0; m < n; ++m) {
                auto shift = [&](int axis, double t) {
                    Pt p = z;
                    set_real_coord(p, axis, real_coord(z, axis) + t);
                    return p;
                };
                Mat dx = (Af.eval(shift(2 * m, fd_h)) - Af.eval(shift(2 * m, -fd_h))) * cplx{1.0 / (2 * fd_h), 0.0};
                Mat dy = (Af.eval(shift(2 * m + 1, fd_h)) - Af.eval(shift(2 * m + 1, -fd_h))) *
                         cplx{1.0 / (2 * fd_h), 0.0};
                da[m] = (dx + dy * cplx{0.0, 1.0}) * cplx{0.5, 0.0};
            }
        }
        CompVals w;
        om.eval(z, w);
        out.assign(n, Mat(k0));
        for (int m = 0; m < n; ++m) out[m] = da[m] * ai + a * w[m] * ai;
    });
}

std::pair<ResidualReport, FormField> integrability_residual(const FormField& omega, double h,
                                                            const std::vector<Pt>& probes,
                                                            DbarMode mode) {
    FormField db = dbar(omega, mode, h);
    FormField ww = wedge(omega, omega);
    const int n = omega.n(), k0 = omega.k0();
    auto resid = FormField::closed(n, 2, k0, [db, ww, n, k0](const Pt& z, CompVals& out) {
        CompVals a, b;
        db.eval(z, a);
        ww.eval(z, b);
        out.assign(binom(n, 2), Mat(k0));
        for (int c = 0; c < binom(n, 2); ++c) out[c] = a[c] - b[c];
    });
    ResidualReport rep;
    CompVals v;
    for (const auto& p : probes) {
        resid.eval(p, v);
        for (const auto& m : v)
            if (m.norm_inf() > rep.norm) {
                rep.norm = m.norm_inf();
                rep.argmax = p;
            }
    }
    return {rep, resid};
}

double conjugation_identity_check(const FormField& omega, const GaugeMatrix& A, double h,
                                  const std::vector<Pt>& probes) {
    FormField hat = gauge_transform(omega, A, h);
    FormField lhs_db = dbar(hat, DbarMode::finite_difference, h);
    FormField lhs_ww = wedge(hat, hat);
    FormField rhs_db = dbar(omega, DbarMode::finite_difference, h);
    FormField rhs_ww = wedge(omega, omega);
    double worst = 0;
    CompVals a, b, c, d;
    for (const auto& p : probes) {
        lhs_db.eval(p, a);
        lhs_ww.eval(p, b);
        rhs_db.eval(p, c);
        rhs_ww.eval(p, d);
        Mat am = A.eval(p);
        Mat ai = am.inverse();
        for (std::size_t i = 0; i < a.size(); ++i) {
            Mat diff = (a[i] - b[i]) - am * (c[i] - d[i]) * ai;
            worst = std::max(worst, diff.norm_inf());
        }
    }
    return worst;
}

// ---------------------------------------------------------------------------

GridField::GridField(GridSpec spec, int q, int k0) : spec_(spec), q_(q), k0_(k0) {
    const std::size_t nodes = spec_.num_nodes();
    valid_.assign(nodes, 0);
    data_.assign(nodes * binom(spec_.n, q_) * k0_ * k0_, cplx{});
}

std::size_t GridField::node_index(const std::array<int, 8>& iv) const {
    std::size_t idx = 0;
    for (int i = 2 * spec_.n - 1; i >= 0; --i) idx = idx * spec_.dims[i] + iv[i];
    return idx;
}

Pt GridField::node_point(std::size_t node) const {
    Pt p = spec_.origin;
    for (int i = 0; i < 2 * spec_.n; ++i) {
        int c = static_cast<int>(node % spec_.dims[i]);
        node /= spec_.dims[i];
        set_real_coord(p, i, real_coord(spec_.origin, i) + c * spec_.h);
    }
    return p;
}

void GridField::set_node(std::size_t node, const CompVals& v) {
    const int nc = binom(spec_.n, q_), kk = k0_ * k0_;
    for (int c = 0; c < nc; ++c)
        for (int e = 0; e < kk; ++e) data_[(node * nc + c) * kk + e] = v[c].data()[e];
    valid_[node] = 1;
}

bool GridField::eval(const Pt& z, CompVals& out) const {
    const int d = 2 * spec_.n, nc = binom(spec_.n, q_), kk = k0_ * k0_;
    std::array<int, 8> base{};
    double t[8];
    for (int i = 0; i < d; ++i) {
        double u = (real_coord(z, i) - real_coord(spec_.origin, i)) / spec_.h;
        int b = static_cast<int>(std::floor(u));
        if (b < 0) {
            b = 0;
            u = 0;
        }
        if (b > spec_.dims[i] - 2) {
            b = spec_.dims[i] - 2;
            u = b + 1;
        }
        base[i] = b;
        t[i] = u - b;
    }
    out.assign(nc, Mat(k0_));
    std::vector<cplx> acc(static_cast<std::size_t>(nc) * kk, cplx{});
    for (int corner = 0; corner < (1 << d); ++corner) {
        double w = 1;
        std::array<int, 8> iv = base;
        for (int i = 0; i < d; ++i) {
            if (corner >> i & 1) {
                iv[i] += 1;
                w *= t[i];
            } else {
                w *= 1 - t[i];
            }
        }
        if (w == 0.0) continue;
        std::size_t node = node_index(iv);
        if (!valid_[node]) return false;
        const cplx* src = &data_[node * nc * kk];
        for (int e = 0; e < nc * kk; ++e) acc[e] += w * src[e];
    }
    for (int c = 0; c < nc; ++c)
        for (int e = 0; e < kk; ++e) out[c].data()[e] = acc[static_cast<std::size_t>(c) * kk + e];
    return true;
}

FormField GridField::as_form() const {
    auto self = std::make_shared<GridField>(*this);
    return FormField::closed(spec_.n, q_, k0_, [self](const Pt& z, CompVals& out) {
        if (!self->eval(z, out)) {
            out.assign(binom(self->spec().n, self->q()), Mat(self->k0()));
        }
    });
}

std::string GridField::to_csv() const {
    std::ostringstream os;
    os << "n," << spec_.n << ",q," << q_ << ",k0," << k0_ << ",h," << fmt_g(spec_.h);
    for (int i = 0; i < 2 * spec_.n; ++i)
        os << "," << fmt_g(real_coord(spec_.origin, i)) << "," << spec_.dims[i];
    os << "\n";
    const int nc = binom(spec_.n, q_), kk = k0_ * k0_;
    for (std::size_t node = 0; node < spec_.num_nodes(); ++node) {
        if (!valid_[node]) continue;
        os << node;
        for (int e = 0; e < nc * kk; ++e) {
            cplx v = data_[node * nc * kk + e];
            os << "," << fmt_g(v.real()) << "," << fmt_g(v.imag());
        }
        os << "\n";
    }
    return os.str();
}

GridField GridField::from_csv(const std::string& text) {
    std::istringstream is(text);
    std::string line;
    std::getline(is, line);
    std::istringstream hs(line);
    std::string tok;
    auto next = [&]() {
        std::getline(hs, tok, ',');
        return tok;
    };
    GridSpec spec;
    next();  // "n"
    spec.n = std::stoi(next());
    next();
    int q = std::stoi(next());
    next();
    int k0 = std::stoi(next());
    next();
    spec.h = std::stod(next());
    for (int i = 0; i < 2 * spec.n; ++i) {
        set_real_coord(spec.origin, i, std::stod(next()));
        spec.dims[i] = std::stoi(next());
    }
    GridField g(spec, q, k0);
    const int nc = binom(spec.n, q), kk = k0 * k0;
    while (std::getline(is, line)) {
        if (line.empty()) continue;
        std::istringstream ls(line);
        std::string t;
        std::getline(ls, t, ',');
        std::size_t node = std::stoull(t);
        CompVals v(nc, Mat(k0));
        for (int c = 0; c < nc; ++c)
            for (int e = 0; e < kk; ++e) {
                std::getline(ls, t, ',');
                double re = std::stod(t);
                std::getline(ls, t, ',');
                double im = std::stod(t);
                v[c].data()[e] = cplx{re, im};
            }
        g.set_node(node, v);
    }
    return g;
}

GridField sample_to_grid(const FormField& f, const GridSpec& spec,
                         const std::function<bool(const Pt&)>& inside) {
    GridField g(spec, f.q(), f.k0());
    CompVals v;
    for (std::size_t node = 0; node < spec.num_nodes(); ++node) {
        Pt p = g.node_point(node);
        if (!inside(p)) continue;
        f.eval(p, v);
        g.set_node(node, v);
    }
    return g;
}

}  // namespace cfh
