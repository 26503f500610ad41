#include "cfh/kernels.hpp"

#include <algorithm>
#include <sstream>

namespace cfh {

using sym::Poly;
using sym::RatCoeff;

std::string mono_to_string(ExtMono m, int n) {
    std::string s;
    for (int j = 0; j < n; ++j)
        if (m >> gen_dzbar(n, j) & 1) s += "dzb" + std::to_string(j + 1) + "^";
    for (int j = 0; j < n; ++j)
        if (m >> gen_dzeta(n, j) & 1) s += "dw" + std::to_string(j + 1) + "^";
    for (int j = 0; j < n; ++j)
        if (m >> gen_dzetabar(n, j) & 1) s += "dwb" + std::to_string(j + 1) + "^";
    if (!s.empty()) s.pop_back();
    return s.empty() ? "1" : s;
}

KernelContext KernelContext::from_maps(std::vector<LerayMap> maps_in) {
    KernelContext ctx;
    if (maps_in.empty()) throw std::invalid_argument("KernelContext: no maps");
    ctx.n = maps_in.front().n();
    ctx.maps = std::move(maps_in);
    if (ctx.maps.size() > sym::kMaxDens) throw std::invalid_argument("KernelContext: too many maps");
    for (const auto& m : ctx.maps) ctx.dens.push_back(m.pairing_poly());
    return ctx;
}

void ExtForm::add_term(ExtMono mono, RatCoeff c) {
    if (c.is_zero()) return;
    for (auto& t : terms_) {
        if (t.mono == mono) {
            t.coeff += c;
            if (t.coeff.is_zero()) {
                t = terms_.back();
                terms_.pop_back();
            }
            return;
        }
    }
    terms_.push_back({mono, std::move(c)});
}

ExtForm ExtForm::operator+(const ExtForm& o) const {
    ExtForm r = *this;
    for (const auto& t : o.terms_) r.add_term(t.mono, t.coeff);
    return r;
}

ExtForm ExtForm::operator-() const {
    ExtForm r = *this;
    for (auto& t : r.terms_) t.coeff = -t.coeff;
    return r;
}

ExtForm ExtForm::scale(cplx s) const {
    ExtForm r = *this;
    for (auto& t : r.terms_) t.coeff = t.coeff * s;
    return r;
}

namespace {
inline int wedge_sign(ExtMono a, ExtMono b) {
    // inversions of concatenating (a, b): pairs (x in a, y in b) with y < x
    int inv = 0;
    ExtMono bb = b;
    while (bb) {
        int y = __builtin_ctz(bb);
        bb &= bb - 1;
        inv += __builtin_popcount(a >> (y + 1));
    }
    return inv % 2 == 0 ? 1 : -1;
}
}  // namespace

ExtForm ExtForm::wedge(const ExtForm& o) const {
    ExtForm r(n_);
    for (const auto& a : terms_)
        for (const auto& b : o.terms_) {
            if (a.mono & b.mono) continue;
            int s = wedge_sign(a.mono, b.mono);
            RatCoeff c = a.coeff * b.coeff;
            if (s < 0) c = -c;
            r.add_term(a.mono | b.mono, std::move(c));
        }
    return r;
}

namespace {
ExtForm dbar_impl(const ExtForm& f, const KernelContext& ctx, bool zvars) {
    const int n = f.n();
    ExtForm r(n);
    for (const auto& t : f.terms()) {
        for (int m = 0; m < n; ++m) {
            int var = zvars ? sym::var_zb(n, m) : sym::var_zetab(n, m);
            int gen = zvars ? gen_dzbar(n, m) : gen_dzetabar(n, m);
            if (t.mono >> gen & 1) continue;
            RatCoeff d = t.coeff.derivative(var, ctx.dens);
            if (d.is_zero()) continue;
            int sign = __builtin_popcount(t.mono & ((1u << gen) - 1)) % 2 == 0 ? 1 : -1;
            if (sign < 0) d = -d;
            r.add_term(t.mono | (1u << gen), std::move(d));
        }
    }
    return r;
}
}  // namespace

ExtForm ExtForm::dbar_z(const KernelContext& ctx) const { return dbar_impl(*this, ctx, true); }
ExtForm ExtForm::dbar_zeta(const KernelContext& ctx) const { return dbar_impl(*this, ctx, false); }

ExtForm ExtForm::component_z(int q) const {
    ExtForm r(n_);
    for (const auto& t : terms_)
        if (mono_degree_zbar(t.mono, n_) == q) r.add_term(t.mono, t.coeff);
    return r;
}

int ExtForm::max_zeta_degree() const {
    int d = -1;
    for (const auto& t : terms_) d = std::max(d, mono_degree_zeta_total(t.mono, n_));
    return d;
}

ExtForm cf_omega(const KernelContext& ctx, int map_index) {
    const int n = ctx.n;
    const cplx norm = cplx{0.0, -1.0 / (2.0 * kPi)};  // 1/(2 pi i)
    ExtForm w(n);
    const auto& comps = ctx.maps.at(map_index).components();
    if (comps.empty()) throw std::invalid_argument("cf_omega: map lacks polynomial components");
    for (int j = 0; j < n; ++j) {
        if (comps[j].is_zero()) continue;
        w.add_term(1u << gen_dzeta(n, j), RatCoeff::simple(comps[j] * norm, map_index, 1));
    }
    return w;
}

namespace {
void compositions(int total, int parts, std::vector<int>& cur, std::vector<std::vector<int>>& out) {
    if (parts == 1) {
        cur.push_back(total);
        out.push_back(cur);
        cur.pop_back();
        return;
    }
    for (int v = 0; v <= total; ++v) {
        cur.push_back(v);
        compositions(total - v, parts - 1, cur, out);
        cur.pop_back();
    }
}
}  // namespace

ExtForm cf_Omega(const KernelContext& ctx, const std::vector<int>& idx) {
    const int n = ctx.n;
    const int k = static_cast<int>(idx.size());
    ExtForm zero(n);
    if (k < 1 || k > n) return zero;  // degree impossible: legitimately zero

    std::vector<ExtForm> w, dw;
    for (int i : idx) {
        ExtForm wi = cf_omega(ctx, i);
        w.push_back(wi);
        dw.push_back(wi.dbar_z(ctx) + wi.dbar_zeta(ctx));
    }
    ExtForm base(n);
    base.add_term(0, RatCoeff(Poly(cplx{1.0, 0.0})));
    for (int i = 0; i < k; ++i) base = base.wedge(w[i]);

    std::vector<std::vector<int>> alphas;
    std::vector<int> cur;
    compositions(n - k, k, cur, alphas);
    ExtForm sum(n);
    for (const auto& a : alphas) {
        ExtForm prod(n);
        prod.add_term(0, RatCoeff(Poly(cplx{1.0, 0.0})));
        for (int i = 0; i < k; ++i)
            for (int p = 0; p < a[i]; ++p) prod = prod.wedge(dw[i]);
        sum = sum + prod;
    }
    return base.wedge(sum);
}

// ---------------------------------------------------------------------------
// Compilation

namespace {
void compile_rat(const RatCoeff& rc, std::vector<CompiledRat::T>& out) {
    for (const auto& rt : rc.terms()) {
        for (const auto& pt_ : rt.num.terms()) {
            CompiledRat::T t{};
            t.c = pt_.c;
            t.nnz = 0;
            for (int v = 0; v < sym::kMaxVars; ++v) {
                if (!pt_.e[v]) continue;
                if (t.nnz >= 12) throw std::runtime_error("compile_rat: term too long");
                t.var[t.nnz] = static_cast<std::uint8_t>(v);
                t.pow[t.nnz] = pt_.e[v];
                ++t.nnz;
            }
            for (int i = 0; i < sym::kMaxDens; ++i) t.dpow[i] = rt.dpow[i];
            out.push_back(t);
        }
    }
}
}  // namespace

CompiledForm::CompiledForm(const ExtForm& f, const KernelContext& ctx) : n_(ctx.n) {
    for (const auto& den : ctx.dens) {
        CompiledRat cr;
        compile_rat(RatCoeff(den), cr.terms);
        dens_.push_back(std::move(cr));
    }
    for (const auto& t : f.terms()) {
        CompiledRat cr;
        compile_rat(t.coeff, cr.terms);
        monos_.push_back({t.mono, static_cast<int>(coeffs_.size())});
        coeffs_.push_back(std::move(cr));
    }
    max_pow_ = 1;
    auto scan = [&](const CompiledRat& cr) {
        for (const auto& t : cr.terms)
            for (int i = 0; i < t.nnz; ++i) max_pow_ = std::max<int>(max_pow_, t.pow[i]);
    };
    for (const auto& c : coeffs_) scan(c);
    for (const auto& d : dens_) scan(d);
}

void CompiledForm::eval(const Pt& z, const Pt& zeta, cplx* out) const {
    cplx x[sym::kMaxVars];
    bind_vars(n_, z, zeta, x);
    // power table
    cplx pw[sym::kMaxVars][9];
    const int mp = std::min(max_pow_, 8);
    for (int v = 0; v < 4 * n_; ++v) {
        pw[v][0] = cplx{1.0, 0.0};
        for (int e = 1; e <= mp; ++e) pw[v][e] = pw[v][e - 1] * x[v];
    }
    auto eval_rat_poly = [&](const CompiledRat& cr) {
        cplx s{};
        for (const auto& t : cr.terms) {
            cplx v = t.c;
            for (int i = 0; i < t.nnz; ++i) v *= pw[t.var[i]][t.pow[i]];
            s += v;
        }
        return s;
    };
    cplx deninv[sym::kMaxDens];
    for (std::size_t i = 0; i < dens_.size(); ++i) deninv[i] = cplx{1.0, 0.0} / eval_rat_poly(dens_[i]);
    for (std::size_t c = 0; c < coeffs_.size(); ++c) {
        cplx s{};
        for (const auto& t : coeffs_[c].terms) {
            cplx v = t.c;
            for (int i = 0; i < t.nnz; ++i) v *= pw[t.var[i]][t.pow[i]];
            for (std::size_t d = 0; d < dens_.size(); ++d)
                for (int p = 0; p < t.dpow[d]; ++p) v *= deninv[d];
            s += v;
        }
        out[c] = s;
    }
}

void CompiledForm::eval_dens(const Pt& z, const Pt& zeta, cplx* out) const {
    cplx x[sym::kMaxVars];
    bind_vars(n_, z, zeta, x);
    cplx pw[sym::kMaxVars][9];
    const int mp = std::min(max_pow_, 8);
    for (int v = 0; v < 4 * n_; ++v) {
        pw[v][0] = cplx{1.0, 0.0};
        for (int e = 1; e <= mp; ++e) pw[v][e] = pw[v][e - 1] * x[v];
    }
    for (std::size_t i = 0; i < dens_.size(); ++i) {
        cplx s{};
        for (const auto& t : dens_[i].terms) {
            cplx v = t.c;
            for (int k = 0; k < t.nnz; ++k) v *= pw[t.var[k]][t.pow[k]];
            s += v;
        }
        out[i] = s;
    }
}

// ---------------------------------------------------------------------------

KernelForm::KernelForm(std::shared_ptr<KernelContext> ctx, std::vector<int> map_indices)
    : ctx_(std::move(ctx)), idx_(std::move(map_indices)), full_(ctx_->n) {
    full_ = cf_Omega(*ctx_, idx_);
    comps_.resize(ctx_->n + 2);
    compiled_.resize(ctx_->n + 2);
    compiled_db_.resize(ctx_->n + 2);
}

const ExtForm& KernelForm::component(int q) const {
    int qi = std::clamp(q, -1, n());
    auto& slot = comps_[qi + 1];
    if (!slot) slot = std::make_unique<ExtForm>(full_.component_z(qi));
    return *slot;
}

const CompiledForm& KernelForm::compiled(int q) const {
    int qi = std::clamp(q, -1, n());
    auto& slot = compiled_[qi + 1];
    if (!slot) slot = std::make_unique<CompiledForm>(component(qi), *ctx_);
    return *slot;
}

const CompiledForm& KernelForm::compiled_dbar_z(int q) const {
    int qi = std::clamp(q, -1, n());
    auto& slot = compiled_db_[qi + 1];
    if (!slot) slot = std::make_unique<CompiledForm>(component(qi).dbar_z(*ctx_), *ctx_);
    return *slot;
}

std::string KernelForm::to_json(int q) const {
    std::ostringstream os;
    os << "{\n  \"kernel\": \"Omega";
    for (int i : idx_) os << "_" << leray_name(ctx_->maps[i].id());
    os << "\",\n  \"component\": " << q << ",\n  \"monomials\": [\n";
    const auto& comp = component(q);
    for (std::size_t i = 0; i < comp.terms().size(); ++i) {
        const auto& t = comp.terms()[i];
        os << "    {\"mono\": \"" << mono_to_string(t.mono, n()) << "\", \"coeff\": \""
           << t.coeff.to_string(n()) << "\"}";
        os << (i + 1 < comp.terms().size() ? ",\n" : "\n");
    }
    os << "  ]\n}\n";
    return os.str();
}

KernelForm build_kernel(std::shared_ptr<KernelContext> ctx, const std::vector<int>& indices) {
    return KernelForm(std::move(ctx), indices);
}

double koppelman_residual(const KernelContext& ctx, const std::vector<int>& indices, int q,
                          const Pt& z, const Pt& zeta, bool closed_form, double h) {
    const int n = ctx.n;
    auto ctx_sp = std::make_shared<KernelContext>(ctx);
    KernelForm K(ctx_sp, indices);

    // RHS: sum_j (-1)^j Omega^{I \ i_j}_{(0,q)}   (1-based j)
    ExtForm rhs(n);
    for (std::size_t j = 0; j < indices.size(); ++j) {
        if (indices.size() == 1) break;
        std::vector<int> sub;
        for (std::size_t t = 0; t < indices.size(); ++t)
            if (t != j) sub.push_back(indices[t]);
        ExtForm piece = cf_Omega(ctx, sub).component_z(q);
        if ((j + 1) % 2 == 1) piece = -piece;
        rhs = rhs + piece;
    }

    if (closed_form) {
        ExtForm combined = K.component(q).dbar_zeta(ctx) + K.component(q - 1).dbar_z(ctx) - rhs;
        CompiledForm cf(combined, ctx);
        std::vector<cplx> vals(cf.num_coeffs());
        if (!vals.empty()) cf.eval(z, zeta, vals.data());
        double m = 0;
        for (auto v : vals) m = std::max(m, std::abs(v));
        return m;
    }

    // FD mode: assemble dbar with central differences of the compiled coeffs.
    std::map<ExtMono, cplx> acc;
    auto accumulate_fd = [&](const ExtForm& comp, bool zvars) {
        CompiledForm cf(comp, ctx);
        const std::size_t nc = cf.num_coeffs();
        if (!nc) return;
        for (int m = 0; m < n; ++m) {
            int gen = zvars ? gen_dzbar(n, m) : gen_dzetabar(n, m);
            std::vector<cplx> px(nc), mx(nc), py(nc), my(nc);
            {
                Pt a = zvars ? z : zeta;
                Pt ax = a, bx = a, ay = a, by = a;
                set_real_coord(ax, 2 * m, real_coord(a, 2 * m) + h);
                set_real_coord(bx, 2 * m, real_coord(a, 2 * m) - h);
                set_real_coord(ay, 2 * m + 1, real_coord(a, 2 * m + 1) + h);
                set_real_coord(by, 2 * m + 1, real_coord(a, 2 * m + 1) - h);
                if (zvars) {
                    cf.eval(ax, zeta, px.data());
                    cf.eval(bx, zeta, mx.data());
                    cf.eval(ay, zeta, py.data());
                    cf.eval(by, zeta, my.data());
                } else {
                    cf.eval(z, ax, px.data());
                    cf.eval(z, bx, mx.data());
                    cf.eval(z, ay, py.data());
                    cf.eval(z, by, my.data());
                }
            }
            for (const auto& [mono, coeff_id] : cf.monos()) {
                if (mono >> gen & 1) continue;
                cplx dx = (px[coeff_id] - mx[coeff_id]) / (2 * h);
                cplx dy = (py[coeff_id] - my[coeff_id]) / (2 * h);
                cplx der = 0.5 * (dx + cplx{0, 1} * dy);
                int sign = __builtin_popcount(mono & ((1u << gen) - 1)) % 2 == 0 ? 1 : -1;
                acc[mono | (1u << gen)] += static_cast<double>(sign) * der;
            }
        }
    };
    accumulate_fd(K.component(q), false);
    accumulate_fd(K.component(q - 1), true);
    CompiledForm crhs(rhs, ctx);
    std::vector<cplx> rv(crhs.num_coeffs());
    if (!rv.empty()) crhs.eval(z, zeta, rv.data());
    for (const auto& [mono, coeff_id] : crhs.monos()) acc[mono] -= rv[coeff_id];
    double m = 0;
    for (const auto& [mono, v] : acc) {
        (void)mono;
        m = std::max(m, std::abs(v));
    }
    return m;
}

DegreeReport degree_vanishing_check(const Configuration& cfg, const std::string& which) {
    const int n = cfg.n, q = cfg.q;
    auto ctx = std::make_shared<KernelContext>(KernelContext::from_maps(cfg.leray));
    DegreeReport rep;
    std::ostringstream os;

    auto require = [&](bool cond, const std::string& what) {
        if (!cond) {
            rep.ok = false;
            os << "FAILED: " << what << "; ";
        } else {
            os << what << "; ";
        }
    };

    if (which == "type-1") {
        KernelForm K(ctx, {1});
        for (int k = q; k <= n; ++k)
            require(K.component(k).empty(), "Omega1_(0," + std::to_string(k) + ") = 0");
        require(K.component(q - 1).dbar_z(*ctx).component_z(q).empty(), "dbar_z Omega1_(0,q-1) = 0");
    } else if (which == "type-2") {
        KernelForm K(ctx, {2});
        for (int k = 1; k <= n; ++k)
            require(K.component(k).empty(), "Omega2_(0," + std::to_string(k) + ") = 0");
        require(K.component(0).dbar_z(*ctx).empty(), "dbar_z Omega2_(0,0) = 0");
    } else if (which == "type-12") {
        KernelForm K(ctx, {1, 2});
        for (int k = q; k <= n; ++k)
            require(K.component(k).empty(), "Omega12_(0," + std::to_string(k) + ") = 0");
        require(K.component(q - 1).dbar_z(*ctx).component_z(q).empty(), "dbar_z Omega12_(0,q-1) = 0");
    } else if (which == "Ca-type-1") {
        KernelForm K(ctx, {1});
        for (int l = 0; l <= n; ++l) {
            int d = K.component(l).max_zeta_degree();
            require(d <= 2 * n - q - 2, "deg_zeta Omega1_(0," + std::to_string(l) + ") = " +
                                            std::to_string(d) + " <= 2n-q-2");
        }
    } else if (which == "type-3") {
        KernelForm K(ctx, {3});
        for (int l = 0; l <= n; ++l) {
            int d = K.component(l).max_zeta_degree();
            require(d <= 2 * n - q - l - 2, "deg_zeta Omega3_(0," + std::to_string(l) + ") = " +
                                                std::to_string(d) + " <= 2n-q-l-2");
        }
    } else if (which == "db13=0") {
        KernelForm K(ctx, {1, 3});
        for (int l = 0; l < q; ++l)
            require(K.component(l).empty(), "Omega13_(0," + std::to_string(l) + ") = 0");
        require(K.component(q).dbar_zeta(*ctx).empty(), "dbar_zeta Omega13_(0,q) = 0");
    } else if (which == "L110") {
        // integrand Omega^i_(0,q) ^ f cannot reach zeta-degree 2n-1 = dim S^i
        for (int i = 1; i <= 2; ++i) {
            KernelForm K(ctx, {i});
            const auto& comp = K.component(q);
            bool cannot = true;
            for (const auto& t : comp.terms())
                if (mono_degree_zeta_total(t.mono, n) + q == 2 * n - 1) cannot = false;
            require(cannot || comp.empty(),
                    "L^" + std::to_string(i) + "_" + std::to_string(i) + ";q vanishes by degree");
        }
    } else {
        throw std::invalid_argument("degree_vanishing_check: unknown fact " + which);
    }
    rep.detail = os.str();
    return rep;
}

}  // namespace cfh
