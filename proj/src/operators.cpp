#include "cfh/operators.hpp"

#include <algorithm>
#include <cmath>
#include <mutex>
#include <sstream>

namespace cfh {

namespace {

inline void axpy(Mat& out, cplx a, const Mat& x) {
    auto& o = out.data();
    const auto& xd = x.data();
    for (std::size_t i = 0; i < o.size(); ++i) o[i] += a * xd[i];
}

inline int wedge_sign_bits(std::uint32_t a, std::uint32_t b) {
    int inv = 0;
    std::uint32_t bb = b;
    while (bb) {
        int y = __builtin_ctz(bb);
        bb &= bb - 1;
        inv += __builtin_popcount(a >> (y + 1));
    }
    return inv % 2 == 0 ? 1 : -1;
}

inline int mask_rank(int n, std::uint32_t mask) {
    std::vector<int> idx;
    while (mask) {
        idx.push_back(__builtin_ctz(mask));
        mask &= mask - 1;
    }
    return comb_rank(n, idx);
}

inline cplx vol_factor(int n) {
    // dzeta_1..n ^ dzetabar_1..n = (-1)^{n(n-1)/2} (-2i)^n dV
    cplx f{1.0, 0.0};
    for (int i = 0; i < n; ++i) f *= cplx{0.0, -2.0};
    if ((n * (n - 1) / 2) % 2 == 1) f = -f;
    return f;
}

struct VolProgram {
    struct E {
        int slot, K, J;
        cplx factor;
    };
    std::vector<E> entries;
};

VolProgram build_vol_program(const CompiledForm& comp, int n, int qf) {
    VolProgram prog;
    const std::uint32_t nmask = (1u << n) - 1;
    const cplx cv = vol_factor(n);
    for (const auto& [mono, slot] : comp.monos()) {
        std::uint32_t dzeta = (mono >> n) & nmask;
        if (__builtin_popcount(dzeta) != n) continue;
        std::uint32_t B = (mono >> (2 * n)) & nmask;
        std::uint32_t Jmask = nmask & ~B;
        if (__builtin_popcount(Jmask) != qf) continue;
        int sign = wedge_sign_bits(mono, Jmask << (2 * n));
        // crossing sign: move the f legs past the output dzbar^K block so the
        // result reads dzbar^K tensor (zeta-part)
        int kq = __builtin_popcount(mono & nmask);
        if ((kq * qf) % 2 == 1) sign = -sign;
        prog.entries.push_back(
            {slot, mask_rank(n, mono & nmask), mask_rank(n, Jmask), cv * static_cast<double>(sign)});
    }
    return prog;
}

struct FacetProgram {
    struct E {
        int slot, K, J;
        double sign;
        std::array<std::uint8_t, 8> legs;  // leg < n: dzeta_leg ; else dzetabar_{leg-n}
    };
    std::vector<E> entries;
};

FacetProgram build_facet_program(const CompiledForm& comp, int n, int qf, int dim) {
    FacetProgram prog;
    const std::uint32_t nmask = (1u << n) - 1;
    for (const auto& [mono, slot] : comp.monos()) {
        std::uint32_t zeta_bits = mono >> n;  // bit j: dzeta_j ; bit n+j: dzetabar_j
        int base_legs = __builtin_popcount(zeta_bits);
        if (base_legs + qf != dim) continue;
        for (int jr = 0; jr < binom(n, qf); ++jr) {
            auto J = comb_unrank(n, qf, jr);
            std::uint32_t jmask = 0;
            for (int j : J) jmask |= 1u << j;
            if ((mono >> (2 * n)) & jmask) continue;  // repeated dzetabar leg
            int sign = wedge_sign_bits(mono, jmask << (2 * n));
            // crossing sign past the dzbar^K output block
            if ((__builtin_popcount(mono & nmask) * qf) % 2 == 1) sign = -sign;
            FacetProgram::E e{};
            e.slot = slot;
            e.K = mask_rank(n, mono & nmask);
            e.J = jr;
            e.sign = sign;
            std::uint32_t legs = zeta_bits | (jmask << n);
            int c = 0;
            while (legs) {
                e.legs[c++] = static_cast<std::uint8_t>(__builtin_ctz(legs));
                legs &= legs - 1;
            }
            prog.entries.push_back(e);
        }
    }
    return prog;
}

inline cplx leg_on_tangent(int leg, const double* T, int col, int n) {
    int j = leg < n ? leg : leg - n;
    cplx v{T[col * 2 * n + 2 * j], T[col * 2 * n + 2 * j + 1]};
    return leg < n ? v : std::conj(v);
}

double smoothstep5(double t) {
    if (t <= 0) return 0;
    if (t >= 1) return 1;
    return t * t * t * (10 + t * (-15 + 6 * t));
}

struct SphereRule {
    std::vector<Pt> dirs;
    std::vector<double> w;
};

const SphereRule& sphere_rule(int n, int k) {
    static std::map<std::pair<int, int>, SphereRule> cache;
    static std::mutex mu;
    std::lock_guard<std::mutex> lk(mu);
    auto key = std::make_pair(n, k);
    auto it = cache.find(key);
    if (it != cache.end()) return it->second;
    SphereRule rule;
    const int d = 2 * n, dpar = d - 1;
    const double du = 2.0 / k;
    for (int axis = 0; axis < d; ++axis)
        for (int side = -1; side <= 1; side += 2) {
            std::vector<int> idx(dpar, 0);
            while (true) {
                double u[7];
                for (int i = 0; i < dpar; ++i) u[i] = -1.0 + (idx[i] + 0.5) * du;
                double c[8];
                int col = 0;
                for (int i = 0; i < d; ++i) c[i] = (i == axis) ? side : u[col++];
                double nc = 0;
                for (int i = 0; i < d; ++i) nc += c[i] * c[i];
                nc = std::sqrt(nc);
                Pt p = pt();
                for (int i = 0; i < d; ++i) set_real_coord(p, i, c[i] / nc);
                double T[8 * 7];
                double nc3 = nc * nc * nc;
                col = 0;
                for (int i = 0; i < d; ++i) {
                    if (i == axis) continue;
                    for (int row = 0; row < d; ++row)
                        T[col * d + row] = ((row == i ? nc * nc : 0.0) - c[row] * c[i]) / nc3;
                    ++col;
                }
                double G[49];
                for (int a = 0; a < dpar; ++a)
                    for (int b = 0; b < dpar; ++b) {
                        double s = 0;
                        for (int r = 0; r < d; ++r) s += T[a * d + r] * T[b * d + r];
                        G[a * dpar + b] = s;
                    }
                double det = 1.0;
                for (int cc = 0; cc < dpar; ++cc) {
                    int piv = cc;
                    for (int r = cc + 1; r < dpar; ++r)
                        if (std::abs(G[r * dpar + cc]) > std::abs(G[piv * dpar + cc])) piv = r;
                    if (piv != cc) {
                        for (int j = cc; j < dpar; ++j) std::swap(G[piv * dpar + j], G[cc * dpar + j]);
                        det = -det;
                    }
                    det *= G[cc * dpar + cc];
                    for (int r = cc + 1; r < dpar; ++r) {
                        double f = G[r * dpar + cc] / G[cc * dpar + cc];
                        for (int j = cc; j < dpar; ++j) G[r * dpar + j] -= f * G[cc * dpar + j];
                    }
                }
                rule.dirs.push_back(p);
                rule.w.push_back(std::sqrt(std::abs(det)) * std::pow(du, dpar));
                int i = 0;
                for (; i < dpar; ++i) {
                    if (++idx[i] < k) break;
                    idx[i] = 0;
                }
                if (i == dpar) break;
            }
        }
    auto [pos, ok] = cache.emplace(key, std::move(rule));
    (void)ok;
    return pos->second;
}

constexpr double kGLx[4] = {0.06943184420297371, 0.33000947820757187, 0.6699905217924281,
                            0.9305681557970263};
constexpr double kGLw[4] = {0.17392742256872693, 0.32607257743127307, 0.32607257743127307,
                            0.17392742256872693};

}  // namespace

// ---------------------------------------------------------------------------

void SampledField::prepare_volume(const Mesh& m, const std::string& carrier) {
    auto key = std::make_pair(static_cast<const void*>(&m), carrier);
    if (vol_.count(key)) return;
    const auto& cells = m.volume(carrier);
    std::vector<CompVals> vals(cells.size());
    for (std::size_t i = 0; i < cells.size(); ++i) field_.eval(cells[i].c, vals[i]);
    vol_.emplace(key, std::move(vals));
}

void SampledField::prepare_stratum(const Mesh& m, const std::string& name) {
    auto key = std::make_pair(static_cast<const void*>(&m), name);
    if (strat_.count(key)) return;
    const auto& set = m.stratum(name);
    std::vector<CompVals> vals(set.facets.size());
    for (std::size_t i = 0; i < set.facets.size(); ++i) field_.eval(set.facets[i].p, vals[i]);
    strat_.emplace(key, std::move(vals));
}

void SampledField::set_volume_vals(const Mesh& m, const std::string& carrier,
                                   std::vector<CompVals> vals) {
    vol_[std::make_pair(static_cast<const void*>(&m), carrier)] = std::move(vals);
}

void SampledField::set_stratum_vals(const Mesh& m, const std::string& name,
                                    std::vector<CompVals> vals) {
    strat_[std::make_pair(static_cast<const void*>(&m), name)] = std::move(vals);
}

const std::vector<CompVals>& SampledField::volume_vals(const Mesh& m, const std::string& c) const {
    auto it = vol_.find(std::make_pair(static_cast<const void*>(&m), c));
    if (it == vol_.end()) throw std::runtime_error("SampledField: volume carrier not prepared: " + c);
    return it->second;
}

const std::vector<CompVals>& SampledField::stratum_vals(const Mesh& m, const std::string& s) const {
    auto it = strat_.find(std::make_pair(static_cast<const void*>(&m), s));
    if (it == strat_.end()) throw std::runtime_error("SampledField: stratum not prepared: " + s);
    return it->second;
}

// ---------------------------------------------------------------------------

MatForm volume_R(const KernelForm& K, int s_out, const Mesh& mesh,
                 const std::vector<std::string>& carriers, const SampledField& f, const Pt& z,
                 const SingularOpts& sing) {
    const int n = K.n(), k0 = f.k0();
    MatForm out(n, std::max(s_out, 0), k0);
    const CompiledForm& comp = K.compiled(s_out);
    if (comp.monos().empty()) return out;
    VolProgram prog = build_vol_program(comp, n, f.q());
    if (prog.entries.empty()) return out;

    const double h = mesh.h;
    const double rho1 = sing.rho1_cells * h, rho2 = sing.rho2_cells * h;
    std::vector<cplx> coeffs(comp.num_coeffs());
    bool damped = false;

    for (const auto& carrier : carriers) {
        const auto& cells = mesh.volume(carrier);
        const auto& fv = f.volume_vals(mesh, carrier);
        for (std::size_t i = 0; i < cells.size(); ++i) {
            double r = dist(z, cells[i].c, n);
            double W = 1.0;
            if (sing.enabled) {
                W = smoothstep5((r - rho1) / (rho2 - rho1));
                if (W < 1) damped = true;
                if (W <= 0) continue;
            } else if (r < 0.35 * h) {
                throw std::runtime_error(
                    "volume_R: evaluation point on the carrier without singular handling");
            }
            comp.eval(z, cells[i].c, coeffs.data());
            const double w = cells[i].w * W;
            for (const auto& e : prog.entries)
                axpy(out.comp[e.K], e.factor * coeffs[e.slot] * w, fv[i][e.J]);
        }
    }

    if (sing.enabled && damped) {
        const auto& rule = sphere_rule(n, sing.sphere_k);
        const int segs = std::max(1, sing.n_rad);
        CompVals fval;
        for (int seg = 0; seg < segs; ++seg)
            for (int gi = 0; gi < 4; ++gi) {
                double r = rho2 * (seg + kGLx[gi]) / segs;
                double wr = rho2 / segs * kGLw[gi];
                double cw = (1.0 - smoothstep5((r - rho1) / (rho2 - rho1))) * std::pow(r, 2 * n - 1) * wr;
                if (cw == 0.0) continue;
                for (std::size_t a = 0; a < rule.dirs.size(); ++a) {
                    Pt zeta = z;
                    for (int j = 0; j < n; ++j) zeta[j] += r * rule.dirs[a][j];
                    if (sing.region && !sing.region(zeta)) continue;
                    f.eval(zeta, fval);
                    comp.eval(z, zeta, coeffs.data());
                    const double w = cw * rule.w[a];
                    for (const auto& e : prog.entries)
                        axpy(out.comp[e.K], e.factor * coeffs[e.slot] * w, fval[e.J]);
                }
            }
    }
    return out;
}

MatForm boundary_L(const KernelForm& K, int s_out, const Mesh& mesh, const std::string& stratum,
                   const SampledField& f, const Pt& z, bool check_bounds, double bound_tol) {
    const int n = K.n(), k0 = f.k0();
    MatForm out(n, std::max(s_out, 0), k0);
    const auto& set = mesh.stratum(stratum);
    if (set.facets.empty()) return out;
    const CompiledForm& comp = K.compiled(s_out);
    if (comp.monos().empty()) return out;
    FacetProgram prog = build_facet_program(comp, n, f.q(), set.dim);
    if (prog.entries.empty()) return out;
    const auto& fv = f.stratum_vals(mesh, stratum);

    std::vector<cplx> coeffs(comp.num_coeffs());
    std::vector<cplx> dens(comp.num_dens());
    double T[8 * 7];
    cplx M[49];
    const int d = set.dim;
    for (std::size_t i = 0; i < set.facets.size(); ++i) {
        const auto& fac = set.facets[i];
        if (check_bounds) {
            comp.eval_dens(z, fac.p, dens.data());
            for (int di = 0; di < comp.num_dens(); ++di)
                if (std::abs(dens[di]) < bound_tol)
                    throw std::runtime_error("boundary_L: kernel unbounded on stratum " + stratum +
                                             ": Leray pairing " + std::to_string(di) +
                                             " degenerates at a facet (violated lower bound)");
        }
        mesh.charts[fac.chart]->tangents(fac.p, T);
        comp.eval(z, fac.p, coeffs.data());
        const double w = fac.w * fac.frac * fac.sign;
        for (const auto& e : prog.entries) {
            for (int r = 0; r < d; ++r)
                for (int c = 0; c < d; ++c) M[r * d + c] = leg_on_tangent(e.legs[r], T, c, n);
            cplx det = det_small(M, d);
            axpy(out.comp[e.K], coeffs[e.slot] * det * (e.sign * w), fv[i][e.J]);
        }
    }
    return out;
}

McEstimate boundary_L_mc(const KernelForm& K, int s_out, const Mesh& mesh, const std::string& stratum,
                         const SampledField& f, const Pt& z) {
    const int n = K.n(), k0 = f.k0();
    McEstimate est;
    est.mean = MatForm(n, std::max(s_out, 0), k0);
    const auto& set = mesh.stratum(stratum);
    const CompiledForm& comp = K.compiled(s_out);
    if (comp.monos().empty() || set.facets.empty()) return est;
    FacetProgram prog = build_facet_program(comp, n, f.q(), set.dim);
    if (prog.entries.empty()) return est;
    const auto& fv = f.stratum_vals(mesh, stratum);
    std::vector<cplx> coeffs(comp.num_coeffs());
    double T[8 * 7];
    cplx M[49];
    const int d = set.dim;
    MatForm sumsq(n, std::max(s_out, 0), k0);
    const double N = static_cast<double>(set.mc_draws > 0 ? set.mc_draws : static_cast<std::int64_t>(set.facets.size()));
    for (std::size_t i = 0; i < set.facets.size(); ++i) {
        const auto& fac = set.facets[i];
        mesh.charts[fac.chart]->tangents(fac.p, T);
        comp.eval(z, fac.p, coeffs.data());
        const double w = fac.w * fac.frac * fac.sign;
        MatForm contrib(n, std::max(s_out, 0), k0);
        for (const auto& e : prog.entries) {
            for (int r = 0; r < d; ++r)
                for (int c = 0; c < d; ++c) M[r * d + c] = leg_on_tangent(e.legs[r], T, c, n);
            cplx det = det_small(M, d);
            axpy(contrib.comp[e.K], coeffs[e.slot] * det * (e.sign * w), fv[i][e.J]);
        }
        est.mean += contrib;
        for (std::size_t c = 0; c < contrib.comp.size(); ++c)
            for (std::size_t t = 0; t < contrib.comp[c].data().size(); ++t)
                sumsq.comp[c].data()[t] += cplx{std::norm(contrib.comp[c].data()[t]), 0.0};
    }
    for (std::size_t c = 0; c < est.mean.comp.size(); ++c)
        for (std::size_t t = 0; t < est.mean.comp[c].data().size(); ++t) {
            double s2 = sumsq.comp[c].data()[t].real() - std::norm(est.mean.comp[c].data()[t]) / N;
            est.stderr_max = std::max(est.stderr_max, std::sqrt(std::max(0.0, s2)));
        }
    return est;
}

// ---------------------------------------------------------------------------

namespace {

struct RadialCutoff {
    double R1, R2;
    double value(const Pt& z, int n) const {
        double t = std::sqrt(abs2(z, n));
        return 1.0 - smoothstep5((t - R1) / (R2 - R1));
    }
    cplx dzbar(const Pt& z, int n, int j) const {
        double t = std::sqrt(abs2(z, n));
        if (t <= R1 || t >= R2 || t == 0) return {};
        double u = (t - R1) / (R2 - R1);
        double ds = 30 * u * u * (1 - u) * (1 - u) / (R2 - R1);
        return -ds * z[j] / (2 * t);
    }
};

}  // namespace

Extension extend(const Configuration& cfg, const FormField& f, ExtendMethod method,
                 double cutoff_inner, double cutoff_outer, double fd_h) {
    const int n = f.n(), q = f.q(), k0 = f.k0();
    Extension ext;
    ext.cutoff_inner = cutoff_inner;
    ext.cutoff_outer = cutoff_outer;

    if (method == ExtendMethod::analytic) {
        if (q < n && !f.has_closed_dbar())
            throw std::invalid_argument("extend: analytic mode requires closed-form backing with dbar");
        // top-degree inputs have dbar = 0 identically
        FormField dbase = q < n ? f.closed_dbar() : FormField::zero(n, n, k0);
        if (cutoff_outer <= 0) {
            ext.Ef = f;
            ext.Edbar_f = dbase;
            ext.commutator = FormField::zero(n, std::min(q + 1, n), k0);
            return ext;
        }
        RadialCutoff chi{cutoff_inner, cutoff_outer};
        FormField base = f;
        ext.Ef = FormField::closed(n, q, k0, [base, chi, n](const Pt& z, CompVals& out) {
            base.eval(z, out);
            double c = chi.value(z, n);
            for (auto& m : out) m = m * cplx{c, 0.0};
        });
        ext.Edbar_f = FormField::closed(n, std::min(q + 1, n), k0,
                                        [dbase, chi, n](const Pt& z, CompVals& out) {
                                            dbase.eval(z, out);
                                            double c = chi.value(z, n);
                                            for (auto& m : out) m = m * cplx{c, 0.0};
                                        });
        if (q >= n) {
            ext.commutator = FormField::zero(n, n, k0);
            return ext;
        }
        FormField dchi = FormField::closed(n, 1, k0, [chi, n, k0](const Pt& z, CompVals& out) {
            out.assign(n, Mat(k0));
            for (int j = 0; j < n; ++j) {
                cplx v = chi.dzbar(z, n, j);
                for (int e = 0; e < k0; ++e) out[j](e, e) = v;
            }
        });
        FormField w = wedge(dchi, f);
        ext.commutator = FormField::closed(n, q + 1, k0, [w](const Pt& z, CompVals& out) {
            w.eval(z, out);
            for (auto& m : out) m = m * cplx{-1.0, 0.0};
        });
        return ext;
    }

    // cutoff_reflection across the rho1 graph in the distinguished y coordinate
    const DefiningFunction rho1 = cfg.rho1();
    const int yc = 2 * rho1.distinguished() + 1;
    const double tcut = cutoff_outer > 0 ? cutoff_outer : 0.5 * cfg.r2 * cfg.r2;
    const bool concave = cfg.kind == ConfigKind::concave;
    const std::vector<double> lambdas = cfg.lambdas;
    const int qcfg = cfg.q;
    auto ylift = [rho1, yc, concave, lambdas, qcfg](Pt p) -> std::optional<double> {
        double B = 0;
        const int n_ = rho1.n();
        const int dm = rho1.distinguished();
        for (int j = 0; j < n_; ++j) {
            double c;
            if (concave)
                c = j <= dm ? -1.0 : lambdas[j - dm - 1];
            else
                c = j < qcfg - 1 ? lambdas[j] : 1.0;
            if (j == dm)
                B += c * real_coord(p, 2 * j) * real_coord(p, 2 * j);
            else
                B += c * std::norm(p[j]);
        }
        double y0;
        if (concave) {
            double disc = 1 + 4 * B;
            if (disc <= 0) return std::nullopt;
            y0 = (-1 + std::sqrt(disc)) / 2;
        } else {
            double disc = 1 - 4 * B;
            if (disc <= 0) return std::nullopt;
            y0 = (1 - std::sqrt(disc)) / 2;
        }
        set_real_coord(p, yc, y0);
        for (int it = 0; it < 30; ++it) {
            double v = rho1.eval(p);
            if (std::abs(v) < 1e-13) break;
            double g[8];
            rho1.gradient(p, g);
            if (std::abs(g[yc]) < 1e-10) return std::nullopt;
            set_real_coord(p, yc, real_coord(p, yc) - v / g[yc]);
        }
        return real_coord(p, yc);
    };

    auto reflect_eval = [ylift, rho1, yc, tcut](const FormField& base, const Pt& z, CompVals& out) {
        double v = rho1.eval(z);
        if (v <= 0) {
            base.eval(z, out);
            return;
        }
        double X = 1.0 - smoothstep5(v / tcut);
        auto y0 = ylift(z);
        if (X <= 0 || !y0) {
            out.assign(base.ncomp(), Mat(base.k0()));
            return;
        }
        Pt zr = z;
        set_real_coord(zr, yc, 2 * (*y0) - real_coord(z, yc));
        base.eval(zr, out);
        for (auto& m : out) m = m * cplx{X, 0.0};
    };

    FormField base = f;
    ext.Ef = FormField::closed(n, q, k0, [reflect_eval, base](const Pt& z, CompVals& out) {
        reflect_eval(base, z, out);
    });
    if (f.has_closed_dbar()) {
        FormField dbase = f.closed_dbar();
        ext.Edbar_f =
            FormField::closed(n, q + 1, k0, [reflect_eval, dbase](const Pt& z, CompVals& out) {
                reflect_eval(dbase, z, out);
            });
    } else {
        ext.Edbar_f = dbar(ext.Ef, DbarMode::finite_difference, fd_h);
    }
    FormField Edb = ext.Edbar_f;
    FormField dbarEf = dbar(ext.Ef, DbarMode::finite_difference, fd_h);
    ext.commutator =
        FormField::closed(n, q + 1, k0, [Edb, dbarEf, n, q, k0](const Pt& z, CompVals& out) {
            CompVals a, b;
            Edb.eval(z, a);
            dbarEf.eval(z, b);
            out.assign(binom(n, q + 1), Mat(k0));
            for (std::size_t i = 0; i < out.size(); ++i) out[i] = a[i] - b[i];
        });
    return ext;
}

// ---------------------------------------------------------------------------

std::string OperatorManifest::to_json() const {
    std::ostringstream os;
    os << "{\n  \"parts\": [\n";
    for (std::size_t i = 0; i < parts.size(); ++i)
        os << "    \"" << parts[i] << (i + 1 < parts.size() ? "\",\n" : "\"\n");
    os << "  ]\n}\n";
    return os.str();
}

HomotopyConvex::HomotopyConvex(const Configuration& cfg, std::shared_ptr<Mesh> mesh,
                               HomotopyVariant variant, ExtendMethod ext_method, SingularOpts sing)
    : cfg_(cfg), mesh_(std::move(mesh)), variant_(variant), ext_method_(ext_method), sing_(sing) {
    if (cfg_.kind != ConfigKind::convex)
        throw std::invalid_argument("HomotopyConvex: convex configuration required");
    ctx_ = std::make_shared<KernelContext>(KernelContext::from_maps(cfg_.leray));
    O0_ = std::make_unique<KernelForm>(ctx_, std::vector<int>{0});
    O01_ = std::make_unique<KernelForm>(ctx_, std::vector<int>{0, 1});
    O02_ = std::make_unique<KernelForm>(ctx_, std::vector<int>{0, 2});
    O012_ = std::make_unique<KernelForm>(ctx_, std::vector<int>{0, 1, 2});
    if (!sing_.region) {
        auto rho2 = cfg_.rho2();
        auto rho1 = cfg_.rho1();
        if (variant_ == HomotopyVariant::extended)
            sing_.region = [rho2](const Pt& p) { return rho2.eval(p) < 0; };
        else
            sing_.region = [rho1, rho2](const Pt& p) { return rho1.eval(p) < 0 && rho2.eval(p) < 0; };
    }
    if (variant_ == HomotopyVariant::extended) {
        // The S1+ term carries a minus with the outward-normal orientation of
        // the sphere facets (pinned by the reproduction tests; the concave
        // analogue of the formula carries the same sign).
        manifest_.parts = {"+ R^0_{D2,s-1} E f", "+ R^{01}_{U1,s-1} [dbar,E] f",
                           "- L^{01}_{S1+,s-1} E f", "- L^{02}_{S2,s-1} f", "+ L^{012}_{S12,s-1} f"};
    } else {
        manifest_.parts = {"+ R^0_{D12,s-1} f", "- L^{01}_{S1,s-1} f", "- L^{02}_{S2,s-1} f",
                           "+ L^{012}_{S12,s-1} f"};
    }
}

HomotopyConvex::Prepared HomotopyConvex::prepare(const FormField& g) const {
    Prepared P;
    P.s = g.q();
    P.f = SampledField(g);
    P.f.prepare_stratum(*mesh_, "S2");
    if (mesh_->has_stratum("S12")) P.f.prepare_stratum(*mesh_, "S12");
    if (variant_ == HomotopyVariant::extended) {
        Extension ext = extend(cfg_, g, ext_method_, 1.05 * cfg_.r2, 0.0);
        P.Ef = SampledField(ext.Ef);
        P.Ef.prepare_volume(*mesh_, "D12");
        P.Ef.prepare_volume(*mesh_, "U1");
        P.Ef.prepare_stratum(*mesh_, "S1plus");
        P.comm = SampledField(ext.commutator);
        P.comm.prepare_volume(*mesh_, "U1");
        P.comm_zero = true;
        for (const auto& v : P.comm.volume_vals(*mesh_, "U1"))
            for (const auto& m : v)
                if (m.norm_inf() != 0.0) P.comm_zero = false;
        P.has_ext = true;
    } else {
        P.f.prepare_volume(*mesh_, "D12");
        P.f.prepare_stratum(*mesh_, "S1");
    }
    return P;
}

HomotopyConvex::Prepared HomotopyConvex::prepare_from(SampledField f) const {
    if (variant_ != HomotopyVariant::original)
        throw std::invalid_argument("prepare_from: original variant only");
    Prepared P;
    P.s = f.q();
    P.f = std::move(f);
    P.f.prepare_volume(*mesh_, "D12");
    P.f.prepare_stratum(*mesh_, "S1");
    P.f.prepare_stratum(*mesh_, "S2");
    if (mesh_->has_stratum("S12")) P.f.prepare_stratum(*mesh_, "S12");
    return P;
}

MatForm HomotopyConvex::apply(const Prepared& in, const Pt& z) const {
    const int s = in.s;
    if (variant_ == HomotopyVariant::extended) {
        MatForm out = volume_R(*O0_, s - 1, *mesh_, {"D12", "U1"}, in.Ef, z, sing_);
        if (!in.comm_zero) {
            SingularOpts nosing = sing_;
            nosing.enabled = false;  // Omega^{01} is bounded on U1 for interior z
            out += volume_R(*O01_, s - 1, *mesh_, {"U1"}, in.comm, z, nosing);
        }
        out -= boundary_L(*O01_, s - 1, *mesh_, "S1plus", in.Ef, z);
        out -= boundary_L(*O02_, s - 1, *mesh_, "S2", in.f, z);
        if (mesh_->has_stratum("S12")) out += boundary_L(*O012_, s - 1, *mesh_, "S12", in.f, z);
        return out;
    }
    MatForm out = volume_R(*O0_, s - 1, *mesh_, {"D12"}, in.f, z, sing_);
    out -= boundary_L(*O01_, s - 1, *mesh_, "S1", in.f, z);
    out -= boundary_L(*O02_, s - 1, *mesh_, "S2", in.f, z);
    if (mesh_->has_stratum("S12")) out += boundary_L(*O012_, s - 1, *mesh_, "S12", in.f, z);
    return out;
}

MatForm HomotopyConvex::apply(const FormField& g, const Pt& z) const { return apply(prepare(g), z); }

namespace {

MatForm dbar_of(const std::function<MatForm(const Pt&)>& F, int n, int out_s, int k0, const Pt& z,
                double h) {
    std::vector<MatForm> d(n, MatForm(n, out_s - 1, k0));
    for (int m = 0; m < n; ++m) {
        auto shift = [&](int axis, double t) {
            Pt p = z;
            set_real_coord(p, axis, real_coord(z, axis) + t);
            return p;
        };
        MatForm xp = F(shift(2 * m, h)), xm = F(shift(2 * m, -h));
        MatForm yp = F(shift(2 * m + 1, h)), ym = F(shift(2 * m + 1, -h));
        MatForm dm(n, out_s - 1, k0);
        for (std::size_t c = 0; c < dm.comp.size(); ++c) {
            Mat dx = (xp.comp[c] - xm.comp[c]) * cplx{1.0 / (2 * h), 0.0};
            Mat dy = (yp.comp[c] - ym.comp[c]) * cplx{1.0 / (2 * h), 0.0};
            dm.comp[c] = (dx + dy * cplx{0.0, 1.0}) * cplx{0.5, 0.0};
        }
        d[m] = dm;
    }
    MatForm out(n, out_s, k0);
    std::vector<int> rest;
    for (int rk = 0; rk < binom(n, out_s); ++rk) {
        auto K = comb_unrank(n, out_s, rk);
        Mat acc(k0);
        for (std::size_t pos = 0; pos < K.size(); ++pos) {
            rest.clear();
            for (std::size_t t = 0; t < K.size(); ++t)
                if (t != pos) rest.push_back(K[t]);
            Mat term = d[K[pos]].comp[comb_rank(n, rest)];
            if (pos % 2 == 1) term = term * cplx{-1.0, 0.0};
            acc += term;
        }
        out.comp[rk] = acc;
    }
    return out;
}

}  // namespace

MatForm HomotopyConvex::apply_dbar(const Prepared& in, const Pt& z, double fd_h) const {
    return dbar_of([&](const Pt& p) { return apply(in, p); }, cfg_.n, in.s, in.f.k0(), z, fd_h);
}

HomotopyResidual homotopy_identity_residual(const HomotopyConvex& H, const FormField& f,
                                            const FormField& dbar_f, const std::vector<Pt>& probes,
                                            double fd_h) {
    auto Pf = H.prepare(f);
    auto Pdf = H.prepare(dbar_f);
    HomotopyResidual rep;
    for (const auto& z : probes) {
        MatForm lhs = f.value(z);
        lhs -= H.apply_dbar(Pf, z, fd_h);
        lhs -= H.apply(Pdf, z);
        double r = lhs.norm_inf();
        rep.per_point.push_back(r);
        if (r > rep.residual) {
            rep.residual = r;
            rep.argmax = z;
        }
    }
    return rep;
}

// ---------------------------------------------------------------------------

BmlkT::BmlkT(const Configuration& cfg, std::shared_ptr<Mesh> d23_mesh, SingularOpts sing)
    : cfg_(cfg), mesh_(std::move(d23_mesh)), sing_(sing) {
    std::vector<LerayMap> maps = {LerayMap::g0(cfg.n), LerayMap::g2(cfg.n),
                                  LerayMap::g3_hat(cfg.n, cfg.q)};
    ctx_ = std::make_shared<KernelContext>(KernelContext::from_maps(maps));
    O0_ = std::make_unique<KernelForm>(ctx_, std::vector<int>{0});
    O02_ = std::make_unique<KernelForm>(ctx_, std::vector<int>{0, 1});
    O03_ = std::make_unique<KernelForm>(ctx_, std::vector<int>{0, 2});
    O023_ = std::make_unique<KernelForm>(ctx_, std::vector<int>{0, 1, 2});
    if (!sing_.region) {
        auto rho2 = cfg_.rho2();
        auto rho3 = cfg_.rho3();
        sing_.region = [rho2, rho3](const Pt& p) { return rho2.eval(p) < 0 && rho3.eval(p) < 0; };
    }
    manifest_.parts = {"+ R^0_{D23,l-1} g", "- L^{02}_{S2,l-1} g", "- L^{03}_{S3,l-1} g",
                       "+ L^{023}_{S23,l-1} g"};
}

MatForm BmlkT::apply(const SampledField& g, const Pt& z) const {
    const int l = g.q();
    MatForm out = volume_R(*O0_, l - 1, *mesh_, {"D23"}, g, z, sing_);
    out -= boundary_L(*O02_, l - 1, *mesh_, "S2", g, z);
    out -= boundary_L(*O03_, l - 1, *mesh_, "S3", g, z);
    out += boundary_L(*O023_, l - 1, *mesh_, "S23", g, z);
    return out;
}

MatForm BmlkT::apply_dbar(const SampledField& g, const Pt& z, double fd_h) const {
    return dbar_of([&](const Pt& p) { return apply(g, p); }, cfg_.n, g.q(), g.k0(), z, fd_h);
}

// ---------------------------------------------------------------------------

HomotopyConcave::HomotopyConcave(const Configuration& cfg, std::shared_ptr<Mesh> mesh,
                                 std::shared_ptr<Mesh> d23_shrunk_mesh, double theta,
                                 HomotopyVariant variant, SingularOpts sing)
    : cfg_(cfg), mesh_(std::move(mesh)), theta_(theta), variant_(variant), sing_(sing) {
    if (cfg_.kind != ConfigKind::concave)
        throw std::invalid_argument("HomotopyConcave: concave configuration required");
    if (!(theta > 0.5 && theta < 1))
        throw std::invalid_argument("HomotopyConcave: 1/2 < theta < 1 required");
    ctx_ = std::make_shared<KernelContext>(KernelContext::from_maps(cfg_.leray));
    O0_ = std::make_unique<KernelForm>(ctx_, std::vector<int>{0});
    O01_ = std::make_unique<KernelForm>(ctx_, std::vector<int>{0, 1});
    O013_ = std::make_unique<KernelForm>(ctx_, std::vector<int>{0, 1, 3});
    O023_ = std::make_unique<KernelForm>(ctx_, std::vector<int>{0, 2, 3});
    O123_ = std::make_unique<KernelForm>(ctx_, std::vector<int>{1, 2, 3});
    O23_ = std::make_unique<KernelForm>(ctx_, std::vector<int>{2, 3});
    T_ = std::make_unique<BmlkT>(cfg_.shrink(theta), std::move(d23_shrunk_mesh), SingularOpts{});
    if (!sing_.region) {
        Configuration c = cfg_;
        if (variant_ == HomotopyVariant::extended) {
            auto rho2 = cfg_.rho2();
            auto rho3 = cfg_.rho3();
            sing_.region = [rho2, rho3](const Pt& p) { return rho2.eval(p) < 0 && rho3.eval(p) < 0; };
        } else {
            sing_.region = [c](const Pt& p) { return c.inside(p); };
        }
    }
    if (variant_ == HomotopyVariant::extended) {
        manifest_.parts = {"+ R^0_{D23,s-1} E f",
                           "+ R^{01}_{U1,s-1} [dbar,E] f",
                           "- L^{01}_{S1+,s-1} E f",
                           "+ L^{013}_{S13,s-1} f",
                           "+ L^{023}_{S23,s-1} f",
                           "+ L^{123}_{S12,s-1} f (S12 empty for r3 < r2/C_n)",
                           "- T_{D23,(1-theta)r;s} L^{23}_{S23,s} f"};
    } else {
        manifest_.parts = {"+ R^0_{D123,s-1} f",
                           "- L^{01}_{S1,s-1} f",
                           "+ L^{013}_{S13,s-1} f",
                           "+ L^{023}_{S23,s-1} f",
                           "+ L^{123}_{S12,s-1} f (S12 empty for r3 < r2/C_n)",
                           "- T_{D23,(1-theta)r;s} L^{23}_{S23,s} f"};
    }
}

HomotopyConcave::Prepared HomotopyConcave::prepare(const FormField& g) const {
    Prepared P;
    P.s = g.q();
    P.f = SampledField(g);
    P.f.prepare_stratum(*mesh_, "S13");
    P.f.prepare_stratum(*mesh_, "S23");
    P.f.prepare_stratum(*mesh_, "S12");
    if (variant_ == HomotopyVariant::extended) {
        Extension ext = extend(cfg_, g, ExtendMethod::analytic, 1.05 * cfg_.r2, 1.25 * cfg_.r2);
        P.Ef = SampledField(ext.Ef);
        P.Ef.prepare_volume(*mesh_, "D23");
        P.Ef.prepare_stratum(*mesh_, "S1plus");
        P.comm = SampledField(ext.commutator);
        P.comm.prepare_volume(*mesh_, "U1");
    } else {
        P.f.prepare_volume(*mesh_, "D123");
        P.f.prepare_stratum(*mesh_, "S1");
    }
    const KernelForm* O23 = O23_.get();
    const Mesh* main = mesh_.get();
    SampledField fcopy = P.f;
    const int s = P.s;
    FormField l23 =
        FormField::closed(cfg_.n, s, g.k0(), [O23, main, fcopy, s](const Pt& z, CompVals& out) {
            out = boundary_L(*O23, s, *main, "S23", fcopy, z).comp;
        });
    P.l23f = SampledField(l23);
    P.l23f.prepare_volume(T_->mesh(), "D23");
    P.l23f.prepare_stratum(T_->mesh(), "S2");
    P.l23f.prepare_stratum(T_->mesh(), "S3");
    P.l23f.prepare_stratum(T_->mesh(), "S23");
    return P;
}

MatForm HomotopyConcave::apply(const Prepared& in, const Pt& z) const {
    const int s = in.s;
    MatForm out(cfg_.n, std::max(s - 1, 0), in.f.k0());
    if (variant_ == HomotopyVariant::extended) {
        out += volume_R(*O0_, s - 1, *mesh_, {"D23"}, in.Ef, z, sing_);
        SingularOpts nosing = sing_;
        nosing.enabled = false;
        out += volume_R(*O01_, s - 1, *mesh_, {"U1"}, in.comm, z, nosing);
        out -= boundary_L(*O01_, s - 1, *mesh_, "S1plus", in.Ef, z);
    } else {
        out += volume_R(*O0_, s - 1, *mesh_, {"D123"}, in.f, z, sing_);
        out -= boundary_L(*O01_, s - 1, *mesh_, "S1", in.f, z);
    }
    out += boundary_L(*O013_, s - 1, *mesh_, "S13", in.f, z);
    out += boundary_L(*O023_, s - 1, *mesh_, "S23", in.f, z);
    out += boundary_L(*O123_, s - 1, *mesh_, "S12", in.f, z);
    out -= T_->apply(in.l23f, z);
    return out;
}

MatForm HomotopyConcave::apply_dbar(const Prepared& in, const Pt& z, double fd_h) const {
    return dbar_of([&](const Pt& p) { return apply(in, p); }, cfg_.n, in.s, in.f.k0(), z, fd_h);
}

ClosedSolveResult closed_solution_concave(HomotopyConcave& H, const FormField& f,
                                          const std::vector<Pt>& probes, double integrability_tol,
                                          double fd_h) {
    ClosedSolveResult res;
    auto [rep, resid] = integrability_residual(
        f, fd_h, probes, f.has_closed_dbar() ? DbarMode::closed_form : DbarMode::finite_difference);
    (void)resid;
    res.input_integrability = rep.norm;
    if (rep.norm > integrability_tol)
        throw std::invalid_argument("closed_solution_concave: input is not dbar-closed (residual " +
                                    fmt_g(rep.norm) + ")");
    auto prepared = std::make_shared<HomotopyConcave::Prepared>(H.prepare(f));
    const int n = f.n(), q = f.q(), k0 = f.k0();
    HomotopyConcave* Hp = &H;
    res.u = FormField::closed(n, q - 1, k0, [Hp, prepared](const Pt& z, CompVals& out) {
        out = Hp->apply(*prepared, z).comp;
    });
    for (const auto& z : probes) {
        MatForm du = H.apply_dbar(*prepared, z, fd_h);
        du -= f.value(z);
        res.residual = std::max(res.residual, du.norm_inf());
    }
    return res;
}

McEstimate dbL23_check(const Configuration& cfg, const Mesh& mesh, const FormField& f,
                       const FormField& dbar_f, const Pt& z) {
    const int n = cfg.n, q = f.q(), k0 = f.k0();
    auto ctx = std::make_shared<KernelContext>(KernelContext::from_maps(cfg.leray));
    KernelForm O23(ctx, {2, 3});
    const CompiledForm& lhs_comp = O23.compiled_dbar_z(q);
    const CompiledForm& rhs_comp = O23.compiled(q + 1);

    const auto& set = mesh.stratum("S23");
    SampledField sf(f), sdf(dbar_f);
    sf.prepare_stratum(mesh, "S23");
    sdf.prepare_stratum(mesh, "S23");
    const auto& fv = sf.stratum_vals(mesh, "S23");
    const auto& dfv = sdf.stratum_vals(mesh, "S23");

    FacetProgram lhs_prog = build_facet_program(lhs_comp, n, q, set.dim);
    FacetProgram rhs_prog = build_facet_program(rhs_comp, n, q + 1, set.dim);

    McEstimate est;
    est.mean = MatForm(n, q + 1, k0);
    MatForm sumsq(n, q + 1, k0);
    std::vector<cplx> ca(lhs_comp.num_coeffs()), cb(rhs_comp.num_coeffs());
    double T[8 * 7];
    cplx M[49];
    const int d = set.dim;
    const double N = static_cast<double>(set.mc_draws > 0 ? set.mc_draws : static_cast<std::int64_t>(set.facets.size()));
    for (std::size_t i = 0; i < set.facets.size(); ++i) {
        const auto& fac = set.facets[i];
        mesh.charts[fac.chart]->tangents(fac.p, T);
        if (!ca.empty()) lhs_comp.eval(z, fac.p, ca.data());
        if (!cb.empty()) rhs_comp.eval(z, fac.p, cb.data());
        const double w = fac.w * fac.frac * fac.sign;
        MatForm contrib(n, q + 1, k0);
        for (const auto& e : lhs_prog.entries) {
            for (int r = 0; r < d; ++r)
                for (int c = 0; c < d; ++c) M[r * d + c] = leg_on_tangent(e.legs[r], T, c, n);
            axpy(contrib.comp[e.K], ca[e.slot] * det_small(M, d) * (e.sign * w), fv[i][e.J]);
        }
        for (const auto& e : rhs_prog.entries) {
            for (int r = 0; r < d; ++r)
                for (int c = 0; c < d; ++c) M[r * d + c] = leg_on_tangent(e.legs[r], T, c, n);
            axpy(contrib.comp[e.K], -cb[e.slot] * det_small(M, d) * (e.sign * w), dfv[i][e.J]);
        }
        est.mean += contrib;
        for (std::size_t c = 0; c < contrib.comp.size(); ++c)
            for (std::size_t t = 0; t < contrib.comp[c].data().size(); ++t)
                sumsq.comp[c].data()[t] += cplx{std::norm(contrib.comp[c].data()[t]), 0.0};
    }
    for (std::size_t c = 0; c < est.mean.comp.size(); ++c)
        for (std::size_t t = 0; t < est.mean.comp[c].data().size(); ++t) {
            double s2 = sumsq.comp[c].data()[t].real() - std::norm(est.mean.comp[c].data()[t]) / N;
            est.stderr_max = std::max(est.stderr_max, std::sqrt(std::max(0.0, s2)));
        }
    return est;
}

}  // namespace cfh
