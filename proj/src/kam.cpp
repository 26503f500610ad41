#include "cfh/kam.hpp"

#include <chrono>
#include <cmath>
#include <sstream>

namespace cfh {

namespace {

double now_s() {
    return std::chrono::duration<double>(std::chrono::steady_clock::now().time_since_epoch()).count();
}

// Interior samples of the limit domain D^1 cap B_{r0/2} with margin; every
// level contains them, so the recorded sup norms are comparable across k.
std::vector<Pt> interior_sample_set(const Configuration& cfg0, int count, double margin,
                                 std::uint64_t seed) {
    std::vector<Pt> out;
    Rng rng(seed);
    const double r_inf = cfg0.r2 / 2;
    int guard = 0;
    while (static_cast<int>(out.size()) < count && ++guard < count * 4000) {
        Pt z = pt();
        for (int j = 0; j < cfg0.n; ++j) z[j] = rng.uniform_complex(r_inf);
        if (abs2(z, cfg0.n) > (r_inf - margin) * (r_inf - margin)) continue;
        double g[8];
        cfg0.rho1().gradient(z, g);
        double gn = 0;
        for (int i = 0; i < 2 * cfg0.n; ++i) gn += g[i] * g[i];
        gn = std::sqrt(std::max(gn, 1e-12));
        if (cfg0.rho1().eval(z) > -margin * gn) continue;
        out.push_back(z);
    }
    if (out.empty()) throw std::runtime_error("kam: could not sample the limit domain");
    return out;
}

Pt clamp_inward(const Configuration& cfg, const Pt& z, double delta) {
    Pt p = z;
    double v = cfg.rho1().eval(p);
    double g[8];
    cfg.rho1().gradient(p, g);
    double gn = 0;
    for (int i = 0; i < 2 * cfg.n; ++i) gn += g[i] * g[i];
    gn = std::sqrt(std::max(gn, 1e-12));
    if (v > -delta * gn) {
        double step = v / (gn * gn) + delta / gn;
        for (int i = 0; i < 2 * cfg.n; ++i) set_real_coord(p, i, real_coord(p, i) - step * g[i]);
    }
    double r = std::sqrt(abs2(p, cfg.n));
    double rmax = cfg.r2 - delta;
    if (r > rmax && r > 0) {
        for (int j = 0; j < cfg.n; ++j) p[j] *= rmax / r;
    }
    return p;
}

}  // namespace

FormField dilate_pullback(const FormField& omega, double eps, int dist_index) {
    if (omega.q() != 1) throw std::invalid_argument("dilate_pullback: (0,1) forms only");
    const int n = omega.n(), k0 = omega.k0();
    FormField om = omega;
    return FormField::closed(n, 1, k0, [om, eps, dist_index, n](const Pt& zt, CompVals& out) {
        Pt z = zt;
        for (int j = 0; j < n; ++j) z[j] = (j == dist_index ? eps * eps : eps) * zt[j];
        om.eval(z, out);
        for (int j = 0; j < n; ++j) out[j] = out[j] * cplx{j == dist_index ? eps * eps : eps, 0.0};
    });
}

std::pair<FormField, double> precondition(const FormField& omega0, double target_delta,
                                          int dist_index, const std::vector<Pt>& probes,
                                          double eps_min) {
    double n0 = omega0.sup_norm(probes);
    if (n0 < target_delta) return {omega0, 1.0};
    double lo = eps_min, hi = 1.0;
    auto norm_at = [&](double e) { return dilate_pullback(omega0, e, dist_index).sup_norm(probes); };
    if (norm_at(lo) >= target_delta) {
        std::ostringstream os;
        os << "precondition: no eps >= " << eps_min << " reaches the target; scaling curve:";
        for (double e = 1.0; e >= eps_min; e /= 4)
            os << " (" << fmt_g(e) << "," << fmt_g(norm_at(e)) << ")";
        throw std::runtime_error(os.str());
    }
    for (int it = 0; it < 60; ++it) {
        double mid = std::sqrt(lo * hi);
        (norm_at(mid) < target_delta ? lo : hi) = mid;
    }
    return {dilate_pullback(omega0, lo, dist_index), lo};
}

// ---------------------------------------------------------------------------

struct KamEngine::Level {
    Configuration cfg;
    std::shared_ptr<Mesh> mesh;
    std::unique_ptr<HomotopyConvex> H;
    HomotopyConvex::Prepared Pf;
    HomotopyConvex::Prepared Pww;
    bool have_ww = false;
    int k0 = 1;
    FormField omega;

    MatForm B_at(const Pt& z) const {
        MatForm b = H->apply(Pf, z);
        return b * cplx{-1.0, 0.0};
    }
    MatForm G_at(const Pt& z) const {
        if (!have_ww) return MatForm(cfg.n, 1, k0);
        return H->apply(Pww, z);
    }
};

KamEngine::KamEngine(Configuration cfg0, FormField omega0, KamOptions opts)
    : cfg0_(cfg0), cfg_(cfg0), opts_(opts) {
    samples_ = interior_sample_set(cfg0_, opts_.norm_samples, 0.06 * cfg0_.r2, opts_.seed);
    cur_ = std::make_shared<Level>();
    cur_->cfg = cfg_;
    cur_->k0 = omega0.k0();
    cur_->omega = std::move(omega0);
    state_.k = 0;
    state_.r_k = cfg_.r2;
    state_.delta_k = opts_.delta0;
    prepare_level();
    state_.omega_norm = cur_->omega.sup_norm(samples_);
}

void KamEngine::prepare_level() {
    auto& L = *cur_;
    L.mesh = std::make_shared<Mesh>(build_mesh(L.cfg, L.cfg.r2 / opts_.mesh_m));
    L.H = std::make_unique<HomotopyConvex>(L.cfg, L.mesh, HomotopyVariant::original);
    L.Pf = L.H->prepare(L.omega);
    if (L.k0 > 1) {
        SampledField ww(wedge(L.omega, L.omega));
        const int n = L.cfg.n;
        auto lift = [&](const std::vector<CompVals>& src) {
            std::vector<CompVals> out(src.size());
            for (std::size_t i = 0; i < src.size(); ++i)
                out[i] = wedge_vals(n, 1, 1, src[i], src[i], L.k0);
            return out;
        };
        ww.set_volume_vals(*L.mesh, "D12", lift(L.Pf.f.volume_vals(*L.mesh, "D12")));
        for (const char* s : {"S1", "S2", "S12"})
            if (L.mesh->has_stratum(s))
                ww.set_stratum_vals(*L.mesh, s, lift(L.Pf.f.stratum_vals(*L.mesh, s)));
        L.Pww = L.H->prepare_from(std::move(ww));
        L.have_ww = true;
    }
}

double KamEngine::measure_floor(Level& L, int probes) {
    double fd_h = opts_.fd_h_scale * L.mesh->h;
    double worst = 0;
    for (int i = 0; i < probes && i < static_cast<int>(samples_.size()); ++i) {
        const Pt& z = samples_[(i * 7) % samples_.size()];
        MatForm lhs = L.omega.value(z);
        lhs -= L.H->apply_dbar(L.Pf, z, fd_h);
        if (L.have_ww) lhs -= L.H->apply(L.Pww, z);
        worst = std::max(worst, lhs.norm_inf());
    }
    return worst;
}

CompVals KamEngine::omega_at(const Pt& z) const {
    CompVals v;
    cur_->omega.eval(z, v);
    return v;
}

Mat KamEngine::gauge_at(const Pt& z) const {
    Mat A = Mat::identity(cur_->k0);
    for (const auto& L : hist_) {
        MatForm b = L->B_at(z);
        A = (Mat::identity(L->k0) + b.comp[0]) * A;
    }
    return A;
}

bool KamEngine::step() {
    if (state_.k >= opts_.k_max) {
        stall_reason_ = "k_max reached";
        return false;
    }
    auto t0 = now_s();
    auto& L = *cur_;
    const int n = cfg_.n, k0 = L.k0;

    if (opts_.enforce_smallness && state_.omega_norm >= state_.delta_k) {
        stall_reason_ = "smallness precondition |omega_k| < delta_k violated";
        return false;
    }

    state_.floor = measure_floor(L, 3);
    if (state_.k == 0) floor0_ = state_.floor;
    state_.theta_k = 1.0 / ((state_.k + 2.0) * (state_.k + 2.0));

    Configuration next_cfg = cfg_.shrink(state_.theta_k);
    auto next_mesh = std::make_shared<Mesh>(build_mesh(next_cfg, next_cfg.r2 / opts_.mesh_m));

    const double delta_off = 2.0 * L.mesh->h;
    auto omega_next_at = [&](const Pt& zq, MatForm& Bout) {
        MatForm B = L.B_at(zq);
        MatForm G = L.G_at(zq);
        CompVals om;
        L.omega.eval(zq, om);
        Mat Ainv = (Mat::identity(k0) + B.comp[0]).inverse();
        CompVals out(n, Mat(k0));
        for (int j = 0; j < n; ++j) out[j] = (G.comp[j] + B.comp[0] * om[j]) * Ainv;
        Bout = B;
        return out;
    };

    // lattice matching the next mesh's volume grid
    GridSpec spec;
    spec.n = n;
    {
        double h0 = next_cfg.r2 / opts_.mesh_m;
        const int cells = std::max(1, static_cast<int>(std::llround(2 * next_cfg.r2 / h0)));
        spec.h = 2 * next_cfg.r2 / cells;
        for (int i = 0; i < 2 * n; ++i) {
            set_real_coord(spec.origin, i, -next_cfg.r2 + spec.h / 2);
            spec.dims[i] = cells;
        }
    }
    GridField grid(spec, 1, k0);
    std::vector<std::size_t> nodes;
    for (std::size_t node = 0; node < spec.num_nodes(); ++node) {
        Pt p = grid.node_point(node);
        if (next_cfg.inside(p)) nodes.push_back(node);
    }
    double B_norm = 0, dbarB_norm = 0, om_next_norm = 0;
    {
        std::vector<CompVals> vals(nodes.size());
        std::vector<double> bn(nodes.size(), 0.0);
        parallel_for(nodes.size(), [&](std::size_t i) {
            MatForm B;
            vals[i] = omega_next_at(grid.node_point(nodes[i]), B);
            bn[i] = B.norm_inf();
        });
        for (std::size_t i = 0; i < nodes.size(); ++i) {
            grid.set_node(nodes[i], vals[i]);
            B_norm = std::max(B_norm, bn[i]);
        }
    }
    std::map<std::string, std::vector<CompVals>> facet_vals;
    for (const char* sname : {"S1", "S2", "S12"}) {
        if (!next_mesh->has_stratum(sname)) continue;
        const auto& set = next_mesh->stratum(sname);
        std::vector<CompVals> vals(set.facets.size());
        parallel_for(set.facets.size(), [&](std::size_t i) {
            Pt zq = clamp_inward(cfg_, set.facets[i].p, delta_off);
            MatForm B;
            vals[i] = omega_next_at(zq, B);
        });
        facet_vals[sname] = std::move(vals);
    }
    {
        std::vector<double> no(samples_.size(), 0.0), nb(samples_.size(), 0.0),
            nd(samples_.size(), 0.0);
        parallel_for(samples_.size(), [&](std::size_t i) {
            MatForm B;
            CompVals v = omega_next_at(samples_[i], B);
            double m = 0;
            for (const auto& mt : v) m = std::max(m, mt.norm_inf());
            no[i] = m;
            nb[i] = B.norm_inf();
            MatForm G = L.G_at(samples_[i]);
            CompVals om;
            L.omega.eval(samples_[i], om);
            double dm = 0;
            for (int j = 0; j < n; ++j) dm = std::max(dm, (G.comp[j] - om[j]).norm_inf());
            nd[i] = dm;
        });
        for (std::size_t i = 0; i < samples_.size(); ++i) {
            om_next_norm = std::max(om_next_norm, no[i]);
            B_norm = std::max(B_norm, nb[i]);
            dbarB_norm = std::max(dbarB_norm, nd[i]);
        }
    }

    state_.B_norm = B_norm;
    state_.dbarB_norm = dbarB_norm;
    state_.wall_s = now_s() - t0;
    levels_.push_back(state_);

    if (B_norm >= 1.0 / (4.0 * k0)) {
        stall_reason_ = "invertibility margin |B_k| < 1/(4 k0) violated";
        return false;
    }

    auto next = std::make_shared<Level>();
    next->cfg = next_cfg;
    next->k0 = k0;
    {
        auto gf = std::make_shared<GridField>(std::move(grid));
        next->omega = FormField::closed(n, 1, k0, [gf, n, k0](const Pt& z, CompVals& out) {
            if (!gf->eval(z, out)) out.assign(n, Mat(k0));
        });
    }
    hist_.push_back(cur_);
    cur_ = next;
    cfg_ = next_cfg;

    state_.k += 1;
    state_.r_k = next_cfg.r2;
    state_.delta_k = std::pow(state_.delta_k, 1.5);
    double prev_norm = state_.omega_norm;
    state_.omega_norm = om_next_norm;
    state_.theta_k = 0;
    state_.floor = 0;
    state_.B_norm = 0;
    state_.dbarB_norm = 0;

    {
        auto& Lx = *cur_;
        Lx.mesh = next_mesh;
        Lx.H = std::make_unique<HomotopyConvex>(Lx.cfg, Lx.mesh, HomotopyVariant::original);
        SampledField f(Lx.omega);
        for (auto& [name, vals] : facet_vals) f.set_stratum_vals(*Lx.mesh, name, std::move(vals));
        Lx.Pf = Lx.H->prepare_from(std::move(f));
        if (k0 > 1) {
            SampledField ww(wedge(Lx.omega, Lx.omega));
            auto lift = [&](const std::vector<CompVals>& src) {
                std::vector<CompVals> out(src.size());
                for (std::size_t i = 0; i < src.size(); ++i)
                    out[i] = wedge_vals(n, 1, 1, src[i], src[i], k0);
                return out;
            };
            ww.set_volume_vals(*Lx.mesh, "D12", lift(Lx.Pf.f.volume_vals(*Lx.mesh, "D12")));
            for (const char* s : {"S1", "S2", "S12"})
                if (Lx.mesh->has_stratum(s))
                    ww.set_stratum_vals(*Lx.mesh, s, lift(Lx.Pf.f.stratum_vals(*Lx.mesh, s)));
            Lx.Pww = Lx.H->prepare_from(std::move(ww));
            Lx.have_ww = true;
        }
    }

    if (om_next_norm >= prev_norm) {
        stall_reason_ = "no decrease (quadrature floor reached)";
        return false;
    }
    return true;
}

// ---------------------------------------------------------------------------

std::string KamReport::csv() const {
    std::ostringstream os;
    os << "k,r_k,theta_k,delta_k,omega_norm,B_norm,dbarB_norm,residual\n";
    for (const auto& L : levels)
        os << L.k << "," << fmt_g(L.r_k) << "," << fmt_g(L.theta_k) << "," << fmt_g(L.delta_k) << ","
           << fmt_g(L.omega_norm) << "," << fmt_g(L.B_norm) << "," << fmt_g(L.dbarB_norm) << ","
           << fmt_g(L.floor) << "\n";
    return os.str();
}

KamReport kam_solve(const Configuration& cfg0, const FormField& omega0, const KamOptions& opts,
                    GaugeMatrix* A_out) {
    KamReport rep;
    const int n = cfg0.n, k0 = omega0.k0();

    auto probes = interior_sample_set(cfg0, 200, 0.06 * cfg0.r2, opts.seed + 5);
    auto [ires, ifield] = integrability_residual(
        omega0, 1e-3 * cfg0.r2, probes,
        omega0.has_closed_dbar() ? DbarMode::closed_form : DbarMode::finite_difference);
    (void)ifield;
    if (ires.norm > opts.tol_integrability)
        throw std::invalid_argument("kam_solve: omega0 is not formally integrable (residual " +
                                    fmt_g(ires.norm) + ")");

    FormField om = omega0;
    rep.precondition_eps = 1.0;
    if (om.sup_norm(probes) >= opts.delta0) {
        auto [pulled, eps] = precondition(om, 0.8 * opts.delta0, 0, probes);
        om = pulled;
        rep.precondition_eps = eps;
    }
    FormField om_solved = om;  // the equation actually iterated on

    auto engine = std::make_shared<KamEngine>(cfg0, om, opts);
    while (engine->step()) {
    }
    rep.levels = engine->levels();
    if (!rep.levels.empty() && engine->state().k == static_cast<int>(rep.levels.size()))
        rep.levels.push_back(engine->state());
    rep.floor0 = engine->quadrature_floor0();
    rep.r_inf = cfg0.r2 / 2;

    bool decreased_all = true, diverged = false;
    for (std::size_t i = 1; i < rep.levels.size(); ++i) {
        if (rep.levels[i].omega_norm >= rep.levels[i - 1].omega_norm) decreased_all = false;
        if (rep.levels[i].omega_norm > 10 * opts.delta0) diverged = true;
    }
    rep.classification = diverged ? "diverged" : (decreased_all ? "quadratic-until-floor" : "stalled");
    if (!decreased_all && !diverged &&
        engine->stall_reason() == std::string("no decrease (quadrature floor reached)"))
        rep.classification = "quadratic-until-floor";

    {
        double fd_h = 0.02 * cfg0.r2;
        auto gauge = [&engine](const Pt& z) { return engine->gauge_at(z); };
        double worst = 0;
        CompVals omv;
        for (std::size_t i = 0; i < probes.size(); i += 29) {
            const Pt& z = probes[i];
            om_solved.eval(z, omv);
            Mat A = gauge(z);
            for (int m = 0; m < n; ++m) {
                auto shift = [&](int axis, double t) {
                    Pt p = z;
                    set_real_coord(p, axis, real_coord(z, axis) + t);
                    return p;
                };
                Mat dx = (gauge(shift(2 * m, fd_h)) - gauge(shift(2 * m, -fd_h))) *
                         cplx{1.0 / (2 * fd_h), 0.0};
                Mat dy = (gauge(shift(2 * m + 1, fd_h)) - gauge(shift(2 * m + 1, -fd_h))) *
                         cplx{1.0 / (2 * fd_h), 0.0};
                Mat dbarA = (dx + dy * cplx{0.0, 1.0}) * cplx{0.5, 0.0};
                Mat resid = dbarA + A * omv[m];
                worst = std::max(worst, resid.norm_inf());
            }
        }
        rep.final_residual = worst;
    }
    {
        double worst = 0;
        for (std::size_t i = 1; i < rep.levels.size(); ++i) {
            double prod = 1;
            for (std::size_t j = 0; j + 1 < i; ++j) prod *= 1 + k0 * rep.levels[j].B_norm;
            double bnd = k0 * rep.levels[i - 1].B_norm * prod;
            if (bnd > 0) worst = std::max(worst, bnd);
        }
        rep.ahat_telescope_bound = worst;
    }
    if (A_out) {
        A_out->n = n;
        A_out->k0 = k0;
        A_out->eval = [engine](const Pt& z) { return engine->gauge_at(z); };
        A_out->dbar = nullptr;
    }
    return rep;
}

}  // namespace cfh
