#include "cfh/mesh.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>
#include <sstream>

namespace cfh {

namespace {

double det_real(double* m, int d) {
    double det = 1.0;
    for (int c = 0; c < d; ++c) {
        int p = c;
        for (int r = c + 1; r < d; ++r)
            if (std::abs(m[r * d + c]) > std::abs(m[p * d + c])) p = r;
        if (m[p * d + c] == 0.0) return 0.0;
        if (p != c) {
            for (int j = c; j < d; ++j) std::swap(m[p * d + j], m[c * d + j]);
            det = -det;
        }
        det *= m[c * d + c];
        for (int r = c + 1; r < d; ++r) {
            double f = m[r * d + c] / m[c * d + c];
            for (int j = c; j < d; ++j) m[r * d + j] -= f * m[c * d + j];
        }
    }
    return det;
}

// -------------------------------------------------------------------------
// Charts

// Uniform-angle circle chart (n = 1): midpoint rule on a smooth periodic
// parametrization is spectrally accurate, matching the classical trapezoid.
struct CircleChart final : Chart {
    double r;
    explicit CircleChart(double r_) : r(r_) {}
    int dim() const override { return 1; }
    void tangents(const Pt& p, double* T) const override {
        // tangent = d/dtheta (r cos, r sin) = (-y, x)
        T[0] = -real_coord(p, 1);
        T[1] = real_coord(p, 0);
    }
};

struct SphereChart final : Chart {
    int n, axis;   // axis in [0, 2n): the cube face coordinate
    double side;   // +1 or -1
    double r;

    SphereChart(int n_, int axis_, double side_, double r_) : n(n_), axis(axis_), side(side_), r(r_) {}
    int dim() const override { return 2 * n - 1; }

    // cube point c with c_axis = side; p = r c / |c|  =>  c = p / |p_axis|.
    void tangents(const Pt& p, double* T) const override {
        const int d = 2 * n;
        double c[8], pa = std::abs(real_coord(p, axis));
        for (int i = 0; i < d; ++i) c[i] = real_coord(p, i) / pa;
        double nc = 0;
        for (int i = 0; i < d; ++i) nc += c[i] * c[i];
        nc = std::sqrt(nc);
        double nc3 = nc * nc * nc;
        int col = 0;
        for (int i = 0; i < d; ++i) {
            if (i == axis) continue;
            // d/dc_i of r c/|c| = r (e_i |c|^2 - c c_i) / |c|^3
            for (int row = 0; row < d; ++row)
                T[col * d + row] = r * ((row == i ? nc * nc : 0.0) - c[row] * c[i]) / nc3;
            ++col;
        }
    }

    bool lift(const double* u, Pt& p) const {
        const int d = 2 * n;
        double c[8];
        int col = 0;
        for (int i = 0; i < d; ++i) c[i] = (i == axis) ? side : u[col++];
        double nc = 0;
        for (int i = 0; i < d; ++i) nc += c[i] * c[i];
        nc = std::sqrt(nc);
        p = pt();
        for (int i = 0; i < d; ++i) set_real_coord(p, i, r * c[i] / nc);
        return true;
    }
};

// Hypersurface {rho = 0} solved for one real coordinate.
struct GraphChart final : Chart {
    int n, solved;  // real coordinate index solved for
    DefiningFunction rho;

    GraphChart(int n_, int solved_, DefiningFunction rho_) : n(n_), solved(solved_), rho(std::move(rho_)) {}
    int dim() const override { return 2 * n - 1; }

    void tangents(const Pt& p, double* T) const override {
        const int d = 2 * n;
        double g[8];
        rho.gradient(p, g);
        int col = 0;
        for (int i = 0; i < d; ++i) {
            if (i == solved) continue;
            for (int row = 0; row < d; ++row) T[col * d + row] = (row == i) ? 1.0 : 0.0;
            T[col * d + solved] = -g[i] / g[solved];
            ++col;
        }
    }

    // Newton in the solved coordinate from the supplied initial value.
    bool lift(Pt& p) const {
        for (int it = 0; it < 50; ++it) {
            double v = rho.eval(p);
            if (std::abs(v) < 1e-13) return true;
            double g[8];
            rho.gradient(p, g);
            if (std::abs(g[solved]) < 1e-10) return false;
            set_real_coord(p, solved, real_coord(p, solved) - v / g[solved]);
        }
        return std::abs(rho.eval(p)) < 1e-10;
    }
};

// Codimension-2 stratum {rho_a = 0, rho_b = 0} solved for two real coords.
struct CornerChart final : Chart {
    int n, s1, s2;
    DefiningFunction ra, rb;

    CornerChart(int n_, int s1_, int s2_, DefiningFunction a, DefiningFunction b)
        : n(n_), s1(s1_), s2(s2_), ra(std::move(a)), rb(std::move(b)) {}
    int dim() const override { return 2 * n - 2; }

    void tangents(const Pt& p, double* T) const override {
        const int d = 2 * n;
        double ga[8], gb[8];
        ra.gradient(p, ga);
        rb.gradient(p, gb);
        // [ga_s1 ga_s2; gb_s1 gb_s2] [ds1/dt; ds2/dt] = -[ga_t; gb_t]
        double a11 = ga[s1], a12 = ga[s2], a21 = gb[s1], a22 = gb[s2];
        double det = a11 * a22 - a12 * a21;
        int col = 0;
        for (int i = 0; i < d; ++i) {
            if (i == s1 || i == s2) continue;
            double r1 = -ga[i], r2 = -gb[i];
            double ds1 = (r1 * a22 - r2 * a12) / det;
            double ds2 = (a11 * r2 - a21 * r1) / det;
            for (int row = 0; row < d; ++row) T[col * d + row] = (row == i) ? 1.0 : 0.0;
            T[col * d + s1] = ds1;
            T[col * d + s2] = ds2;
            ++col;
        }
    }

    bool lift(Pt& p) const {
        for (int it = 0; it < 60; ++it) {
            double va = ra.eval(p), vb = rb.eval(p);
            if (std::abs(va) < 1e-13 && std::abs(vb) < 1e-13) return true;
            double ga[8], gb[8];
            ra.gradient(p, ga);
            rb.gradient(p, gb);
            double a11 = ga[s1], a12 = ga[s2], a21 = gb[s1], a22 = gb[s2];
            double det = a11 * a22 - a12 * a21;
            if (std::abs(det) < 1e-12) return false;
            double d1 = (va * a22 - vb * a12) / det;
            double d2 = (a11 * vb - a21 * va) / det;
            set_real_coord(p, s1, real_coord(p, s1) - d1);
            set_real_coord(p, s2, real_coord(p, s2) - d2);
        }
        return false;
    }
};

// Orientation: facet counts positive when (outward normal, tangents) is a
// positively oriented basis of R^{2n}.
std::int8_t hyper_sign(int n, const Chart& chart, const Pt& p, const DefiningFunction& rho) {
    const int d = 2 * n;
    double T[8 * 7], M[64], g[8];
    chart.tangents(p, T);
    rho.gradient(p, g);
    for (int row = 0; row < d; ++row) {
        M[row * d + 0] = g[row];
        for (int col = 0; col < d - 1; ++col) M[row * d + col + 1] = T[col * d + row];
    }
    return det_real(M, d) >= 0 ? 1 : -1;
}

// Orientation of a corner stratum as the boundary of the oriented
// hypersurface S_i: (nu_i, mu, tangents) positive, mu = outward conormal
// (direction of increasing rho_j within T S_i).
std::int8_t corner_sign(int n, const Chart& chart, const Pt& p, const DefiningFunction& rho_i,
                        const DefiningFunction& rho_j) {
    const int d = 2 * n;
    double T[8 * 6], M[64], gi[8], gj[8];
    chart.tangents(p, T);
    rho_i.gradient(p, gi);
    rho_j.gradient(p, gj);
    double ni = 0, dot = 0;
    for (int r = 0; r < d; ++r) ni += gi[r] * gi[r];
    for (int r = 0; r < d; ++r) dot += gi[r] * gj[r];
    double mu[8];
    for (int r = 0; r < d; ++r) mu[r] = gj[r] - dot / ni * gi[r];
    for (int row = 0; row < d; ++row) {
        M[row * d + 0] = gi[row];
        M[row * d + 1] = mu[row];
        for (int col = 0; col < d - 2; ++col) M[row * d + col + 2] = T[col * d + row];
    }
    return det_real(M, d) >= 0 ? 1 : -1;
}

struct Builder {
    const Configuration& cfg;
    const MeshOptions& opts;
    double h;
    Mesh mesh;

    Builder(const Configuration& c, double h_, const MeshOptions& o) : cfg(c), opts(o), h(h_) {
        mesh.n = c.n;
        mesh.h = h_;
        mesh.strategy = o.strategy;
        mesh.seed = o.seed;
    }

    std::uint16_t add_chart(std::shared_ptr<Chart> c) {
        mesh.charts.push_back(std::move(c));
        return static_cast<std::uint16_t>(mesh.charts.size() - 1);
    }

    // ---- tensor volume ----------------------------------------------------
    void tensor_volume(double R, const std::function<int(const Pt&)>& classify,
                       const std::vector<std::string>& carriers) {
        const int d = 2 * cfg.n;
        const int m = std::max(1, static_cast<int>(std::llround(2 * R / h)));
        const double hh = 2 * R / m;
        const int s = std::max(2, opts.subsample);
        std::vector<int> idx(d, 0);
        std::vector<double> fr(carriers.size());
        const double cell_w = std::pow(hh, d);
        for (auto& name : carriers) mesh.volumes[name];
        while (true) {
            Pt c = pt();
            for (int i = 0; i < d; ++i) set_real_coord(c, i, -R + (idx[i] + 0.5) * hh);
            // boundary cell if the classification can flip within the cell
            double margin = classify_margin(c);
            if (margin > 0.9 * hh * std::sqrt(static_cast<double>(d))) {
                int k = classify(c);
                if (k >= 0) mesh.volumes[carriers[k]].push_back({c, cell_w});
            } else {
                std::fill(fr.begin(), fr.end(), 0.0);
                int total = 1;
                for (int i = 0; i < d; ++i) total *= s;
                std::vector<int> sub(d, 0);
                for (int t = 0; t < total; ++t) {
                    Pt p = c;
                    int tt = t;
                    for (int i = 0; i < d; ++i) {
                        int si = tt % s;
                        tt /= s;
                        set_real_coord(p, i, real_coord(c, i) + ((si + 0.5) / s - 0.5) * hh);
                    }
                    int k = classify(p);
                    if (k >= 0) fr[k] += 1.0;
                }
                for (std::size_t k = 0; k < carriers.size(); ++k)
                    if (fr[k] > 0) mesh.volumes[carriers[k]].push_back({c, cell_w * fr[k] / total});
                (void)sub;
            }
            int i = 0;
            for (; i < d; ++i) {
                if (++idx[i] < m) break;
                idx[i] = 0;
            }
            if (i == d) break;
        }
    }

    // distance of the classification point to the nearest piece zero-set
    double classify_margin(const Pt& c) {
        double m = 1e300;
        for (const auto& p : cfg.pieces) {
            double g[8], v = p.eval(c), gn = 0;
            p.gradient(c, g);
            for (int i = 0; i < 2 * cfg.n; ++i) gn += g[i] * g[i];
            gn = std::sqrt(std::max(gn, 1e-12));
            m = std::min(m, std::abs(v) / gn);
        }
        return m;
    }

    // ---- facet grids -------------------------------------------------------
    // keep(p) in [0,1]: fractional membership by subsampling when cut.
    void add_facet(FacetSet& set, std::uint16_t chart_id, const Pt& p, double w, double frac,
                   std::int8_t sign) {
        if (frac <= 0) return;
        set.facets.push_back({p, w, static_cast<float>(frac), sign, chart_id});
    }

    double indicator_fraction(const std::function<bool(const Pt&)>& keep, const Pt& center,
                              const std::function<bool(const double*, Pt&)>& lift_local,
                              const double* u, double du, int dpar) {
        if (keep(center)) {
            // test corners cheaply: if all agree, no subsampling
        }
        const int s = std::max(2, opts.subsample);
        int total = 1, hits = 0;
        for (int i = 0; i < dpar; ++i) total *= s;
        for (int t = 0; t < total; ++t) {
            double uu[7];
            int tt = t;
            for (int i = 0; i < dpar; ++i) {
                int si = tt % s;
                tt /= s;
                uu[i] = u[i] + ((si + 0.5) / s - 0.5) * du;
            }
            Pt p;
            if (lift_local(uu, p) && keep(p)) ++hits;
        }
        return static_cast<double>(hits) / total;
    }

    void sphere_stratum(const std::string& name, double r, const DefiningFunction& rho,
                        const std::function<bool(const Pt&)>& keep) {
        const int d = 2 * cfg.n;
        const int dpar = d - 1;
        auto& set = mesh.strata[name];
        set.dim = dpar;
        if (cfg.n == 1) {
            auto chart = std::make_shared<CircleChart>(r);
            auto cid = add_chart(chart);
            int m = std::max(8, static_cast<int>(std::llround(2 * kPi * r / h)));
            const double dth = 2 * kPi / m;
            for (int i = 0; i < m; ++i) {
                double th = (i + 0.5) * dth;
                Pt p = pt();
                p[0] = cplx{r * std::cos(th), r * std::sin(th)};
                if (!keep(p)) continue;
                add_facet(set, cid, p, dth, 1.0, hyper_sign(cfg.n, *chart, p, rho));
            }
            return;
        }
        int k = std::max(2, static_cast<int>(std::llround(2.2 * r / h)));
        const double du = 2.0 / k;
        for (int axis = 0; axis < d; ++axis)
            for (int side = -1; side <= 1; side += 2) {
                auto chart = std::make_shared<SphereChart>(cfg.n, axis, static_cast<double>(side), r);
                auto cid = add_chart(chart);
                std::vector<int> idx(dpar, 0);
                while (true) {
                    double u[7];
                    for (int i = 0; i < dpar; ++i) u[i] = -1.0 + (idx[i] + 0.5) * du;
                    Pt p;
                    chart->lift(u, p);
                    bool kc = keep(p);
                    // cheap cut detection: probe the param-cell corners
                    bool mixed = false;
                    for (int corner = 0; corner < (1 << dpar) && !mixed; ++corner) {
                        double uu[7];
                        for (int i = 0; i < dpar; ++i)
                            uu[i] = u[i] + ((corner >> i & 1) ? 0.5 : -0.5) * du;
                        Pt q;
                        chart->lift(uu, q);
                        if (keep(q) != kc) mixed = true;
                    }
                    double frac = kc ? 1.0 : 0.0;
                    if (mixed)
                        frac = indicator_fraction(
                            keep, p,
                            [&](const double* uu, Pt& q) { return chart->lift(uu, q); }, u, du, dpar);
                    if (frac > 0) {
                        double w = std::pow(du, dpar);
                        add_facet(set, cid, p, w, frac, hyper_sign(cfg.n, *chart, p, rho));
                    }
                    int i = 0;
                    for (; i < dpar; ++i) {
                        if (++idx[i] < k) break;
                        idx[i] = 0;
                    }
                    if (i == dpar) break;
                }
            }
    }

    void graph_stratum(const std::string& name, const DefiningFunction& rho, int solved, double R,
                       const std::function<bool(const Pt&)>& keep,
                       const std::function<bool(Pt&)>& init) {
        const int d = 2 * cfg.n;
        const int dpar = d - 1;
        auto& set = mesh.strata[name];
        set.dim = dpar;
        auto chart = std::make_shared<GraphChart>(cfg.n, solved, rho);
        auto cid = add_chart(chart);
        const int m = std::max(1, static_cast<int>(std::llround(2 * R / h)));
        const double du = 2 * R / m;
        auto lift_at = [&](const double* u, Pt& p) {
            p = pt();
            int col = 0;
            for (int i = 0; i < d; ++i)
                if (i != solved) set_real_coord(p, i, u[col++]);
            if (!init(p)) return false;
            return chart->lift(p);
        };
        std::vector<int> idx(dpar, 0);
        while (true) {
            double u[7];
            for (int i = 0; i < dpar; ++i) u[i] = -R + (idx[i] + 0.5) * du;
            Pt p;
            if (lift_at(u, p)) {
                bool kc = keep(p);
                bool mixed = false;
                for (int corner = 0; corner < (1 << dpar) && !mixed; ++corner) {
                    double uu[7];
                    for (int i = 0; i < dpar; ++i) uu[i] = u[i] + ((corner >> i & 1) ? 0.5 : -0.5) * du;
                    Pt q;
                    if (!lift_at(uu, q))
                        mixed = true;
                    else if (keep(q) != kc)
                        mixed = true;
                }
                double frac = kc ? 1.0 : 0.0;
                if (mixed)
                    frac = indicator_fraction(
                        [&](const Pt& q) { return keep(q); }, p,
                        [&](const double* uu, Pt& q) { return lift_at(uu, q); }, u, du, dpar);
                if (frac > 0)
                    add_facet(set, cid, p, std::pow(du, dpar), frac, hyper_sign(cfg.n, *chart, p, rho));
            }
            int i = 0;
            for (; i < dpar; ++i) {
                if (++idx[i] < m) break;
                idx[i] = 0;
            }
            if (i == dpar) break;
        }
    }

    void corner_stratum(const std::string& name, const DefiningFunction& ri, const DefiningFunction& rj,
                        int s1, int s2, double R, const std::function<bool(const Pt&)>& keep,
                        const std::function<bool(Pt&, int)>& init, int branches) {
        const int d = 2 * cfg.n;
        const int dpar = d - 2;
        auto& set = mesh.strata[name];
        set.dim = dpar;
        auto chart = std::make_shared<CornerChart>(cfg.n, s1, s2, ri, rj);
        auto cid = add_chart(chart);
        const int m = std::max(1, static_cast<int>(std::llround(2 * R / h)));
        const double du = 2 * R / m;
        for (int br = 0; br < branches; ++br) {
            auto lift_at = [&](const double* u, Pt& p) {
                p = pt();
                int col = 0;
                for (int i = 0; i < d; ++i)
                    if (i != s1 && i != s2) set_real_coord(p, i, u[col++]);
                if (!init(p, br)) return false;
                return chart->lift(p);
            };
            std::vector<int> idx(dpar, 0);
            while (true) {
                double u[7];
                for (int i = 0; i < dpar; ++i) u[i] = -R + (idx[i] + 0.5) * du;
                Pt p;
                if (lift_at(u, p) && keep(p)) {
                    double frac = indicator_fraction(
                        keep, p, [&](const double* uu, Pt& q) { return lift_at(uu, q); }, u, du, dpar);
                    if (frac > 0)
                        add_facet(set, cid, p, std::pow(du, dpar), frac, corner_sign(cfg.n, *chart, p, ri, rj));
                }
                int i = 0;
                for (; i < dpar; ++i) {
                    if (++idx[i] < m) break;
                    idx[i] = 0;
                }
                if (i == dpar) break;
            }
        }
    }

    // ---- Monte Carlo carriers ----------------------------------------------
    // Importance boxes: the sampled box must contain the carrier; weights stay
    // unbiased. A guard below verifies accepted points keep clear of the box
    // boundary in every tightened direction.
    struct McBox {
        double lo[8], hi[8];
        int dim;
        // bit i set: dimension i was tightened below; verify accepted points
        // stay clear of that edge (containment check for the importance box)
        std::uint32_t guard_lo = 0, guard_hi = 0;
        double volume() const {
            double v = 1;
            for (int i = 0; i < dim; ++i) v *= hi[i] - lo[i];
            return v;
        }
    };

    static McBox sym_box(int d, double R) {
        McBox b;
        b.dim = d;
        for (int i = 0; i < d; ++i) {
            b.lo[i] = -R;
            b.hi[i] = R;
        }
        return b;
    }

    void guard_box(const char* name, const McBox& box, const double* u, int d) {
        for (int i = 0; i < d; ++i) {
            double span = box.hi[i] - box.lo[i];
            if ((box.guard_hi >> i & 1) && u[i] > box.hi[i] - 0.005 * span)
                throw std::runtime_error(std::string("build_mesh: importance box too tight for ") + name);
            if ((box.guard_lo >> i & 1) && u[i] < box.lo[i] + 0.005 * span)
                throw std::runtime_error(std::string("build_mesh: importance box too tight for ") + name);
        }
    }

    void mc_volume(const std::string& name, const McBox& box, const std::function<bool(const Pt&)>& keep,
                   Rng& rng, int N) {
        const int d = 2 * cfg.n;
        auto& cells = mesh.volumes[name];
        const double w = box.volume() / N;
        double u[8];
        for (int s = 0; s < N; ++s) {
            Pt p = pt();
            for (int i = 0; i < d; ++i) {
                u[i] = rng.uniform(box.lo[i], box.hi[i]);
                set_real_coord(p, i, u[i]);
            }
            if (!keep(p)) continue;
            guard_box(name.c_str(), box, u, d);
            cells.push_back({p, w});
        }
    }

    void mc_graph_stratum(const std::string& name, const DefiningFunction& rho, int solved,
                          const McBox& box, const std::function<bool(const Pt&)>& keep,
                          const std::function<bool(Pt&)>& init, Rng& rng, int N) {
        const int d = 2 * cfg.n;
        const int dpar = d - 1;
        auto& set = mesh.strata[name];
        set.dim = dpar;
        auto chart = std::make_shared<GraphChart>(cfg.n, solved, rho);
        auto cid = add_chart(chart);
        const double w = box.volume() / N;
        set.mc_draws += N;
        double u[7];
        for (int s = 0; s < N; ++s) {
            Pt p = pt();
            int col = 0;
            for (int i = 0; i < dpar; ++i) u[i] = rng.uniform(box.lo[i], box.hi[i]);
            for (int i = 0; i < d; ++i)
                if (i != solved) set_real_coord(p, i, u[col++]);
            if (!init(p) || !chart->lift(p) || !keep(p)) continue;
            guard_box(name.c_str(), box, u, dpar);
            add_facet(set, cid, p, w, 1.0, hyper_sign(cfg.n, *chart, p, rho));
        }
    }

    void mc_corner_stratum(const std::string& name, const DefiningFunction& ri,
                           const DefiningFunction& rj, int s1, int s2, const McBox& box,
                           const std::function<bool(const Pt&)>& keep,
                           const std::function<bool(Pt&, int)>& init, Rng& rng, int N, int branches) {
        const int d = 2 * cfg.n;
        const int dpar = d - 2;
        auto& set = mesh.strata[name];
        set.dim = dpar;
        auto chart = std::make_shared<CornerChart>(cfg.n, s1, s2, ri, rj);
        auto cid = add_chart(chart);
        const double w = box.volume() / (N / branches);
        set.mc_draws += static_cast<std::int64_t>(N / branches) * branches;
        double u[6];
        for (int br = 0; br < branches; ++br)
            for (int s = 0; s < N / branches; ++s) {
                Pt p = pt();
                int col = 0;
                for (int i = 0; i < dpar; ++i) u[i] = rng.uniform(box.lo[i], box.hi[i]);
                for (int i = 0; i < d; ++i)
                    if (i != s1 && i != s2) set_real_coord(p, i, u[col++]);
                if (!init(p, br) || !chart->lift(p) || !keep(p)) continue;
                guard_box(name.c_str(), box, u, dpar);
                add_facet(set, cid, p, w, 1.0, corner_sign(cfg.n, *chart, p, ri, rj));
            }
    }
};

}  // namespace

const std::vector<VolCell>& Mesh::volume(const std::string& name) const {
    auto it = volumes.find(name);
    if (it == volumes.end()) throw std::invalid_argument("Mesh: unknown volume carrier " + name);
    return it->second;
}

const FacetSet& Mesh::stratum(const std::string& name) const {
    auto it = strata.find(name);
    if (it == strata.end()) throw std::invalid_argument("Mesh: unknown stratum " + name);
    return it->second;
}

double Mesh::volume_weight(const std::string& name) const {
    double s = 0;
    for (const auto& c : volume(name)) s += c.w;
    return s;
}

std::string Mesh::to_csv() const {
    std::ostringstream os;
    os << "label";
    for (int i = 0; i < 2 * n; ++i) os << ",x" << i;
    os << ",weight,sign\n";
    auto put_pt = [&](const Pt& p) {
        for (int i = 0; i < 2 * n; ++i) os << "," << fmt_g(real_coord(p, i));
    };
    for (const auto& [name, cells] : volumes)
        for (const auto& c : cells) {
            os << name;
            put_pt(c.c);
            os << "," << fmt_g(c.w) << ",0\n";
        }
    for (const auto& [name, set] : strata)
        for (const auto& f : set.facets) {
            os << name;
            put_pt(f.p);
            os << "," << fmt_g(f.w * f.frac) << "," << static_cast<int>(f.sign) << "\n";
        }
    return os.str();
}

Mesh build_mesh(const Configuration& cfg, double h, const MeshOptions& opts) {
    if (h <= 0) throw std::invalid_argument("build_mesh: h > 0 required");
    Builder b(cfg, h, opts);
    const int n = cfg.n;
    Rng rng(opts.seed);

    auto rho1_neg = [&](const Pt& p) { return cfg.kind == ConfigKind::ball || cfg.rho1().eval(p) < 0; };

    if (cfg.kind == ConfigKind::ball) {
        if (opts.strategy == MeshStrategy::monte_carlo) {
            b.mc_volume("D2", Builder::sym_box(2 * n, cfg.r2 * 1.001),
                        [&](const Pt& p) { return cfg.rho2().eval(p) < 0; }, rng, opts.mc_samples);
        } else {
            b.tensor_volume(cfg.r2, [&](const Pt& p) { return cfg.rho2().eval(p) < 0 ? 0 : -1; }, {"D2"});
        }
        b.sphere_stratum("S2", cfg.r2, cfg.rho2(), [](const Pt&) { return true; });
        if (b.mesh.volumes["D2"].empty()) throw std::runtime_error("build_mesh: empty configuration");
        return std::move(b.mesh);
    }

    if (cfg.kind == ConfigKind::convex) {
        if (opts.strategy == MeshStrategy::monte_carlo) {
            b.mc_volume("D12", Builder::sym_box(2 * n, cfg.r2 * 1.001),
                        [&](const Pt& p) { return cfg.rho2().eval(p) < 0 && cfg.rho1().eval(p) < 0; }, rng,
                        opts.mc_samples);
            b.mc_volume("U1", Builder::sym_box(2 * n, cfg.r2 * 1.001),
                        [&](const Pt& p) { return cfg.rho2().eval(p) < 0 && cfg.rho1().eval(p) >= 0; }, rng,
                        opts.mc_samples);
        } else {
            b.tensor_volume(cfg.r2,
                            [&](const Pt& p) {
                                if (cfg.rho2().eval(p) >= 0) return -1;
                                return cfg.rho1().eval(p) < 0 ? 0 : 1;
                            },
                            {"D12", "U1"});
        }
        // S2: sphere part inside D1; S1plus: sphere part outside D1
        b.sphere_stratum("S2", cfg.r2, cfg.rho2(), [&](const Pt& p) { return cfg.rho1().eval(p) < 0; });
        b.sphere_stratum("S1plus", cfg.r2, cfg.rho2(),
                         [&](const Pt& p) { return cfg.rho1().eval(p) >= 0; });
        // S1: graph part of {rho1 = 0} inside the ball
        const int yc = 2 * cfg.rho1().distinguished() + 1;
        auto init1 = [&](Pt& p) {
            // initial y from the quadric branch near the origin
            double B = 0;
            for (int j = 0; j < n; ++j) {
                double c = j < cfg.q - 1 ? cfg.lambdas[j] : 1.0;
                if (2 * j + 1 == yc) {
                    B += c * real_coord(p, 2 * j) * real_coord(p, 2 * j);
                } else {
                    B += c * std::norm(p[j]);
                }
            }
            if (1 - 4 * B <= 0) return false;
            set_real_coord(p, yc, (1 - std::sqrt(1 - 4 * B)) / 2);
            return true;
        };
        b.graph_stratum("S1", cfg.rho1(), yc, cfg.r2 * 1.02,
                        [&](const Pt& p) { return cfg.rho2().eval(p) < 0; }, init1);
        // corner S12 (exact chart at n = 2)
        if (n == 2) {
            double lam = cfg.q >= 2 ? cfg.lambdas[0] : 0.0;
            auto init12 = [&](Pt& p, int br) {
                double u = std::norm(p[0]);
                double y2 = cfg.r2 * cfg.r2 - (1 - (cfg.q >= 2 ? lam : 0.0)) * u;
                double G = cfg.r2 * cfg.r2 - u - y2 * y2;
                if (G <= 0) return false;
                set_real_coord(p, 2, (br == 0 ? 1 : -1) * std::sqrt(G));
                set_real_coord(p, 3, y2);
                return true;
            };
            b.corner_stratum("S12", cfg.rho1(), cfg.rho2(), 2, 3, cfg.r2 * 1.02,
                             [](const Pt&) { return true; }, init12, 2);
        }
        if (b.mesh.volumes["D12"].empty()) throw std::runtime_error("build_mesh: empty configuration");
        return std::move(b.mesh);
    }

    // ---- concave ------------------------------------------------------------
    if (opts.strategy != MeshStrategy::monte_carlo && n > 2)
        throw std::invalid_argument("build_mesh: concave configurations use the monte_carlo strategy");
    const int N = opts.mc_samples;
    const int dm = cfg.rho1().distinguished();
    const int yc = 2 * dm + 1;
    const double r3 = cfg.r3;

    auto in1 = [&](const Pt& p) { return cfg.rho1().eval(p) < 0; };
    auto in2 = [&](const Pt& p) { return cfg.rho2().eval(p) < 0; };
    auto in3 = [&](const Pt& p) { return cfg.rho3().eval(p) < 0; };

    // D3 forces y >= 3|z''|^2 - r3^2 >= -r3^2: tighten the y edge of every
    // D3-contained carrier (guarded).
    auto d3box = [&](double R) {
        auto box = Builder::sym_box(2 * n, R);
        box.lo[yc] = -1.5 * r3 * r3;
        box.guard_lo = 1u << yc;
        return box;
    };
    b.mc_volume("D123", d3box(cfg.r2 * 1.001),
                [&](const Pt& p) { return in1(p) && in2(p) && in3(p); }, rng, N);
    b.mc_volume("D23", d3box(cfg.r2 * 1.001), [&](const Pt& p) { return in2(p) && in3(p); }, rng, N);
    {
        // U1 = D3 \ D1 is confined to the r3 scale: rho3 < 0 <= rho1 forces
        // |z_j| <~ 1.2 r3 in every coordinate and -r3^2 < y <= 0.1 |z4|^2.
        auto ubox = Builder::sym_box(2 * n, 1.4 * r3);
        ubox.lo[yc] = -1.5 * r3 * r3;
        ubox.hi[yc] = 0.5 * r3 * r3;
        ubox.guard_lo = ubox.guard_hi = (1u << (2 * n)) - 1;
        b.mc_volume("U1", ubox, [&](const Pt& p) { return in3(p) && !in1(p); }, rng, N);
    }

    // S1: {rho1=0} inside D2 cap D3. Containment: on S1 with rho3 <= 0 the
    // graph root obeys |y0| <= r3^2 + O(r3^4) and the remaining coordinates
    // satisfy |z1|^2+|z2|^2+x^2 <= (1+lambda) r3^2, so a 1.3 r3 box suffices
    // (guarded on every edge).
    auto init_c1 = [&](Pt& p) {
        double B = 0;
        for (int j = 0; j < n; ++j) {
            double c = j <= dm ? -1.0 : cfg.lambdas[j - dm - 1];
            if (j == dm)
                B += c * real_coord(p, 2 * j) * real_coord(p, 2 * j);
            else
                B += c * std::norm(p[j]);
        }
        // rho1 = -y - y^2 + B ; root near 0 of y^2 + y - B = 0
        double disc = 1 + 4 * B;
        if (disc <= 0) return false;
        set_real_coord(p, yc, (-1 + std::sqrt(disc)) / 2);
        return true;
    };
    {
        auto box = Builder::sym_box(2 * n - 1, 1.3 * r3);
        box.guard_lo = box.guard_hi = (1u << (2 * n - 1)) - 1;
        b.mc_graph_stratum("S1", cfg.rho1(), yc, box,
                           [&](const Pt& p) { return in2(p) && in3(p); }, init_c1, rng, N);
    }
    // S2: sphere inside D1 cap D3 — MC over sphere charts
    {
        auto& set = b.mesh.strata["S2"];
        set.dim = 2 * n - 1;
        const int faces = 4 * n;
        for (int axis = 0; axis < 2 * n; ++axis)
            for (int side = -1; side <= 1; side += 2) {
                auto chart = std::make_shared<SphereChart>(n, axis, static_cast<double>(side), cfg.r2);
                auto cid = b.add_chart(chart);
                const int Nf = N / faces;
                const double w = std::pow(2.0, 2 * n - 1) / Nf;
                set.mc_draws += Nf;
                for (int s = 0; s < Nf; ++s) {
                    double u[7];
                    for (int i = 0; i < 2 * n - 1; ++i) u[i] = rng.uniform(-1, 1);
                    Pt p;
                    chart->lift(u, p);
                    if (!in1(p) || !in3(p)) continue;
                    b.add_facet(set, cid, p, w, 1.0, hyper_sign(n, *chart, p, cfg.rho2()));
                }
            }
    }
    // S3: {rho3=0} inside D1 cap D2 (rho3 linear in the solved coordinate)
    auto init_c3 = [&](Pt& p) {
        double v = -cfg.r3 * cfg.r3;
        for (int j = dm + 1; j < n; ++j) v += 3 * std::norm(p[j]);
        set_real_coord(p, yc, v);
        return true;
    };
    b.mc_graph_stratum("S3", cfg.rho3(), yc, Builder::sym_box(2 * n - 1, cfg.r2 * 1.02),
                       [&](const Pt& p) { return in1(p) && in2(p); }, init_c3, rng, N);
    // S1plus: {rho3=0} outside D1; the same containment argument as for U1
    // confines it to the r3 scale.
    {
        auto box = Builder::sym_box(2 * n - 1, 1.4 * r3);
        box.guard_lo = box.guard_hi = (1u << (2 * n - 1)) - 1;
        b.mc_graph_stratum("S1plus", cfg.rho3(), yc, box,
                           [&](const Pt& p) { return !in1(p); }, init_c3, rng, N);
    }

    // corners: S13 = boundary of S1 at {rho3=0}; S23 = boundary of S2 at {rho3=0}
    const int xc = 2 * dm;
    auto init_13 = [&](Pt& p, int br) {
        if (!init_c3(p)) return false;  // sets y
        double y = real_coord(p, yc);
        double G = -y - y * y;
        for (int j = 0; j < n; ++j) {
            if (j == dm) continue;
            double c = j <= dm ? -1.0 : cfg.lambdas[j - dm - 1];
            G += c * std::norm(p[j]);
        }
        // rho1 = 0 with solved x: -y - (x^2 + y^2) - sum_{j<dm}|z_j|^2 + sum lam |z_j|^2 = 0
        if (G <= 0) return false;
        set_real_coord(p, xc, (br == 0 ? 1 : -1) * std::sqrt(G));
        return true;
    };
    {
        // S13 lives at the r3 scale: rho3 = 0 pins y near -r3^2 and rho1 = 0
        // then forces |z_j| <~ r3 (guarded box).
        auto box = Builder::sym_box(2 * n - 2, 1.3 * r3);
        box.guard_lo = box.guard_hi = (1u << (2 * n - 2)) - 1;
        b.mc_corner_stratum("S13", cfg.rho1(), cfg.rho3(), xc, yc, box,
                            [&](const Pt& p) { return in2(p); }, init_13, rng, N, 2);
    }
    auto init_23 = [&](Pt& p, int br) {
        if (!init_c3(p)) return false;
        double y = real_coord(p, yc);
        double G = cfg.r2 * cfg.r2 - y * y;
        for (int j = 0; j < n; ++j) {
            if (j == dm) continue;
            G -= std::norm(p[j]);
        }
        if (G <= 0) return false;
        set_real_coord(p, xc, (br == 0 ? 1 : -1) * std::sqrt(G));
        return true;
    };
    b.mc_corner_stratum("S23", cfg.rho2(), cfg.rho3(), xc, yc,
                        Builder::sym_box(2 * n - 2, cfg.r2 * 1.02),
                        [&](const Pt& p) { return in1(p); }, init_23, rng, N, 2);
    // S12 is empty for r3 < r2/C_n: on S1 cap S2, rho3 > 0. Record an empty set.
    b.mesh.strata["S12"].dim = 2 * n - 2;
    (void)rho1_neg;
    if (b.mesh.volumes["D123"].empty()) throw std::runtime_error("build_mesh: empty configuration");
    return std::move(b.mesh);
}

Mesh build_d23_mesh(const Configuration& cfg, double h, const MeshOptions& opts) {
    if (cfg.kind != ConfigKind::concave)
        throw std::invalid_argument("build_d23_mesh: concave configuration required");
    Builder b(cfg, h, opts);
    const int n = cfg.n;
    Rng rng(opts.seed + 77);
    const int N = opts.mc_samples;
    const int dm = cfg.rho1().distinguished();
    const int yc = 2 * dm + 1, xc = 2 * dm;
    auto in2 = [&](const Pt& p) { return cfg.rho2().eval(p) < 0; };
    auto in3 = [&](const Pt& p) { return cfg.rho3().eval(p) < 0; };

    auto box23 = Builder::sym_box(2 * n, cfg.r2 * 1.001);
    box23.lo[yc] = -1.5 * cfg.r3 * cfg.r3;
    box23.guard_lo = 1u << yc;
    b.mc_volume("D23", box23, [&](const Pt& p) { return in2(p) && in3(p); }, rng, N);
    {
        auto& set = b.mesh.strata["S2"];
        set.dim = 2 * n - 1;
        const int faces = 4 * n;
        for (int axis = 0; axis < 2 * n; ++axis)
            for (int side = -1; side <= 1; side += 2) {
                auto chart = std::make_shared<SphereChart>(n, axis, static_cast<double>(side), cfg.r2);
                auto cid = b.add_chart(chart);
                const int Nf = N / faces;
                const double w = std::pow(2.0, 2 * n - 1) / Nf;
                set.mc_draws += Nf;
                for (int s = 0; s < Nf; ++s) {
                    double u[7];
                    for (int i = 0; i < 2 * n - 1; ++i) u[i] = rng.uniform(-1, 1);
                    Pt p;
                    chart->lift(u, p);
                    if (!in3(p)) continue;
                    b.add_facet(set, cid, p, w, 1.0, hyper_sign(n, *chart, p, cfg.rho2()));
                }
            }
    }
    auto init_c3 = [&](Pt& p) {
        double v = -cfg.r3 * cfg.r3;
        for (int j = dm + 1; j < n; ++j) v += 3 * std::norm(p[j]);
        set_real_coord(p, yc, v);
        return true;
    };
    b.mc_graph_stratum("S3", cfg.rho3(), yc, Builder::sym_box(2 * n - 1, cfg.r2 * 1.02), in2,
                       init_c3, rng, N);
    auto init_23 = [&](Pt& p, int br) {
        if (!init_c3(p)) return false;
        double y = real_coord(p, yc);
        double G = cfg.r2 * cfg.r2 - y * y;
        for (int j = 0; j < n; ++j) {
            if (j == dm) continue;
            G -= std::norm(p[j]);
        }
        if (G <= 0) return false;
        set_real_coord(p, xc, (br == 0 ? 1 : -1) * std::sqrt(G));
        return true;
    };
    b.mc_corner_stratum("S23", cfg.rho2(), cfg.rho3(), xc, yc,
                        Builder::sym_box(2 * n - 2, cfg.r2 * 1.02), [](const Pt&) { return true; },
                        init_23, rng, N, 2);
    return std::move(b.mesh);
}

double stokes_residual(const Mesh& m, const std::vector<std::string>& boundary,
                       const std::function<double(const Pt&, int)>& omega,
                       const std::function<double(const Pt&)>& domega) {
    const int d = 2 * m.n;
    double vol = 0;
    std::string main_name = m.volumes.count("D12") ? "D12" : (m.volumes.count("D123") ? "D123" : "D2");
    for (const auto& c : m.volume(main_name)) vol += domega(c.c) * c.w;
    double bnd = 0;
    double T[8 * 7], M[49];
    for (const auto& name : boundary) {
        const auto& set = m.stratum(name);
        for (const auto& f : set.facets) {
            m.charts[f.chart]->tangents(f.p, T);
            double contrib = 0;
            for (int mu = 0; mu < d; ++mu) {
                double a = omega(f.p, mu);
                if (a == 0.0) continue;
                // (dx_0 ^ .. ^ dx_{mu-1} ^ dx_{mu+1} ^ ..)(T) = det of T without row mu
                int rr = 0;
                for (int row = 0; row < d; ++row) {
                    if (row == mu) continue;
                    for (int col = 0; col < d - 1; ++col) M[rr * (d - 1) + col] = T[col * d + row];
                    ++rr;
                }
                contrib += a * det_real(M, d - 1);
            }
            bnd += contrib * f.w * f.frac * f.sign;
        }
    }
    return std::abs(vol - bnd);
}

}  // namespace cfh
