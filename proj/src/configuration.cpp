#include "cfh/configuration.hpp"

#include <cmath>

#include "json.hpp"

namespace cfh {

Configuration build_convex_config(int n, int q, std::vector<double> lambdas, double r2,
                                  std::shared_ptr<Remainder> remainder) {
    if (n < 2) throw std::invalid_argument("build_convex_config: n >= 2 required");
    if (q < 1 || q > n - 1) throw std::invalid_argument("build_convex_config: 1 <= q <= n-1 required");
    if (r2 <= 0) throw std::invalid_argument("build_convex_config: r2 > 0 required");
    Configuration c;
    c.kind = ConfigKind::convex;
    c.n = n;
    c.q = q;
    c.r2 = r2;
    c.lambdas = lambdas;
    c.pieces.push_back(DefiningFunction::convex_rho1(n, q, lambdas, remainder));
    c.pieces.push_back(DefiningFunction::ball_rho2(n, r2));
    c.leray.push_back(LerayMap::g0(n));
    c.leray.push_back(LerayMap::g1_convex(n, q, lambdas));
    c.leray.push_back(LerayMap::g2(n));
    return c;
}

Configuration build_concave_config(int n, int q, std::vector<double> lambdas, double r2, double r3,
                                   std::shared_ptr<Remainder> remainder, double cn) {
    if (q < 1 || q > n - 3)
        throw std::invalid_argument("build_concave_config: 1 <= q <= n-3 required for the (q+2)-concave machinery");
    if (r2 <= 0) throw std::invalid_argument("build_concave_config: r2 > 0 required");
    if (!(r3 > 0 && r3 < r2 / cn))
        throw std::invalid_argument("build_concave_config: 0 < r3 < r2/C_n required");
    Configuration c;
    c.kind = ConfigKind::concave;
    c.n = n;
    c.q = q;
    c.r2 = r2;
    c.r3 = r3;
    c.cn = cn;
    c.lambdas = lambdas;
    c.pieces.push_back(DefiningFunction::concave_rho1(n, q, lambdas, remainder));
    c.pieces.push_back(DefiningFunction::ball_rho2(n, r2));
    c.pieces.push_back(DefiningFunction::concave_rho3(n, q, r3));
    c.leray.push_back(LerayMap::g0(n));
    c.leray.push_back(LerayMap::g1_concave(n, q, lambdas));
    c.leray.push_back(LerayMap::g2(n));
    c.leray.push_back(LerayMap::g3(n, q));
    return c;
}

Configuration build_ball_config(int n, double r) {
    Configuration c;
    c.kind = ConfigKind::ball;
    c.n = n;
    c.q = 0;
    c.r2 = r;
    c.pieces.push_back(DefiningFunction::ball_rho2(n, r));
    c.leray.push_back(LerayMap::g0(n));
    c.leray.push_back(LerayMap::g2(n));
    return c;
}

Configuration Configuration::shrink(double theta) const {
    if (!(theta > 0 && theta < 1)) throw std::invalid_argument("shrink: 0 < theta < 1 required");
    Configuration c = *this;
    c.r2 = (1 - theta) * r2;
    if (kind == ConfigKind::ball) {
        c.pieces[0] = c.pieces[0].with_radius(c.r2);
        return c;
    }
    c.pieces[1] = c.pieces[1].with_radius(c.r2);
    if (kind == ConfigKind::concave) {
        c.r3 = (1 - theta) * r3;
        c.pieces[2] = c.pieces[2].with_radius(c.r3);
    }
    return c;
}

std::string Configuration::to_json() const {
    nlohmann::json j;
    j["kind"] = kind == ConfigKind::convex ? "convex" : (kind == ConfigKind::concave ? "concave" : "ball");
    j["n"] = n;
    j["q"] = q;
    j["lambdas"] = lambdas;
    j["r2"] = r2;
    j["r3"] = r3;
    j["cn"] = cn;
    return j.dump(2);
}

Configuration Configuration::from_json(const std::string& text) {
    auto j = nlohmann::json::parse(text);
    std::string kind = j.at("kind");
    int n = j.at("n"), q = j.at("q");
    std::vector<double> lambdas = j.value("lambdas", std::vector<double>{});
    double r2 = j.at("r2"), r3 = j.value("r3", 0.0), cn = j.value("cn", 4.0);
    if (kind == "convex") return build_convex_config(n, q, lambdas, r2);
    if (kind == "concave") return build_concave_config(n, q, lambdas, r2, r3, nullptr, cn);
    return build_ball_config(n, r2);
}

namespace {

// Solve the k x k real system in place (tiny Gaussian elimination).
void solve_small(double* a, double* b, int k) {
    for (int c = 0; c < k; ++c) {
        int p = c;
        for (int r = c + 1; r < k; ++r)
            if (std::abs(a[r * k + c]) > std::abs(a[p * k + c])) p = r;
        for (int j = 0; j < k; ++j) std::swap(a[p * k + j], a[c * k + j]);
        std::swap(b[p], b[c]);
        for (int r = 0; r < k; ++r) {
            if (r == c) continue;
            double f = a[r * k + c] / a[c * k + c];
            for (int j = 0; j < k; ++j) a[r * k + j] -= f * a[c * k + j];
            b[r] -= f * b[c];
        }
    }
    for (int c = 0; c < k; ++c) b[c] /= a[c * k + c];
}

// Gauss-Newton projection of z onto {rho_i = 0 : i in set}.
bool project_to_strata(const Configuration& cfg, const std::vector<int>& set, Pt& z, double tol) {
    const int k = static_cast<int>(set.size());
    const int d = 2 * cfg.n;
    for (int it = 0; it < 60; ++it) {
        double r[3], J[3][8];
        double worst = 0;
        for (int i = 0; i < k; ++i) {
            r[i] = cfg.pieces[set[i]].eval(z);
            worst = std::max(worst, std::abs(r[i]));
            cfg.pieces[set[i]].gradient(z, J[i]);
        }
        if (worst < tol) return true;
        // step = J^T (J J^T)^{-1} r
        double jjt[9], rhs[3];
        for (int i = 0; i < k; ++i) {
            rhs[i] = r[i];
            for (int l = 0; l < k; ++l) {
                double s = 0;
                for (int c = 0; c < d; ++c) s += J[i][c] * J[l][c];
                jjt[i * k + l] = s;
            }
        }
        solve_small(jjt, rhs, k);
        for (int c = 0; c < d; ++c) {
            double s = 0;
            for (int i = 0; i < k; ++i) s += J[i][c] * rhs[i];
            set_real_coord(z, c, real_coord(z, c) - s);
        }
    }
    return false;
}

}  // namespace

double transversality_gram(const Configuration& c, const std::vector<int>& pieces, const Pt& z) {
    const int k = static_cast<int>(pieces.size());
    const int d = 2 * c.n;
    double J[3][8];
    for (int i = 0; i < k; ++i) c.pieces[pieces[i]].gradient(z, J[i]);
    // det(J J^T) for normalized rows (scale-invariant transversality measure)
    double g[9] = {};
    double norms[3];
    for (int i = 0; i < k; ++i) {
        double s = 0;
        for (int c2 = 0; c2 < d; ++c2) s += J[i][c2] * J[i][c2];
        norms[i] = std::sqrt(std::max(s, 1e-300));
    }
    for (int i = 0; i < k; ++i)
        for (int l = 0; l < k; ++l) {
            double s = 0;
            for (int c2 = 0; c2 < d; ++c2) s += J[i][c2] * J[l][c2];
            g[i * k + l] = s / (norms[i] * norms[l]);
        }
    if (k == 1) return g[0];
    if (k == 2) return g[0] * g[3] - g[1] * g[2];
    return g[0] * (g[4] * g[8] - g[5] * g[7]) - g[1] * (g[3] * g[8] - g[5] * g[6]) +
           g[2] * (g[3] * g[7] - g[4] * g[6]);
}

double min_corner_gram(const Configuration& c, int samples, std::uint64_t seed) {
    Rng rng(seed);
    const int np = static_cast<int>(c.pieces.size());
    double result = 1e300;
    std::vector<std::vector<int>> sets;
    for (int i = 0; i < np; ++i)
        for (int j = i + 1; j < np; ++j) sets.push_back({i, j});
    const double R = 1.2 * std::max(c.r2, 0.2);
    for (const auto& set : sets) {
        int found = 0;
        double local = 1e300;
        for (int s = 0; s < samples * 10 && found < samples; ++s) {
            Pt z = pt();
            for (int j = 0; j < c.n; ++j) z[j] = rng.uniform_complex(R);
            if (!project_to_strata(c, set, z, 1e-12)) continue;
            bool on_domain = true;
            for (int i = 0; i < np; ++i) {
                bool in_set = false;
                for (int m : set) in_set |= (m == i);
                if (!in_set && c.pieces[i].eval(z) > 0) on_domain = false;
            }
            if (!on_domain) continue;
            ++found;
            local = std::min(local, transversality_gram(c, set, z));
        }
        if (found > 0) result = std::min(result, local);
    }
    return result;
}

double probe_transversality_radius(const DefiningFunction& rho1, double r_hi, double tol,
                                   int samples, std::uint64_t seed) {
    auto min_gram_at = [&](double r) {
        Configuration c;
        c.kind = ConfigKind::convex;
        c.n = rho1.n();
        c.q = std::max(rho1.q(), 1);
        c.r2 = r;
        c.pieces = {rho1, DefiningFunction::ball_rho2(rho1.n(), r)};
        return min_corner_gram(c, samples, seed);
    };
    double lo = 1e-3 * r_hi, hi = r_hi;
    if (min_gram_at(lo) < tol) return 0.0;
    if (min_gram_at(hi) >= tol) return hi;
    for (int it = 0; it < 40; ++it) {
        double mid = 0.5 * (lo + hi);
        (min_gram_at(mid) >= tol ? lo : hi) = mid;
    }
    return lo;
}

namespace {

Pt random_point_in_box(Rng& rng, int n, double R) {
    Pt z = pt();
    for (int j = 0; j < n; ++j) z[j] = rng.uniform_complex(R);
    return z;
}

}  // namespace

BoundReport bound_check(const std::string& which, const Configuration& cfg, int samples,
                        std::uint64_t seed) {
    Rng rng(seed);
    BoundReport rep;
    rep.name = which;
    rep.samples = samples;
    const int n = cfg.n;

    auto record_slack = [&](double slack, const Pt& z, const Pt& zeta) {
        if (slack < rep.min_slack) {
            rep.min_slack = slack;
            rep.worst = {z, zeta, slack};
        }
        if (slack < 0) rep.ok = false;
    };

    if (which == "W1-dist") {
        const auto& g1 = cfg.map_g1();
        const double R = std::min(0.45, 1.5 * cfg.r2);
        for (int s = 0; s < samples; ++s) {
            Pt z = random_point_in_box(rng, n, R), zeta = random_point_in_box(rng, n, R);
            double lhs = 2.0 * cfg.map_g1().pairing(z, zeta).real();
            double rhs = cfg.rho1().eval(zeta) - cfg.rho1().eval(z) + 0.5 * dist(z, zeta, n) * dist(z, zeta, n);
            record_slack(lhs - rhs, z, zeta);
        }
        (void)g1;
        return rep;
    }

    if (which == "W1s-dist") {
        // 2 Re{g1.(zeta-z)} >= rho1(zeta) - rho1(z) + |w|^2 / C; probes smallest C.
        const double R = std::min(0.45, 1.5 * cfg.r2);
        double cmin = 0;
        for (int s = 0; s < samples; ++s) {
            Pt z = random_point_in_box(rng, n, R), zeta = random_point_in_box(rng, n, R);
            double w2 = 0;
            for (int j = 0; j < n; ++j) w2 += std::norm(zeta[j] - z[j]);
            if (w2 < 1e-14) continue;
            double denom = 2.0 * cfg.map_g1().pairing(z, zeta).real() -
                           (cfg.rho1().eval(zeta) - cfg.rho1().eval(z));
            if (denom <= 0) {
                rep.ok = false;
                rep.worst = {z, zeta, denom};
                continue;
            }
            cmin = std::max(cmin, w2 / denom);
            record_slack(denom - w2 / 4.0, z, zeta);  // slack against the probed C=4 fallback
        }
        rep.probed_constant = cmin;
        return rep;
    }

    if (which == "HH") {
        const double R = 0.6;
        for (int s = 0; s < samples; ++s) {
            Pt z = random_point_in_box(rng, n, R), zeta = random_point_in_box(rng, n, R);
            double dev = std::abs(cfg.map_g3().pairing(z, zeta).real() -
                                  (cfg.rho3().eval(zeta) - cfg.rho3().eval(z)));
            rep.max_deviation = std::max(rep.max_deviation, dev);
        }
        rep.ok = rep.max_deviation <= 1e-12;
        return rep;
    }

    if (which.rfind("giest", 0) == 0) {
        int i = which.back() - '0';
        const LerayMap& g = cfg.leray.at(i == 0 ? 0 : i);
        double cmin = 0;
        int got = 0;
        for (int s = 0; s < samples * 20 && got < samples; ++s) {
            Pt z = random_point_in_box(rng, n, cfg.r2), zeta = random_point_in_box(rng, n, cfg.r2);
            if (!cfg.inside(z)) continue;                      // z in D1 cap D2
            if (cfg.rho2().eval(zeta) >= 0) continue;          // zeta in D2
            if (cfg.rho1().eval(zeta) < 0) continue;           // zeta outside D1
            if (i == 2) {
                // used on the sphere only; push zeta radially onto |zeta| = r2
                double nz = std::sqrt(abs2(zeta, n));
                if (nz < 1e-9) continue;
                for (int j = 0; j < n; ++j) zeta[j] *= cfg.r2 / nz;
                if (cfg.rho1().eval(zeta) < 0) continue;
            }
            ++got;
            double w2 = dist(z, zeta, n);
            w2 *= w2;
            double p = std::abs(g.pairing(z, zeta));
            if (p <= 0) {
                rep.ok = false;
                rep.worst = {z, zeta, 0.0};
                continue;
            }
            cmin = std::max(cmin, w2 / p);
            record_slack(p, z, zeta);
        }
        rep.samples = got;
        rep.probed_constant = cmin;
        return rep;
    }

    if (which == "g3theta") {
        const double theta = 0.6;
        Configuration small = cfg.shrink(theta);
        double r3 = cfg.r3;
        int got = 0;
        for (int s = 0; s < samples * 50 && got < samples; ++s) {
            Pt z = random_point_in_box(rng, n, small.r2);
            if (small.rho2().eval(z) >= 0 || small.rho3().eval(z) >= 0) continue;
            // zeta on {rho3 = 0} within D2, outside nothing else required here
            Pt zeta = random_point_in_box(rng, n, cfg.r2);
            if (!project_to_strata(cfg, {2}, zeta, 1e-12)) continue;
            if (cfg.rho2().eval(zeta) > 0) continue;
            ++got;
            double slack = cfg.map_g3().pairing(z, zeta).real() - theta * r3 * r3;
            record_slack(slack, z, zeta);
        }
        rep.samples = got;
        return rep;
    }

    throw std::invalid_argument("bound_check: unknown inequality name " + which);
}

}  // namespace cfh
