#ifndef CFH_CONFIGURATION_HPP
#define CFH_CONFIGURATION_HPP

#include <optional>
#include <string>
#include <vector>

#include "cfh/geometry.hpp"
#include "cfh/leray.hpp"

namespace cfh {

enum class ConfigKind { convex, concave, ball };

/// A convex (D1 cap D2) or concave (D1 cap D2 cap D3) intersection with its
/// Leray maps. The degenerate `ball` kind carries only D2; it backs the
/// Bochner-Martinelli fixtures.
class Configuration {
public:
    ConfigKind kind = ConfigKind::convex;
    int n = 2;
    int q = 1;
    double r2 = 0.0;
    double r3 = 0.0;
    double cn = 4.0;  // constant in r3 < r2 / C_n
    std::vector<double> lambdas;
    std::vector<DefiningFunction> pieces;  // D1[, D2[, D3]] in declaration order
    std::vector<LerayMap> leray;           // g0 first, then one per piece

    const DefiningFunction& rho1() const { return pieces.at(0); }
    const DefiningFunction& rho2() const { return pieces.at(kind == ConfigKind::ball ? 0 : 1); }
    const DefiningFunction& rho3() const { return pieces.at(2); }

    const LerayMap& map_g0() const { return leray.at(0); }
    const LerayMap& map_g1() const { return leray.at(1); }
    const LerayMap& map_g2() const { return leray.at(kind == ConfigKind::ball ? 1 : 2); }
    const LerayMap& map_g3() const { return leray.at(3); }

    bool inside(const Pt& z) const {
        for (const auto& p : pieces)
            if (p.eval(z) >= 0) return false;
        return true;
    }

    /// Signed margin: max over pieces of rho(z) (negative inside).
    double level(const Pt& z) const {
        double m = -1e300;
        for (const auto& p : pieces) m = std::max(m, p.eval(z));
        return m;
    }

    Configuration shrink(double theta) const;

    std::string to_json() const;
    static Configuration from_json(const std::string& text);
};

Configuration build_convex_config(int n, int q, std::vector<double> lambdas, double r2,
                                  std::shared_ptr<Remainder> remainder = nullptr);
Configuration build_concave_config(int n, int q, std::vector<double> lambdas, double r2, double r3,
                                   std::shared_ptr<Remainder> remainder = nullptr, double cn = 4.0);
Configuration build_ball_config(int n, double r);

/// Gram determinant of the defining-function gradients at a point.
double transversality_gram(const Configuration& c, const std::vector<int>& pieces, const Pt& z);

/// Minimum Gram determinant over sampled points of every stratum intersection.
double min_corner_gram(const Configuration& c, int samples, std::uint64_t seed);

/// Largest r2 (bisection) for which the sampled Gram determinant of
/// {rho1, |z|^2 - r^2} stays above `tol`. The paper only asserts existence.
double probe_transversality_radius(const DefiningFunction& rho1, double r_hi, double tol,
                                   int samples, std::uint64_t seed);

/// Randomized verification of the pairing inequalities/identities
/// (W1-dist), (W1s-dist), (HH), (giest), (g3theta).
BoundReport bound_check(const std::string& which, const Configuration& config, int samples,
                        std::uint64_t seed);

}  // namespace cfh

#endif
