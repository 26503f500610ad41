#ifndef CFH_LERAY_HPP
#define CFH_LERAY_HPP

#include <functional>
#include <string>
#include <vector>

#include "cfh/geometry.hpp"
#include "cfh/linalg.hpp"
#include "cfh/poly.hpp"

namespace cfh {

enum class LerayId { g0, g1_convex, g1_concave, g2, g3, g3_hat, custom };

std::string leray_name(LerayId id);

/// Leray map g(z,zeta) with nonvanishing pairing g.(zeta-z) on its validity
/// region. Built-ins carry exact polynomial components; custom maps fall back
/// to numeric evaluation with Richardson-extrapolated finite differences.
class LerayMap {
public:
    static LerayMap g0(int n);
    static LerayMap g2(int n);
    static LerayMap g1_convex(int n, int q, const std::vector<double>& lambdas);
    static LerayMap g1_concave(int n, int q, const std::vector<double>& lambdas);
    static LerayMap g3(int n, int q);
    static LerayMap g3_hat(int n, int q);
    static LerayMap custom(int n, std::function<void(const Pt&, const Pt&, cplx*)> eval);
    /// Custom map given by exact polynomial components (symbolic path stays usable).
    static LerayMap custom_poly(int n, std::vector<sym::Poly> comps);

    LerayId id() const { return id_; }
    int n() const { return n_; }
    bool has_symbolic() const { return !comps_.empty(); }
    const std::vector<sym::Poly>& components() const { return comps_; }
    /// Pairing polynomial Phi = g . (zeta - z); only for symbolic maps.
    sym::Poly pairing_poly() const;

    void eval(const Pt& z, const Pt& zeta, cplx* g) const;
    cplx pairing(const Pt& z, const Pt& zeta) const;

    /// d g_c / d(real coordinate r of z or zeta); closed form when symbolic,
    /// Richardson finite differences otherwise.
    cplx deriv_z(const Pt& z, const Pt& zeta, int c, int r) const;
    cplx deriv_zeta(const Pt& z, const Pt& zeta, int c, int r) const;

    /// True if component polynomials never involve the given variable class.
    bool independent_of_zbar() const;
    bool independent_of_zetabar() const;

private:
    LerayId id_ = LerayId::custom;
    int n_ = 0;
    std::vector<sym::Poly> comps_;
    std::function<void(const Pt&, const Pt&, cplx*)> eval_;
};

/// Fill the symbolic variable vector for (z, zeta).
inline void bind_vars(int n, const Pt& z, const Pt& zeta, cplx* x) {
    for (int j = 0; j < n; ++j) {
        x[sym::var_z(n, j)] = z[j];
        x[sym::var_zb(n, j)] = std::conj(z[j]);
        x[sym::var_zeta(n, j)] = zeta[j];
        x[sym::var_zetab(n, j)] = std::conj(zeta[j]);
    }
}

struct BoundViolation {
    Pt z, zeta;
    double value = 0;
};

/// Report from randomized verification of the pairing inequalities.
struct BoundReport {
    std::string name;
    double min_slack = 1e300;   // inequalities
    double max_deviation = 0;   // identities
    double probed_constant = 0; // smallest admissible C where applicable
    int samples = 0;
    bool ok = true;
    BoundViolation worst;
};

}  // namespace cfh

#endif
