#ifndef CFH_MESH_HPP
#define CFH_MESH_HPP

#include <map>
#include <memory>
#include <string>
#include <vector>

#include "cfh/configuration.hpp"
#include "cfh/linalg.hpp"

namespace cfh {

/// Chart used to regenerate facet tangent frames on demand (facets only store
/// their point, weight and orientation).
struct Chart {
    virtual ~Chart() = default;
    virtual int dim() const = 0;  // facet dimension (2n-1 or 2n-2)
    /// Tangent columns at p, column-major 2n x dim, scaled by the chart
    /// Jacobian so that (form on tangents) * w integrates the stratum.
    virtual void tangents(const Pt& p, double* T) const = 0;
};

struct VolCell {
    Pt c;
    double w;
};

struct Facet {
    Pt p;
    double w;        // parameter cell volume (or MC weight)
    float frac;      // fractional weight for cut facets
    std::int8_t sign;
    std::uint16_t chart;
};

struct FacetSet {
    int dim = 0;
    std::int64_t mc_draws = 0;  // total Monte Carlo draws (0 for tensor grids)
    std::vector<Facet> facets;
};

enum class MeshStrategy { tensor, monte_carlo };

/// Quadrature mesh for a configuration: named volume carriers plus oriented
/// boundary strata with Stokes-consistent signs.
class Mesh {
public:
    int n = 0;
    double h = 0;  // characteristic spacing (tensor) or N^{-1/(2n)} scale (MC)
    MeshStrategy strategy = MeshStrategy::tensor;
    std::uint64_t seed = 0;

    std::map<std::string, std::vector<VolCell>> volumes;
    std::map<std::string, FacetSet> strata;
    std::vector<std::shared_ptr<Chart>> charts;

    const std::vector<VolCell>& volume(const std::string& name) const;
    const FacetSet& stratum(const std::string& name) const;
    bool has_stratum(const std::string& name) const { return strata.count(name) != 0; }

    double volume_weight(const std::string& name) const;

    /// CSV export: point coordinates, weight, stratum label, orientation sign.
    std::string to_csv() const;
};

struct MeshOptions {
    MeshStrategy strategy = MeshStrategy::tensor;
    std::uint64_t seed = 1;
    int mc_samples = 100000;      // per carrier, monte_carlo strategy
    double support_radius = 0.0;  // extension support box (concave); 0 = auto
    int subsample = 3;            // fractional-weight subdivision for cut cells
};

/// Build the mesh for a configuration. Tensor strategy covers ball/convex
/// kinds (and concave hypersurface strata at n <= 2); concave kind at n = 4
/// uses monte_carlo carriers as configured.
Mesh build_mesh(const Configuration& cfg, double h, const MeshOptions& opts = {});

/// Mesh of D^{23} = D^2 cap D^3 of a concave configuration (carrier of the
/// Bochner-Martinelli-Leray-Koppelman operator).
Mesh build_d23_mesh(const Configuration& cfg, double h, const MeshOptions& opts = {});

/// Discrete Stokes residual: integrates d(omega) over the main volume against
/// the oriented strata sum of omega, for a polynomial test (2n-1)-form.
/// `omega` maps (point, omitted real axis mu) to the coefficient of
/// dx_0 ^ ... ^ dx_{mu-1} ^ dx_{mu+1} ^ ... ^ dx_{2n-1}.
double stokes_residual(const Mesh& m, const std::vector<std::string>& boundary,
                       const std::function<double(const Pt&, int)>& omega,
                       const std::function<double(const Pt&)>& domega);

}  // namespace cfh

#endif
