#ifndef CFH_OPERATORS_HPP
#define CFH_OPERATORS_HPP

#include <map>
#include <memory>
#include <string>
#include <vector>

#include "cfh/forms.hpp"
#include "cfh/kernels.hpp"
#include "cfh/mesh.hpp"

namespace cfh {

/// Samples of one input field over mesh carriers, plus a continuous evaluator
/// for off-node quadrature (polar correction). Prepare before parallel use.
class SampledField {
public:
    SampledField() = default;
    explicit SampledField(FormField f) : field_(std::move(f)) {}

    const FormField& field() const { return field_; }
    int q() const { return field_.q(); }
    int k0() const { return field_.k0(); }

    void prepare_volume(const Mesh& m, const std::string& carrier);
    void prepare_stratum(const Mesh& m, const std::string& name);
    /// Inject precomputed values (used by the iteration, where boundary
    /// samples come from offset evaluations rather than the field closure).
    void set_volume_vals(const Mesh& m, const std::string& carrier, std::vector<CompVals> vals);
    void set_stratum_vals(const Mesh& m, const std::string& name, std::vector<CompVals> vals);

    const std::vector<CompVals>& volume_vals(const Mesh& m, const std::string& carrier) const;
    const std::vector<CompVals>& stratum_vals(const Mesh& m, const std::string& name) const;
    void eval(const Pt& z, CompVals& out) const { field_.eval(z, out); }

private:
    FormField field_;
    std::map<std::pair<const void*, std::string>, std::vector<CompVals>> vol_;
    std::map<std::pair<const void*, std::string>, std::vector<CompVals>> strat_;
};

/// Options for the singular volume quadrature: cells near z are smoothly
/// damped and replaced by a polar-ball correction so that operator outputs
/// stay differentiable in z.
struct SingularOpts {
    bool enabled = true;
    double rho1_cells = 1.2;  // window start, in units of h
    double rho2_cells = 2.8;  // window end
    int n_rad = 4;            // radial Gauss-Legendre segments
    int sphere_k = 3;         // cubed-sphere subdivisions for directions
    std::function<bool(const Pt&)> region;  // carrier indicator for the polar ball
};

/// R^{i...}_{D;s} f(z) = int_D Omega_{(0,s)} ^ f over the named carriers.
/// Throws if z sits on the carrier and singular handling is disabled.
MatForm volume_R(const KernelForm& K, int s_out, const Mesh& mesh,
                 const std::vector<std::string>& carriers, const SampledField& f, const Pt& z,
                 const SingularOpts& sing = {});

/// L^{j...}_{i...;s} f(z) = int_S Omega_{(0,s)} ^ f with oriented facets.
/// check_bounds rejects configurations where a Leray pairing degenerates on
/// the stratum (names the violated bound).
MatForm boundary_L(const KernelForm& K, int s_out, const Mesh& mesh, const std::string& stratum,
                   const SampledField& f, const Pt& z, bool check_bounds = false,
                   double bound_tol = 1e-9);

// ---------------------------------------------------------------------------
// Extension operator

enum class ExtendMethod { analytic, cutoff_reflection };

struct Extension {
    FormField Ef;          // extension (equals f on the domain)
    FormField Edbar_f;     // extension of dbar f
    FormField commutator;  // [E, dbar] f = E(dbar f) - dbar(E f)
    double cutoff_inner = 0, cutoff_outer = 0;
};

/// Extend f from the configuration domain. `analytic` reuses the closed form
/// (optionally times a radial cutoff when cutoff_outer > 0); cutoff_reflection
/// reflects across the rho1 graph and multiplies by a cutoff in rho1.
Extension extend(const Configuration& cfg, const FormField& f, ExtendMethod method,
                 double cutoff_inner = 0, double cutoff_outer = 0, double fd_h = 1e-3);

// ---------------------------------------------------------------------------
// Homotopy operators

enum class HomotopyVariant { original, extended };

struct OperatorManifest {
    std::vector<std::string> parts;  // human-readable part descriptions with signs
    std::string to_json() const;
};

/// Convex-configuration homotopy operator H_s (s = input degree).
class HomotopyConvex {
public:
    HomotopyConvex(const Configuration& cfg, std::shared_ptr<Mesh> mesh, HomotopyVariant variant,
                   ExtendMethod ext_method = ExtendMethod::analytic, SingularOpts sing = {});

    struct Prepared {
        int s = 0;
        SampledField f, Ef, comm;
        bool has_ext = false;
        bool comm_zero = false;
    };
    Prepared prepare(const FormField& g) const;
    /// original-variant preparation from an already-sampled field
    Prepared prepare_from(SampledField f) const;

    MatForm apply(const Prepared& in, const Pt& z) const;
    /// Convenience: prepare + apply (no caching across calls).
    MatForm apply(const FormField& g, const Pt& z) const;

    /// dbar_z(H_s g)(z) by central differences of the quadrature.
    MatForm apply_dbar(const Prepared& in, const Pt& z, double fd_h) const;

    const OperatorManifest& manifest() const { return manifest_; }
    const Configuration& config() const { return cfg_; }
    const Mesh& mesh() const { return *mesh_; }

private:
    Configuration cfg_;
    std::shared_ptr<Mesh> mesh_;
    HomotopyVariant variant_;
    ExtendMethod ext_method_;
    SingularOpts sing_;
    std::shared_ptr<KernelContext> ctx_;
    std::unique_ptr<KernelForm> O0_, O01_, O02_, O012_;
    OperatorManifest manifest_;
};

struct HomotopyResidual {
    double residual = 0;
    Pt argmax{};
    std::vector<double> per_point;
};

/// Residual of f = dbar H_q f + H_{q+1} dbar f over probe points in the
/// shrunken domain (dbar taken by finite differences of the quadrature).
HomotopyResidual homotopy_identity_residual(const HomotopyConvex& H, const FormField& f,
                                            const FormField& dbar_f, const std::vector<Pt>& probes,
                                            double fd_h);

// ---------------------------------------------------------------------------
// Concave machinery

/// Bochner-Martinelli-Leray-Koppelman operator T on D^{23} (hatted kernels).
class BmlkT {
public:
    BmlkT(const Configuration& cfg, std::shared_ptr<Mesh> d23_mesh, SingularOpts sing = {});

    /// T_{D23,l} g at z for input degree l (returns zero operator for l > n).
    MatForm apply(const SampledField& g, const Pt& z) const;
    MatForm apply_dbar(const SampledField& g, const Pt& z, double fd_h) const;

    const Mesh& mesh() const { return *mesh_; }
    const OperatorManifest& manifest() const { return manifest_; }

private:
    Configuration cfg_;
    std::shared_ptr<Mesh> mesh_;
    SingularOpts sing_;
    std::shared_ptr<KernelContext> ctx_;  // maps: g0, g2, g3hat
    std::unique_ptr<KernelForm> O0_, O02_, O03_, O023_;
    OperatorManifest manifest_;
};

/// Concave-configuration homotopy operator per the shrinking-domain formula;
/// evaluation points must lie in D^{123}_{(1-theta) r} with theta in (1/2, 1).
class HomotopyConcave {
public:
    HomotopyConcave(const Configuration& cfg, std::shared_ptr<Mesh> mesh,
                    std::shared_ptr<Mesh> d23_shrunk_mesh, double theta, HomotopyVariant variant,
                    SingularOpts sing = {});

    struct Prepared {
        int s = 0;
        SampledField f, Ef, comm;
        SampledField l23f;  // L^{23}_{23;s} f sampled over the shrunken D23 mesh
    };
    Prepared prepare(const FormField& g) const;
    MatForm apply(const Prepared& in, const Pt& z) const;
    MatForm apply_dbar(const Prepared& in, const Pt& z, double fd_h) const;

    double theta() const { return theta_; }
    const OperatorManifest& manifest() const { return manifest_; }
    const Configuration& config() const { return cfg_; }
    const Mesh& mesh() const { return *mesh_; }
    const BmlkT& bmlk() const { return *T_; }

private:
    Configuration cfg_;
    std::shared_ptr<Mesh> mesh_;
    double theta_;
    HomotopyVariant variant_;
    SingularOpts sing_;
    std::shared_ptr<KernelContext> ctx_;  // g0,g1,g2,g3
    std::unique_ptr<KernelForm> O0_, O01_, O013_, O023_, O123_, O23_;
    std::unique_ptr<BmlkT> T_;
    OperatorManifest manifest_;
};

/// u = H_q f for dbar-closed f; rejects non-closed input (reports residual).
struct ClosedSolveResult {
    FormField u;
    double input_integrability = 0;
    double residual = 0;  // sup over probes of |dbar u - f| (FD through quadrature)
};
ClosedSolveResult closed_solution_concave(HomotopyConcave& H, const FormField& f,
                                          const std::vector<Pt>& probes, double integrability_tol,
                                          double fd_h);

/// Monte Carlo mean/stderr of a stratum integral (per output component).
struct McEstimate {
    MatForm mean;
    double stderr_max = 0;  // max componentwise standard error
};

/// int_S Omega_{(0,s)} ^ f at z with a per-sample variance estimate.
McEstimate boundary_L_mc(const KernelForm& K, int s_out, const Mesh& mesh, const std::string& stratum,
                         const SampledField& f, const Pt& z);

/// Same-sample two-sided check of dbar L^{23}_{23;q} f = L^{23}_{23;q+1} dbar f:
/// returns the MC estimate of the difference (true value zero).
McEstimate dbL23_check(const Configuration& cfg, const Mesh& mesh, const FormField& f,
                       const FormField& dbar_f, const Pt& z);

}  // namespace cfh

#endif
