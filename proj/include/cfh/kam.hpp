#ifndef CFH_KAM_HPP
#define CFH_KAM_HPP

#include <memory>
#include <string>
#include <vector>

#include "cfh/operators.hpp"

namespace cfh {

/// One step of the iteration solving dbar A + A omega0 = 0 on shrinking
/// domains D_k, with theta_k = (k+2)^{-2} and delta_{k+1} = delta_k^{3/2}.
struct KamState {
    int k = 0;
    double r_k = 0;
    double theta_k = 0;
    double delta_k = 0;
    double omega_norm = 0;   // sup over interior samples of D_k
    double B_norm = 0;       // sup of B_k = -P_k omega_k over D_{k+1} samples
    double dbarB_norm = 0;   // sup of the assigned dbar B_k
    double floor = 0;        // measured homotopy-identity residual at this level
    double wall_s = 0;
};

struct KamOptions {
    int k_max = 4;
    double delta0 = 0.02;
    int mesh_m = 6;          // volume cells per radius at every level
    std::uint64_t seed = 1;
    double tol_integrability = 1e-6;
    double fd_h_scale = 0.5;   // FD spacing = scale * mesh h
    bool enforce_smallness = true;
    int norm_samples = 600;  // interior sample budget for sup norms
};

struct KamReport {
    std::vector<KamState> levels;
    std::string classification;  // quadratic-until-floor | stalled | diverged
    double final_residual = 0;   // |dbar A + A omega0| at interior probes (FD)
    double gauge_flat_residual = 0;  // scalar oracle: dbar(A e^{u}) when available
    double floor0 = 0;
    double r_inf = 0;
    double precondition_eps = 1.0;
    double ahat_telescope_bound = 0;  // max |A_{k+1}-A_k| / (|B_k| prod(1+|B_j|))
    std::string csv() const;
};

/// Non-isotropic dilation pullback: z = L(zt) = (eps^2 zt_d, eps zt'); the
/// dzbar_d leg scales by eps^2, the others by eps.
FormField dilate_pullback(const FormField& omega, double eps, int dist_index);

/// Shrink the sup norm of omega below target_delta by the dilation; returns
/// the pulled-back form and the eps used (bisection over dyadic eps).
std::pair<FormField, double> precondition(const FormField& omega0, double target_delta,
                                          int dist_index, const std::vector<Pt>& probes,
                                          double eps_min = 1e-4);

/// The iteration engine. Levels own their meshes and homotopy operators so
/// the accumulated gauge stays evaluable after the run.
class KamEngine {
public:
    KamEngine(Configuration cfg0, FormField omega0, KamOptions opts);

    /// Perform one step; returns false when the iteration should stop
    /// (stall, divergence or k_max reached).
    bool step();

    const KamState& state() const { return state_; }
    const std::vector<KamState>& levels() const { return levels_; }
    int k() const { return state_.k; }

    /// Evaluate the current iterate omega_k / accumulated gauge at z.
    CompVals omega_at(const Pt& z) const;
    Mat gauge_at(const Pt& z) const;  // A_hat_{k-1} = A_{k-1} ... A_0

    /// Interior sample points of the current domain (used for norms).
    const std::vector<Pt>& interior_samples() const { return samples_; }

    const Configuration& config() const { return cfg_; }
    double quadrature_floor0() const { return floor0_; }
    std::string stall_reason() const { return stall_reason_; }

private:
    struct Level;
    void prepare_level();
    double measure_floor(Level& L, int probes);

    Configuration cfg0_;
    Configuration cfg_;  // current D_k
    KamOptions opts_;
    KamState state_;
    std::vector<KamState> levels_;
    std::vector<std::shared_ptr<Level>> hist_;
    std::shared_ptr<Level> cur_;
    std::vector<Pt> samples_;
    double floor0_ = 0;
    std::string stall_reason_;
};

/// Full solve: optional preconditioning, iteration, final residual check.
/// A_out (optional) receives a lazily evaluated accumulated gauge.
KamReport kam_solve(const Configuration& cfg0, const FormField& omega0, const KamOptions& opts,
                    GaugeMatrix* A_out = nullptr);

}  // namespace cfh

#endif
