#ifndef CFH_GEOMETRY_HPP
#define CFH_GEOMETRY_HPP

#include <functional>
#include <memory>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include "cfh/linalg.hpp"
#include "cfh/util.hpp"

namespace cfh {

/// Optional smooth remainder R(z) = o(|z|^2) added to the quadric models.
struct Remainder {
    std::function<double(const Pt&, int n)> value;
    std::function<void(const Pt&, int n, double* grad2n)> gradient;  // optional
};

enum class RhoKind { convex_rho1, ball_rho2, concave_rho1, concave_rho3, custom };

/// Smooth real defining function with evaluators for value, real gradient and
/// complex Hessian. A domain piece is {rho < 0}.
class DefiningFunction {
public:
    static DefiningFunction convex_rho1(int n, int q, std::vector<double> lambdas,
                                        std::shared_ptr<Remainder> rem = nullptr);
    static DefiningFunction ball_rho2(int n, double r2);
    static DefiningFunction concave_rho1(int n, int q, std::vector<double> lambdas,
                                         std::shared_ptr<Remainder> rem = nullptr);
    static DefiningFunction concave_rho3(int n, int q, double r3);
    static DefiningFunction custom(int n, std::function<double(const Pt&)> f,
                                   std::function<void(const Pt&, double*)> grad = nullptr);

    double operator()(const Pt& z) const { return eval(z); }
    double eval(const Pt& z) const;
    /// Real gradient, layout (d/dx_1, d/dy_1, ..., d/dx_n, d/dy_n).
    void gradient(const Pt& z, double* g) const;
    /// Complex Hessian d^2 rho / dz_j dzbar_k (row j, col k).
    Mat complex_hessian(const Pt& z) const;
    /// Wirtinger derivative d rho / d z_j.
    cplx dz(const Pt& z, int j) const;

    RhoKind kind() const { return kind_; }
    int n() const { return n_; }
    int q() const { return q_; }
    double radius() const { return radius_; }
    /// Index of the distinguished coordinate carrying the -Im z term (0-based),
    /// or -1 when there is none.
    int distinguished() const { return dist_; }
    const std::vector<double>& lambdas() const { return lambdas_; }
    bool has_remainder() const { return static_cast<bool>(rem_); }

    DefiningFunction with_radius(double r) const {
        DefiningFunction d = *this;
        d.radius_ = r;
        return d;
    }

private:
    RhoKind kind_ = RhoKind::custom;
    int n_ = 0, q_ = 0, dist_ = -1;
    double radius_ = 0.0;                 // r2 or r3 where applicable
    std::vector<double> coef_;            // per-variable |z_j|^2 coefficient
    std::vector<double> lambdas_;
    std::shared_ptr<Remainder> rem_;
    std::function<double(const Pt&)> custom_f_;
    std::function<void(const Pt&, double*)> custom_grad_;
};

/// Radii r_{k+1} = (1 - theta_k) r_k with theta_k = (k+2)^{-2}. The partial
/// product telescopes to r_k = r0 (k+2) / (2(k+1)), hence r_inf = r0/2.
struct ShrinkSchedule {
    double r0 = 1.0;

    double theta(int k) const { return 1.0 / ((k + 2.0) * (k + 2.0)); }
    double radius(int k) const { return r0 * (k + 2.0) / (2.0 * (k + 1.0)); }
    double limit() const { return r0 / 2.0; }
};

/// Numeric probe for the o(|z|^2) contract of a user remainder: checks
/// |R(t u)| / t^2 -> 0 along 10 dyadic scales in random directions.
bool remainder_is_small(const Remainder& rem, int n, double scale0, Rng& rng);

}  // namespace cfh

#endif
