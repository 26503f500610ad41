#ifndef CFH_FORMS_HPP
#define CFH_FORMS_HPP

#include <functional>
#include <map>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "cfh/linalg.hpp"
#include "cfh/util.hpp"

namespace cfh {

/// Values of all C(n,q) components of a matrix-valued (0,q)-form at a point.
using CompVals = std::vector<Mat>;

/// Sign of merging two disjoint sorted index sets (count of inversions), or 0
/// if they intersect. `merged` receives the combined sorted set.
int merge_sign(const std::vector<int>& a, const std::vector<int>& b, std::vector<int>& merged);

/// Matrix-valued (0,q)-form field on C^n. Closed-form fields carry an
/// evaluator (and optionally their dbar); grid fields interpolate samples.
class FormField {
public:
    using Eval = std::function<void(const Pt&, CompVals&)>;

    FormField() = default;
    static FormField closed(int n, int q, int k0, Eval eval);
    static FormField closed_with_dbar(int n, int q, int k0, Eval eval, FormField dbar);
    static FormField zero(int n, int q, int k0);
    /// Scalar constant-coefficient form c * dzbar^J.
    static FormField constant(int n, int q, int k0, const std::vector<int>& J, const Mat& coeff);

    int n() const { return n_; }
    int q() const { return q_; }
    int k0() const { return k0_; }
    int ncomp() const { return binom(n_, q_); }
    bool has_closed_dbar() const { return static_cast<bool>(dbar_); }

    void eval(const Pt& z, CompVals& out) const;
    CompVals operator()(const Pt& z) const {
        CompVals v;
        eval(z, v);
        return v;
    }
    MatForm value(const Pt& z) const;

    const FormField& closed_dbar() const;

    /// Sup of component matrix norms over a probe set.
    double sup_norm(const std::vector<Pt>& probes) const;

private:
    int n_ = 0, q_ = 0, k0_ = 1;
    Eval eval_;
    std::shared_ptr<FormField> dbar_;
};

/// Pointwise invertible k0 x k0 matrix field with optional closed-form dbar
/// (one matrix per dzbar_j).
struct GaugeMatrix {
    int n = 0, k0 = 1;
    std::function<Mat(const Pt&)> eval;
    std::function<void(const Pt&, std::vector<Mat>&)> dbar;  // optional, n entries

    static GaugeMatrix identity(int n, int k0);
    /// Minimum |det A| over samples (admissibility probe).
    double min_abs_det(const std::vector<Pt>& probes) const;
};

FormField wedge(const FormField& a, const FormField& b);

/// Pointwise wedge of component values (a, b of degrees qa, qb).
CompVals wedge_vals(int n, int qa, int qb, const CompVals& a, const CompVals& b, int k0);

enum class DbarMode { closed_form, finite_difference };

/// dbar of a form field; closed_form requires a supplied derivative, FD uses
/// central differences of the given order (2 or 4) with spacing h.
FormField dbar(const FormField& f, DbarMode mode, double h = 1e-3, int order = 2);

/// (dbar A) A^{-1} + A omega A^{-1}; throws with the point location if A is
/// singular at a sample.
FormField gauge_transform(const FormField& omega, const GaugeMatrix& A, double fd_h = 1e-3);

struct ResidualReport {
    double norm = 0;
    Pt argmax{};
};

/// sup_probes | dbar(omega) - omega ^ omega | and the residual field.
std::pair<ResidualReport, FormField> integrability_residual(const FormField& omega, double h,
                                                            const std::vector<Pt>& probes,
                                                            DbarMode mode = DbarMode::finite_difference);

/// sup_probes | [dbar w' - w'^w'] - A [dbar w - w^w] A^{-1} | for w' the gauge
/// transform of w by A (both curvatures by FD).
double conjugation_identity_check(const FormField& omega, const GaugeMatrix& A, double h,
                                  const std::vector<Pt>& probes);

// ---------------------------------------------------------------------------
// Grid-backed fields

struct GridSpec {
    int n = 0;
    Pt origin{};   // coordinates of node (0,...,0)
    double h = 0;  // lattice spacing
    std::array<int, 8> dims{};

    std::size_t num_nodes() const {
        std::size_t t = 1;
        for (int i = 0; i < 2 * n; ++i) t *= dims[i];
        return t;
    }
};

/// Uniform-lattice samples of a (0,q) field with multilinear interpolation;
/// interpolation is exact at nodes.
class GridField {
public:
    GridField() = default;
    GridField(GridSpec spec, int q, int k0);

    const GridSpec& spec() const { return spec_; }
    int q() const { return q_; }
    int k0() const { return k0_; }

    void set_node(std::size_t node, const CompVals& v);
    void set_valid(std::size_t node, bool valid) { valid_[node] = valid; }
    bool node_valid(std::size_t node) const { return valid_[node] != 0; }
    std::size_t node_index(const std::array<int, 8>& iv) const;
    Pt node_point(std::size_t node) const;

    /// Multilinear interpolation; false if any surrounding node is invalid.
    bool eval(const Pt& z, CompVals& out) const;

    FormField as_form() const;

    std::string to_csv() const;
    static GridField from_csv(const std::string& text);

private:
    GridSpec spec_;
    int q_ = 0, k0_ = 1;
    std::vector<std::uint8_t> valid_;
    std::vector<cplx> data_;  // node-major, then comp, then k0*k0
};

/// Sample a field onto a lattice (nodes validated by the predicate).
GridField sample_to_grid(const FormField& f, const GridSpec& spec,
                         const std::function<bool(const Pt&)>& inside);

}  // namespace cfh

#endif
