#ifndef CFH_KERNELS_HPP
#define CFH_KERNELS_HPP

#include <cstdint>
#include <memory>
#include <string>
#include <vector>

#include "cfh/configuration.hpp"
#include "cfh/leray.hpp"
#include "cfh/poly.hpp"

namespace cfh {

// Exterior algebra over {dzbar_j, dzeta_j, dzetabar_j} (holomorphic dz legs
// never appear in the (0,*)-in-z components; the quotient is dbar-stable, so
// kernels are expanded mod dz throughout).
//   generator bit j        : dzbar_j
//   generator bit n + j    : dzeta_j
//   generator bit 2n + j   : dzetabar_j
using ExtMono = std::uint32_t;

inline int gen_dzbar(int, int j) { return j; }
inline int gen_dzeta(int n, int j) { return n + j; }
inline int gen_dzetabar(int n, int j) { return 2 * n + j; }

inline int mono_degree_zbar(ExtMono m, int n) {
    return __builtin_popcount(m & ((1u << n) - 1));
}
inline int mono_degree_zeta_total(ExtMono m, int n) {
    return __builtin_popcount(m >> n & ((1u << (2 * n)) - 1));
}
inline int mono_degree_zetabar(ExtMono m, int n) {
    return __builtin_popcount(m >> (2 * n));
}

std::string mono_to_string(ExtMono m, int n);

struct ExtTerm {
    ExtMono mono;
    sym::RatCoeff coeff;
};

/// Shared symbolic context: the denominator table (Leray pairings) for one
/// family of kernels.
struct KernelContext {
    int n = 0;
    std::vector<LerayMap> maps;
    std::vector<sym::Poly> dens;  // dens[i] = g^i . (zeta - z)

    static KernelContext from_maps(std::vector<LerayMap> maps);
};

/// Double form in the quotient algebra with rational-function coefficients.
class ExtForm {
public:
    explicit ExtForm(int n = 0) : n_(n) {}

    int n() const { return n_; }
    bool empty() const { return terms_.empty(); }
    const std::vector<ExtTerm>& terms() const { return terms_; }

    void add_term(ExtMono mono, sym::RatCoeff c);
    ExtForm operator+(const ExtForm& o) const;
    ExtForm operator-() const;
    ExtForm operator-(const ExtForm& o) const { return *this + (-o); }
    ExtForm wedge(const ExtForm& o) const;
    ExtForm scale(cplx s) const;

    /// dbar in the z variables (adds dzbar legs).
    ExtForm dbar_z(const KernelContext& ctx) const;
    /// dbar in the zeta variables (adds dzetabar legs).
    ExtForm dbar_zeta(const KernelContext& ctx) const;

    /// (0,q)-in-z part.
    ExtForm component_z(int q) const;
    int max_zeta_degree() const;  // over monomials; -1 when empty

private:
    int n_;
    std::vector<ExtTerm> terms_;
};

/// Cauchy-Fantappie 1-form omega^i = (1/2 pi i) g^i . dw / (g^i . w), mod dz.
ExtForm cf_omega(const KernelContext& ctx, int map_index);

/// Omega^{i1...ik} = w^{i1} ^ ... ^ w^{ik} ^ sum_{|a|=n-k} prod (dbar w^{ij})^{a_j}.
ExtForm cf_Omega(const KernelContext& ctx, const std::vector<int>& map_indices);

// ---------------------------------------------------------------------------
// Compiled evaluation

struct CompiledRat {
    struct T {
        cplx c;
        std::uint8_t nnz;
        std::array<std::uint8_t, 12> var;  // variable ids
        std::array<std::uint8_t, 12> pow;
        std::array<std::uint8_t, sym::kMaxDens> dpow;
    };
    std::vector<T> terms;
};

struct CompiledPoly {
    CompiledRat rat;  // denominator-free
};

/// All coefficients of a symbolic form, flattened for fast pointwise
/// evaluation, plus the monomial list referencing coefficient slots.
class CompiledForm {
public:
    CompiledForm() = default;
    CompiledForm(const ExtForm& f, const KernelContext& ctx);

    int n() const { return n_; }
    const std::vector<std::pair<ExtMono, int>>& monos() const { return monos_; }
    std::size_t num_coeffs() const { return coeffs_.size(); }

    /// Evaluate every coefficient slot at (z, zeta).
    void eval(const Pt& z, const Pt& zeta, cplx* out) const;
    /// Evaluate the denominators only (singularity tests).
    void eval_dens(const Pt& z, const Pt& zeta, cplx* out) const;
    int num_dens() const { return static_cast<int>(dens_.size()); }

private:
    int n_ = 0;
    int max_pow_ = 1;
    std::vector<CompiledRat> coeffs_;
    std::vector<std::pair<ExtMono, int>> monos_;
    std::vector<CompiledRat> dens_;
};

/// Kernel form Omega^{i1...ik} with its type-decomposed components.
class KernelForm {
public:
    KernelForm(std::shared_ptr<KernelContext> ctx, std::vector<int> map_indices);

    const KernelContext& ctx() const { return *ctx_; }
    std::shared_ptr<KernelContext> ctx_ptr() const { return ctx_; }
    const std::vector<int>& indices() const { return idx_; }
    int n() const { return ctx_->n; }
    int k() const { return static_cast<int>(idx_.size()); }

    const ExtForm& full() const { return full_; }
    const ExtForm& component(int q) const;       // (0,q)-in-z part
    const CompiledForm& compiled(int q) const;   // cached compiled component
    /// dbar_z of the (0,q) component, compiled (used for exact operator
    /// differentiation away from the singular set).
    const CompiledForm& compiled_dbar_z(int q) const;

    std::string to_json(int q) const;

private:
    std::shared_ptr<KernelContext> ctx_;
    std::vector<int> idx_;
    ExtForm full_;
    mutable std::vector<std::unique_ptr<ExtForm>> comps_;
    mutable std::vector<std::unique_ptr<CompiledForm>> compiled_;
    mutable std::vector<std::unique_ptr<CompiledForm>> compiled_db_;
};

/// Build Omega^{i1...ik}_{(0,q)} for the given maps; empty form when the
/// degree bookkeeping make it vanish identically.
KernelForm build_kernel(std::shared_ptr<KernelContext> ctx, const std::vector<int>& indices);

/// Pointwise Koppelman residual at (z, zeta):
///   dbar_zeta Omega^{I}_{(0,q)} + dbar_z Omega^{I}_{(0,q-1)}
///     - sum_j (-1)^j Omega^{I minus i_j}_{(0,q)}.
/// mode closed_form uses symbolic derivatives (exact); finite_difference
/// differentiates the compiled coefficients with central differences.
double koppelman_residual(const KernelContext& ctx, const std::vector<int>& indices, int q,
                          const Pt& z, const Pt& zeta, bool closed_form = true, double h = 1e-3);

struct DegreeReport {
    bool ok = true;
    std::string detail;
};

/// Symbolic vanishing/degree facts for the canonical configurations:
/// which = one of "type-1", "type-2", "type-12", "Ca-type-1", "type-3",
/// "db13=0", "L110".
DegreeReport degree_vanishing_check(const Configuration& cfg, const std::string& which);

}  // namespace cfh

#endif
