#ifndef CFH_POLY_HPP
#define CFH_POLY_HPP

#include <algorithm>
#include <array>
#include <cstring>
#include <map>
#include <string>
#include <vector>

#include "cfh/util.hpp"

namespace cfh::sym {

// Variable layout for complex dimension n (n <= 4):
//   [0, n)      z_j      (holomorphic target variable)
//   [n, 2n)     zbar_j
//   [2n, 3n)    zeta_j   (integration variable)
//   [3n, 4n)    zetabar_j
// zbar/zetabar are treated as independent variables (Wirtinger calculus);
// evaluation binds them to conjugates.
inline constexpr int kMaxVars = 16;

inline int var_z(int n, int j) { (void)n; return j; }
inline int var_zb(int n, int j) { return n + j; }
inline int var_zeta(int n, int j) { return 2 * n + j; }
inline int var_zetab(int n, int j) { return 3 * n + j; }

using Expo = std::array<std::uint8_t, kMaxVars>;

struct Term {
    cplx c;
    Expo e;
};

/// Sparse polynomial over C in at most kMaxVars variables.
class Poly {
public:
    Poly() = default;
    explicit Poly(cplx c) {
        if (c != cplx{0.0, 0.0}) terms_.push_back({c, Expo{}});
    }

    static Poly variable(int v, cplx scale = {1.0, 0.0}) {
        Poly p;
        Term t{scale, Expo{}};
        t.e[v] = 1;
        if (scale != cplx{0.0, 0.0}) p.terms_.push_back(t);
        return p;
    }

    bool is_zero() const { return terms_.empty(); }
    const std::vector<Term>& terms() const { return terms_; }

    Poly& operator+=(const Poly& o) {
        for (const auto& t : o.terms_) add_term(t.c, t.e);
        normalize();
        return *this;
    }
    Poly operator+(const Poly& o) const {
        Poly r = *this;
        r += o;
        return r;
    }
    Poly operator-() const {
        Poly r = *this;
        for (auto& t : r.terms_) t.c = -t.c;
        return r;
    }
    Poly operator-(const Poly& o) const { return *this + (-o); }

    Poly operator*(const Poly& o) const {
        Poly r;
        r.terms_.reserve(terms_.size() * o.terms_.size());
        for (const auto& a : terms_)
            for (const auto& b : o.terms_) {
                Term t{a.c * b.c, a.e};
                for (int i = 0; i < kMaxVars; ++i) t.e[i] = static_cast<std::uint8_t>(t.e[i] + b.e[i]);
                r.terms_.push_back(t);
            }
        r.normalize();
        return r;
    }

    Poly operator*(cplx s) const {
        Poly r = *this;
        for (auto& t : r.terms_) t.c *= s;
        r.normalize();
        return r;
    }

    Poly derivative(int v) const {
        Poly r;
        for (const auto& t : terms_) {
            if (t.e[v] == 0) continue;
            Term d{t.c * static_cast<double>(t.e[v]), t.e};
            d.e[v] -= 1;
            r.terms_.push_back(d);
        }
        r.normalize();
        return r;
    }

    cplx eval(const cplx* x) const {
        cplx s{0.0, 0.0};
        for (const auto& t : terms_) {
            cplx p = t.c;
            for (int v = 0; v < kMaxVars; ++v)
                for (int k = 0; k < t.e[v]; ++k) p *= x[v];
            s += p;
        }
        return s;
    }

    int total_degree() const {
        int d = 0;
        for (const auto& t : terms_) {
            int s = 0;
            for (int v = 0; v < kMaxVars; ++v) s += t.e[v];
            d = std::max(d, s);
        }
        return d;
    }

    std::string to_string(int n) const {
        if (terms_.empty()) return "0";
        std::string s;
        for (std::size_t i = 0; i < terms_.size(); ++i) {
            const auto& t = terms_[i];
            if (i) s += " + ";
            s += "(" + fmt_g(t.c) + ")";
            for (int v = 0; v < kMaxVars; ++v) {
                if (!t.e[v]) continue;
                s += "*" + var_name(n, v);
                if (t.e[v] > 1) s += "^" + std::to_string(static_cast<int>(t.e[v]));
            }
        }
        return s;
    }

    static std::string var_name(int n, int v) {
        if (v < n) return "z" + std::to_string(v + 1);
        if (v < 2 * n) return "zb" + std::to_string(v - n + 1);
        if (v < 3 * n) return "w" + std::to_string(v - 2 * n + 1);
        return "wb" + std::to_string(v - 3 * n + 1);
    }

private:
    void add_term(cplx c, const Expo& e) { terms_.push_back({c, e}); }

    void normalize() {
        std::sort(terms_.begin(), terms_.end(), [](const Term& a, const Term& b) {
            return std::memcmp(a.e.data(), b.e.data(), kMaxVars) < 0;
        });
        std::vector<Term> out;
        out.reserve(terms_.size());
        for (const auto& t : terms_) {
            if (!out.empty() && std::memcmp(out.back().e.data(), t.e.data(), kMaxVars) == 0)
                out.back().c += t.c;
            else
                out.push_back(t);
        }
        std::erase_if(out, [](const Term& t) { return std::abs(t.c) == 0.0; });
        terms_ = std::move(out);
    }

    std::vector<Term> terms_;
};

/// One summand of a rational coefficient: num / prod_i den[i]^dpow[i].
/// Denominators live in a shared table (the Leray pairings of a kernel).
inline constexpr int kMaxDens = 4;

struct RatTerm {
    Poly num;
    std::array<std::uint8_t, kMaxDens> dpow{};
};

/// Rational coefficient represented as a sum of simple terms. Terms with the
/// same denominator signature are merged; no cross-denominator reduction is
/// attempted (evaluation is exact either way).
class RatCoeff {
public:
    RatCoeff() = default;
    explicit RatCoeff(Poly p) {
        if (!p.is_zero()) terms_.push_back({std::move(p), {}});
    }
    static RatCoeff simple(Poly num, int den_index, int power) {
        RatCoeff r;
        RatTerm t{std::move(num), {}};
        t.dpow[den_index] = static_cast<std::uint8_t>(power);
        if (!t.num.is_zero()) r.terms_.push_back(std::move(t));
        return r;
    }

    bool is_zero() const { return terms_.empty(); }
    const std::vector<RatTerm>& terms() const { return terms_; }

    RatCoeff& operator+=(const RatCoeff& o) {
        for (const auto& t : o.terms_) push(t);
        return *this;
    }
    RatCoeff operator+(const RatCoeff& o) const {
        RatCoeff r = *this;
        r += o;
        return r;
    }
    RatCoeff operator-() const {
        RatCoeff r = *this;
        for (auto& t : r.terms_) t.num = -t.num;
        return r;
    }
    RatCoeff operator-(const RatCoeff& o) const { return *this + (-o); }

    RatCoeff operator*(const RatCoeff& o) const {
        RatCoeff r;
        for (const auto& a : terms_)
            for (const auto& b : o.terms_) {
                RatTerm t{a.num * b.num, a.dpow};
                for (int i = 0; i < kMaxDens; ++i) t.dpow[i] = static_cast<std::uint8_t>(t.dpow[i] + b.dpow[i]);
                if (!t.num.is_zero()) r.push(t);
            }
        return r;
    }

    RatCoeff operator*(cplx s) const {
        RatCoeff r = *this;
        for (auto& t : r.terms_) t.num = t.num * s;
        std::erase_if(r.terms_, [](const RatTerm& t) { return t.num.is_zero(); });
        return r;
    }

    /// d/dx_v where dens[] holds the shared denominator polynomials.
    RatCoeff derivative(int v, const std::vector<Poly>& dens) const {
        RatCoeff r;
        for (const auto& t : terms_) {
            RatTerm dn{t.num.derivative(v), t.dpow};
            if (!dn.num.is_zero()) r.push(dn);
            for (int i = 0; i < kMaxDens; ++i) {
                if (!t.dpow[i]) continue;
                Poly dden = dens[i].derivative(v);
                if (dden.is_zero()) continue;
                RatTerm q{t.num * dden * cplx{-static_cast<double>(t.dpow[i]), 0.0}, t.dpow};
                q.dpow[i] += 1;
                if (!q.num.is_zero()) r.push(q);
            }
        }
        return r;
    }

    cplx eval(const cplx* x, const cplx* den_vals) const {
        cplx s{0.0, 0.0};
        for (const auto& t : terms_) {
            cplx v = t.num.eval(x);
            for (int i = 0; i < kMaxDens; ++i)
                for (int k = 0; k < t.dpow[i]; ++k) v /= den_vals[i];
            s += v;
        }
        return s;
    }

    std::string to_string(int n) const {
        if (terms_.empty()) return "0";
        std::string s;
        for (std::size_t i = 0; i < terms_.size(); ++i) {
            const auto& t = terms_[i];
            if (i) s += "  +  ";
            s += "[" + t.num.to_string(n) + "]";
            for (int d = 0; d < kMaxDens; ++d)
                if (t.dpow[d]) s += "/Phi" + std::to_string(d) + "^" + std::to_string(static_cast<int>(t.dpow[d]));
        }
        return s;
    }

private:
    void push(const RatTerm& t) {
        for (auto& u : terms_) {
            if (u.dpow == t.dpow) {
                u.num += t.num;
                if (u.num.is_zero()) {
                    u = terms_.back();
                    terms_.pop_back();
                }
                return;
            }
        }
        terms_.push_back(t);
    }

    std::vector<RatTerm> terms_;
};

}  // namespace cfh::sym

#endif
