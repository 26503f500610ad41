#ifndef CFH_LINALG_HPP
#define CFH_LINALG_HPP

#include <array>
#include <cmath>
#include <stdexcept>
#include <vector>

#include "cfh/util.hpp"

namespace cfh {

/// Point in C^n, n <= 4. The dimension travels with the using code.
using Pt = std::array<cplx, 4>;

inline Pt pt() { return Pt{cplx{}, cplx{}, cplx{}, cplx{}}; }

inline double real_coord(const Pt& z, int r) { return r % 2 == 0 ? z[r / 2].real() : z[r / 2].imag(); }

inline void set_real_coord(Pt& z, int r, double v) {
    if (r % 2 == 0)
        z[r / 2] = cplx{v, z[r / 2].imag()};
    else
        z[r / 2] = cplx{z[r / 2].real(), v};
}

inline double abs2(const Pt& z, int n) {
    double s = 0;
    for (int j = 0; j < n; ++j) s += std::norm(z[j]);
    return s;
}

inline double dist(const Pt& a, const Pt& b, int n) {
    double s = 0;
    for (int j = 0; j < n; ++j) s += std::norm(a[j] - b[j]);
    return std::sqrt(s);
}

/// Dense k0 x k0 complex matrix, k0 small (<= 4 in practice).
class Mat {
public:
    Mat() = default;
    explicit Mat(int k) : k_(k), a_(static_cast<std::size_t>(k) * k) {}
    static Mat identity(int k) {
        Mat m(k);
        for (int i = 0; i < k; ++i) m(i, i) = 1.0;
        return m;
    }

    int dim() const { return k_; }
    cplx& operator()(int i, int j) { return a_[static_cast<std::size_t>(i) * k_ + j]; }
    cplx operator()(int i, int j) const { return a_[static_cast<std::size_t>(i) * k_ + j]; }
    const std::vector<cplx>& data() const { return a_; }
    std::vector<cplx>& data() { return a_; }

    Mat& operator+=(const Mat& o) {
        for (std::size_t i = 0; i < a_.size(); ++i) a_[i] += o.a_[i];
        return *this;
    }
    Mat& operator-=(const Mat& o) {
        for (std::size_t i = 0; i < a_.size(); ++i) a_[i] -= o.a_[i];
        return *this;
    }
    Mat operator+(const Mat& o) const { Mat r = *this; r += o; return r; }
    Mat operator-(const Mat& o) const { Mat r = *this; r -= o; return r; }
    Mat operator*(cplx s) const {
        Mat r = *this;
        for (auto& v : r.a_) v *= s;
        return r;
    }
    Mat operator*(const Mat& o) const {
        Mat r(k_);
        for (int i = 0; i < k_; ++i)
            for (int l = 0; l < k_; ++l) {
                cplx x = (*this)(i, l);
                if (x == cplx{}) continue;
                for (int j = 0; j < k_; ++j) r(i, j) += x * o(l, j);
            }
        return r;
    }

    /// Induced l-infinity norm (max row sum).
    double norm_inf() const {
        double m = 0;
        for (int i = 0; i < k_; ++i) {
            double s = 0;
            for (int j = 0; j < k_; ++j) s += std::abs((*this)(i, j));
            m = std::max(m, s);
        }
        return m;
    }

    Mat inverse() const {
        Mat a = *this;
        Mat inv = Mat::identity(k_);
        for (int c = 0; c < k_; ++c) {
            int p = c;
            for (int r = c + 1; r < k_; ++r)
                if (std::abs(a(r, c)) > std::abs(a(p, c))) p = r;
            if (std::abs(a(p, c)) < 1e-300) throw std::runtime_error("Mat::inverse: singular matrix");
            if (p != c)
                for (int j = 0; j < k_; ++j) {
                    std::swap(a(p, j), a(c, j));
                    std::swap(inv(p, j), inv(c, j));
                }
            cplx d = a(c, c);
            for (int j = 0; j < k_; ++j) {
                a(c, j) /= d;
                inv(c, j) /= d;
            }
            for (int r = 0; r < k_; ++r) {
                if (r == c) continue;
                cplx f = a(r, c);
                if (f == cplx{}) continue;
                for (int j = 0; j < k_; ++j) {
                    a(r, j) -= f * a(c, j);
                    inv(r, j) -= f * inv(c, j);
                }
            }
        }
        return inv;
    }

private:
    int k_ = 0;
    std::vector<cplx> a_;
};

/// Determinant of a small complex d x d matrix given in row-major storage.
inline cplx det_small(cplx* m, int d) {
    cplx det{1.0, 0.0};
    for (int c = 0; c < d; ++c) {
        int p = c;
        double best = std::abs(m[c * d + c]);
        for (int r = c + 1; r < d; ++r) {
            double v = std::abs(m[r * d + c]);
            if (v > best) {
                best = v;
                p = r;
            }
        }
        if (best == 0.0) return cplx{0.0, 0.0};
        if (p != c) {
            for (int j = c; j < d; ++j) std::swap(m[p * d + j], m[c * d + j]);
            det = -det;
        }
        det *= m[c * d + c];
        for (int r = c + 1; r < d; ++r) {
            cplx f = m[r * d + c] / m[c * d + c];
            if (f == cplx{}) continue;
            for (int j = c; j < d; ++j) m[r * d + j] -= f * m[c * d + j];
        }
    }
    return det;
}

/// Matrix-valued (0,s)-form at a point: C(n,s) components, each k0 x k0.
struct MatForm {
    int n = 0, s = 0, k0 = 1;
    std::vector<Mat> comp;

    MatForm() = default;
    MatForm(int n_, int s_, int k0_) : n(n_), s(s_), k0(k0_), comp(binom(n_, s_), Mat(k0_)) {}

    MatForm& operator+=(const MatForm& o) {
        for (std::size_t i = 0; i < comp.size(); ++i) comp[i] += o.comp[i];
        return *this;
    }
    MatForm& operator-=(const MatForm& o) {
        for (std::size_t i = 0; i < comp.size(); ++i) comp[i] -= o.comp[i];
        return *this;
    }
    MatForm operator*(cplx c) const {
        MatForm r = *this;
        for (auto& m : r.comp) m = m * c;
        return r;
    }

    double norm_inf() const {
        double v = 0;
        for (const auto& m : comp) v = std::max(v, m.norm_inf());
        return v;
    }
};

}  // namespace cfh

#endif
