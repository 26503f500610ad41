#ifndef CFH_UTIL_HPP
#define CFH_UTIL_HPP

#include <array>
#include <cmath>
#include <complex>
#include <cstdint>
#include <cstdio>
#include <functional>
#include <stdexcept>
#include <string>
#include <thread>
#include <vector>

namespace cfh {

using cplx = std::complex<double>;

inline constexpr double kPi = 3.14159265358979323846;

/// Deterministic RNG (splitmix64-seeded xoshiro256**). The standard library
/// engines are bit-exact but the distributions are not; we generate doubles
/// by hand so that meshes and Monte Carlo runs are reproducible everywhere.
class Rng {
public:
    explicit Rng(std::uint64_t seed = 0) {
        std::uint64_t x = seed + 0x9E3779B97F4A7C15ull;
        for (auto& s : s_) {
            std::uint64_t z = (x += 0x9E3779B97F4A7C15ull);
            z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ull;
            z = (z ^ (z >> 27)) * 0x94D049BB133111EBull;
            s = z ^ (z >> 31);
        }
    }

    std::uint64_t next_u64() {
        auto rotl = [](std::uint64_t v, int k) { return (v << k) | (v >> (64 - k)); };
        const std::uint64_t result = rotl(s_[1] * 5, 7) * 9;
        const std::uint64_t t = s_[1] << 17;
        s_[2] ^= s_[0];
        s_[3] ^= s_[1];
        s_[1] ^= s_[2];
        s_[0] ^= s_[3];
        s_[2] ^= t;
        s_[3] = rotl(s_[3], 45);
        return result;
    }

    /// Uniform in [0,1).
    double uniform() { return static_cast<double>(next_u64() >> 11) * 0x1.0p-53; }

    double uniform(double a, double b) { return a + (b - a) * uniform(); }

    cplx uniform_complex(double radius) {
        return {uniform(-radius, radius), uniform(-radius, radius)};
    }

private:
    std::array<std::uint64_t, 4> s_{};
};

/// Locale-independent formatting used by every CSV/JSON writer.
inline std::string fmt_g(double v) {
    char buf[40];
    std::snprintf(buf, sizeof(buf), "%.17g", v);
    return buf;
}

inline std::string fmt_g(cplx v) { return fmt_g(v.real()) + (v.imag() < 0 ? "" : "+") + fmt_g(v.imag()) + "i"; }

/// Binomial coefficient for combinadic indexing (small arguments only).
inline int binom(int n, int k) {
    if (k < 0 || k > n) return 0;
    long r = 1;
    for (int i = 0; i < k; ++i) r = r * (n - i) / (i + 1);
    return static_cast<int>(r);
}

/// Rank of a sorted index set among all size-|J| subsets of {0..n-1},
/// lexicographic order.
inline int comb_rank(int n, const std::vector<int>& idx) {
    int rank = 0, prev = -1;
    const int k = static_cast<int>(idx.size());
    for (int i = 0; i < k; ++i) {
        for (int v = prev + 1; v < idx[i]; ++v) rank += binom(n - 1 - v, k - 1 - i);
        prev = idx[i];
    }
    return rank;
}

inline std::vector<int> comb_unrank(int n, int k, int rank) {
    std::vector<int> idx(k);
    int v = 0;
    for (int i = 0; i < k; ++i) {
        for (;; ++v) {
            int c = binom(n - 1 - v, k - 1 - i);
            if (rank < c) break;
            rank -= c;
        }
        idx[i] = v++;
    }
    return idx;
}

/// Parallel map over [0,count) writing into caller-indexed slots; results are
/// independent of the worker count by construction.
inline void parallel_for(std::size_t count, const std::function<void(std::size_t)>& body,
                         int workers = 0) {
    if (workers <= 0) workers = static_cast<int>(std::thread::hardware_concurrency());
    if (workers <= 1 || count < 2) {
        for (std::size_t i = 0; i < count; ++i) body(i);
        return;
    }
    std::vector<std::thread> pool;
    std::size_t chunk = (count + workers - 1) / workers;
    for (int w = 0; w < workers; ++w) {
        std::size_t lo = w * chunk, hi = std::min(count, lo + chunk);
        if (lo >= hi) break;
        pool.emplace_back([lo, hi, &body] {
            for (std::size_t i = lo; i < hi; ++i) body(i);
        });
    }
    for (auto& t : pool) t.join();
}

}  // namespace cfh

#endif
