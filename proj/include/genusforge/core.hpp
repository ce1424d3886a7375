#pragma once

#include <Eigen/Core>
#include <Eigen/Geometry>

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <cstdlib>
#include <stdexcept>
#include <string>
#include <thread>
#include <vector>

namespace genusforge {

using Vec2 = Eigen::Vector2d;
using Vec3 = Eigen::Vector3d;
using Mat2 = Eigen::Matrix2d;
using Mat3 = Eigen::Matrix3d;
using MatX3 = Eigen::Matrix<double, Eigen::Dynamic, 3>;

constexpr int kInvalid = -1;
constexpr double kPi = 3.14159265358979323846;

/// Error with a stable machine-readable kind, e.g. "NonManifoldEdge".
/// The CLI prints `kind()` on stderr and exits 1 for pipeline failures.
class Error : public std::runtime_error {
public:
    Error(std::string kind, const std::string& message)
        : std::runtime_error(kind + ": " + message), kind_(std::move(kind)) {}
    const std::string& kind() const { return kind_; }

private:
    std::string kind_;
};

[[noreturn]] inline void fail(const std::string& kind, const std::string& message) {
    throw Error(kind, message);
}

/// Deterministic 64-bit RNG (splitmix64). Distributions are hand-rolled so
/// sequences do not depend on the standard library implementation.
class Rng {
public:
    explicit Rng(std::uint64_t seed = 0) : state_(seed) {}

    std::uint64_t next_u64() {
        std::uint64_t z = (state_ += 0x9e3779b97f4a7c15ULL);
        z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
        z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
        return z ^ (z >> 31);
    }

    /// Uniform in [0, 1).
    double next_double() { return double(next_u64() >> 11) * 0x1.0p-53; }

    double uniform(double lo, double hi) { return lo + (hi - lo) * next_double(); }

    /// Uniform integer in [lo, hi] inclusive.
    std::int64_t uniform_int(std::int64_t lo, std::int64_t hi) {
        return lo + std::int64_t(next_u64() % std::uint64_t(hi - lo + 1));
    }

    /// Derive an independent child stream (for per-subsystem seeding).
    Rng fork() { return Rng(next_u64()); }

private:
    std::uint64_t state_;
};

/// Quintic smoothstep on [0,1]: q(0)=0, q(1)=1, q'(0)=q'(1)=q''(0)=q''(1)=0.
inline double smootherstep01(double u) {
    u = std::clamp(u, 0.0, 1.0);
    return u * u * u * (u * (u * 6.0 - 15.0) + 10.0);
}

inline double smootherstep01_deriv(double u) {
    if (u <= 0.0 || u >= 1.0) return 0.0;
    return 30.0 * u * u * (u - 1.0) * (u - 1.0);
}

inline int max_threads() {
    if (const char* env = std::getenv("GENUSFORGE_THREADS")) {
        int n = std::atoi(env);
        if (n > 0) return n;
    }
    unsigned hw = std::thread::hardware_concurrency();
    return hw == 0 ? 1 : int(hw);
}

/// Static-partition parallel loop. `fn(i)` must only write state owned by
/// index i; results are then independent of the thread count.
template <typename Fn>
void parallel_for(std::int64_t n, Fn&& fn) {
    int threads = std::min<std::int64_t>(max_threads(), n);
    if (threads <= 1) {
        for (std::int64_t i = 0; i < n; ++i) fn(i);
        return;
    }
    std::vector<std::thread> pool;
    pool.reserve(threads);
    for (int t = 0; t < threads; ++t) {
        pool.emplace_back([&, t] {
            for (std::int64_t i = t; i < n; i += threads) fn(i);
        });
    }
    for (auto& th : pool) th.join();
}

}  // namespace genusforge
