// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <algorithm>
#include <atomic>
#include <cmath>
#include <complex>
#include <cstdint>
#include <exception>
#include <numbers>
#include <span>
#include <stdexcept>
#include <string>
#include <thread>
#include <vector>

namespace osclab {

using cplx = std::complex<double>;

inline constexpr double kPi = std::numbers::pi;
inline constexpr double kTwoPi = 2.0 * kPi;

// Plain complex product. std::complex's operator* takes a slow path to honour
// C99 infinity rules, which matters nowhere here and costs a lot in inner loops.
inline cplx mul(cplx a, cplx b) {
    return {a.real() * b.real() - a.imag() * b.imag(), a.real() * b.imag() + a.imag() * b.real()};
}

// ---------------------------------------------------------------------------
// Error kinds. The CLI maps each kind onto a process exit code.

enum class ErrorKind { Config = 1, Guard = 2, FitRefused = 3 };

class Error : public std::runtime_error {
public:
    Error(ErrorKind kind, const std::string& what) : std::runtime_error(what), kind_(kind) {}
    ErrorKind kind() const noexcept { return kind_; }

private:
    ErrorKind kind_;
};

struct ConfigError : Error {
    explicit ConfigError(const std::string& w) : Error(ErrorKind::Config, w) {}
};

// Violated precondition or numerical guard (resolution, overflow, degeneracy).
struct GuardError : Error {
    explicit GuardError(const std::string& w) : Error(ErrorKind::Guard, w) {}
};

// A gradient or tangent field vanished where the geometry requires it not to.
struct DegenerateError : GuardError {
    explicit DegenerateError(const std::string& w) : GuardError(w) {}
};

struct FitRefused : Error {
    explicit FitRefused(const std::string& w) : Error(ErrorKind::FitRefused, w) {}
};

// ---------------------------------------------------------------------------

struct Point2 {
    double x1 = 0.0;
    double x2 = 0.0;
};

inline double norm2(double a, double b) { return std::hypot(a, b); }

// Fixed-shape pairwise summation. The tree depends only on the length of the
// input, so the result is reproducible regardless of how the terms were made.
template <class T>
T pairwise_sum(std::span<const T> v) {
    if (v.empty()) return T{};
    if (v.size() <= 8) {
        T acc = v[0];
        for (std::size_t i = 1; i < v.size(); ++i) acc += v[i];
        return acc;
    }
    const std::size_t half = v.size() / 2;
    return pairwise_sum(v.subspan(0, half)) + pairwise_sum(v.subspan(half));
}

template <class T>
T pairwise_sum(const std::vector<T>& v) {
    return pairwise_sum(std::span<const T>(v.data(), v.size()));
}

// ---------------------------------------------------------------------------
// Worker threads. Work is always split by index and every index writes its own
// slot, so outputs never depend on the thread count.

inline std::atomic<unsigned>& worker_threads_setting() {
    static std::atomic<unsigned> n{1};
    return n;
}

inline void set_worker_threads(unsigned n) { worker_threads_setting() = std::max(1u, n); }
inline unsigned worker_threads() { return worker_threads_setting().load(); }

template <class Body>
void parallel_for(std::size_t n, Body&& body) {
    const unsigned nt = static_cast<unsigned>(std::min<std::size_t>(worker_threads(), n));
    if (nt <= 1) {
        for (std::size_t i = 0; i < n; ++i) body(i);
        return;
    }
    std::atomic<std::size_t> next{0};
    std::exception_ptr failure;
    std::atomic<bool> failed{false};
    auto worker = [&] {
        for (;;) {
            const std::size_t i = next.fetch_add(1);
            if (i >= n || failed.load()) return;
            try {
                body(i);
            } catch (...) {
                if (!failed.exchange(true)) failure = std::current_exception();
                return;
            }
        }
    };
    std::vector<std::thread> pool;
    pool.reserve(nt - 1);
    for (unsigned t = 1; t < nt; ++t) pool.emplace_back(worker);
    worker();
    for (auto& th : pool) th.join();
    if (failure) std::rethrow_exception(failure);
}

// ---------------------------------------------------------------------------
// Seeded randomness with a platform-independent normal sampler (the standard
// distributions are implementation-defined, the engine is not).

class Rng {
public:
    explicit Rng(std::uint64_t seed) : state_(seed * 0x9E3779B97F4A7C15ULL + 0x632BE59BD9B4E019ULL) {}

    std::uint64_t next_u64() {
        std::uint64_t z = (state_ += 0x9E3779B97F4A7C15ULL);
        z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
        z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
        return z ^ (z >> 31);
    }

    // uniform in [0, 1)
    double uniform() { return static_cast<double>(next_u64() >> 11) * 0x1.0p-53; }
    double uniform(double a, double b) { return a + (b - a) * uniform(); }

    double normal() {
        double u1 = uniform();
        while (u1 <= 0.0) u1 = uniform();
        const double u2 = uniform();
        return std::sqrt(-2.0 * std::log(u1)) * std::cos(kTwoPi * u2);
    }

    cplx complex_normal() {
        const double a = normal();
        const double b = normal();
        constexpr double h = 1.0 / std::numbers::sqrt2;
        return {a * h, b * h};
    }

    cplx unit_phase() { return std::polar(1.0, kTwoPi * uniform()); }

private:
    std::uint64_t state_;
};

// Distinct deterministic stream for (seed, slot).
inline std::uint64_t derive_seed(std::uint64_t seed, std::uint64_t slot) {
    Rng r(seed ^ (slot * 0xD1B54A32D192ED03ULL));
    return r.next_u64();
}

}  // namespace osclab
