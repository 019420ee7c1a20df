// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <algorithm>
#include <cmath>
#include <cstring>
#include <functional>
#include <new>
#include <memory>
#include <mutex>
#include <string>
#include <vector>

#include <fftw3.h>

#include "osclab/core.hpp"

namespace osclab {

struct Interval {
    double lo = 0.0;
    double hi = 1.0;
    double length() const { return hi - lo; }
    double center() const { return 0.5 * (lo + hi); }
    bool contains(double y) const { return y >= lo && y <= hi; }
};

namespace fft {

inline std::mutex& planner_mutex() {
    static std::mutex m;
    return m;
}

// In-place complex DFT of length n. sign = +1 computes sum_m a_m e^{+2 pi i m n / N}.
// FFTW_ESTIMATE keeps the algorithm choice deterministic from run to run; the data goes through
// an fftw_malloc buffer because FFTW picks SIMD kernels by alignment, and std::vector storage
// is not guaranteed to be aligned the same way every time.
inline void transform(std::vector<cplx>& a, int sign) {
    const std::size_t n = a.size();
    auto* data = static_cast<fftw_complex*>(fftw_malloc(sizeof(fftw_complex) * n));
    if (!data) throw std::bad_alloc();
    fftw_plan plan;
    {
        std::lock_guard<std::mutex> lock(planner_mutex());
        plan = fftw_plan_dft_1d(static_cast<int>(n), data, data, sign > 0 ? FFTW_BACKWARD : FFTW_FORWARD, FFTW_ESTIMATE);
    }
    std::memcpy(data, a.data(), sizeof(fftw_complex) * n);
    fftw_execute(plan);
    std::memcpy(a.data(), data, sizeof(fftw_complex) * n);
    std::lock_guard<std::mutex> lock(planner_mutex());
    fftw_destroy_plan(plan);
    fftw_free(data);
}

inline std::size_t next_pow2(std::size_t n) {
    std::size_t p = 1;
    while (p < n) p <<= 1;
    return p;
}

}  // namespace fft

// Band bookkeeping carried alongside the coefficients.
struct BandMeta {
    std::string kind = "none";  // lowpass | annulus | chirp | modulated | derived | none
    double lambda = 0.0;
    std::string lineage;  // seeds and operations that produced the function
};

// f(y) = sum_k c_k exp(2 pi i k (y - offset) / L), dense in k over [kmin, kmin + size).
class FourierFunction1D {
public:
    FourierFunction1D() = default;
    FourierFunction1D(double period, double offset, int kmin, std::vector<cplx> coef, BandMeta meta = {})
        : period_(period), offset_(offset), kmin_(kmin), c_(std::move(coef)), meta_(std::move(meta)) {
        if (!(period_ > 0.0)) throw GuardError("Fourier function needs a positive period");
    }

    static FourierFunction1D constant(double period, double offset, cplx value) {
        return {period, offset, 0, {value}, BandMeta{"lowpass", 0.0, "constant"}};
    }
    static FourierFunction1D single_mode(double period, double offset, int k, cplx value) {
        return {period, offset, k, {value}, BandMeta{"derived", 0.0, "single mode"}};
    }

    double period() const { return period_; }
    double offset() const { return offset_; }
    int kmin() const { return kmin_; }
    int kmax() const { return kmin_ + static_cast<int>(c_.size()) - 1; }
    const std::vector<cplx>& coefficients() const { return c_; }
    std::vector<cplx>& coefficients() { return c_; }
    const BandMeta& meta() const { return meta_; }
    BandMeta& meta() { return meta_; }
    bool empty() const { return c_.empty(); }

    cplx coef(int k) const {
        const int i = k - kmin_;
        if (i < 0 || i >= static_cast<int>(c_.size())) return {0.0, 0.0};
        return c_[i];
    }
    double omega(int k) const { return kTwoPi * k / period_; }

    double max_abs_frequency() const {
        double w = 0.0;
        for (int k = kmin_; k <= kmax(); ++k)
            if (coef(k) != cplx{}) w = std::max(w, std::abs(omega(k)));
        return w;
    }

    // Sum of |c_k|^2; the mean of |f|^2 over a period.
    double energy() const {
        double e = 0.0;
        for (const auto& c : c_) e += std::norm(c);
        return e;
    }

    // Exact evaluation by direct summation with a rotation recurrence.
    cplx operator()(double y) const {
        if (c_.empty()) return {0.0, 0.0};
        const double th = kTwoPi * (y - offset_) / period_;
        const cplx step = std::polar(1.0, th);
        cplx z = std::polar(1.0, th * kmin_);
        cplx acc{0.0, 0.0};
        for (const auto& c : c_) {
            acc += c * z;
            z *= step;
        }
        return acc;
    }

    FourierFunction1D conj() const {
        std::vector<cplx> d(c_.size());
        for (std::size_t i = 0; i < c_.size(); ++i) d[c_.size() - 1 - i] = std::conj(c_[i]);
        return {period_, offset_, -kmax(), std::move(d), BandMeta{meta_.kind, meta_.lambda, meta_.lineage + "|conj"}};
    }

    FourierFunction1D scaled(cplx a) const {
        auto r = *this;
        for (auto& c : r.c_) c *= a;
        return r;
    }

    // Drop leading/trailing exact zeros.
    void trim() {
        std::size_t b = 0, e = c_.size();
        while (b < e && c_[b] == cplx{}) ++b;
        while (e > b && c_[e - 1] == cplx{}) --e;
        if (b == e) {
            c_.clear();
            kmin_ = 0;
            return;
        }
        kmin_ += static_cast<int>(b);
        c_ = std::vector<cplx>(c_.begin() + static_cast<std::ptrdiff_t>(b), c_.begin() + static_cast<std::ptrdiff_t>(e));
    }

private:
    double period_ = 1.0;
    double offset_ = 0.0;
    int kmin_ = 0;
    std::vector<cplx> c_;
    BandMeta meta_;
};

// Linear combination on a common period and offset.
inline FourierFunction1D combine(const FourierFunction1D& f, cplx a, const FourierFunction1D& g, cplx b) {
    if (f.period() != g.period() || f.offset() != g.offset())
        throw GuardError("combine: functions live on different periods");
    if (f.empty()) return g.scaled(b);
    if (g.empty()) return f.scaled(a);
    const int lo = std::min(f.kmin(), g.kmin());
    const int hi = std::max(f.kmax(), g.kmax());
    std::vector<cplx> c(static_cast<std::size_t>(hi - lo + 1));
    for (int k = lo; k <= hi; ++k) c[k - lo] = a * f.coef(k) + b * g.coef(k);
    return {f.period(), f.offset(), lo, std::move(c), BandMeta{"derived", std::max(f.meta().lambda, g.meta().lambda), "combination"}};
}

// Uniform samples of one period obtained by FFT, with 8-point Lagrange interpolation.
// The table is oversampled 32x relative to the highest |frequency|, which keeps the
// interpolation error near 1e-11 of the coefficient l1 norm.
class SampledFunction {
public:
    SampledFunction() = default;
    explicit SampledFunction(const FourierFunction1D& f, int oversample = 32) : period_(f.period()), offset_(f.offset()) {
        const int kabs = std::max(std::abs(f.kmin()), std::abs(f.kmax()));
        const std::size_t P = fft::next_pow2(static_cast<std::size_t>(oversample) * (2 * kabs + 2));
        n_ = P;
        table_.assign(P + 8, cplx{});
        std::vector<cplx> buf(P, cplx{});
        for (int k = f.kmin(); k <= f.kmax(); ++k) {
            const long idx = ((k % static_cast<long>(P)) + static_cast<long>(P)) % static_cast<long>(P);
            buf[static_cast<std::size_t>(idx)] += f.coef(k);
        }
        fft::transform(buf, +1);
        // pad three entries before and four after for branch-free stencil access
        for (std::size_t i = 0; i < P + 8; ++i) table_[i] = buf[(i + P - 3) % P];
        inv_h_ = static_cast<double>(P) / period_;
    }

    cplx operator()(double y) const {
        double u = (y - offset_) * inv_h_;
        u -= static_cast<double>(n_) * std::floor(u / static_cast<double>(n_));
        double fl = std::floor(u);
        std::size_t i0 = static_cast<std::size_t>(fl);
        if (i0 >= n_) i0 -= n_;
        const double t = u - fl;
        // nodes at -3..4 relative to i0
        static constexpr double inv_den[8] = {-1.0 / 5040, 1.0 / 720, -1.0 / 240, 1.0 / 144,
                                              -1.0 / 144, 1.0 / 240, -1.0 / 720, 1.0 / 5040};
        double d[8];
        for (int m = 0; m < 8; ++m) d[m] = t - (m - 3);
        double left[9], right[9];
        left[0] = 1.0;
        for (int m = 0; m < 8; ++m) left[m + 1] = left[m] * d[m];
        right[8] = 1.0;
        for (int m = 7; m >= 0; --m) right[m] = right[m + 1] * d[m];
        const cplx* p = table_.data() + i0;
        double re = 0.0, im = 0.0;
        for (int m = 0; m < 8; ++m) {
            const double w = left[m] * right[m + 1] * inv_den[m];
            re += w * p[m].real();
            im += w * p[m].imag();
        }
        return {re, im};
    }

    double sup_norm() const {
        double m = 0.0;
        for (std::size_t i = 3; i < n_ + 3; ++i) m = std::max(m, std::abs(table_[i]));
        return m;
    }

    std::size_t size() const { return n_; }

private:
    double period_ = 1.0;
    double offset_ = 0.0;
    double inv_h_ = 1.0;
    std::size_t n_ = 0;
    std::vector<cplx> table_;
};

// Sup norm over a period. The 32x table locates the peaks to within a fraction of a
// percent; every table local maximum within 1% of the largest is then polished by a
// golden-section search on the exact series.
inline double sup_norm(const FourierFunction1D& f) {
    if (f.empty()) return 0.0;
    const SampledFunction t(f);
    const std::size_t n = t.size();
    const double h = f.period() / static_cast<double>(n);
    const double y0 = f.offset();
    std::vector<double> a(n);
    for (std::size_t i = 0; i < n; ++i) a[i] = std::abs(t(y0 + h * static_cast<double>(i)));
    const double top = *std::max_element(a.begin(), a.end());
    double best = top;
    const double g = 0.5 * (std::sqrt(5.0) - 1.0);
    for (std::size_t i = 0; i < n; ++i) {
        const double prev = a[(i + n - 1) % n], next = a[(i + 1) % n];
        if (a[i] < 0.99 * top || a[i] < prev || a[i] < next) continue;
        double lo = y0 + h * (static_cast<double>(i) - 1.0), hi = lo + 2.0 * h;
        double c = hi - g * (hi - lo), d = lo + g * (hi - lo);
        double fc = std::abs(f(c)), fd = std::abs(f(d));
        for (int it = 0; it < 60; ++it) {
            if (fc > fd) {
                hi = d;
                d = c;
                fd = fc;
                c = hi - g * (hi - lo);
                fc = std::abs(f(c));
            } else {
                lo = c;
                c = d;
                fc = fd;
                d = lo + g * (hi - lo);
                fd = std::abs(f(d));
            }
        }
        best = std::max({best, fc, fd});
    }
    return best;
}

// ---------------------------------------------------------------------------
// Smooth windows on the line.

// C-infinity step from 0 (t <= 0) to 1 (t >= 1).
inline double smooth_step(double t) {
    if (t <= 0.0) return 0.0;
    if (t >= 1.0) return 1.0;
    const double a = std::exp(-1.0 / t);
    const double b = std::exp(-1.0 / (1.0 - t));
    return a / (a + b);
}

// Equal to 1 on [plateau.lo, plateau.hi], smooth ramps of width `ramp` on either side.
struct PlateauWindow {
    Interval plateau;
    double ramp = 1.0;

    double operator()(double y) const {
        if (y < plateau.lo) return smooth_step(1.0 - (plateau.lo - y) / ramp);
        if (y > plateau.hi) return smooth_step(1.0 - (y - plateau.hi) / ramp);
        return 1.0;
    }
    Interval support() const { return {plateau.lo - ramp, plateau.hi + ramp}; }
};

// Fourier projection of a smooth function that vanishes outside one period
// [offset - L/2, offset + L/2). The sample count doubles until the discarded tail is
// below `tol` in l1 (a sup-norm bound), then coefficients below the tail are trimmed.
struct ProjectionOptions {
    double tol = 1e-10;
    std::size_t max_modes = 1u << 20;
    std::size_t min_samples = 256;
};

inline FourierFunction1D project_periodic(const std::function<cplx(double)>& g, double period, double offset,
                                          BandMeta meta, const ProjectionOptions& opt = {}) {
    std::size_t P = fft::next_pow2(opt.min_samples);
    for (;;) {
        std::vector<cplx> buf(P);
        for (std::size_t n = 0; n < P; ++n) {
            const double y = offset - 0.5 * period + period * static_cast<double>(n) / static_cast<double>(P);
            buf[n] = g(y);
        }
        fft::transform(buf, -1);
        // coefficient for k in [-P/2, P/2): c_k = (1/P) sum g(y_n) e^{-2 pi i k (y_n - offset)/L};
        // y_n - offset = -L/2 + nL/P contributes a factor (-1)^k
        const long half = static_cast<long>(P / 2);
        std::vector<cplx> c(P);
        for (long k = -half; k < half; ++k) {
            const std::size_t idx = static_cast<std::size_t>((k + static_cast<long>(P)) % static_cast<long>(P));
            const double sgn = (k % 2 == 0) ? 1.0 : -1.0;
            c[static_cast<std::size_t>(k + half)] = buf[idx] * (sgn / static_cast<double>(P));
        }
        // l1 mass of the outer quarter bounds the aliasing error
        double outer = 0.0;
        for (long k = -half; k < half; ++k)
            if (std::abs(k) >= half / 2) outer += std::abs(c[static_cast<std::size_t>(k + half)]);
        if (outer < opt.tol) {
            // trim symmetric tails whose combined l1 mass stays below tol
            long lo = -half, hi = half - 1;
            double dropped = outer;
            for (;;) {
                const double a = std::abs(c[static_cast<std::size_t>(lo + half)]);
                const double b = std::abs(c[static_cast<std::size_t>(hi + half)]);
                const double take = std::min(a, b);
                if (lo >= hi || dropped + take >= opt.tol) break;
                if (a <= b) {
                    ++lo;
                    dropped += a;
                } else {
                    --hi;
                    dropped += b;
                }
            }
            std::vector<cplx> kept(c.begin() + (lo + half), c.begin() + (hi + half) + 1);
            FourierFunction1D out(period, offset, static_cast<int>(lo), std::move(kept), std::move(meta));
            out.trim();
            return out;
        }
        if (P >= opt.max_modes)
            throw GuardError("projection needs more than " + std::to_string(opt.max_modes) +
                             " modes (band budget exceeded; required at least " + std::to_string(2 * P) + ")");
        P *= 2;
    }
}

}  // namespace osclab
