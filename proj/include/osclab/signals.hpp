// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstdio>
#include <istream>
#include <map>
#include <ostream>
#include <sstream>
#include <string>
#include <vector>

#include "osclab/core.hpp"
#include "osclab/fourier.hpp"
#include "osclab/polynomial.hpp"

namespace osclab {

enum class Band { Lowpass, Annulus };

inline const char* band_name(Band b) { return b == Band::Lowpass ? "lowpass" : "annulus"; }

// Period and offset used for a function that must be accurate on `support`: the period is
// four times the support length, centred on it.
inline double natural_period(const Interval& support) { return 4.0 * support.length(); }

// Random coefficients on every mode with |omega| <= 2 lambda (lowpass) or
// lambda/2 <= |omega| <= 2 lambda (annulus), scaled to unit sup norm.
inline FourierFunction1D synth_bandlimited(double lambda, Band band, std::uint64_t seed, const Interval& support) {
    if (!(lambda >= 1.0)) throw GuardError("synth_bandlimited requires lambda >= 1");
    const double L = natural_period(support);
    const int kmax = static_cast<int>(std::floor(2.0 * lambda * L / kTwoPi));
    const int kmin_abs = band == Band::Lowpass ? 0 : static_cast<int>(std::ceil(0.5 * lambda * L / kTwoPi));
    if (kmin_abs > kmax) throw GuardError("annulus band is empty for lambda=" + std::to_string(lambda) + " and period " + std::to_string(L));
    Rng rng(seed);
    std::vector<cplx> c(static_cast<std::size_t>(2 * kmax + 1), cplx{});
    for (int k = -kmax; k <= kmax; ++k) {
        const cplx z = rng.complex_normal();  // drawn for every k so the stream does not depend on the band
        if (std::abs(k) >= kmin_abs) c[static_cast<std::size_t>(k + kmax)] = z;
    }
    FourierFunction1D f(L, support.center(), -kmax, std::move(c),
                        BandMeta{band_name(band), lambda, "synth seed=" + std::to_string(seed)});
    f.trim();
    const double s = sup_norm(f);
    if (s == 0.0) throw GuardError("synthesized function vanished");
    return f.scaled(1.0 / s);
}

// Natural window for a phase image [lo, hi]: plateau on it, ramps of half its length.
inline PlateauWindow natural_window(const Interval& image) { return {image, 0.5 * image.length()}; }

// window(y) * exp(i lambda F(y)), projected with period 2 x (window support length).
inline FourierFunction1D modulated_exp(double lambda, const Poly1D& F, const PlateauWindow& window,
                                       const ProjectionOptions& opt = {}) {
    const Interval sup = window.support();
    const double L = 2.0 * sup.length();
    auto g = [&](double y) -> cplx {
        const double w = window(y);
        if (w == 0.0) return {0.0, 0.0};
        return w * std::polar(1.0, lambda * F(y));
    };
    return project_periodic(g, L, sup.center(), BandMeta{"modulated", lambda, "modulated_exp"}, opt);
}

// exp(i beta y^2) on `interval` (plateau window, ramps of half the interval length).
inline FourierFunction1D chirp(double beta, const Interval& interval, const ProjectionOptions& opt = {}) {
    if (beta == 0.0) throw GuardError("chirp requires beta != 0");
    const PlateauWindow w{interval, 0.5 * interval.length()};
    const double L = natural_period(interval);
    auto g = [&](double y) -> cplx {
        const double v = w(y);
        if (v == 0.0) return {0.0, 0.0};
        return v * std::polar(1.0, beta * y * y);
    };
    return project_periodic(g, L, interval.center(), BandMeta{"chirp", 2.0 * std::abs(beta) * interval.length(), "chirp"}, opt);
}

// D_s f(y) = f(y + s) * conj(f(y)), computed exactly as a mode correlation.
inline FourierFunction1D difference_modulate(const FourierFunction1D& f, double s, std::size_t max_pairs = 50'000'000) {
    if (f.empty()) return FourierFunction1D(f.period(), f.offset(), 0, {}, f.meta());
    const std::size_t K = f.coefficients().size();
    if (K * K > max_pairs)
        throw GuardError("difference_modulate: " + std::to_string(K) + " modes exceed the pair budget");
    const int span = f.kmax() - f.kmin();
    std::vector<cplx> shifted(K);
    for (std::size_t i = 0; i < K; ++i)
        shifted[i] = f.coefficients()[i] * std::polar(1.0, f.omega(f.kmin() + static_cast<int>(i)) * s);
    std::vector<cplx> d(static_cast<std::size_t>(2 * span + 1), cplx{});
    // d_n = sum_k shifted_k conj(c_{k-n}),  n = k - l
    for (std::size_t a = 0; a < K; ++a) {
        if (shifted[a] == cplx{}) continue;
        for (std::size_t b = 0; b < K; ++b) {
            const long n = static_cast<long>(a) - static_cast<long>(b);
            d[static_cast<std::size_t>(n + span)] += shifted[a] * std::conj(f.coefficients()[b]);
        }
    }
    BandMeta m{"derived", f.meta().lambda, f.meta().lineage + "|D_s(" + std::to_string(s) + ")"};
    FourierFunction1D out(f.period(), f.offset(), -span, std::move(d), std::move(m));
    return out;
}

// ---------------------------------------------------------------------------
// Partition of unity at scale ell: eta_m(y)^2 = w(y/ell - m) / sum_n w(y/ell - n),
// with w(t) = exp(-1/(1 - t^2)) on (-1, 1). eta_m is supported in ((m-1) ell, (m+1) ell).

class PartitionOfUnity {
public:
    explicit PartitionOfUnity(double scale) : ell_(scale) {
        if (!(scale > 0.0)) throw GuardError("partition scale must be positive");
    }
    static PartitionOfUnity for_lambda(double lambda, double gamma) { return PartitionOfUnity(std::pow(lambda, -gamma)); }

    double scale() const { return ell_; }

    static double bump(double t) {
        if (t <= -1.0 || t >= 1.0) return 0.0;
        return std::exp(-1.0 / (1.0 - t * t));
    }

    double eta(long m, double y) const {
        const double u = y / ell_;
        const double wm = bump(u - static_cast<double>(m));
        if (wm == 0.0) return 0.0;
        const double fl = std::floor(u);
        const double total = bump(u - fl) + bump(u - fl - 1.0);
        return std::sqrt(wm / total);
    }

    Interval core(long m) const { return {(m - 0.5) * ell_, (m + 0.5) * ell_}; }      // I_m
    Interval enlarged(long m) const { return {(m - 1.5) * ell_, (m + 1.5) * ell_}; }  // I_m*
    Interval support(long m) const { return {(m - 1.0) * ell_, (m + 1.0) * ell_}; }

    long index_of(double y) const { return static_cast<long>(std::lround(y / ell_)); }

    // windows whose support meets [lo, hi]
    std::pair<long, long> covering(const Interval& r) const {
        return {static_cast<long>(std::floor(r.lo / ell_)), static_cast<long>(std::ceil(r.hi / ell_))};
    }

private:
    double ell_;
};

struct WindowedCoefficients {
    long m = 0;
    double s = 0.0;
    int k_lo = 0;
    std::vector<cplx> values;  // values[i] = a_{m,s,k_lo+i}
    int points = 0;

    cplx at(int k) const { return values.at(static_cast<std::size_t>(k - k_lo)); }
};

// Resolution needed to integrate eta_m D_s f e^{-i pi k y / ell} at 16 points per wavelength.
inline int local_coefficient_points(const FourierFunction1D& f, const PartitionOfUnity& pou, int k_abs_max) {
    const double ell = pou.scale();
    const double omega = 2.0 * f.max_abs_frequency() + kPi * k_abs_max / ell + kTwoPi * 4.0 / ell;
    const double len = 2.0 * ell;
    return std::max(64, static_cast<int>(std::ceil(16.0 * len * omega / kTwoPi)));
}

// a_k = (1/(2 ell)) * integral eta_m(y) f(y+s) conj f(y) exp(-i pi k y / ell) dy over supp eta_m,
// midpoint rule. `f_eval` lets callers pass a sampled table instead of the exact series.
template <class Eval>
WindowedCoefficients local_fourier_coefficients(const Eval& f_eval, const FourierFunction1D& f, const PartitionOfUnity& pou,
                                                long m, double s, int k_lo, int k_hi, int points = 0) {
    if (k_hi < k_lo) throw GuardError("empty k range");
    const int need = local_coefficient_points(f, pou, std::max(std::abs(k_lo), std::abs(k_hi)));
    if (points == 0) points = need;
    if (points < need)
        throw GuardError("local coefficients: " + std::to_string(points) + " points below the required " + std::to_string(need));
    const Interval J = pou.support(m);
    const double h = J.length() / points;
    const double ell = pou.scale();
    std::vector<cplx> g(static_cast<std::size_t>(points));
    std::vector<double> y(static_cast<std::size_t>(points));
    for (int i = 0; i < points; ++i) {
        y[i] = J.lo + (i + 0.5) * h;
        g[i] = pou.eta(m, y[i]) * f_eval(y[i] + s) * std::conj(f_eval(y[i]));
    }
    WindowedCoefficients out{m, s, k_lo, {}, points};
    out.values.resize(static_cast<std::size_t>(k_hi - k_lo + 1));
    std::vector<cplx> terms(static_cast<std::size_t>(points));
    for (int k = k_lo; k <= k_hi; ++k) {
        const double w = -kPi * k / ell;
        for (int i = 0; i < points; ++i) terms[i] = g[i] * std::polar(1.0, w * y[i]);
        out.values[static_cast<std::size_t>(k - k_lo)] = pairwise_sum(terms) * (h / (2.0 * ell));
    }
    return out;
}

inline WindowedCoefficients local_fourier_coefficients(const FourierFunction1D& f, const PartitionOfUnity& pou, long m,
                                                       double s, int k_lo, int k_hi, int points = 0) {
    return local_fourier_coefficients(f, f, pou, m, s, k_lo, k_hi, points);
}

// (1/(2 ell)) * midpoint sum of |eta_m D_s f|^2 on the same nodes: the Parseval partner of the above.
template <class Eval>
double local_energy(const Eval& f_eval, const PartitionOfUnity& pou, long m, double s, int points) {
    const Interval J = pou.support(m);
    const double h = J.length() / points;
    std::vector<double> t(static_cast<std::size_t>(points));
    for (int i = 0; i < points; ++i) {
        const double y = J.lo + (i + 0.5) * h;
        t[i] = std::norm(pou.eta(m, y) * f_eval(y + s) * std::conj(f_eval(y)));
    }
    return pairwise_sum(t) * h / (2.0 * pou.scale());
}

// ---------------------------------------------------------------------------
// Text form:
//   fourier-function 1
//   period <L>
//   offset <o>
//   band <kind> <lambda>
//   lineage <text to end of line>
//   modes <count>
//   <k> <re> <im>      (one line per stored mode)

inline void write_fourier(std::ostream& os, const FourierFunction1D& f) {
    char buf[128];
    os << "fourier-function 1\n";
    std::snprintf(buf, sizeof buf, "period %.17g\noffset %.17g\n", f.period(), f.offset());
    os << buf;
    std::snprintf(buf, sizeof buf, "band %s %.17g\n", f.meta().kind.c_str(), f.meta().lambda);
    os << buf;
    os << "lineage " << f.meta().lineage << "\n";
    std::size_t nz = 0;
    for (const auto& c : f.coefficients()) nz += (c != cplx{});
    os << "modes " << nz << "\n";
    for (int k = f.kmin(); k <= f.kmax(); ++k) {
        const cplx c = f.coef(k);
        if (c == cplx{}) continue;
        std::snprintf(buf, sizeof buf, "%d %.17g %.17g\n", k, c.real(), c.imag());
        os << buf;
    }
}

inline FourierFunction1D read_fourier(std::istream& is) {
    auto fail = [](const std::string& m) -> FourierFunction1D { throw ConfigError("fourier-function text: " + m); };
    std::string tag;
    int version = 0;
    if (!(is >> tag >> version) || tag != "fourier-function" || version != 1) return fail("bad header");
    double period = 0, offset = 0, lambda = 0;
    std::string key, kind, lineage;
    std::size_t count = 0;
    if (!(is >> key >> period) || key != "period") return fail("expected period");
    if (!(is >> key >> offset) || key != "offset") return fail("expected offset");
    if (!(is >> key >> kind >> lambda) || key != "band") return fail("expected band");
    if (!(is >> key) || key != "lineage") return fail("expected lineage");
    std::getline(is, lineage);
    if (!lineage.empty() && lineage.front() == ' ') lineage.erase(0, 1);
    if (!(is >> key >> count) || key != "modes") return fail("expected modes");
    std::map<int, cplx> modes;
    for (std::size_t i = 0; i < count; ++i) {
        int k;
        double re, im;
        if (!(is >> k >> re >> im)) return fail("truncated mode list");
        modes[k] = {re, im};
    }
    if (modes.empty()) return FourierFunction1D(period, offset, 0, {}, BandMeta{kind, lambda, lineage});
    const int lo = modes.begin()->first, hi = modes.rbegin()->first;
    std::vector<cplx> c(static_cast<std::size_t>(hi - lo + 1), cplx{});
    for (const auto& [k, v] : modes) c[static_cast<std::size_t>(k - lo)] = v;
    return FourierFunction1D(period, offset, lo, std::move(c), BandMeta{kind, lambda, lineage});
}

}  // namespace osclab
