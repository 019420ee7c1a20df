// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <algorithm>
#include <cmath>
#include <istream>
#include <numeric>
#include <ostream>
#include <string>
#include <vector>

#include "osclab/core.hpp"
#include "osclab/fourier.hpp"
#include "osclab/signals.hpp"

namespace osclab {

// One extracted piece h(x) e^{i alpha x}, x measured from the function's offset.
// alpha is a lattice frequency 2 pi a / L, so h lives on the same period.
struct SharpPiece {
    double alpha = 0.0;
    int shift = 0;  // a
    FourierFunction1D h;
    double energy = 0.0;  // sum |c_k|^2 captured
};

struct SharpFlatParts {
    std::vector<SharpPiece> sharp;
    FourierFunction1D flat;
    double R = 1.0;
    double delta = 0.0;
    std::size_t M() const { return sharp.size(); }
    std::size_t budget() const { return static_cast<std::size_t>(std::ceil(std::pow(R, delta))); }

    // f_sharp = sum_n h_n e^{i alpha_n x} as a Fourier function on the common lattice
    FourierFunction1D sharp_function() const {
        FourierFunction1D out(flat.period(), flat.offset(), 0, {}, BandMeta{"derived", flat.meta().lambda, "sharp part"});
        for (const auto& p : sharp) {
            const FourierFunction1D shifted(p.h.period(), p.h.offset(), p.h.kmin() + p.shift, p.h.coefficients());
            out = out.empty() ? shifted : combine(out, 1.0, shifted, 1.0);
        }
        return out;
    }
    cplx sharp_at(double y) const {
        cplx acc{};
        for (const auto& p : sharp) acc += p.h(y) * std::polar(1.0, p.alpha * (y - p.h.offset()));
        return acc;
    }
    // L2 norms in the mean-over-period normalization
    double flat_norm() const { return std::sqrt(flat.energy()); }
};

struct DecomposeOptions {
    double scan_spacing = 0.25;   // candidate alpha spacing as a fraction of R
    double stop_fraction = 1e-3;  // stop when a step captures less than this fraction of ||f||_2
};

namespace detail {

inline long ceil_div_freq(double w, double L) { return static_cast<long>(std::ceil(w * L / kTwoPi - 1e-12)); }
inline long floor_div_freq(double w, double L) { return static_cast<long>(std::floor(w * L / kTwoPi + 1e-12)); }

}  // namespace detail

// Greedy time-frequency extraction. Each step scans alpha on a grid of spacing R * scan_spacing
// over the residual's band, keeps the alpha whose window [alpha - R, alpha + R] holds the most
// residual energy, then re-centres alpha on the lattice point nearest the energy centroid of the
// captured modes when that captures at least as much. The captured modes become h, and the flat
// part is whatever is left, so f_sharp + f_flat = f mode by mode.
inline SharpFlatParts decompose(const FourierFunction1D& f, double R, double delta, const DecomposeOptions& opt = {}) {
    if (!(R >= 1.0)) throw GuardError("decompose requires R >= 1");
    if (!(delta > 0.0)) throw GuardError("decompose requires delta > 0");
    SharpFlatParts out;
    out.R = R;
    out.delta = delta;
    out.flat = f;
    out.flat.meta().lineage = f.meta().lineage + "|flat";
    out.flat.trim();
    const double L = f.period();
    const double total = std::sqrt(f.energy());
    if (out.flat.empty() || total == 0.0) {
        out.flat = FourierFunction1D(L, f.offset(), 0, {}, out.flat.meta());
        return out;
    }
    const std::size_t budget = out.budget();
    auto& res = out.flat;

    while (out.sharp.size() < budget && !res.empty()) {
        const int k0 = res.kmin();
        const auto& c = res.coefficients();
        std::vector<double> prefix(c.size() + 1, 0.0);
        for (std::size_t i = 0; i < c.size(); ++i) prefix[i + 1] = prefix[i] + std::norm(c[i]);
        auto captured = [&](long a) {
            // modes k with |omega_k - omega_a| <= R
            const long lo = std::max<long>(k0, a + detail::ceil_div_freq(-R, L));
            const long hi = std::min<long>(res.kmax(), a + detail::floor_div_freq(R, L));
            if (hi < lo) return 0.0;
            return prefix[static_cast<std::size_t>(hi - k0 + 1)] - prefix[static_cast<std::size_t>(lo - k0)];
        };
        const double step = std::max(R * opt.scan_spacing, kTwoPi / L);
        const double wlo = res.omega(res.kmin()), whi = res.omega(res.kmax());
        long best_a = 0;
        double best_e = -1.0;
        for (double w = wlo; w <= whi + 0.5 * step; w += step) {
            const long a = std::lround(std::min(w, whi) * L / kTwoPi);
            const double e = captured(a);
            if (e > best_e) {
                best_e = e;
                best_a = a;
            }
        }
        // re-centre on the energy centroid
        {
            const long lo = std::max<long>(k0, best_a + detail::ceil_div_freq(-R, L));
            const long hi = std::min<long>(res.kmax(), best_a + detail::floor_div_freq(R, L));
            double wsum = 0.0, ksum = 0.0;
            for (long k = lo; k <= hi; ++k) {
                const double e = std::norm(c[static_cast<std::size_t>(k - k0)]);
                wsum += e;
                ksum += e * static_cast<double>(k);
            }
            if (wsum > 0.0) {
                const long a = std::lround(ksum / wsum);
                if (captured(a) >= best_e) best_a = a;
            }
        }
        best_e = captured(best_a);
        if (std::sqrt(best_e) < opt.stop_fraction * total) break;

        const long lo = std::max<long>(k0, best_a + detail::ceil_div_freq(-R, L));
        const long hi = std::min<long>(res.kmax(), best_a + detail::floor_div_freq(R, L));
        std::vector<cplx> hc(static_cast<std::size_t>(hi - lo + 1));
        for (long k = lo; k <= hi; ++k) {
            hc[static_cast<std::size_t>(k - lo)] = c[static_cast<std::size_t>(k - k0)];
            res.coefficients()[static_cast<std::size_t>(k - k0)] = cplx{};
        }
        SharpPiece p;
        p.shift = static_cast<int>(best_a);
        p.alpha = res.omega(p.shift);
        p.h = FourierFunction1D(L, f.offset(), static_cast<int>(lo - best_a), std::move(hc),
                                BandMeta{"derived", f.meta().lambda, "sharp piece"});
        p.h.trim();
        p.energy = best_e;
        out.sharp.push_back(std::move(p));
        res.trim();
    }
    if (res.empty()) res = FourierFunction1D(L, f.offset(), 0, {}, res.meta());
    return out;
}

// Discretised  integral over s of sum_{|xi| <= R} |(D_s f)^(xi)|^2, with the Fourier coefficients
// of D_s f taken in the mean-over-period normalization. Trapezoid rule in s on `s_points` nodes.
inline double flatness_functional(const FourierFunction1D& f, double R, const Interval& s_range, int s_points = 64,
                                  std::size_t max_modes = 1u << 22) {
    if (s_points < 64) throw GuardError("flatness functional needs at least 64 shift samples");
    if (!(s_range.hi > s_range.lo)) throw GuardError("flatness functional needs a nonempty shift range");
    if (f.empty()) return 0.0;
    const double L = f.period();
    const long nmax = detail::floor_div_freq(R, L);
    const std::size_t K = f.coefficients().size();
    if (K > max_modes)
        throw GuardError("flatness functional: " + std::to_string(K) + " modes exceed the budget of " +
                         std::to_string(max_modes) + "; truncate the input");
    const auto& c = f.coefficients();
    const int k0 = f.kmin();
    // d_n = sum_k c_k e^{i omega_k s} conj(c_{k-n}) is a correlation; zero padding to P >= 2K
    // makes the circular FFT correlation exact.
    const std::size_t P = fft::next_pow2(2 * K);
    std::vector<cplx> Bhat(P, cplx{});
    std::copy(c.begin(), c.end(), Bhat.begin());
    fft::transform(Bhat, -1);
    std::vector<double> g(static_cast<std::size_t>(s_points));
    parallel_for(g.size(), [&](std::size_t i) {
        const double s = s_range.lo + s_range.length() * static_cast<double>(i) / (s_points - 1);
        std::vector<cplx> A(P, cplx{});
        for (std::size_t a = 0; a < K; ++a) A[a] = mul(c[a], std::polar(1.0, f.omega(k0 + static_cast<int>(a)) * s));
        fft::transform(A, -1);
        for (std::size_t j = 0; j < P; ++j) A[j] = mul(A[j], std::conj(Bhat[j]));
        fft::transform(A, +1);
        const long nn = std::min<long>(nmax, static_cast<long>(K) - 1);
        std::vector<double> terms;
        terms.reserve(static_cast<std::size_t>(2 * nn + 1));
        for (long n = -nn; n <= nn; ++n) {
            const std::size_t idx = static_cast<std::size_t>((n + static_cast<long>(P)) % static_cast<long>(P));
            terms.push_back(std::norm(A[idx]) / (static_cast<double>(P) * static_cast<double>(P)));
        }
        g[i] = pairwise_sum(terms);
    });
    const double h = s_range.length() / (s_points - 1);
    std::vector<double> w(g.size());
    for (std::size_t i = 0; i < g.size(); ++i) w[i] = g[i] * ((i == 0 || i + 1 == g.size()) ? 0.5 * h : h);
    return pairwise_sum(w);
}

// ---------------------------------------------------------------------------
// Windowed version: f is cut by the partition of unity at scale ell = lambda^-gamma, each
// window is rescaled to u = (y - m ell) / ell in (-1, 1) on a period of 8, and decomposed with
// R = lambda^tau0 and budget exponent delta_star / 2.

inline constexpr double kLocalPeriod = 8.0;

struct LocalWindow {
    long m = 0;
    FourierFunction1D local;  // eta_m(m ell + ell u) f(m ell + ell u) as a function of u
    SharpFlatParts parts;
    double flat_ratio = 0.0;   // flatness functional of the flat part / ||local||_2^4
    double target = 0.0;       // R^-delta
};

struct LocalDecomposition {
    double lambda = 0.0, gamma = 0.0, tau0 = 0.0, delta_star = 0.0;
    double scale = 0.0;  // ell
    double R = 0.0;
    std::vector<LocalWindow> windows;
    // recorded statistics
    double max_alpha_over_lambda = 0.0;    // max |alpha_{m,n}| / lambda, original units
    double min_lead_alpha_over_lambda = 0.0;  // min over windows of |alpha_{m,1}| / lambda
    std::size_t max_pieces = 0;
    double max_flat_ratio = 0.0;

    FourierFunction1D input;

    PartitionOfUnity pou() const { return PartitionOfUnity(scale); }

    // f_sharp = sum_m eta_m f_{m,sharp}
    cplx sharp_at(double y) const {
        const PartitionOfUnity p(scale);
        cplx acc{};
        for (const auto& w : windows) {
            const double e = p.eta(w.m, y);
            if (e != 0.0) acc += e * w.parts.sharp_at(local_coordinate(w.m, y));
        }
        return acc;
    }
    // f_flat = sum_m eta_m (eta_m f - f_{m,sharp}): the residual, so that f_sharp + f_flat = f
    // up to round-off whatever the accuracy of the windowed Fourier projections.
    cplx flat_at(double y) const {
        const PartitionOfUnity p(scale);
        const cplx fy = input(y);
        cplx acc{};
        for (const auto& w : windows) {
            const double e = p.eta(w.m, y);
            if (e != 0.0) acc += e * (e * fy - w.parts.sharp_at(local_coordinate(w.m, y)));
        }
        return acc;
    }

private:
    double local_coordinate(long m, double y) const { return (y - static_cast<double>(m) * scale) / scale; }
};

struct LocalOptions {
    DecomposeOptions decompose;
    double projection_tol = 1e-9;  // l1 tail of the windowed projections, relative to ||f||_inf
    bool flatness = true;
    int flat_s_points = 64;
};

inline LocalDecomposition local_decompose(const FourierFunction1D& f, double lambda, double gamma, double tau0,
                                          double delta_star, const Interval& domain, const LocalOptions& opt = {}) {
    if (!(lambda >= 1.0)) throw GuardError("local_decompose requires lambda >= 1");
    if (!(gamma > 0.0 && tau0 > 0.0 && gamma + tau0 < 1.0))
        throw GuardError("parameter ladder violated: need gamma > 0, tau0 > 0 and gamma + tau0 < 1 (gamma=" +
                         std::to_string(gamma) + ", tau0=" + std::to_string(tau0) + ")");
    if (!(delta_star > 0.0)) throw GuardError("parameter ladder violated: delta_star must be positive");
    LocalDecomposition out;
    out.lambda = lambda;
    out.gamma = gamma;
    out.tau0 = tau0;
    out.delta_star = delta_star;
    out.scale = std::pow(lambda, -gamma);
    out.R = std::pow(lambda, tau0);
    out.input = f;
    const PartitionOfUnity pou(out.scale);
    const auto [m_lo, m_hi] = pou.covering(domain);
    const double fsup = std::max(sup_norm(f), 1e-300);
    ProjectionOptions popt;
    popt.tol = opt.projection_tol * fsup;
    popt.min_samples = 256;

    const std::size_t nw = static_cast<std::size_t>(m_hi - m_lo + 1);
    out.windows.resize(nw);
    const SampledFunction table(f);
    parallel_for(nw, [&](std::size_t i) {
        LocalWindow& w = out.windows[i];
        w.m = m_lo + static_cast<long>(i);
        const double c = static_cast<double>(w.m) * out.scale;
        auto g = [&](double u) -> cplx {
            const double y = c + out.scale * u;
            const double e = pou.eta(w.m, y);
            return e == 0.0 ? cplx{} : e * table(y);
        };
        w.local = project_periodic(g, kLocalPeriod, 0.0, BandMeta{"derived", lambda * out.scale, "window"}, popt);
        w.parts = decompose(w.local, out.R, 0.5 * delta_star, opt.decompose);
        w.target = std::pow(out.R, -0.5 * delta_star);
        const double n2 = w.local.energy();
        if (opt.flatness && n2 > 0.0 && !w.parts.flat.empty())
            w.flat_ratio = flatness_functional(w.parts.flat, out.R, {-1.0, 1.0}, opt.flat_s_points) / (n2 * n2);
    });

    double min_lead = std::numeric_limits<double>::infinity();
    for (const auto& w : out.windows) {
        out.max_pieces = std::max(out.max_pieces, w.parts.M());
        out.max_flat_ratio = std::max(out.max_flat_ratio, w.flat_ratio);
        for (const auto& p : w.parts.sharp)
            out.max_alpha_over_lambda = std::max(out.max_alpha_over_lambda, std::abs(p.alpha) / out.scale / lambda);
        if (!w.parts.sharp.empty()) min_lead = std::min(min_lead, std::abs(w.parts.sharp.front().alpha) / out.scale / lambda);
    }
    out.min_lead_alpha_over_lambda = std::isfinite(min_lead) ? min_lead : 0.0;
    return out;
}

// ---------------------------------------------------------------------------
// Text form: "sharp-flat-parts 1", "R <R>", "delta <d>", "pieces <M>", then per piece
// "alpha <alpha> <shift>" followed by a fourier-function block for h, then "flat" and
// the flat part's block.

inline void write_parts(std::ostream& os, const SharpFlatParts& p) {
    char buf[96];
    os << "sharp-flat-parts 1\n";
    std::snprintf(buf, sizeof buf, "R %.17g\ndelta %.17g\n", p.R, p.delta);
    os << buf << "pieces " << p.sharp.size() << "\n";
    for (const auto& s : p.sharp) {
        std::snprintf(buf, sizeof buf, "alpha %.17g %d\n", s.alpha, s.shift);
        os << buf;
        write_fourier(os, s.h);
    }
    os << "flat\n";
    write_fourier(os, p.flat);
}

inline SharpFlatParts read_parts(std::istream& is) {
    std::string tag;
    int version = 0;
    if (!(is >> tag >> version) || tag != "sharp-flat-parts" || version != 1) throw ConfigError("sharp-flat-parts: bad header");
    SharpFlatParts p;
    std::string key;
    std::size_t n = 0;
    if (!(is >> key >> p.R) || key != "R") throw ConfigError("sharp-flat-parts: expected R");
    if (!(is >> key >> p.delta) || key != "delta") throw ConfigError("sharp-flat-parts: expected delta");
    if (!(is >> key >> n) || key != "pieces") throw ConfigError("sharp-flat-parts: expected pieces");
    for (std::size_t i = 0; i < n; ++i) {
        SharpPiece s;
        if (!(is >> key >> s.alpha >> s.shift) || key != "alpha") throw ConfigError("sharp-flat-parts: expected alpha");
        s.h = read_fourier(is);
        s.energy = s.h.energy();
        p.sharp.push_back(std::move(s));
    }
    if (!(is >> key) || key != "flat") throw ConfigError("sharp-flat-parts: expected flat");
    p.flat = read_fourier(is);
    return p;
}

}  // namespace osclab
