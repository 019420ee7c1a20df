// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <algorithm>
#include <cmath>
#include <functional>
#include <string>
#include <vector>

#include "osclab/core.hpp"
#include "osclab/fit.hpp"
#include "osclab/fourier.hpp"
#include "osclab/sublevel.hpp"

namespace osclab {

// xi(s) = r s^sigma + perturbation(s), with |perturbation| <= B r^mu.
struct PhaseProfile {
    double sigma = 0.5;
    double r = 1.0;
    double mu = 0.0;
    double B_bound = 0.0;
    std::function<double(double)> perturbation;

    double xi(double s) const { return r * std::pow(s, sigma) + (perturbation ? perturbation(s) : 0.0); }

    void validate(Interval s_range) const {
        if (!(r >= 1.0)) throw GuardError("phase profile: r must be >= 1");
        if (!(mu >= 0.0 && mu < 1.0)) throw GuardError("phase profile: mu must lie in [0, 1)");
        if (!(B_bound >= 0.0)) throw GuardError("phase profile: B must be nonnegative");
        if (!perturbation) return;
        const double cap = B_bound * std::pow(r, mu);
        for (int i = 0; i <= 1024; ++i) {
            const double s = s_range.lo + s_range.length() * i / 1024.0;
            if (std::abs(perturbation(s)) > cap * (1.0 + 1e-12))
                throw GuardError("phase profile: perturbation exceeds B r^mu at s = " + std::to_string(s));
        }
    }
};

// amp * exp(i (lin y + quad y^2)) on [lo, hi)
struct PhaseTerm {
    double lo = 0.0, hi = 1.0;
    cplx amp{1.0, 0.0};
    double lin = 0.0, quad = 0.0;
};

// A finite sum of phase terms. Terms may overlap (several modes on one interval) or tile.
class PhaseSignal {
public:
    PhaseSignal() = default;
    explicit PhaseSignal(std::vector<PhaseTerm> terms) : terms_(std::move(terms)) {
        std::stable_sort(terms_.begin(), terms_.end(), [](const PhaseTerm& a, const PhaseTerm& b) { return a.lo < b.lo; });
        for (const auto& t : terms_) {
            if (!(t.hi > t.lo)) throw GuardError("phase term with empty interval");
            max_len_ = std::max(max_len_, t.hi - t.lo);
        }
    }

    static PhaseSignal exponential(double w, Interval support, cplx amp = 1.0) { return PhaseSignal({{support.lo, support.hi, amp, w, 0.0}}); }
    static PhaseSignal chirp(double a, Interval support, cplx amp = 1.0, double w = 0.0) {
        return PhaseSignal({{support.lo, support.hi, amp, w, a}});
    }
    // The Fourier series restricted to the support interval.
    static PhaseSignal from_fourier(const FourierFunction1D& f, Interval support) {
        std::vector<PhaseTerm> t;
        for (int k = f.kmin(); k <= f.kmax(); ++k) {
            const cplx c = f.coef(k);
            if (c == cplx{}) continue;
            const double w = f.omega(k);
            t.push_back({support.lo, support.hi, c * std::polar(1.0, -w * f.offset()), w, 0.0});
        }
        return PhaseSignal(std::move(t));
    }
    // unit-modulus random constants on equal cells
    static PhaseSignal random_steps(int cells, std::uint64_t seed, Interval support = {0.0, 1.0}) {
        if (cells < 1) throw GuardError("random steps need at least one cell");
        Rng rng(seed);
        std::vector<PhaseTerm> t;
        const double h = support.length() / cells;
        for (int i = 0; i < cells; ++i) t.push_back({support.lo + i * h, i + 1 == cells ? support.hi : support.lo + (i + 1) * h, rng.unit_phase(), 0.0, 0.0});
        return PhaseSignal(std::move(t));
    }

    const std::vector<PhaseTerm>& terms() const { return terms_; }
    double max_term_length() const { return max_len_; }
    bool empty() const { return terms_.empty(); }

    Interval support() const {
        if (terms_.empty()) return {0.0, 0.0};
        Interval s{terms_.front().lo, terms_.front().hi};
        for (const auto& t : terms_) s.hi = std::max(s.hi, t.hi);
        return s;
    }

    cplx operator()(double y) const {
        cplx acc{0.0, 0.0};
        for (const auto& t : terms_)
            if (y >= t.lo && y < t.hi) acc += t.amp * std::polar(1.0, t.lin * y + t.quad * y * y);
        return acc;
    }

    // largest |d/dy phase| over the terms
    double max_frequency() const {
        double w = 0.0;
        for (const auto& t : terms_) w = std::max(w, std::abs(t.lin) + 2.0 * std::abs(t.quad) * std::max(std::abs(t.lo), std::abs(t.hi)));
        return w;
    }

    PhaseSignal scaled(cplx c) const {
        auto t = terms_;
        for (auto& x : t) x.amp *= c;
        return PhaseSignal(std::move(t));
    }
    PhaseSignal conjugated() const {
        auto t = terms_;
        for (auto& x : t) {
            x.amp = std::conj(x.amp);
            x.lin = -x.lin;
            x.quad = -x.quad;
        }
        return PhaseSignal(std::move(t));
    }

private:
    std::vector<PhaseTerm> terms_;
    double max_len_ = 0.0;
};

struct TrilinearOptions {
    Interval s_range{0.1, 1.0};
    double samples_per_wavelength = 8.0;
    int min_s_points = 512;
    double s_refine = 1.0;  // multiplies the s-point count; 2 is the refinement check
    long max_s_points = 1L << 24;
};

struct TrilinearValue {
    double value = 0.0;
    long s_resolution = 0;
    long x_resolution = 0;  // largest quadrature sample count for one inner piece; 0 when all were closed form
};

namespace detail {

// integral of exp(i L x) over [lo, hi]
inline cplx linear_phase_integral(double L, double lo, double hi) {
    const double w = hi - lo, h = 0.5 * L * w;
    const double sinc = std::abs(h) < 1e-8 ? 1.0 - h * h / 6.0 : std::sin(h) / h;
    return std::polar(w * sinc, L * 0.5 * (lo + hi));
}

inline constexpr double kGaussX[8] = {-0.9602898564975363, -0.7966664774136267, -0.5255324099163290, -0.1834346424956498,
                                      0.1834346424956498,  0.5255324099163290,  0.7966664774136267,  0.9602898564975363};
inline constexpr double kGaussW[8] = {0.1012285362903763, 0.2223810344533745, 0.3137066458778873, 0.3626837833783620,
                                      0.3626837833783620, 0.3137066458778873, 0.2223810344533745, 0.1012285362903763};

// integral of exp(i (Q x^2 + L x)) over [lo, hi], Gauss-Legendre panels no longer than a wavelength
inline cplx quadratic_phase_integral(double Q, double L, double lo, double hi, double spw, long& samples) {
    const double fmax = std::max(std::abs(2.0 * Q * lo + L), std::abs(2.0 * Q * hi + L));
    const double need = spw * (hi - lo) * fmax / kTwoPi;
    const long panels = std::max(1L, static_cast<long>(std::ceil(need / 8.0)));
    samples = std::max(samples, panels * 8);
    const double h = (hi - lo) / static_cast<double>(panels);
    cplx acc{0.0, 0.0};
    for (long p = 0; p < panels; ++p) {
        const double c = lo + (static_cast<double>(p) + 0.5) * h;
        cplx part{0.0, 0.0};
        for (int i = 0; i < 8; ++i) {
            const double x = c + 0.5 * h * kGaussX[i];
            part += kGaussW[i] * std::polar(1.0, (Q * x + L) * x);
        }
        acc += 0.5 * h * part;
    }
    return acc;
}

}  // namespace detail

// integral over x of f(x + s) g(x) exp(i xi x)
inline cplx trilinear_inner(const PhaseSignal& f, const PhaseSignal& g, double s, double xi, double spw, long& samples) {
    cplx acc{0.0, 0.0};
    const auto& gt = g.terms();
    for (const auto& a : f.terms()) {
        const double x0 = a.lo - s, x1 = a.hi - s;
        // g terms with lo in (x0 - max_len, x1) are the only ones that can overlap
        auto it = std::upper_bound(gt.begin(), gt.end(), x0 - g.max_term_length(), [](double v, const PhaseTerm& t) { return v < t.lo; });
        for (; it != gt.end() && it->lo < x1; ++it) {
            const double lo = std::max(x0, it->lo), hi = std::min(x1, it->hi);
            if (!(hi > lo)) continue;
            // a.amp e^{i(la (x+s) + qa (x+s)^2)} * b.amp e^{i(lb x + qb x^2)} * e^{i xi x}
            const double Q = a.quad + it->quad;
            const double L = a.lin + 2.0 * a.quad * s + it->lin + xi;
            const cplx C = a.amp * it->amp * std::polar(1.0, a.lin * s + a.quad * s * s);
            acc += C * (Q == 0.0 ? detail::linear_phase_integral(L, lo, hi) : detail::quadratic_phase_integral(Q, L, lo, hi, spw, samples));
        }
    }
    return acc;
}

// value = integral over s in s_range of |integral over x of f(x + s) g(x) exp(i xi(s) x)|
inline TrilinearValue trilinear_integral(const PhaseSignal& f, const PhaseSignal& g, const PhaseProfile& profile, const TrilinearOptions& opt = {}) {
    const Interval sr = opt.s_range;
    if (!(sr.hi > sr.lo) || !(sr.lo > 0.0)) throw GuardError("trilinear: s range must be a nonempty interval in s > 0");
    profile.validate(sr);
    TrilinearValue out;
    if (f.empty() || g.empty()) {
        out.s_resolution = 0;
        return out;
    }
    const Interval fs = f.support(), gs = g.support();
    if (std::max(fs.hi, gs.hi) - std::min(fs.lo, gs.lo) > 1.0 + 1e-12) throw GuardError("trilinear: f and g must share a support interval of length 1");

    // fastest rate of change in s of the inner integrand: xi'(s) x plus the frequency of f
    const double xext = std::max(std::abs(gs.lo), std::abs(gs.hi));
    double xi_rate = 0.0;
    for (int i = 0; i <= 1024; ++i) {
        const double s0 = sr.lo + sr.length() * i / 1024.0;
        const double h = 1e-6 * std::max(1.0, s0);
        xi_rate = std::max(xi_rate, std::abs(profile.xi(s0 + h) - profile.xi(std::max(s0 - h, 0.5 * s0))) / (s0 + h - std::max(s0 - h, 0.5 * s0)));
    }
    const double rate = xi_rate * xext + f.max_frequency();
    const double want = opt.samples_per_wavelength * sr.length() * rate / kTwoPi;
    const double n = std::ceil(std::ceil(std::max<double>(opt.min_s_points, want)) * opt.s_refine);
    if (n > static_cast<double>(opt.max_s_points)) throw GuardError("trilinear: resolution guard, " + std::to_string(static_cast<long>(n)) + " s points needed");
    const long ns = static_cast<long>(n);
    const double ds = sr.length() / static_cast<double>(ns);
    std::vector<double> vals(static_cast<std::size_t>(ns));
    long samples = 0;
    for (long i = 0; i < ns; ++i) {
        const double s = sr.lo + (static_cast<double>(i) + 0.5) * ds;
        vals[static_cast<std::size_t>(i)] = std::abs(trilinear_inner(f, g, s, profile.xi(s), opt.samples_per_wavelength, samples));
    }
    out.value = pairwise_sum(vals) * ds;
    out.s_resolution = ns;
    out.x_resolution = samples;
    return out;
}

// ---------------------------------------------------------------------------
// Sweeps in r.

enum class TrilinearFamily { WorstRandom, ChirpPair, Witness };

inline const char* family_name(TrilinearFamily f) {
    switch (f) {
        case TrilinearFamily::WorstRandom: return "worst_random";
        case TrilinearFamily::ChirpPair: return "chirp_pair";
        case TrilinearFamily::Witness: return "witness";
    }
    return "?";
}

struct TrilinearPair {
    PhaseSignal f, g;
};

// Witnesses on [0, 1]: sigma = 0 takes f = e^{i r y}, g = e^{-2 i r y}, so the x-dependence
// cancels against xi = r; sigma = 1 takes f = e^{-i r y^2 / 2}, g = conj f, so it cancels
// against xi = r s. Either way |inner| is the overlap length 1 - s.
inline TrilinearPair witness_pair(double sigma, double r) {
    const Interval unit{0.0, 1.0};
    if (sigma == 0.0) return {PhaseSignal::exponential(r, unit), PhaseSignal::exponential(-2.0 * r, unit)};
    if (sigma == 1.0) {
        auto f = PhaseSignal::chirp(-0.5 * r, unit);
        return {f, f.conjugated()};
    }
    throw GuardError("non-decay witnesses exist for sigma = 0 and sigma = 1 only");
}

inline TrilinearPair family_pair(TrilinearFamily fam, double sigma, double r, std::uint64_t seed) {
    const Interval unit{0.0, 1.0};
    switch (fam) {
        case TrilinearFamily::WorstRandom:
            return {PhaseSignal::random_steps(64, derive_seed(seed, 0)), PhaseSignal::random_steps(64, derive_seed(seed, 1))};
        case TrilinearFamily::ChirpPair: {
            // conjugate chirps with a random rate and offset frequency, both of size r
            Rng rng(derive_seed(seed, 2));
            const double a = r * rng.uniform(0.5, 2.0), b = r * rng.uniform(-1.0, 1.0);
            const auto f = PhaseSignal::chirp(-0.5 * a, unit);
            return {f, PhaseSignal::chirp(0.5 * a, unit, 1.0, b)};
        }
        case TrilinearFamily::Witness: return witness_pair(sigma, r);
    }
    throw GuardError("unknown family");
}

struct TrilinearRow {
    double sigma = 0.0;
    double r = 0.0;
    std::uint64_t seed = 0;
    double value = 0.0;
};

struct TrilinearSweep {
    std::vector<TrilinearRow> rows;
    std::vector<double> r, worst;  // max over seeds per r
    double delta2 = 0.0;           // worst ~ prefactor * r^(-delta2)
    double prefactor = 0.0;
    double r2 = 0.0;
    double refinement = 0.0;       // max relative change of the worst value when s points double
};

struct TrilinearSweepOptions {
    TrilinearOptions integral;
    std::function<double(double s, double r)> perturbation;  // optional
    double mu = 0.0;
    double B_bound = 0.0;
    bool check_refinement = true;
};

inline TrilinearSweep sigma_decay_sweep(double sigma, const std::vector<double>& r_list, TrilinearFamily family,
                                        const std::vector<std::uint64_t>& seeds, const TrilinearSweepOptions& opt = {}) {
    if (r_list.size() < 2 || seeds.empty()) throw GuardError("decay sweep needs two r values and a seed");
    for (std::size_t i = 0; i < r_list.size(); ++i) {
        if (!(r_list[i] >= 10.0)) throw GuardError("decay sweep: r values must be >= 10");
        if (i > 0 && !(r_list[i] > r_list[i - 1])) throw GuardError("decay sweep: r values must increase");
    }
    auto profile_for = [&](double r) {
        PhaseProfile p{sigma, r, opt.mu, opt.B_bound, {}};
        if (opt.perturbation) p.perturbation = [f = opt.perturbation, r](double s) { return f(s, r); };
        return p;
    };
    const std::size_t nr = r_list.size(), nseed = seeds.size();
    TrilinearSweep out;
    out.rows.resize(nr * nseed);
    parallel_for(nr * nseed, [&](std::size_t cell) {
        const double r = r_list[cell / nseed];
        const auto seed = seeds[cell % nseed];
        const auto pair = family_pair(family, sigma, r, seed);
        out.rows[cell] = {sigma, r, seed, trilinear_integral(pair.f, pair.g, profile_for(r), opt.integral).value};
    });
    std::vector<std::size_t> argmax(nr, 0);
    for (std::size_t i = 0; i < nr; ++i) {
        double best = -1.0;
        for (std::size_t k = 0; k < nseed; ++k)
            if (out.rows[i * nseed + k].value > best) {
                best = out.rows[i * nseed + k].value;
                argmax[i] = k;
            }
        out.r.push_back(r_list[i]);
        out.worst.push_back(best);
    }
    if (opt.check_refinement) {
        std::vector<double> rel(nr, 0.0);
        parallel_for(nr, [&](std::size_t i) {
            auto o = opt.integral;
            o.s_refine *= 2.0;
            const auto pair = family_pair(family, sigma, r_list[i], seeds[argmax[i]]);
            const double fine = trilinear_integral(pair.f, pair.g, profile_for(r_list[i]), o).value;
            rel[i] = fine == 0.0 && out.worst[i] == 0.0 ? 0.0 : std::abs(fine - out.worst[i]) / std::max(std::abs(fine), 1e-300);
        });
        out.refinement = *std::max_element(rel.begin(), rel.end());
    }
    const auto fit = fit_loglog(out.r, out.worst, 2);
    out.delta2 = -fit.slope;
    out.prefactor = fit.prefactor;
    out.r2 = fit.r2;
    return out;
}

// ---------------------------------------------------------------------------
// Quadruple difference |(u+t)^sigma - u^sigma - (v+t)^sigma + v^sigma| on
// {u, v in (0,1), t in (-1,1), u+t in (0,1), v+t in (0,1)}.

inline double quad_difference(double sigma, double u, double v, double t) {
    // grouped so that swapping u and v negates the result exactly
    return (std::pow(u + t, sigma) - std::pow(u, sigma)) - (std::pow(v + t, sigma) - std::pow(v, sigma));
}

struct QuadDifferenceResult {
    SublevelEstimate estimate;
    PowerFit fit;          // valid only when fitted
    bool fitted = false;
    std::string fit_error;
};

// Midpoint lattice with n cells per unit in u and v and 2n in t; points outside the region are
// skipped and the fraction is taken over the points inside.
inline QuadDifferenceResult quad_difference_sublevel(double sigma, const std::vector<double>& eps, int n) {
    detail::check_eps(eps);
    if (n < 4) throw GuardError("quad difference: grid needs at least 4 cells per unit");
    const std::size_t ne = eps.size();
    std::vector<double> sorted = eps;
    std::sort(sorted.begin(), sorted.end());
    std::vector<std::vector<long>> counts(static_cast<std::size_t>(n), std::vector<long>(ne, 0));
    std::vector<long> inside(static_cast<std::size_t>(n), 0);
    const double h = 1.0 / n;
    parallel_for(static_cast<std::size_t>(n), [&](std::size_t iu) {
        const double u = (static_cast<double>(iu) + 0.5) * h;
        auto& c = counts[iu];
        for (int iv = 0; iv < n; ++iv) {
            const double v = (iv + 0.5) * h;
            for (int it = 0; it < 2 * n; ++it) {
                const double t = -1.0 + (it + 0.5) * h;
                if (!(u + t > 0.0 && u + t < 1.0 && v + t > 0.0 && v + t < 1.0)) continue;
                ++inside[iu];
                const double e = std::abs(quad_difference(sigma, u, v, t));
                // members for every eps strictly above e
                const auto k = static_cast<std::size_t>(std::upper_bound(sorted.begin(), sorted.end(), e) - sorted.begin());
                if (k < ne) ++c[k];
            }
        }
    });
    long total = 0;
    std::vector<long> cum(ne, 0);
    for (int iu = 0; iu < n; ++iu) {
        total += inside[static_cast<std::size_t>(iu)];
        for (std::size_t k = 0; k < ne; ++k) cum[k] += counts[static_cast<std::size_t>(iu)][k];
    }
    for (std::size_t k = 1; k < ne; ++k) cum[k] += cum[k - 1];
    QuadDifferenceResult out;
    auto& est = out.estimate;
    est.eps = eps;
    est.grid_n = n;
    est.grid_s = 2 * n;
    est.region = "quad-difference";
    est.region_measure = 2.0 / 3.0;
    est.region_points = static_cast<std::size_t>(total);
    for (double e : eps) {
        const auto k = static_cast<std::size_t>(std::lower_bound(sorted.begin(), sorted.end(), e) - sorted.begin());
        // strict inequality e' < eps: points counted at sorted[k] have value below sorted[k] and
        // any duplicate eps share the same k
        est.fraction.push_back(static_cast<double>(cum[k]) / static_cast<double>(total));
    }
    try {
        out.fit = fit_power_law(est);
        out.fitted = true;
    } catch (const FitRefused& e) {
        out.fit_error = e.what();
    }
    return out;
}

}  // namespace osclab
