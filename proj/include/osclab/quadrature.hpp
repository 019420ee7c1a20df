// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <limits>
#include <optional>
#include <string>
#include <vector>

#include "osclab/core.hpp"
#include "osclab/fit.hpp"
#include "osclab/fourier.hpp"
#include "osclab/phase_geometry.hpp"
#include "osclab/signals.hpp"

namespace osclab {

using FormInputs = std::array<FourierFunction1D, 4>;

struct GridSpec {
    int points_per_axis = 0;
    double oversampling = 8.0;  // samples per shortest wavelength of any factor f_j(phi_j)
};

struct FormValue {
    cplx value{};
    GridSpec grid;
    double refinement_delta = std::numeric_limits<double>::quiet_NaN();  // |T(2N) - T(N)| when requested
};

// Range of a phase over the closed disc. Interior lattice points catch critical points;
// the boundary circle is sampled densely and its extremes polished by golden section in
// the angle, which is where the extremes sit whenever the gradient does not vanish.
inline Interval disc_image(const PhaseMap& phase, Point2 c, double r) {
    double lo = std::numeric_limits<double>::infinity(), hi = -lo;
    for (const auto& x : disc_grid(c, r, 101)) {
        const double v = phase.value(x);
        lo = std::min(lo, v);
        hi = std::max(hi, v);
    }
    auto on_circle = [&](double th) { return phase.value(Point2{c.x1 + r * std::cos(th), c.x2 + r * std::sin(th)}); };
    const int n = 720;
    const double step = kTwoPi / n;
    std::vector<double> v(n);
    for (int i = 0; i < n; ++i) v[i] = on_circle(i * step);
    auto polish = [&](int i, double sign) {
        const double g = 0.5 * (std::sqrt(5.0) - 1.0);
        double a = (i - 1) * step, b = (i + 1) * step;
        double x = b - g * (b - a), y = a + g * (b - a);
        double fx = sign * on_circle(x), fy = sign * on_circle(y);
        for (int it = 0; it < 60; ++it) {
            if (fx > fy) {
                b = y; y = x; fy = fx;
                x = b - g * (b - a);
                fx = sign * on_circle(x);
            } else {
                a = x; x = y; fx = fy;
                y = a + g * (b - a);
                fy = sign * on_circle(y);
            }
        }
        return sign * std::max(fx, fy);
    };
    const int imax = static_cast<int>(std::max_element(v.begin(), v.end()) - v.begin());
    const int imin = static_cast<int>(std::min_element(v.begin(), v.end()) - v.begin());
    hi = std::max({hi, v[imax], polish(imax, 1.0)});
    lo = std::min({lo, v[imin], polish(imin, -1.0)});
    if (!(hi > lo)) throw DegenerateError("phase image is a point");
    return {lo, hi};
}

// Image phi_j(outer ball), the interval on which f_j has to be accurate.
inline Interval phase_image(const PhaseSystem& sys, int j) {
    return disc_image(sys.phases[j], sys.ball.center, sys.ball.outer_radius);
}

inline double max_gradient_norm(const PhaseSystem& sys, int j, double radius, int resolution = 61) {
    double m = 0.0;
    for (const auto& x : disc_grid(sys.ball.center, radius, resolution)) {
        const auto g = sys.phases[j].gradient(x);
        m = std::max(m, norm2(g[0], g[1]));
    }
    return m;
}

// Highest local angular frequency of f_j(phi_j(x)) over the cutoff support.
inline double form_bandwidth(const PhaseSystem& sys, const FormInputs& f) {
    double w = 0.0;
    for (int j = 0; j < 4; ++j) w = std::max(w, f[j].max_abs_frequency() * max_gradient_norm(sys, j, sys.cutoff.radius));
    return w;
}

// Points per axis giving the requested oversampling over the cutoff's bounding square.
inline int required_points(const PhaseSystem& sys, const FormInputs& f, double oversampling, int floor_points = 128) {
    const double width = 2.0 * sys.cutoff.radius;
    const double w = form_bandwidth(sys, f);
    return std::max(floor_points, static_cast<int>(std::ceil(oversampling * width * w / kTwoPi)));
}

inline GridSpec auto_grid(const PhaseSystem& sys, const FormInputs& f, double oversampling = 8.0) {
    return {required_points(sys, f, oversampling), oversampling};
}

namespace detail {

// Tensor midpoint rule over the cutoff's bounding square, rows summed pairwise,
// then the row totals summed pairwise in row order.
template <class Integrand>
cplx midpoint_form(const PhaseSystem& sys, int n, const Integrand& integrand) {
    const double r = sys.cutoff.radius;
    const double h = 2.0 * r / n;
    const Point2 c = sys.cutoff.center;
    std::vector<cplx> rows(static_cast<std::size_t>(n));
    parallel_for(static_cast<std::size_t>(n), [&](std::size_t i) {
        const double a = c.x1 - r + (static_cast<double>(i) + 0.5) * h;
        std::vector<cplx> terms;
        terms.reserve(static_cast<std::size_t>(n));
        for (int k = 0; k < n; ++k) {
            const double b = c.x2 - r + (k + 0.5) * h;
            const double eta = sys.cutoff(a, b);
            if (eta == 0.0) continue;
            terms.push_back(eta * integrand(Point2{a, b}));
        }
        rows[i] = pairwise_sum(terms);
    });
    return pairwise_sum(rows) * (h * h);
}

}  // namespace detail

// T(f) = integral prod_j f_j(phi_j(x)) eta(x) dx.
inline FormValue evaluate_form(const PhaseSystem& sys, const FormInputs& f, GridSpec grid, bool refine = false) {
    if (grid.oversampling < 4.0) throw GuardError("form quadrature requires oversampling >= 4");
    const double width = 2.0 * sys.cutoff.radius;
    const double w = form_bandwidth(sys, f);
    const double achieved = w == 0.0 ? std::numeric_limits<double>::infinity() : grid.points_per_axis * kTwoPi / (width * w);
    if (grid.points_per_axis < 8 || achieved < 4.0)
        throw GuardError("form grid of " + std::to_string(grid.points_per_axis) + " points gives oversampling " +
                         std::to_string(achieved) + " < 4; need at least " +
                         std::to_string(required_points(sys, f, 4.0, 8)) + " points per axis");
    std::array<SampledFunction, 4> tab;
    for (int j = 0; j < 4; ++j) tab[j] = SampledFunction(f[j]);
    auto integrand = [&](Point2 x) {
        cplx p = tab[0](sys.phases[0].value(x));
        for (int j = 1; j < 4; ++j) p = mul(p, tab[j](sys.phases[j].value(x)));
        return p;
    };
    FormValue out;
    out.grid = grid;
    out.value = detail::midpoint_form(sys, grid.points_per_axis, integrand);
    if (refine) {
        const cplx fine = detail::midpoint_form(sys, 2 * grid.points_per_axis, integrand);
        out.refinement_delta = std::abs(fine - out.value);
    }
    return out;
}

// Integral of the cutoff on the same rule, used by the trivial bound |T| <= int eta * prod sup|f_j|.
inline double cutoff_integral(const PhaseSystem& sys, int n) {
    return detail::midpoint_form(sys, n, [](Point2) { return cplx{1.0, 0.0}; }).real();
}

// L2 norm of f on [a, b] by the midpoint rule at 16 points per wavelength.
inline double l2_norm_on(const FourierFunction1D& f, const Interval& iv) {
    const SampledFunction t(f);
    const int n = std::max(256, static_cast<int>(std::ceil(16.0 * iv.length() * f.max_abs_frequency() / kTwoPi)));
    const double h = iv.length() / n;
    std::vector<double> terms(static_cast<std::size_t>(n));
    for (int i = 0; i < n; ++i) terms[i] = std::norm(t(iv.lo + (i + 0.5) * h));
    return std::sqrt(pairwise_sum(terms) * h);
}

// |T| / prod_j ||f_j||_{L2(phi_j(B))}
inline double l2_normalized_ratio(const PhaseSystem& sys, const FormInputs& f, const FormValue& t) {
    double den = 1.0;
    for (int j = 0; j < 4; ++j) den *= l2_norm_on(f[j], disc_image(sys.phases[j], sys.ball.center, sys.ball.radius));
    if (den == 0.0) throw GuardError("l2_normalized_ratio: some input has zero L2 norm");
    return std::abs(t.value) / den;
}

// ---------------------------------------------------------------------------
// Decay sweeps

enum class InputFamily { BandlimitedRandom, Resonant, Chirp };

inline const char* family_name(InputFamily f) {
    switch (f) {
        case InputFamily::BandlimitedRandom: return "bandlimited_random";
        case InputFamily::Resonant: return "resonant";
        case InputFamily::Chirp: return "chirp";
    }
    return "?";
}

struct SweepOptions {
    double oversampling = 8.0;
    bool refine = true;
    // Exponent polynomials for the resonant family, one per phase (F_j with sum F_j(phi_j) = 0).
    std::array<Poly1D, 4> resonant_witness{Poly1D{0.0, 1.0}, Poly1D{0.0, 1.0}, Poly1D{0.0, -1.0}, Poly1D{}};
};

inline FormInputs make_inputs(const PhaseSystem& sys, InputFamily family, double lambda, std::uint64_t seed,
                              const SweepOptions& opt = {}) {
    FormInputs f;
    for (int j = 0; j < 4; ++j) {
        const Interval img = phase_image(sys, j);
        switch (family) {
            case InputFamily::BandlimitedRandom:
                f[j] = synth_bandlimited(lambda, j == 0 ? Band::Annulus : Band::Lowpass, derive_seed(seed, j), img);
                break;
            case InputFamily::Resonant:
                f[j] = modulated_exp(lambda, opt.resonant_witness[j], natural_window(img));
                break;
            case InputFamily::Chirp: {
                // (t - c)^2 / (2w): local frequency lambda (t - c)/w, at most lambda on the image
                const double c = img.center(), w = 0.5 * img.length();
                f[j] = modulated_exp(lambda, Poly1D{c * c / (2 * w), -c / w, 1.0 / (2 * w)}, natural_window(img));
                break;
            }
        }
    }
    return f;
}

struct DecaySample {
    double lambda = 0.0;
    std::uint64_t seed = 0;
    cplx value{};
    int grid_n = 0;
    double refinement_delta = 0.0;
};

struct DecayFit {
    std::vector<std::pair<double, double>> samples;  // (lambda, mean |T| over seeds)
    std::vector<bool> used;                          // above the noise floor
    double exponent = 0.0;                           // |T| ~ prefactor * lambda^(-exponent)
    double prefactor = 0.0;
    double r2 = 0.0;
};

struct DecaySweep {
    std::vector<DecaySample> rows;
    DecayFit fit;
    std::string fit_error;  // set when the fit was refused
};

inline DecayFit fit_decay(const std::vector<DecaySample>& rows) {
    DecayFit fit;
    std::vector<double> lams;
    for (const auto& r : rows)
        if (lams.empty() || lams.back() != r.lambda) lams.push_back(r.lambda);
    std::vector<double> xs, ys;
    for (double lam : lams) {
        double sum = 0.0, floor_ = 0.0;
        int n = 0;
        for (const auto& r : rows)
            if (r.lambda == lam) {
                sum += std::abs(r.value);
                floor_ = std::max(floor_, std::isfinite(r.refinement_delta) ? r.refinement_delta : 0.0);
                ++n;
            }
        const double mean = sum / n;
        const bool ok = mean > 10.0 * floor_;
        fit.samples.emplace_back(lam, mean);
        fit.used.push_back(ok);
        if (ok) {
            xs.push_back(lam);
            ys.push_back(mean);
        }
    }
    const PowerLaw p = fit_loglog(xs, ys, 2);
    fit.exponent = -p.slope;
    fit.prefactor = p.prefactor;
    fit.r2 = p.r2;
    return fit;
}

inline DecaySweep decay_sweep(const PhaseSystem& sys, InputFamily family, const std::vector<double>& lambdas,
                              const std::vector<std::uint64_t>& seeds, const SweepOptions& opt = {}) {
    if (lambdas.empty() || seeds.empty()) throw GuardError("decay_sweep: empty lambda or seed list");
    for (std::size_t i = 0; i < lambdas.size(); ++i) {
        if (lambdas[i] < 16.0) throw GuardError("decay_sweep: every lambda must be >= 16");
        if (i > 0 && !(lambdas[i] > lambdas[i - 1])) throw GuardError("decay_sweep: lambdas must increase");
    }
    DecaySweep out;
    for (double lam : lambdas) {
        for (std::uint64_t seed : seeds) {
            const FormInputs f = make_inputs(sys, family, lam, seed, opt);
            const GridSpec g = auto_grid(sys, f, opt.oversampling);
            const FormValue v = evaluate_form(sys, f, g, opt.refine);
            out.rows.push_back({lam, seed, v.value, g.points_per_axis, opt.refine ? v.refinement_delta : 0.0});
        }
    }
    try {
        out.fit = fit_decay(out.rows);
    } catch (const FitRefused& e) {
        out.fit_error = e.what();
    }
    return out;
}

}  // namespace osclab
