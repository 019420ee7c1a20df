// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <functional>
#include <limits>
#include <sstream>
#include <string>
#include <vector>

#include "osclab/core.hpp"
#include "osclab/fit.hpp"
#include "osclab/phase_geometry.hpp"

namespace osclab {

enum class SublevelExpr { VectorSum, CoeffSum, QuadSum };

inline const char* expr_name(SublevelExpr e) {
    switch (e) {
        case SublevelExpr::VectorSum: return "vector_sum";
        case SublevelExpr::CoeffSum: return "coeff_sum";
        case SublevelExpr::QuadSum: return "quad_sum";
    }
    return "?";
}

// One-variable profile composed with a phase. NaN marks "undefined here"; such points
// are never counted as members of a sublevel set.
using Profile = std::function<cplx(double)>;
using ProfileTuple = std::array<Profile, 4>;

// Profile of (y, t) composed with the lifted map (phi_j(x), s d2 phi_j(x)).
using LiftedProfile = std::function<double(double, double)>;
using LiftedTriple = std::array<LiftedProfile, 3>;

inline Profile zero_profile() {
    return [](double) { return cplx{}; };
}

struct Region2D {
    enum class Kind { Disc, Box };
    Kind kind = Kind::Disc;
    Point2 center{};
    double half_x = 0.5;  // radius for a disc
    double half_y = 0.5;

    static Region2D disc(Point2 c, double r) { return {Kind::Disc, c, r, r}; }
    static Region2D box(Point2 c, double hx, double hy) { return {Kind::Box, c, hx, hy}; }
    static Region2D of(const PhaseSystem& sys) { return disc(sys.ball.center, sys.ball.radius); }

    bool contains(Point2 p) const {
        const double a = p.x1 - center.x1, b = p.x2 - center.x2;
        if (kind == Kind::Box) return std::abs(a) <= half_x && std::abs(b) <= half_y;
        return a * a + b * b <= half_x * half_x;
    }
    double area() const { return kind == Kind::Box ? 4.0 * half_x * half_y : kPi * half_x * half_x; }

    std::string tag() const {
        std::ostringstream os;
        os.precision(6);
        if (kind == Kind::Disc)
            os << "disc(" << center.x1 << ";" << center.x2 << ";r=" << half_x << ")";
        else
            os << "box(" << center.x1 << ";" << center.x2 << ";" << half_x << "x" << half_y << ")";
        return os.str();
    }
};

struct Region3D {
    Region2D base;
    double s_lo = 0.5;
    double s_hi = 1.0;
    // s = 0 is the plane where all three leaf directions degenerate; it must be asked for.
    bool allow_zero_plane = false;

    double volume() const { return base.area() * (s_hi - s_lo); }
    std::string tag() const {
        std::ostringstream os;
        os.precision(6);
        os << base.tag() << "x[" << s_lo << ";" << s_hi << "]";
        return os.str();
    }
};

struct SublevelOptions {
    // |sum_j |f_j(phi_j(x))|| >= mask_threshold, applied when `mask` is set
    bool mask = false;
    double mask_threshold = 1.0;
    // optional lower bound |f_slot| >= lower_bound on the counted points (-1: off)
    int lower_bound_slot = -1;
    double lower_bound = 1.0;
    // fraction of region points whose lattice neighbours disagree on membership, per eps
    bool record_boundary = false;
};

struct SublevelEstimate {
    std::vector<double> eps;
    std::vector<double> fraction;
    std::vector<double> boundary_fraction;  // empty unless requested
    int grid_n = 0;
    int grid_s = 0;  // 0 for planar measurements
    std::string region;
    double region_measure = 0.0;  // area or volume of the reference region
    std::size_t region_points = 0;
    double undefined_fraction = 0.0;

    double absolute(std::size_t i) const { return fraction.at(i) * region_measure; }
};

inline std::vector<double> default_eps_grid(int k_lo = 2, int k_hi = 14) {
    std::vector<double> e;
    for (int k = k_lo; k <= k_hi; ++k) e.push_back(std::ldexp(1.0, -k));
    return e;
}

namespace detail {

inline void check_eps(const std::vector<double>& eps) {
    if (eps.empty()) throw GuardError("sublevel: empty eps list");
    for (double e : eps)
        if (!(e > 0.0) || !std::isfinite(e)) throw GuardError("sublevel: eps must be positive and finite");
}

// Lattice of midpoints covering the bounding box of `r`, n per axis; -inf marks outside.
struct Lattice2D {
    int n;
    double x0, y0, hx, hy;
    Point2 at(int i, int k) const { return {x0 + (i + 0.5) * hx, y0 + (k + 0.5) * hy}; }
};

inline Lattice2D lattice_for(const Region2D& r, int n) {
    if (n < 2) throw GuardError("sublevel grid needs at least 2 points per axis");
    return {n, r.center.x1 - r.half_x, r.center.x2 - r.half_y, 2.0 * r.half_x / n, 2.0 * r.half_y / n};
}

constexpr double kOutside = -std::numeric_limits<double>::infinity();

// Builds the estimate from a value array (kOutside = not in region, NaN = undefined).
// `strict` selects |.| < eps versus |.| <= eps. Layout: [slab][i][k], slabs of n*n.
inline SublevelEstimate summarize(const std::vector<double>& v, int n, int slabs, const std::vector<double>& eps, bool strict,
                                  bool boundary) {
    std::vector<double> defined;
    std::size_t inside = 0, undefined = 0;
    for (double x : v) {
        if (x == kOutside) continue;
        ++inside;
        if (std::isnan(x))
            ++undefined;
        else
            defined.push_back(x);
    }
    if (inside == 0) throw GuardError("sublevel: region contains no grid points");
    std::sort(defined.begin(), defined.end());
    SublevelEstimate out;
    out.eps = eps;
    out.region_points = inside;
    out.undefined_fraction = static_cast<double>(undefined) / static_cast<double>(inside);
    for (double e : eps) {
        const auto it = strict ? std::lower_bound(defined.begin(), defined.end(), e) : std::upper_bound(defined.begin(), defined.end(), e);
        out.fraction.push_back(static_cast<double>(it - defined.begin()) / static_cast<double>(inside));
    }
    if (boundary) {
        const std::size_t nn = static_cast<std::size_t>(n) * n;
        for (double e : eps) {
            auto member = [&](double x) { return !std::isnan(x) && x != kOutside && (strict ? x < e : x <= e); };
            std::size_t count = 0;
            for (int sl = 0; sl < slabs; ++sl) {
                for (int i = 0; i < n; ++i) {
                    for (int k = 0; k < n; ++k) {
                        const std::size_t idx = sl * nn + static_cast<std::size_t>(i) * n + k;
                        if (v[idx] == kOutside) continue;
                        const bool m = member(v[idx]);
                        bool differs = false;
                        auto probe = [&](std::size_t j) {
                            if (v[j] != kOutside && member(v[j]) != m) differs = true;
                        };
                        if (i > 0) probe(idx - n);
                        if (i + 1 < n) probe(idx + n);
                        if (k > 0) probe(idx - 1);
                        if (k + 1 < n) probe(idx + 1);
                        if (sl > 0) probe(idx - nn);
                        if (sl + 1 < slabs) probe(idx + nn);
                        if (differs) ++count;
                    }
                }
            }
            out.boundary_fraction.push_back(static_cast<double>(count) / static_cast<double>(inside));
        }
    }
    return out;
}

}  // namespace detail

// Pointwise value of the chosen expression; NaN if some profile is undefined, or if a
// mask / lower bound excludes the point.
inline double sublevel_value(const PhaseSystem& sys, SublevelExpr expr, const ProfileTuple& F, Point2 x,
                             const SublevelOptions& opt = {}) {
    std::array<cplx, 4> v;
    double total = 0.0;
    for (int j = 0; j < 4; ++j) {
        v[j] = F[j](sys.phases[j].value(x));
        if (std::isnan(v[j].real()) || std::isnan(v[j].imag())) return std::numeric_limits<double>::quiet_NaN();
        total += std::abs(v[j]);
    }
    if (opt.mask && !(total >= opt.mask_threshold)) return std::numeric_limits<double>::quiet_NaN();
    if (opt.lower_bound_slot >= 0 && !(std::abs(v.at(static_cast<std::size_t>(opt.lower_bound_slot))) >= opt.lower_bound))
        return std::numeric_limits<double>::quiet_NaN();
    switch (expr) {
        case SublevelExpr::VectorSum: {
            cplx a{}, b{};
            for (int j = 0; j < 4; ++j) {
                const auto g = sys.phases[j].gradient(x);
                a += v[j] * g[0];
                b += v[j] * g[1];
            }
            return std::sqrt(std::norm(a) + std::norm(b));
        }
        case SublevelExpr::CoeffSum: {
            cplx a{};
            for (int j = 0; j < 4; ++j) a += v[j] * sys.phases[j].d2()(x);
            return std::abs(a);
        }
        case SublevelExpr::QuadSum: {
            cplx a{};
            for (int j = 0; j < 4; ++j) a += v[j];
            return std::abs(a);
        }
    }
    return std::numeric_limits<double>::quiet_NaN();
}

// Fractions of the n x n midpoint lattice points of `region` with value < eps, for every eps.
inline SublevelEstimate sublevel_series_2d(const PhaseSystem& sys, SublevelExpr expr, const ProfileTuple& F,
                                           const std::vector<double>& eps, const Region2D& region, int n,
                                           const SublevelOptions& opt = {}) {
    detail::check_eps(eps);
    const auto lat = detail::lattice_for(region, n);
    std::vector<double> v(static_cast<std::size_t>(n) * n, detail::kOutside);
    parallel_for(static_cast<std::size_t>(n), [&](std::size_t i) {
        for (int k = 0; k < n; ++k) {
            const Point2 x = lat.at(static_cast<int>(i), k);
            if (!region.contains(x)) continue;
            v[i * n + k] = sublevel_value(sys, expr, F, x, opt);
        }
    });
    auto out = detail::summarize(v, n, 1, eps, true, opt.record_boundary);
    out.grid_n = n;
    out.region = region.tag();
    out.region_measure = region.area();
    return out;
}

inline double measure_sublevel_2d(const PhaseSystem& sys, SublevelExpr expr, const ProfileTuple& F, double eps,
                                  const Region2D& region, int n, const SublevelOptions& opt = {}) {
    return sublevel_series_2d(sys, expr, F, {eps}, region, n, opt).fraction[0];
}

// |sum_{j<3} f_j(phi_j(x), s d2 phi_j(x)) grad phi_j(x)|, the three-phase lifted expression.
inline double lifted_value(const PhaseSystem& sys, const LiftedTriple& f, Point2 x, double s, int lower_bound_slot = -1,
                           double lower_bound = 1.0) {
    double a = 0.0, b = 0.0;
    for (int j = 0; j < 3; ++j) {
        const auto y = sys.lifted(j, x, s);
        const double v = f[j](y[0], y[1]);
        if (std::isnan(v)) return std::numeric_limits<double>::quiet_NaN();
        if (j == lower_bound_slot && !(std::abs(v) >= lower_bound)) return std::numeric_limits<double>::quiet_NaN();
        const auto g = sys.phases[j].gradient(x);
        a += v * g[0];
        b += v * g[1];
    }
    return std::hypot(a, b);
}

// Fractions of the n x n x n_s midpoint lattice of region.base x [s_lo, s_hi] with value <= eps.
inline SublevelEstimate sublevel_series_3d(const PhaseSystem& sys, const LiftedTriple& f, const std::vector<double>& eps,
                                           const Region3D& region, int n, int n_s, const SublevelOptions& opt = {}) {
    detail::check_eps(eps);
    if (!(region.s_hi > region.s_lo)) throw GuardError("sublevel: empty s interval");
    if (region.s_lo <= 0.0 && region.s_hi >= 0.0 && !region.allow_zero_plane)
        throw GuardError("sublevel: s interval contains the degenerate plane s = 0; set allow_zero_plane to measure it");
    if (n_s < 1) throw GuardError("sublevel: need at least one s layer");
    if (opt.mask) throw GuardError("sublevel: the four-term mask does not apply to the lifted three-term expression");
    const auto lat = detail::lattice_for(region.base, n);
    const double hs = (region.s_hi - region.s_lo) / n_s;
    const std::size_t nn = static_cast<std::size_t>(n) * n;
    std::vector<double> v(nn * n_s, detail::kOutside);
    parallel_for(static_cast<std::size_t>(n_s) * n, [&](std::size_t job) {
        const std::size_t sl = job / n, i = job % n;
        const double s = region.s_lo + (static_cast<double>(sl) + 0.5) * hs;
        for (int k = 0; k < n; ++k) {
            const Point2 x = lat.at(static_cast<int>(i), k);
            if (!region.base.contains(x)) continue;
            v[sl * nn + i * n + k] = lifted_value(sys, f, x, s, opt.lower_bound_slot, opt.lower_bound);
        }
    });
    auto out = detail::summarize(v, n, n_s, eps, false, opt.record_boundary);
    out.grid_n = n;
    out.grid_s = n_s;
    out.region = region.tag();
    out.region_measure = region.volume();
    return out;
}

inline double measure_sublevel_3d(const PhaseSystem& sys, const LiftedTriple& f, double eps, const Region3D& region, int n,
                                  int n_s, const SublevelOptions& opt = {}) {
    return sublevel_series_3d(sys, f, {eps}, region, n, n_s, opt).fraction[0];
}

struct PowerFit {
    double tau = 0.0;
    double prefactor = 0.0;
    double r_squared = 0.0;
    std::size_t excluded_points = 0;
};

// log-log least squares of fraction against eps over the points with nonzero measure
inline PowerFit fit_power_law(const SublevelEstimate& est, std::size_t min_points = 4) {
    std::size_t usable = 0;
    for (double f : est.fraction)
        if (f > 0.0) ++usable;
    if (usable < min_points)
        throw FitRefused("sublevel power fit: only " + std::to_string(usable) + " of " + std::to_string(est.fraction.size()) +
                         " eps values have nonzero measure, need " + std::to_string(min_points));
    const auto law = fit_loglog(est.eps, est.fraction, min_points);
    return {law.slope, law.prefactor, law.r2, est.fraction.size() - law.points};
}

}  // namespace osclab
