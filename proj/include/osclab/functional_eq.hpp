// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <array>
#include <cmath>
#include <functional>
#include <limits>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "osclab/core.hpp"
#include "osclab/fit.hpp"
#include "osclab/phase_geometry.hpp"
#include "osclab/sublevel.hpp"

namespace osclab {

using Vec3 = std::array<double, 3>;

// Unit vector spanning the kernel of the 2x3 matrix whose columns are g1, g2, g3, with the
// first nonzero component made positive.
inline Vec3 kernel_from_gradients(const std::array<double, 2>& g1, const std::array<double, 2>& g2, const std::array<double, 2>& g3) {
    const Vec3 r1{g1[0], g2[0], g3[0]}, r2{g1[1], g2[1], g3[1]};
    Vec3 k{r1[1] * r2[2] - r1[2] * r2[1], r1[2] * r2[0] - r1[0] * r2[2], r1[0] * r2[1] - r1[1] * r2[0]};
    const double n = std::sqrt(k[0] * k[0] + k[1] * k[1] + k[2] * k[2]);
    const double scale = std::sqrt((r1[0] * r1[0] + r1[1] * r1[1] + r1[2] * r1[2]) * (r2[0] * r2[0] + r2[1] * r2[1] + r2[2] * r2[2]));
    if (!(n > 1e-12 * scale) || scale == 0.0) throw DegenerateError("kernel field: gradient matrix has rank below 2");
    for (double& v : k) v /= n;
    for (double v : k) {
        if (v == 0.0) continue;
        if (v < 0.0)
            for (double& w : k) w = -w;
        break;
    }
    return k;
}

inline Vec3 kernel_field(const PhaseSystem& sys, Point2 x) {
    return kernel_from_gradients(sys.phases[0].gradient(x), sys.phases[1].gradient(x), sys.phases[2].gradient(x));
}

// min over the disc grid of min_j |kappa_j|; the transport below divides by these
inline double kernel_component_margin(const PhaseSystem& sys, Point2 c, double r, int n) {
    double m = std::numeric_limits<double>::infinity();
    for (const auto& x : disc_grid(c, r, n)) {
        const auto k = kernel_field(sys, x);
        m = std::min({m, std::abs(k[0]), std::abs(k[1]), std::abs(k[2])});
    }
    return m;
}

// (x2, x1 + x2, x1 - x2, x1): gradients constant and d2 phi_j = 1, 1, -1 nonzero for
// j < 3, so the lifted equation has the exact solutions f_j(y, t) = |t|^sigma kappa_j.
inline PhaseSystem exact_solution_system() {
    using P = BivariatePolynomial;
    return make_system({P::x2(), P::x1() + P::x2(), P::x1() - P::x2(), P::x1()}, Ball{{0.0, 0.0}, 0.5, 0.55}, "linear-skew");
}

// f_j(y, t) = amplitude * |t / D_j|^sigma * kappa_j for a system with constant gradients,
// D_j = d2 phi_j. At t = s D_j this is amplitude |s|^sigma kappa_j, a solution.
inline LiftedTriple constant_gradient_solution(const PhaseSystem& sys, double sigma, double amplitude = 1.0) {
    const Point2 c = sys.ball.center;
    const Vec3 k = kernel_field(sys, c);
    LiftedTriple f;
    for (int j = 0; j < 3; ++j) {
        const double D = sys.phases[j].d2()(c);
        if (D == 0.0) throw DegenerateError("phase " + std::to_string(j + 1) + " has d2 phi = 0");
        const double kj = k[j];
        f[j] = [=](double, double t) { return amplitude * std::pow(std::abs(t / D), sigma) * kj; };
    }
    return f;
}

// ---------------------------------------------------------------------------
// Level curves of Phi_j(x, s) = (phi_j(x), s d2 phi_j(x)).

struct Point3 {
    double x1 = 0.0, x2 = 0.0, s = 0.0;
    Point2 xy() const { return {x1, x2}; }
};

inline Vec3 leaf_field(const PhaseSystem& sys, int j, const Point3& p) {
    const auto& ph = sys.phases[static_cast<std::size_t>(j)];
    const Point2 x = p.xy();
    const auto g = ph.gradient(x);
    const auto h = ph.hessian(x);  // h11, h12, h22
    const double D = g[1];
    if (D == 0.0) throw DegenerateError("leaf field: d2 phi vanishes");
    return {-g[1], g[0], p.s / D * (g[1] * h[1] - g[0] * h[2])};
}

inline std::array<double, 2> lifted_at(const PhaseSystem& sys, int j, const Point3& p) { return sys.lifted(j, p.xy(), p.s); }

struct TraceOptions {
    double s_floor = 0.0125;  // 0.05 times the default region's smallest s
    double radius = 0.0;      // 0: the ball's outer radius
};

struct FoliationCurve {
    int j = 0;
    double step = 0.0;
    std::vector<Point3> points;
    double drift = 0.0;  // |Phi_j(end) - Phi_j(start)|
};

namespace detail {

inline Point3 unit_rk4_step(const PhaseSystem& sys, int j, const Point3& p, double h) {
    auto f = [&](const Point3& q) {
        const Vec3 v = leaf_field(sys, j, q);
        const double n = std::sqrt(v[0] * v[0] + v[1] * v[1] + v[2] * v[2]);
        return Vec3{v[0] / n, v[1] / n, v[2] / n};
    };
    auto add = [](const Point3& q, const Vec3& v, double c) { return Point3{q.x1 + c * v[0], q.x2 + c * v[1], q.s + c * v[2]}; };
    const Vec3 k1 = f(p), k2 = f(add(p, k1, h / 2)), k3 = f(add(p, k2, h / 2)), k4 = f(add(p, k3, h));
    return {p.x1 + h / 6 * (k1[0] + 2 * k2[0] + 2 * k3[0] + k4[0]), p.x2 + h / 6 * (k1[1] + 2 * k2[1] + 2 * k3[1] + k4[1]),
            p.s + h / 6 * (k1[2] + 2 * k2[2] + 2 * k3[2] + k4[2])};
}

inline void check_inside(const PhaseSystem& sys, const Point3& p, const TraceOptions& opt) {
    const double r = opt.radius > 0.0 ? opt.radius : sys.ball.outer_radius;
    if (std::hypot(p.x1 - sys.ball.center.x1, p.x2 - sys.ball.center.x2) > r)
        throw GuardError("level curve left the working disc");
    if (std::abs(p.s) < opt.s_floor) throw GuardError("level curve reached the s floor");
}

// `steps` equal RK4 steps along signed arc length `arc`
inline std::vector<Point3> flow(const PhaseSystem& sys, int j, Point3 p, double arc, int steps, const TraceOptions& opt) {
    std::vector<Point3> out{p};
    if (steps == 0 || arc == 0.0) return out;
    const double h = arc / steps;
    for (int i = 0; i < steps; ++i) {
        p = unit_rk4_step(sys, j, p, h);
        check_inside(sys, p, opt);
        out.push_back(p);
    }
    return out;
}

}  // namespace detail

inline FoliationCurve trace_level_curve(const PhaseSystem& sys, int j, const Point3& seed, double arc_length, double step,
                                        const TraceOptions& opt = {}) {
    if (j < 0 || j > 2) throw GuardError("level curves are traced for phases 1..3");
    if (!(step > 0.0)) throw GuardError("trace step must be positive");
    detail::check_inside(sys, seed, opt);
    const int n = static_cast<int>(std::ceil(std::abs(arc_length) / step - 1e-12));
    FoliationCurve c;
    c.j = j;
    c.step = n > 0 ? std::abs(arc_length) / n : 0.0;
    c.points = detail::flow(sys, j, seed, arc_length, n, opt);
    const auto a = lifted_at(sys, j, c.points.front()), b = lifted_at(sys, j, c.points.back());
    c.drift = std::hypot(b[0] - a[0], b[1] - a[1]);
    return c;
}

// ---------------------------------------------------------------------------
// Holonomy. Any solution has (f_j o Phi_j)(x, s) = c(x, s) kappa_j(x), and c kappa_j is
// constant along leaves of Phi_j. Starting with c = 1, the loop follows a leaf of Phi_2,
// then Phi_3, then back along Phi_2 and Phi_3 with lengths solved so that the end lies on
// the Phi_1 leaf of the start. A solution would give f_1 the same value there.

struct HolonomyResult {
    double residual = 0.0;             // |log| of the multiplicative mismatch
    double closure = 0.0;              // |Phi_1(end) - Phi_1(start)| after the solve
    std::array<double, 4> arcs{};      // signed arc lengths of the four legs
    int iterations = 0;
};

namespace detail {

inline double log_abs_kappa(const PhaseSystem& sys, int j, const Point3& p) {
    return std::log(std::abs(kernel_field(sys, p.xy())[static_cast<std::size_t>(j)]));
}

struct LoopTrace {
    Point3 end;
    double log_c = 0.0;
};

inline LoopTrace run_loop(const PhaseSystem& sys, const Point3& base, const std::array<double, 4>& arcs, const std::array<int, 4>& steps,
                          const TraceOptions& opt) {
    static constexpr int kLeaf[4] = {1, 2, 1, 2};
    Point3 p = base;
    double lc = 0.0;
    for (int leg = 0; leg < 4; ++leg) {
        const int j = kLeaf[leg];
        const auto pts = flow(sys, j, p, arcs[leg], steps[leg], opt);
        lc += log_abs_kappa(sys, j, p) - log_abs_kappa(sys, j, pts.back());
        p = pts.back();
    }
    return {p, lc};
}

}  // namespace detail

inline HolonomyResult holonomy_residual(const PhaseSystem& sys, const Point3& base, double loop_scale, double step,
                                        const TraceOptions& opt = {}) {
    if (!(loop_scale > 0.0) || !(step > 0.0)) throw GuardError("holonomy needs positive loop scale and step");
    HolonomyResult out;
    std::array<double, 4> arcs{loop_scale, loop_scale, -loop_scale, -loop_scale};
    const int n = std::max(1, static_cast<int>(std::ceil(loop_scale / step - 1e-12)));
    const std::array<int, 4> steps{n, n, n, n};
    const auto target = lifted_at(sys, 0, base);
    auto residual = [&](const std::array<double, 4>& a) {
        const auto end = detail::run_loop(sys, base, a, steps, opt).end;
        const auto v = lifted_at(sys, 0, end);
        return Eigen::Vector2d(v[0] - target[0], v[1] - target[1]);
    };
    Eigen::Vector2d r = residual(arcs);
    const double fd = 1e-6 * loop_scale;
    for (out.iterations = 0; out.iterations < 40 && r.norm() > 1e-14; ++out.iterations) {
        Eigen::Matrix2d J;
        for (int c = 0; c < 2; ++c) {
            auto ap = arcs, am = arcs;
            ap[2 + c] += fd;
            am[2 + c] -= fd;
            J.col(c) = (residual(ap) - residual(am)) / (2.0 * fd);
        }
        const Eigen::Vector2d delta = J.jacobiSvd(Eigen::ComputeFullU | Eigen::ComputeFullV).solve(-r);
        arcs[2] += delta(0);
        arcs[3] += delta(1);
        const Eigen::Vector2d next = residual(arcs);
        if (next.norm() >= r.norm() && r.norm() < 1e-12) {
            r = next;
            break;
        }
        r = next;
    }
    if (!(r.norm() < 1e-9)) throw GuardError("holonomy loop did not close (residual " + std::to_string(r.norm()) + ")");
    const auto tr = detail::run_loop(sys, base, arcs, steps, opt);
    const double start = std::log(std::abs(kernel_field(sys, base.xy())[0]));
    const double end = tr.log_c + std::log(std::abs(kernel_field(sys, tr.end.xy())[0]));
    out.residual = std::abs(end - start);
    out.closure = r.norm();
    out.arcs = arcs;
    return out;
}

// ---------------------------------------------------------------------------
// sigma from a solution scalar c(x, s): along each ray s -> r s0 the slope of
// log|c(x, r s0)| against log r.

using SolutionScalar = std::function<double(Point2, double)>;

struct SigmaEstimate {
    double sigma = 0.0;
    double residual = 0.0;  // rms misfit of the pooled line relative to the spread of log r
    std::size_t rays = 0;
    std::size_t samples = 0;
    bool contradicts_nonzero_exponent = false;  // |sigma| below the flag threshold
    std::string region;
};

struct SigmaOptions {
    double holonomy_tolerance = 1e-6;
    double loop_scale = 0.05;
    double step = 0.005;
    double residual_threshold = 0.01;
    double zero_flag = 0.05;
};

inline SolutionScalar scalar_from_triple(const PhaseSystem& sys, const LiftedTriple& f) {
    return [&sys, f](Point2 x, double s) {
        const Vec3 k = kernel_field(sys, x);
        std::size_t best = 0;
        for (std::size_t j = 1; j < 3; ++j)
            if (std::abs(k[j]) > std::abs(k[best])) best = j;
        const auto y = sys.lifted(static_cast<int>(best), x, s);
        return f[best](y[0], y[1]) / k[best];
    };
}

// Rays start at s0 on the listed points; r_samples are the multipliers. The existence regime
// is tested first by a holonomy loop at the first ray's base point.
inline SigmaEstimate sigma_estimate(const PhaseSystem& sys, const std::vector<Point2>& ray_points, double s0,
                                    const std::vector<double>& r_samples, const SolutionScalar& c, const SigmaOptions& opt = {}) {
    if (ray_points.empty() || r_samples.size() < 2) throw GuardError("sigma estimate needs rays and at least two multipliers");
    const auto h = holonomy_residual(sys, {ray_points[0].x1, ray_points[0].x2, s0}, opt.loop_scale, opt.step);
    if (!(h.residual <= opt.holonomy_tolerance))
        throw FitRefused("no existence regime: holonomy " + std::to_string(h.residual) + " exceeds " + std::to_string(opt.holonomy_tolerance));
    std::vector<double> lr, lc;
    for (const auto& x : ray_points) {
        const double base = std::log(std::abs(c(x, s0)));
        for (double r : r_samples) {
            lr.push_back(std::log(r));
            lc.push_back(std::log(std::abs(c(x, r * s0))) - base);
        }
    }
    // line through the origin: every ray shares log c = 0 at r = 1
    double sxx = 0.0, sxy = 0.0;
    for (std::size_t i = 0; i < lr.size(); ++i) {
        sxx += lr[i] * lr[i];
        sxy += lr[i] * lc[i];
    }
    if (sxx == 0.0) throw FitRefused("sigma estimate: multipliers must differ from 1");
    SigmaEstimate e;
    e.sigma = sxy / sxx;
    double sse = 0.0;
    for (std::size_t i = 0; i < lr.size(); ++i) sse += (lc[i] - e.sigma * lr[i]) * (lc[i] - e.sigma * lr[i]);
    e.residual = std::sqrt(sse / sxx);
    e.rays = ray_points.size();
    e.samples = lr.size();
    e.region = "rays@s0=" + std::to_string(s0);
    if (!(e.residual <= opt.residual_threshold))
        throw FitRefused("sigma estimate: rays disagree on the exponent (misfit " + std::to_string(e.residual) + ")");
    e.contradicts_nonzero_exponent = std::abs(e.sigma) < opt.zero_flag;
    return e;
}

// ---------------------------------------------------------------------------

struct SolutionSample {
    double y = 0.0;
    double s = 0.0;
    double value = 0.0;
};

struct ExtractResult {
    double b = 0.0;
    double coverage = 0.0;  // fraction of samples with |value - b |s|^sigma F(y)| <= c0 * eps
};

// least-squares b for value ~ b |s|^sigma F(y)
inline ExtractResult approx_solution_extract(const std::vector<SolutionSample>& samples, const std::function<double(double)>& F,
                                             double sigma, double eps, double c0 = 1.0) {
    if (samples.empty()) throw GuardError("approximate solution: empty sample set");
    double num = 0.0, den = 0.0;
    for (const auto& p : samples) {
        const double g = std::pow(std::abs(p.s), sigma) * F(p.y);
        num += g * p.value;
        den += g * g;
    }
    ExtractResult r;
    r.b = den > 0.0 ? num / den : 0.0;
    std::size_t ok = 0;
    for (const auto& p : samples)
        if (std::abs(p.value - r.b * std::pow(std::abs(p.s), sigma) * F(p.y)) <= c0 * eps) ++ok;
    r.coverage = static_cast<double>(ok) / static_cast<double>(samples.size());
    return r;
}

}  // namespace osclab
