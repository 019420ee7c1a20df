// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <array>
#include <optional>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "osclab/core.hpp"
#include "osclab/polynomial.hpp"

namespace osclab {

struct Ball {
    Point2 center{};
    double radius = 0.5;
    double outer_radius = 0.55;

    void validate() const {
        if (!(radius > 0.0) || !(outer_radius > radius))
            throw ConfigError("ball requires outer_radius > radius > 0");
    }
};

// Smooth bump exp(1 - 1/(1 - |x-c|^2/r^2)) inside the disc, zero outside. Peak value 1.
struct Cutoff {
    Point2 center{};
    double radius = 0.5;

    double operator()(double a, double b) const {
        const double u = ((a - center.x1) * (a - center.x1) + (b - center.x2) * (b - center.x2)) / (radius * radius);
        if (u >= 1.0) return 0.0;
        return std::exp(1.0 - 1.0 / (1.0 - u));
    }
    double operator()(Point2 x) const { return (*this)(x.x1, x.x2); }
};

class PhaseMap {
public:
    PhaseMap() : PhaseMap(BivariatePolynomial{}) {}
    explicit PhaseMap(BivariatePolynomial p)
        : p_(std::move(p)), g1_(p_.d1()), g2_(p_.d2()), h11_(g1_.d1()), h12_(g1_.d2()), h22_(g2_.d2()) {}

    const BivariatePolynomial& poly() const { return p_; }
    const BivariatePolynomial& d1() const { return g1_; }
    const BivariatePolynomial& d2() const { return g2_; }
    const BivariatePolynomial& d11() const { return h11_; }
    const BivariatePolynomial& d12() const { return h12_; }
    const BivariatePolynomial& d22() const { return h22_; }

    double value(Point2 x) const { return p_(x); }
    std::array<double, 2> gradient(Point2 x) const { return {g1_(x), g2_(x)}; }
    std::array<double, 3> hessian(Point2 x) const { return {h11_(x), h12_(x), h22_(x)}; }

    // V = (-d2 phi, d1 phi), tangent to the level curves of phi.
    std::array<double, 2> annihilating_field(Point2 x) const { return {-g2_(x), g1_(x)}; }

    // V applied to another polynomial, as an exact polynomial.
    BivariatePolynomial apply_field(const BivariatePolynomial& q) const {
        return (-1.0 * g2_) * q.d1() + g1_ * q.d2();
    }

private:
    BivariatePolynomial p_, g1_, g2_, h11_, h12_, h22_;
};

inline double eval_phase(const PhaseMap& m, Point2 x) { return m.value(x); }
inline std::array<double, 2> gradient(const PhaseMap& m, Point2 x) { return m.gradient(x); }
inline std::array<double, 2> annihilating_field(const PhaseMap& m, Point2 x) { return m.annihilating_field(x); }

struct PhaseSystem {
    std::array<PhaseMap, 4> phases;
    Ball ball;
    Cutoff cutoff;
    std::string name;

    // (phi_j(x), s * d2 phi_j(x)): the lifted map used by the functional equation
    std::array<double, 2> lifted(int j, Point2 x, double s) const {
        return {phases[j].value(x), s * phases[j].d2()(x)};
    }
};

inline PhaseSystem make_system(std::array<BivariatePolynomial, 4> polys, Ball ball, std::string name = {}) {
    ball.validate();
    PhaseSystem s;
    for (int j = 0; j < 4; ++j) s.phases[j] = PhaseMap(std::move(polys[j]));
    s.ball = ball;
    s.cutoff = Cutoff{ball.center, ball.radius};
    s.name = std::move(name);
    return s;
}

// (x1, x2, x1+x2, x1-x2) on the disc of radius 1/2: resonant, used for non-decay runs.
inline PhaseSystem linear_system() {
    using P = BivariatePolynomial;
    return make_system({P::x1(), P::x2(), P::x1() + P::x2(), P::x1() - P::x2()}, Ball{{0.0, 0.0}, 0.5, 0.55}, "linear");
}

// Quadratic perturbation of (x2, x1+x2, x1-x2, x1). The pure coordinate phase is last so that
// d/dx2 annihilates it and stays nonzero on the other three.
inline PhaseSystem curved_system() {
    using P = BivariatePolynomial;
    const P a = P::x1(), b = P::x2();
    P p1 = b + 0.5 * (a * a) + 0.4 * (b * b);
    P p2 = a + b + (a * a) - 0.6 * (a * b) - 0.25 * (b * b);
    P p3 = a - b - 0.5 * (a * a) - (a * b) + 0.3 * (b * b);
    return make_system({p1, p2, p3, a}, Ball{{0.0, 0.0}, 0.5, 0.55}, "curved");
}

// Lattice of n x n points over the square circumscribing the disc, restricted to the closed disc.
inline std::vector<Point2> disc_grid(Point2 c, double r, int n) {
    if (n < 2) throw GuardError("grid_resolution must be at least 2");
    std::vector<Point2> pts;
    pts.reserve(static_cast<std::size_t>(n) * n);
    for (int i = 0; i < n; ++i) {
        const double a = -r + 2.0 * r * i / (n - 1);
        for (int j = 0; j < n; ++j) {
            const double b = -r + 2.0 * r * j / (n - 1);
            if (a * a + b * b <= r * r * (1.0 + 1e-12)) pts.push_back({c.x1 + a, c.x2 + b});
        }
    }
    return pts;
}

// ---------------------------------------------------------------------------
// Transversality

inline double check_transversality(const PhaseSystem& sys, int grid_resolution, std::optional<double> region_radius = {}) {
    const auto pts = disc_grid(sys.ball.center, region_radius.value_or(sys.ball.radius), grid_resolution);
    double margin = 1.0;
    for (const auto& x : pts) {
        std::array<std::array<double, 2>, 4> g;
        std::array<double, 4> n;
        for (int j = 0; j < 4; ++j) {
            g[j] = sys.phases[j].gradient(x);
            n[j] = norm2(g[j][0], g[j][1]);
            if (n[j] == 0.0)
                throw DegenerateError("phase " + std::to_string(j + 1) + " has vanishing gradient at (" +
                                      std::to_string(x.x1) + ", " + std::to_string(x.x2) + ")");
        }
        for (int i = 0; i < 4; ++i)
            for (int j = i + 1; j < 4; ++j) {
                const double det = g[i][0] * g[j][1] - g[i][1] * g[j][0];
                margin = std::min(margin, std::abs(det) / (n[i] * n[j]));
            }
    }
    return margin;
}

// ---------------------------------------------------------------------------
// Lifted-map independence in (x, s) space.
//
// For fixed k, the map (x, s) -> (phi_j, s * V_k phi_j) has level curves tangent to the cross product of
// its two component gradients. The margin is the smallest |det| of the three normalized tangents.

struct Aux2Options {
    int s_points = 9;
    bool allow_zero_s = false;  // only for demonstrating the degenerate plane s = 0
};

inline double check_aux2(const PhaseSystem& sys, int grid_resolution, double s_lo, double s_hi, Aux2Options opt = {}) {
    if (!(s_hi >= s_lo)) throw GuardError("aux2: empty s range");
    if (!opt.allow_zero_s && s_lo <= 0.0 && s_hi >= 0.0) throw GuardError("aux2: s range must exclude 0");
    const auto pts = disc_grid(sys.ball.center, sys.ball.radius, grid_resolution);

    struct Lifted {
        const PhaseMap* phase;
        BivariatePolynomial psi, psi1, psi2;
    };
    double margin = 1.0;
    for (int k = 0; k < 4; ++k) {
        std::vector<Lifted> lifts;
        for (int j = 0; j < 4; ++j) {
            if (j == k) continue;
            BivariatePolynomial psi = sys.phases[k].apply_field(sys.phases[j].poly());
            BivariatePolynomial psi1 = psi.d1(), psi2 = psi.d2();
            lifts.push_back({&sys.phases[j], std::move(psi), std::move(psi1), std::move(psi2)});
        }
        for (int si = 0; si < opt.s_points; ++si) {
            const double s = opt.s_points == 1 ? s_lo : s_lo + (s_hi - s_lo) * si / (opt.s_points - 1);
            for (const auto& x : pts) {
                Eigen::Matrix3d W;
                for (int c = 0; c < 3; ++c) {
                    const auto& L = lifts[c];
                    const auto g = L.phase->gradient(x);
                    const double psi = L.psi(x);
                    const Eigen::Vector3d a(g[0], g[1], 0.0);
                    const Eigen::Vector3d b(s * L.psi1(x), s * L.psi2(x), psi);
                    Eigen::Vector3d w = a.cross(b);
                    const double nw = w.norm();
                    if (nw == 0.0)
                        throw DegenerateError("aux2: zero tangent field for k=" + std::to_string(k + 1));
                    W.col(c) = w / nw;
                }
                margin = std::min(margin, std::abs(W.determinant()));
            }
        }
    }
    return margin;
}

// ---------------------------------------------------------------------------
// Resonance tests. Unknown 1D functions are expanded in Legendre polynomials of the
// phase value rescaled to [-1, 1] over the sample set; each phase's block is orthonormalized
// so the smallest singular value is a scale-free angle between the sampled function spaces.

inline double legendre(int n, double t) {
    if (n == 0) return 1.0;
    double p0 = 1.0, p1 = t;
    for (int k = 1; k < n; ++k) {
        const double p2 = ((2.0 * k + 1.0) * t * p1 - k * p0) / (k + 1.0);
        p0 = p1;
        p1 = p2;
    }
    return p1;
}

struct PhaseRange {
    double center = 0.0;
    double half_width = 1.0;
    double scaled(double v) const { return (v - center) / half_width; }
};

inline PhaseRange phase_range(const PhaseMap& m, const std::vector<Point2>& pts) {
    double lo = m.value(pts.front()), hi = lo;
    for (const auto& x : pts) {
        const double v = m.value(x);
        lo = std::min(lo, v);
        hi = std::max(hi, v);
    }
    if (!(hi > lo)) throw DegenerateError("phase is constant on the sample region");
    return {0.5 * (lo + hi), 0.5 * (hi - lo)};
}

// Sum_j F_j(phi_j) with F_j = sum_d coef[j][d] * P_{d+1}(scaled) + shift[j]
struct ResonanceWitness {
    std::array<PhaseRange, 4> ranges;
    std::array<std::vector<double>, 4> coef;
    std::array<double, 4> shift{};

    double F(int j, double t) const {
        double acc = shift[j];
        const double u = ranges[j].scaled(t);
        for (std::size_t d = 0; d < coef[j].size(); ++d) acc += coef[j][d] * legendre(static_cast<int>(d) + 1, u);
        return acc;
    }
    double residual_at(const PhaseSystem& sys, Point2 x) const {
        double acc = 0.0;
        for (int j = 0; j < 4; ++j) acc += F(j, sys.phases[j].value(x));
        return acc;
    }
};

struct ResonanceResult {
    double sigma_min = 0.0;
    ResonanceWitness witness;  // right singular vector for sigma_min, mapped back to functions
};

namespace detail {
// Orthonormalize columns of B in place; returns R such that B_original = Q R.
inline Eigen::MatrixXd orthonormalize(Eigen::MatrixXd& B) {
    Eigen::HouseholderQR<Eigen::MatrixXd> qr(B);
    const Eigen::Index c = B.cols();
    Eigen::MatrixXd R = qr.matrixQR().topLeftCorner(c, c).triangularView<Eigen::Upper>();
    B = qr.householderQ() * Eigen::MatrixXd::Identity(B.rows(), c);
    return R;
}
}  // namespace detail

inline ResonanceResult resonance_test_main(const PhaseSystem& sys, int degree, int grid_resolution) {
    if (degree < 1) throw GuardError("resonance test requires degree >= 1");
    const auto pts = disc_grid(sys.ball.center, sys.ball.radius, grid_resolution);
    const Eigen::Index n = static_cast<Eigen::Index>(pts.size());
    const int unknowns = 4 * degree;
    if (n < unknowns) throw GuardError("underdetermined sampling: " + std::to_string(n) + " points for " +
                                       std::to_string(unknowns) + " unknowns");

    ResonanceResult out;
    Eigen::MatrixXd A(n, unknowns);
    std::array<Eigen::MatrixXd, 4> R;
    std::array<Eigen::VectorXd, 4> means;
    for (int j = 0; j < 4; ++j) {
        const PhaseRange rg = phase_range(sys.phases[j], pts);
        out.witness.ranges[j] = rg;
        Eigen::MatrixXd B(n, degree);
        for (Eigen::Index i = 0; i < n; ++i) {
            const double u = rg.scaled(sys.phases[j].value(pts[i]));
            for (int d = 0; d < degree; ++d) B(i, d) = legendre(d + 1, u);
        }
        // removing column means quotients out the constant terms
        means[j] = B.colwise().mean().transpose();
        B.rowwise() -= means[j].transpose();
        R[j] = detail::orthonormalize(B);
        A.middleCols(j * degree, degree) = B;
    }
    Eigen::JacobiSVD<Eigen::MatrixXd> svd(A, Eigen::ComputeThinV);
    out.sigma_min = svd.singularValues()(unknowns - 1);
    const Eigen::VectorXd v = svd.matrixV().col(unknowns - 1);
    for (int j = 0; j < 4; ++j) {
        const Eigen::VectorXd c = R[j].triangularView<Eigen::Upper>().solve(v.segment(j * degree, degree));
        out.witness.coef[j].assign(c.data(), c.data() + degree);
        out.witness.shift[j] = -c.dot(means[j]);
    }
    return out;
}

inline double resonance_test_aux1(const PhaseSystem& sys, int k, int degree, int grid_resolution) {
    if (degree < 0) throw GuardError("aux1 test requires degree >= 0");
    if (k < 0 || k > 3) throw GuardError("aux1: phase index out of range");
    const auto pts = disc_grid(sys.ball.center, sys.ball.radius, grid_resolution);
    const Eigen::Index n = static_cast<Eigen::Index>(pts.size());
    const int per = degree + 1;
    const int unknowns = 3 * per;
    if (2 * n < unknowns) throw GuardError("underdetermined sampling in aux1 test");

    Eigen::MatrixXd A(2 * n, unknowns);
    int col = 0;
    for (int j = 0; j < 4; ++j) {
        if (j == k) continue;
        const PhaseRange rg = phase_range(sys.phases[j], pts);
        Eigen::MatrixXd B(2 * n, per);
        for (Eigen::Index i = 0; i < n; ++i) {
            const Point2 x = pts[i];
            const auto vk = sys.phases[k].annihilating_field(x);
            const auto gj = sys.phases[j].gradient(x);
            const double w = vk[0] * gj[0] + vk[1] * gj[1];
            const double u = rg.scaled(sys.phases[j].value(x));
            for (int d = 0; d < per; ++d) {
                const double p = legendre(d, u) * w;
                B(i, d) = p * gj[0];
                B(n + i, d) = p * gj[1];
            }
        }
        detail::orthonormalize(B);
        A.middleCols(col, per) = B;
        col += per;
    }
    Eigen::JacobiSVD<Eigen::MatrixXd> svd(A);
    return svd.singularValues()(unknowns - 1);
}

// Relative least-squares residual of log|V_l phi_i |V_k phi_i|^tau / (V_l phi_j |V_k phi_j|^tau)|
// against H_i(phi_i) - H_j(phi_j). Measured against the variation of the target about its mean.
inline double resonance_test_aux3(const PhaseSystem& sys, std::array<int, 4> perm, double tau, int degree,
                                  int grid_resolution) {
    const auto [i, j, k, l] = perm;
    for (int a : perm)
        if (a < 0 || a > 3) throw GuardError("aux3: phase index out of range");
    const auto pts = disc_grid(sys.ball.center, sys.ball.radius, grid_resolution);
    const Eigen::Index n = static_cast<Eigen::Index>(pts.size());
    const int cols = 1 + 2 * degree;
    if (n < cols) throw GuardError("underdetermined sampling in aux3 test");

    auto field_on = [&](int f, int p, Point2 x) {
        const auto v = sys.phases[f].annihilating_field(x);
        const auto g = sys.phases[p].gradient(x);
        return v[0] * g[0] + v[1] * g[1];
    };
    Eigen::VectorXd y(n);
    int sign = 0;
    for (Eigen::Index r = 0; r < n; ++r) {
        const Point2 x = pts[r];
        const double num = field_on(l, i, x) * std::pow(std::abs(field_on(k, i, x)), tau);
        const double den = field_on(l, j, x) * std::pow(std::abs(field_on(k, j, x)), tau);
        const double ratio = num / den;
        if (!(ratio != 0.0) || !std::isfinite(ratio))
            throw GuardError("aux3: ratio vanishes or is undefined on the sample grid");
        const int sg = ratio > 0 ? 1 : -1;
        if (sign == 0) sign = sg;
        if (sg != sign) throw GuardError("aux3: ratio changes sign inside the region; subdivide");
        y(r) = std::log(std::abs(ratio));
    }
    const PhaseRange ri = phase_range(sys.phases[i], pts);
    const PhaseRange rj = phase_range(sys.phases[j], pts);
    Eigen::MatrixXd A(n, cols);
    for (Eigen::Index r = 0; r < n; ++r) {
        A(r, 0) = 1.0;
        const double ui = ri.scaled(sys.phases[i].value(pts[r]));
        const double uj = rj.scaled(sys.phases[j].value(pts[r]));
        for (int d = 0; d < degree; ++d) {
            A(r, 1 + d) = legendre(d + 1, ui);
            A(r, 1 + degree + d) = legendre(d + 1, uj);
        }
    }
    const Eigen::VectorXd c = A.colPivHouseholderQr().solve(y);
    const double scale = (y.array() - y.mean()).matrix().norm();
    const double res = (A * c - y).norm();
    if (scale == 0.0) return 0.0;
    return res / scale;
}

// ---------------------------------------------------------------------------

struct HypothesisOptions {
    int grid_resolution = 41;
    double tolerance = 1e-6;
    int max_degree = 4;
    int aux1_max_degree = 3;
    int aux3_degree = 4;
    std::vector<double> tau_grid{-2.0, -1.0, -0.5, 0.0, 0.5, 1.0, 2.0};
    double aux2_s_lo = 0.5;
    double aux2_s_hi = 1.0;
};

struct HypothesisReport {
    double transversality_margin = 0.0;
    double aux2_margin = 0.0;
    std::vector<double> resonance_sigma_min;           // index d-1 for degree d
    double aux1_sigma_min = 0.0;                       // min over k and degree
    std::vector<std::pair<double, double>> aux3_residuals;  // (tau, min residual over permutations)
    double tolerance = 1e-6;

    bool transversal() const { return transversality_margin > tolerance; }
    bool aux2_ok() const { return aux2_margin > tolerance; }
    bool resonant() const {
        for (double s : resonance_sigma_min)
            if (s <= tolerance) return true;
        return false;
    }
    bool aux1_ok() const { return aux1_sigma_min > tolerance; }
    bool aux3_ok() const {
        for (const auto& [t, r] : aux3_residuals)
            if (r <= tolerance) return false;
        return true;
    }
};

inline double aux3_min_over_permutations(const PhaseSystem& sys, double tau, int degree, int grid_resolution) {
    double best = std::numeric_limits<double>::infinity();
    std::array<int, 4> p{0, 1, 2, 3};
    do {
        if (p[0] < p[1]) best = std::min(best, resonance_test_aux3(sys, p, tau, degree, grid_resolution));
    } while (std::next_permutation(p.begin(), p.end()));
    return best;
}

inline HypothesisReport check_hypotheses(const PhaseSystem& sys, const HypothesisOptions& opt = {}) {
    HypothesisReport rep;
    rep.tolerance = opt.tolerance;
    rep.transversality_margin = check_transversality(sys, opt.grid_resolution);
    rep.aux2_margin = check_aux2(sys, std::max(2, opt.grid_resolution / 2), opt.aux2_s_lo, opt.aux2_s_hi);
    for (int d = 1; d <= opt.max_degree; ++d)
        rep.resonance_sigma_min.push_back(resonance_test_main(sys, d, opt.grid_resolution).sigma_min);
    rep.aux1_sigma_min = std::numeric_limits<double>::infinity();
    for (int k = 0; k < 4; ++k)
        for (int d = 0; d <= opt.aux1_max_degree; ++d)
            rep.aux1_sigma_min = std::min(rep.aux1_sigma_min, resonance_test_aux1(sys, k, d, opt.grid_resolution));
    for (double tau : opt.tau_grid)
        rep.aux3_residuals.emplace_back(tau, aux3_min_over_permutations(sys, tau, opt.aux3_degree, opt.grid_resolution));
    return rep;
}

}  // namespace osclab
