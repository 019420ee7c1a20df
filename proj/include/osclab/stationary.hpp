// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <functional>
#include <limits>
#include <map>
#include <numeric>
#include <optional>
#include <string>
#include <unordered_map>
#include <vector>

#include <Eigen/Dense>

#include "osclab/core.hpp"
#include "osclab/fourier.hpp"
#include "osclab/ladder.hpp"
#include "osclab/phase_geometry.hpp"
#include "osclab/signals.hpp"
#include "osclab/sublevel.hpp"

namespace osclab {

using Tuple4 = std::array<long, 4>;

struct Tuple4Hash {
    std::size_t operator()(const Tuple4& m) const noexcept {
        std::uint64_t h = 0x9E3779B97F4A7C15ULL;
        for (long v : m) h = (h ^ static_cast<std::uint64_t>(v)) * 0xBF58476D1CE4E5B9ULL + (h >> 29);
        return static_cast<std::size_t>(h);
    }
};

struct InteractingTuple {
    Tuple4 m{};
    Point2 witness{};                                 // first grid point in scan order
    std::array<std::array<double, 2>, 4> gradients{};  // grad phi_j at the witness
    bool in_ball = true;                              // witnessed inside B (not only the slack disc)
};

struct InteractionTable {
    double lambda = 0.0;
    double gamma = 0.0;
    double cell = 0.0;  // lambda^{-gamma}
    int scan_resolution = 0;
    std::vector<InteractingTuple> tuples;  // sorted by witness scan index
    std::size_t strict_count = 0;          // witnessed in B
    std::size_t slack_count = 0;           // witnessed in the outer disc
    double count_constant = 0.0;           // strict_count / lambda^{2 gamma}
    long ambiguity = 0;                    // max spread of (m3, m4) given (m1, m2)

    // cube around the witness containing every point that maps into the enlarged cells
    double cube_side() const { return 3.0 * cell; }
};

// I*_m = [(m - 3/2) ell, (m + 3/2) ell], closed.
inline bool in_enlarged_cell(double y, long m, double ell) {
    return y >= (static_cast<double>(m) - 1.5) * ell && y <= (static_cast<double>(m) + 1.5) * ell;
}

// Grid used by the interaction scan: spacing ell / resolution, centred on the ball
// centre, covering the outer disc; row-major in (x1, x2).
struct ScanGrid {
    Point2 center;
    double h;
    long half;  // indices -half..half per axis
    long side() const { return 2 * half + 1; }
    Point2 at(long i, long k) const { return {center.x1 + static_cast<double>(i - half) * h, center.x2 + static_cast<double>(k - half) * h}; }
};

inline ScanGrid scan_grid(const PhaseSystem& sys, double ell, int resolution) {
    const double h = ell / resolution;
    return {sys.ball.center, h, static_cast<long>(std::ceil(sys.ball.outer_radius / h))};
}

inline InteractionTable enumerate_interacting(const PhaseSystem& sys, double lambda, double gamma, int scan_resolution) {
    if (scan_resolution < 4)
        throw GuardError("interaction scan needs at least 4 points per lambda^-gamma cell, got " + std::to_string(scan_resolution));
    if (!(lambda > 1.0) || !(gamma > 0.0)) throw GuardError("interaction scan needs lambda > 1 and gamma > 0");
    const double ell = std::pow(lambda, -gamma);
    const ScanGrid g = scan_grid(sys, ell, scan_resolution);
    const double r = sys.ball.radius, ro = sys.ball.outer_radius;
    const long side = g.side();

    // per row: tuples in first-seen order with their witness column
    struct Seen {
        Tuple4 m;
        long k;
        bool in_ball;
    };
    std::vector<std::vector<Seen>> rows(static_cast<std::size_t>(side));
    parallel_for(static_cast<std::size_t>(side), [&](std::size_t iu) {
        const long i = static_cast<long>(iu);
        std::unordered_map<Tuple4, std::size_t, Tuple4Hash> first;
        auto& out = rows[iu];
        for (long k = 0; k < side; ++k) {
            const Point2 x = g.at(i, k);
            const double d2 = (x.x1 - g.center.x1) * (x.x1 - g.center.x1) + (x.x2 - g.center.x2) * (x.x2 - g.center.x2);
            if (d2 > ro * ro) continue;
            const bool inside = d2 <= r * r;
            std::array<std::array<long, 4>, 4> cand{};
            std::array<int, 4> nc{};
            for (int j = 0; j < 4; ++j) {
                const double y = sys.phases[j].value(x);
                const long c = std::lround(y / ell);
                for (long m = c - 2; m <= c + 2; ++m)
                    if (in_enlarged_cell(y, m, ell)) cand[j][nc[j]++] = m;
            }
            for (int a = 0; a < nc[0]; ++a)
                for (int b = 0; b < nc[1]; ++b)
                    for (int c = 0; c < nc[2]; ++c)
                        for (int d = 0; d < nc[3]; ++d) {
                            const Tuple4 m{cand[0][a], cand[1][b], cand[2][c], cand[3][d]};
                            auto [it, fresh] = first.try_emplace(m, out.size());
                            if (fresh)
                                out.push_back({m, k, inside});
                            else if (inside && !out[it->second].in_ball)
                                out[it->second].in_ball = true;
                        }
        }
    });

    // Deterministic merge: the witness is the first occurrence in row-major order.
    // A tuple first seen in the slack annulus keeps that witness; it counts as strict if any
    // later witness lies in B.
    InteractionTable t;
    t.lambda = lambda;
    t.gamma = gamma;
    t.cell = ell;
    t.scan_resolution = scan_resolution;
    std::unordered_map<Tuple4, std::size_t, Tuple4Hash> where;
    for (long i = 0; i < side; ++i) {
        for (const auto& s : rows[static_cast<std::size_t>(i)]) {
            auto [it, fresh] = where.try_emplace(s.m, t.tuples.size());
            if (fresh) {
                InteractingTuple e;
                e.m = s.m;
                e.witness = g.at(i, s.k);
                for (int j = 0; j < 4; ++j) e.gradients[j] = sys.phases[j].gradient(e.witness);
                e.in_ball = s.in_ball;
                t.tuples.push_back(e);
            } else if (s.in_ball) {
                t.tuples[it->second].in_ball = true;
            }
        }
    }
    t.slack_count = t.tuples.size();
    t.strict_count = static_cast<std::size_t>(std::count_if(t.tuples.begin(), t.tuples.end(), [](const auto& e) { return e.in_ball; }));
    t.count_constant = static_cast<double>(t.strict_count) / std::pow(lambda, 2.0 * gamma);

    std::map<std::pair<long, long>, std::array<long, 4>> spread;  // min3, max3, min4, max4
    for (const auto& e : t.tuples) {
        if (!e.in_ball) continue;
        auto [it, fresh] = spread.try_emplace({e.m[0], e.m[1]}, std::array<long, 4>{e.m[2], e.m[2], e.m[3], e.m[3]});
        if (!fresh) {
            auto& s = it->second;
            s[0] = std::min(s[0], e.m[2]);
            s[1] = std::max(s[1], e.m[2]);
            s[2] = std::min(s[2], e.m[3]);
            s[3] = std::max(s[3], e.m[3]);
        }
    }
    for (const auto& [k, s] : spread) t.ambiguity = std::max({t.ambiguity, s[1] - s[0], s[3] - s[2]});
    return t;
}

// Only the tuples witnessed inside B.
inline std::vector<InteractingTuple> strict_tuples(const InteractionTable& t) {
    std::vector<InteractingTuple> out;
    for (const auto& e : t.tuples)
        if (e.in_ball) out.push_back(e);
    return out;
}

// ---------------------------------------------------------------------------

struct FrequencyAssignment {
    double lambda = 0.0;
    double c_lower = 0.5;  // |alpha_1| >= c_lower * lambda
    double c_upper = 2.0;  // |alpha_j| <= c_upper * lambda
    std::array<std::map<long, double>, 4> alpha;

    std::optional<double> get(int j, long m) const {
        const auto& a = alpha[static_cast<std::size_t>(j)];
        const auto it = a.find(m);
        if (it == a.end()) return std::nullopt;
        return it->second;
    }
    double at(int j, long m) const {
        const auto v = get(j, m);
        if (!v) throw GuardError("frequency assignment has no entry for phase " + std::to_string(j + 1) + ", cell " + std::to_string(m));
        return *v;
    }

    // first violated bound, or empty
    std::string violation() const {
        const double hi = c_upper * lambda * (1.0 + 1e-12), lo = c_lower * lambda * (1.0 - 1e-12);
        for (int j = 0; j < 4; ++j)
            for (const auto& [m, a] : alpha[static_cast<std::size_t>(j)]) {
                if (!(std::abs(a) <= hi)) return "|alpha| <= C lambda fails for phase " + std::to_string(j + 1) + " cell " + std::to_string(m);
                if (j == 0 && !(std::abs(a) >= lo)) return "|alpha_1| >= c lambda fails for cell " + std::to_string(m);
            }
        return {};
    }
};

// alpha_{j,m} = lambda * c_j for every cell used by the table
inline FrequencyAssignment constant_alpha(const InteractionTable& t, const std::array<double, 4>& c, double c_lower = 0.5,
                                          double c_upper = 2.0) {
    FrequencyAssignment f{t.lambda, c_lower, c_upper, {}};
    for (const auto& e : t.tuples)
        for (int j = 0; j < 4; ++j) f.alpha[j][e.m[j]] = t.lambda * c[j];
    return f;
}

// Independent uniform draws: alpha_1 = +-U[c, C] lambda, others U[-C, C] lambda. Each
// (j, m) draws from its own stream so the values do not depend on the table's order.
inline FrequencyAssignment random_alpha(const InteractionTable& t, std::uint64_t seed, double c_lower = 0.5, double c_upper = 2.0) {
    FrequencyAssignment f{t.lambda, c_lower, c_upper, {}};
    for (const auto& e : t.tuples)
        for (int j = 0; j < 4; ++j) {
            auto& slot = f.alpha[j];
            if (slot.count(e.m[j])) continue;
            Rng rng(derive_seed(seed, static_cast<std::uint64_t>(j) * 0x100000001ULL + static_cast<std::uint64_t>(e.m[j] + (1L << 31))));
            double a;
            if (j == 0) {
                a = rng.uniform(c_lower, c_upper) * t.lambda;
                if (rng.uniform() < 0.5) a = -a;
            } else {
                a = rng.uniform(-c_upper, c_upper) * t.lambda;
            }
            slot[e.m[j]] = a;
        }
    return f;
}

inline std::array<double, 2> combined_gradient(const InteractingTuple& e, const FrequencyAssignment& f) {
    std::array<double, 2> v{0.0, 0.0};
    for (int j = 0; j < 4; ++j) {
        const double a = f.at(j, e.m[j]);
        v[0] += a * e.gradients[j][0];
        v[1] += a * e.gradients[j][1];
    }
    return v;
}

// Tuples with |sum_j alpha_{j,m_j} grad phi_j(witness)| <= scale * lambda^{gamma + tau0 + rho}.
// Only tuples witnessed in B are considered.
inline std::vector<InteractingTuple> stationary_subset(const InteractionTable& t, const FrequencyAssignment& f,
                                                       const ParameterLadder& p, double threshold_scale = 1.0) {
    const double thr = threshold_scale * std::pow(t.lambda, p.gamma + p.tau0 + p.rho);
    std::vector<InteractingTuple> out;
    for (const auto& e : t.tuples) {
        if (!e.in_ball) continue;
        const auto v = combined_gradient(e, f);
        if (std::hypot(v[0], v[1]) <= thr) out.push_back(e);
    }
    return out;
}

// Greedy adversary. Tuples are visited in a seed-shuffled order; for each one the still
// unassigned entries are chosen to cancel the combined gradient as far as the bounds allow.
// An unassigned alpha_1 is fixed first: at lambda if other unknowns remain, otherwise at the
// admissible value closest to the exact cancelling one.
inline FrequencyAssignment adversarial_alpha(const InteractionTable& t, std::uint64_t seed, double c_lower = 0.5,
                                             double c_upper = 2.0) {
    FrequencyAssignment f{t.lambda, c_lower, c_upper, {}};
    const double lam = t.lambda, cap = c_upper * lam;
    std::vector<std::size_t> order(t.tuples.size());
    std::iota(order.begin(), order.end(), 0);
    Rng rng(derive_seed(seed, 0xADu));
    for (std::size_t i = order.size(); i > 1; --i) std::swap(order[i - 1], order[static_cast<std::size_t>(rng.next_u64() % i)]);

    for (std::size_t idx : order) {
        const auto& e = t.tuples[idx];
        if (!e.in_ball) continue;
        Eigen::Vector2d v0 = Eigen::Vector2d::Zero();
        std::vector<int> unknown;
        for (int j = 0; j < 4; ++j) {
            if (const auto a = f.get(j, e.m[j])) {
                v0 += *a * Eigen::Vector2d(e.gradients[j][0], e.gradients[j][1]);
            } else {
                unknown.push_back(j);
            }
        }
        if (unknown.empty()) continue;
        if (unknown.front() == 0) {
            const Eigen::Vector2d g1(e.gradients[0][0], e.gradients[0][1]);
            double a1 = lam;
            if (unknown.size() == 1 && g1.squaredNorm() > 0.0) {
                const double exact = -v0.dot(g1) / g1.squaredNorm();
                const double mag = std::clamp(std::abs(exact), c_lower * lam, cap);
                a1 = exact < 0.0 ? -mag : mag;
            }
            f.alpha[0][e.m[0]] = a1;
            v0 += a1 * g1;
            unknown.erase(unknown.begin());
        }
        if (unknown.empty()) continue;
        Eigen::MatrixXd A(2, static_cast<Eigen::Index>(unknown.size()));
        for (std::size_t c = 0; c < unknown.size(); ++c) {
            A(0, static_cast<Eigen::Index>(c)) = e.gradients[unknown[c]][0];
            A(1, static_cast<Eigen::Index>(c)) = e.gradients[unknown[c]][1];
        }
        const Eigen::VectorXd sol = A.completeOrthogonalDecomposition().solve(-v0);
        for (std::size_t c = 0; c < unknown.size(); ++c)
            f.alpha[unknown[c]][e.m[unknown[c]]] = std::clamp(sol(static_cast<Eigen::Index>(c)), -cap, cap);
    }
    // cells touched only by slack tuples still need admissible values
    for (const auto& e : t.tuples)
        for (int j = 0; j < 4; ++j)
            if (!f.get(j, e.m[j])) f.alpha[j][e.m[j]] = j == 0 ? lam : 0.0;
    return f;
}

// ---------------------------------------------------------------------------
// Step functions F_j = alpha_{j,m} / lambda on I*_m for m in one class mod 3. The enlarged
// cells of one class tile the line; they are taken half-open, [(m-3/2) ell, (m+3/2) ell).

struct StepFunctionTuple {
    double lambda = 0.0;
    double cell = 0.0;
    std::array<int, 4> residues{};
    std::array<std::map<long, double>, 4> values;

    long cell_of(int j, double y) const {
        const long k = residues[static_cast<std::size_t>(j)];
        return k + 3 * static_cast<long>(std::floor((y / cell + 1.5 - static_cast<double>(k)) / 3.0));
    }
    // NaN where the assignment has no entry
    double operator()(int j, double y) const {
        const auto& v = values[static_cast<std::size_t>(j)];
        const auto it = v.find(cell_of(j, y));
        return it == v.end() ? std::numeric_limits<double>::quiet_NaN() : it->second;
    }
    ProfileTuple profiles() const {
        ProfileTuple p;
        for (int j = 0; j < 4; ++j) p[j] = [this, j](double y) { return cplx{(*this)(j, y), 0.0}; };
        return p;
    }
    double min_abs_first() const {
        double m = std::numeric_limits<double>::infinity();
        for (const auto& [k, v] : values[0]) m = std::min(m, std::abs(v));
        return m;
    }
};

inline long mod3(long m) { return ((m % 3) + 3) % 3; }

inline bool in_class(const Tuple4& m, const std::array<int, 4>& k) {
    for (int j = 0; j < 4; ++j)
        if (mod3(m[j]) != k[j]) return false;
    return true;
}

inline StepFunctionTuple step_functions(const FrequencyAssignment& f, double cell, const std::array<int, 4>& residues) {
    for (int k : residues)
        if (k < 0 || k > 2) throw GuardError("residues must lie in {0, 1, 2}");
    StepFunctionTuple s;
    s.lambda = f.lambda;
    s.cell = cell;
    s.residues = residues;
    for (int j = 0; j < 4; ++j)
        for (const auto& [m, a] : f.alpha[j])
            if (mod3(m) == residues[j]) s.values[j][m] = a / f.lambda;
    return s;
}

struct BridgeCheck {
    std::size_t stationary_in_class = 0;
    double lhs = 0.0;        // lambda^{-2 gamma} #N restricted to the class
    double eps = 0.0;        // C' lambda^{-(1 - gamma - tau0 - rho)}
    double fraction = 0.0;   // grid fraction of B in S(F, eps)
    double area = 0.0;       // |S(F, eps)|
    double constant = 0.0;   // lhs / area (infinite if the set is empty and lhs > 0)
};

inline BridgeCheck bridge_check(const PhaseSystem& sys, const InteractionTable& t, const std::vector<InteractingTuple>& stationary,
                                const StepFunctionTuple& F, const ParameterLadder& p, double c_prime, int grid_n) {
    BridgeCheck b;
    for (const auto& e : stationary)
        if (in_class(e.m, F.residues)) ++b.stationary_in_class;
    b.lhs = static_cast<double>(b.stationary_in_class) * std::pow(t.lambda, -2.0 * t.gamma);
    b.eps = c_prime * p.bridge_eps(t.lambda);
    const auto region = Region2D::of(sys);
    b.fraction = measure_sublevel_2d(sys, SublevelExpr::VectorSum, F.profiles(), b.eps, region, grid_n);
    b.area = b.fraction * region.area();
    b.constant = b.area > 0.0 ? b.lhs / b.area : (b.lhs > 0.0 ? std::numeric_limits<double>::infinity() : 0.0);
    return b;
}

// ---------------------------------------------------------------------------
// The set M: (m, s) cells with |s| <= s_extent lambda^{-gamma} where the frequency functions
// are stationary at the witness and f1's local coefficient at k1 is large.

// k_j(m_j, s) for j = 0, 1, 2
using FrequencyFunction = std::function<double(int, long, double)>;

enum class FloorPolicy { Error, Exclude };

struct BigMOptions {
    int s_points_per_cell = 64;      // points per lambda^{-gamma} of s
    double s_extent = 1.0;           // |s| <= s_extent * lambda^{-gamma}
    double stationarity_scale = 1.0; // |sum k_j grad phi_j| <= scale * lambda^rho
    double coefficient_scale = 0.1;  // |a_{m1,s,k1}| >= scale * lambda^{-delta1}
    FloorPolicy floor = FloorPolicy::Error;
};

struct BigMCensus {
    double lambda = 0.0;
    std::size_t n_interacting = 0;
    std::size_t cells = 0;             // (m, s) cells examined
    std::size_t stationary_cells = 0;  // cells passing the stationarity test
    std::size_t excluded_cells = 0;    // below the k1 floor under FloorPolicy::Exclude
    std::size_t counted_cells = 0;
    double ds = 0.0;
    double measure = 0.0;        // counted_cells * ds
    double trivial_bound = 0.0;  // lambda^gamma
    double ratio = 0.0;          // measure / trivial_bound
};

inline BigMCensus bigM_measure(const PhaseSystem& sys, const InteractionTable& t, const FrequencyFunction& k,
                               const FourierFunction1D& f1, const ParameterLadder& p, const BigMOptions& opt = {}) {
    if (opt.s_points_per_cell < 1) throw GuardError("bigM: s resolution must be positive");
    const double lam = t.lambda, ell = t.cell;
    const double floor_k = std::pow(lam, p.tau0);
    const double stat_thr = opt.stationarity_scale * std::pow(lam, p.rho);
    const double coef_thr = opt.coefficient_scale * std::pow(lam, -p.delta1);
    const int ns = std::max(1, static_cast<int>(std::lround(2.0 * opt.s_extent * opt.s_points_per_cell)));
    const double smax = opt.s_extent * ell, ds = 2.0 * smax / ns;
    const auto tuples = strict_tuples(t);

    BigMCensus c;
    c.lambda = lam;
    c.n_interacting = tuples.size();
    c.ds = ds;
    c.trivial_bound = std::pow(lam, t.gamma);
    c.cells = tuples.size() * static_cast<std::size_t>(ns);
    if (tuples.empty()) return c;

    // stage 1: floor check and stationarity, per tuple
    std::vector<std::vector<char>> stat(tuples.size(), std::vector<char>(static_cast<std::size_t>(ns), 0));
    std::vector<std::size_t> excluded(tuples.size(), 0);
    parallel_for(tuples.size(), [&](std::size_t ti) {
        const auto& e = tuples[ti];
        for (int si = 0; si < ns; ++si) {
            const double s = -smax + (si + 0.5) * ds;
            const double k1 = k(0, e.m[0], s);
            if (!(std::abs(k1) >= floor_k)) {
                if (opt.floor == FloorPolicy::Error)
                    throw GuardError("bigM: |k1(m, s)| >= lambda^tau0 fails at cell " + std::to_string(e.m[0]) + ", s = " + std::to_string(s));
                ++excluded[ti];
                continue;
            }
            double a = 0.0, b = 0.0;
            for (int j = 0; j < 3; ++j) {
                const double kj = j == 0 ? k1 : k(j, e.m[j], s);
                a += kj * e.gradients[j][0];
                b += kj * e.gradients[j][1];
            }
            if (std::hypot(a, b) <= stat_thr) stat[ti][static_cast<std::size_t>(si)] = 1;
        }
    });

    // stage 2: coefficient largeness depends only on (m1, s, k1); evaluate each once
    std::map<std::pair<long, int>, double> need;
    for (std::size_t ti = 0; ti < tuples.size(); ++ti)
        for (int si = 0; si < ns; ++si)
            if (stat[ti][static_cast<std::size_t>(si)]) need.emplace(std::make_pair(tuples[ti].m[0], si), 0.0);
    std::vector<std::pair<long, int>> keys;
    for (const auto& [key, v] : need) keys.push_back(key);
    std::vector<double> mag(keys.size(), 0.0);
    const PartitionOfUnity pou(ell);
    const SampledFunction table(f1, 16);
    parallel_for(keys.size(), [&](std::size_t q) {
        const auto [m1, si] = keys[q];
        const double s = -smax + (si + 0.5) * ds;
        const int k1 = static_cast<int>(std::lround(k(0, m1, s)));
        const auto w = local_fourier_coefficients([&](double y) { return table(y); }, f1, pou, m1, s, k1, k1);
        mag[q] = std::abs(w.values[0]);
    });
    for (std::size_t q = 0; q < keys.size(); ++q) need[keys[q]] = mag[q];

    for (std::size_t ti = 0; ti < tuples.size(); ++ti) {
        c.excluded_cells += excluded[ti];
        for (int si = 0; si < ns; ++si) {
            if (!stat[ti][static_cast<std::size_t>(si)]) continue;
            ++c.stationary_cells;
            if (need.at({tuples[ti].m[0], si}) >= coef_thr) ++c.counted_cells;
        }
    }
    c.measure = static_cast<double>(c.counted_cells) * ds;
    c.ratio = c.measure / c.trivial_bound;
    return c;
}

}  // namespace osclab
