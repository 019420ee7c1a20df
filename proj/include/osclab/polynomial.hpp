// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <map>
#include <sstream>
#include <string>
#include <tuple>
#include <utility>
#include <vector>

#include <gmpxx.h>

#include "osclab/core.hpp"

namespace osclab {

// Polynomial in one variable, coefficients in increasing degree.
struct Poly1D {
    std::vector<double> coef;

    Poly1D() = default;
    Poly1D(std::initializer_list<double> c) : coef(c) {}
    explicit Poly1D(std::vector<double> c) : coef(std::move(c)) {}

    double operator()(double t) const {
        double acc = 0.0;
        for (auto it = coef.rbegin(); it != coef.rend(); ++it) acc = acc * t + *it;
        return acc;
    }

    Poly1D derivative() const {
        Poly1D d;
        for (std::size_t k = 1; k < coef.size(); ++k) d.coef.push_back(static_cast<double>(k) * coef[k]);
        return d;
    }

    int degree() const {
        for (int k = static_cast<int>(coef.size()) - 1; k >= 0; --k)
            if (coef[k] != 0.0) return k;
        return -1;
    }
};

// Sparse bivariate polynomial sum c_{ij} x1^i x2^j with exact rational coefficients, so that
// identities such as V(phi) = 0 or d(a + b) = da + db hold exactly. Doubles convert to rationals
// without rounding; evaluation uses a cached double copy.
class BivariatePolynomial {
public:
    using Key = std::pair<int, int>;

    BivariatePolynomial() = default;

    static BivariatePolynomial monomial(int i, int j, double c = 1.0) {
        BivariatePolynomial p;
        p.add_term(i, j, c);
        return p;
    }
    static BivariatePolynomial constant(double c) { return monomial(0, 0, c); }
    static BivariatePolynomial x1() { return monomial(1, 0); }
    static BivariatePolynomial x2() { return monomial(0, 1); }

    void add_term(int i, int j, double c) { add_exact(i, j, mpq_class(c)); refresh(); }

    // coefficient as double
    double coefficient(int i, int j) const {
        auto it = terms_.find({i, j});
        return it == terms_.end() ? 0.0 : it->second.get_d();
    }
    std::vector<std::tuple<int, int, double>> terms() const { return cache_; }
    bool is_zero() const { return terms_.empty(); }

    int total_degree() const { return degree_; }

    double operator()(double a, double b) const {
        const int d = std::max(0, degree_);
        double pa[16], pb[16];
        std::vector<double> va, vb;
        double* A = pa;
        double* B = pb;
        if (d >= 16) {
            va.resize(d + 1);
            vb.resize(d + 1);
            A = va.data();
            B = vb.data();
        }
        A[0] = B[0] = 1.0;
        for (int k = 1; k <= d; ++k) {
            A[k] = A[k - 1] * a;
            B[k] = B[k - 1] * b;
        }
        double acc = 0.0;
        for (const auto& [i, j, c] : cache_) acc += c * A[i] * B[j];
        return acc;
    }
    double operator()(Point2 x) const { return (*this)(x.x1, x.x2); }

    BivariatePolynomial d1() const {
        BivariatePolynomial r;
        for (const auto& [k, c] : terms_)
            if (k.first > 0) r.add_exact(k.first - 1, k.second, c * k.first);
        r.refresh();
        return r;
    }
    BivariatePolynomial d2() const {
        BivariatePolynomial r;
        for (const auto& [k, c] : terms_)
            if (k.second > 0) r.add_exact(k.first, k.second - 1, c * k.second);
        r.refresh();
        return r;
    }

    friend BivariatePolynomial operator+(BivariatePolynomial a, const BivariatePolynomial& b) {
        for (const auto& [k, c] : b.terms_) a.add_exact(k.first, k.second, c);
        a.refresh();
        return a;
    }
    friend BivariatePolynomial operator-(BivariatePolynomial a, const BivariatePolynomial& b) {
        for (const auto& [k, c] : b.terms_) a.add_exact(k.first, k.second, -c);
        a.refresh();
        return a;
    }
    friend BivariatePolynomial operator*(const BivariatePolynomial& a, const BivariatePolynomial& b) {
        BivariatePolynomial r;
        for (const auto& [ka, ca] : a.terms_)
            for (const auto& [kb, cb] : b.terms_) r.add_exact(ka.first + kb.first, ka.second + kb.second, ca * cb);
        r.refresh();
        return r;
    }
    friend BivariatePolynomial operator*(double s, BivariatePolynomial a) {
        if (s == 0.0) return {};
        const mpq_class q(s);
        for (auto& [k, c] : a.terms_) c *= q;
        a.refresh();
        return a;
    }
    friend bool operator==(const BivariatePolynomial& a, const BivariatePolynomial& b) { return a.terms_ == b.terms_; }

    // "i j c; i j c; ..." matching the config triple syntax
    std::string to_string() const {
        std::ostringstream os;
        os.precision(17);
        bool first = true;
        for (const auto& [i, j, c] : cache_) {
            if (!first) os << "; ";
            os << i << ' ' << j << ' ' << c;
            first = false;
        }
        return os.str();
    }

private:
    void add_exact(int i, int j, const mpq_class& c) {
        if (i < 0 || j < 0) throw ConfigError("negative exponent in polynomial term");
        if (c == 0) return;
        auto [it, inserted] = terms_.try_emplace({i, j}, c);
        if (!inserted) {
            it->second += c;
            if (it->second == 0) terms_.erase(it);
        }
    }
    void refresh() {
        cache_.clear();
        degree_ = -1;
        for (const auto& [k, c] : terms_) {
            cache_.emplace_back(k.first, k.second, c.get_d());
            degree_ = std::max(degree_, k.first + k.second);
        }
    }

    std::map<Key, mpq_class> terms_;
    std::vector<std::tuple<int, int, double>> cache_;
    int degree_ = -1;
};

}  // namespace osclab
