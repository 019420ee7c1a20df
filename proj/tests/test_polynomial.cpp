// SPDX-License-Identifier: Apache-2.0
#include <gtest/gtest.h>

#include "osclab/polynomial.hpp"

using namespace osclab;
using P = BivariatePolynomial;

TEST(Polynomial, EvaluatesMonomialsAndSums) {
    const P p = P::x1() + P::x2() + P::x1() * P::x1();
    EXPECT_NEAR(p(0.1, 0.2), 0.31, 1e-15);
    EXPECT_DOUBLE_EQ(P::x1()(0.3, 0.5), 0.3);
    EXPECT_EQ(P{}(1.7, -2.0), 0.0);
}

TEST(Polynomial, DifferentiationShufflesCoefficients) {
    P p;
    p.add_term(3, 2, 2.0);  // 2 x1^3 x2^2
    P d1 = p.d1(), d2 = p.d2();
    EXPECT_EQ(d1, P::monomial(2, 2, 6.0));
    EXPECT_EQ(d2, P::monomial(3, 1, 4.0));
    EXPECT_TRUE(P::constant(5.0).d1().is_zero());
}

TEST(Polynomial, CancellingTermsAreRemoved) {
    P p = P::x1() - P::x1();
    EXPECT_TRUE(p.is_zero());
    EXPECT_EQ(p.total_degree(), -1);
}

TEST(Polynomial, ProductMatchesPointwiseProduct) {
    const P a = P::x1() + 2.0 * P::x2() + P::constant(0.5);
    const P b = P::x1() * P::x2() - P::monomial(0, 2, 3.0);
    for (double u : {-0.7, 0.0, 0.4})
        for (double v : {-0.2, 0.9}) EXPECT_NEAR((a * b)(u, v), a(u, v) * b(u, v), 1e-14);
}

TEST(Polynomial, UnivariateHornerAndDerivative) {
    const Poly1D f{1.0, -2.0, 0.5};  // 1 - 2t + t^2/2
    EXPECT_DOUBLE_EQ(f(2.0), 1.0 - 4.0 + 2.0);
    EXPECT_DOUBLE_EQ(f.derivative()(3.0), -2.0 + 3.0);
    EXPECT_EQ(f.degree(), 2);
}
