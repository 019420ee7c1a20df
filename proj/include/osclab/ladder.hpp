// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <array>
#include <cmath>
#include <optional>
#include <sstream>
#include <string>

#include "osclab/core.hpp"

namespace osclab {

// Exponents chosen in order gamma, tau0, rho0, delta0, delta1, delta3, delta4,
// delta_star[0..3], rho. delta2 and delta5 are outputs of other estimates, never
// inputs; they stay empty unless a caller has measured them.
struct ParameterLadder {
    double gamma = 0.75;
    double tau0 = 0.10;
    double rho0 = 0.05;
    double rho = 0.02;
    double delta0 = 0.01;
    double delta1 = 0.008;
    double delta3 = 0.004;
    double delta4 = 0.004;
    std::array<double, 4> delta_star{0.01, 0.01, 0.01, 0.01};
    // the constant C in C*delta3 + delta4 < tau0/2
    double c_delta3 = 4.0;

    std::optional<double> delta2;
    std::optional<double> delta5;

    // Throws ConfigError naming the first violated inequality.
    void validate() const {
        auto fail = [](const std::string& what, double lhs, double rhs) {
            std::ostringstream os;
            os << "ladder violates " << what << " (" << lhs << " vs " << rhs << ")";
            throw ConfigError(os.str());
        };
        for (double v : {gamma, tau0, rho0, rho, delta0, delta1, delta3, delta4, c_delta3})
            if (!std::isfinite(v)) throw ConfigError("ladder contains a non-finite value");
        if (!(gamma > 0.5)) fail("gamma > 1/2", gamma, 0.5);
        if (!(gamma < 1.0)) fail("gamma < 1", gamma, 1.0);
        if (!(tau0 > 0.0)) fail("tau0 > 0", tau0, 0.0);
        if (!(rho0 > 0.0)) fail("rho0 > 0", rho0, 0.0);
        if (!(rho > 0.0)) fail("rho > 0", rho, 0.0);
        if (!(rho <= rho0)) fail("rho <= rho0", rho, rho0);
        if (!(gamma + tau0 < 1.0)) fail("gamma + tau0 < 1", gamma + tau0, 1.0);
        if (!(tau0 + gamma + rho0 < 1.0)) fail("tau0 + gamma + rho0 < 1", tau0 + gamma + rho0, 1.0);
        if (!(delta0 > 0.0 && delta1 > 0.0 && delta3 > 0.0 && delta4 > 0.0)) fail("delta0, delta1, delta3, delta4 > 0", 0.0, 0.0);
        for (double d : delta_star)
            if (!(d > 0.0)) fail("delta_star > 0", d, 0.0);
        if (!(rho0 < tau0)) fail("rho0 < tau0 (chosen after tau0)", rho0, tau0);
        if (!(delta0 < rho0)) fail("delta0 < rho0 (chosen after rho0)", delta0, rho0);
        if (!(delta1 <= delta0)) fail("delta1 <= delta0", delta1, delta0);
        if (!(delta3 < delta1)) fail("delta3 < delta1", delta3, delta1);
        if (!(delta4 <= delta1)) fail("delta4 <= delta1 (chosen after delta1)", delta4, delta1);
        for (double d : delta_star)
            if (!(d <= delta0)) fail("delta_star <= delta0 (chosen after delta0)", d, delta0);
        if (!(c_delta3 * delta3 + delta4 < 0.5 * tau0)) fail("C*delta3 + delta4 < tau0/2", c_delta3 * delta3 + delta4, 0.5 * tau0);
        if (!(rho < 0.25 * tau0)) fail("rho < tau0/4", rho, 0.25 * tau0);
        if (delta2 && !(delta1 < tau0 * *delta2 / 8.0)) fail("delta1 < tau0*delta2/8", delta1, tau0 * *delta2 / 8.0);
    }

    // lambda^{-(1 - gamma - tau0 - rho)}: the sublevel threshold paired with stationary counts
    double bridge_eps(double lambda) const { return std::pow(lambda, -(1.0 - gamma - tau0 - rho)); }
    double stationarity_threshold(double lambda) const { return std::pow(lambda, gamma + tau0 + rho); }
};

inline ParameterLadder default_ladder() { return {}; }

}  // namespace osclab
