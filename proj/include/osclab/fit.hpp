// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cmath>
#include <string>
#include <vector>

#include "osclab/core.hpp"

namespace osclab {

// Least-squares line through (log x, log y): y ~ prefactor * x^slope.
struct PowerLaw {
    double slope = 0.0;
    double prefactor = 0.0;
    double r2 = 0.0;
    std::size_t points = 0;
};

inline PowerLaw fit_loglog(const std::vector<double>& x, const std::vector<double>& y, std::size_t min_points = 2) {
    if (x.size() != y.size()) throw GuardError("fit: mismatched series");
    std::vector<double> lx, ly;
    for (std::size_t i = 0; i < x.size(); ++i) {
        if (x[i] > 0.0 && y[i] > 0.0 && std::isfinite(x[i]) && std::isfinite(y[i])) {
            lx.push_back(std::log(x[i]));
            ly.push_back(std::log(y[i]));
        }
    }
    if (lx.size() < min_points)
        throw FitRefused("power-law fit needs at least " + std::to_string(min_points) + " usable points, have " +
                         std::to_string(lx.size()));
    const double n = static_cast<double>(lx.size());
    double mx = 0.0, my = 0.0;
    for (std::size_t i = 0; i < lx.size(); ++i) {
        mx += lx[i];
        my += ly[i];
    }
    mx /= n;
    my /= n;
    double sxx = 0.0, sxy = 0.0, syy = 0.0;
    for (std::size_t i = 0; i < lx.size(); ++i) {
        sxx += (lx[i] - mx) * (lx[i] - mx);
        sxy += (lx[i] - mx) * (ly[i] - my);
        syy += (ly[i] - my) * (ly[i] - my);
    }
    if (sxx == 0.0) throw FitRefused("power-law fit: abscissae are all equal");
    PowerLaw out;
    out.slope = sxy / sxx;
    out.prefactor = std::exp(my - out.slope * mx);
    double sse = 0.0;
    for (std::size_t i = 0; i < lx.size(); ++i) {
        const double r = ly[i] - (my + out.slope * (lx[i] - mx));
        sse += r * r;
    }
    out.r2 = syy == 0.0 ? 1.0 : 1.0 - sse / syy;
    out.points = lx.size();
    return out;
}

}  // namespace osclab
