// Shared fixtures for the test suites.
#pragma once

#include <cmath>
#include <vector>

#include "perfquant/types.hpp"

namespace perfquant::testing {

inline SampledCurve gamma_aif(int nt, double dt, double peak = 5.0, double shape = 2.5,
                              double scale = 4.0, double onset = 5.0) {
    SampledCurve c;
    c.kind = CurveKind::aif;
    c.times.resize(static_cast<std::size_t>(nt));
    c.values.assign(static_cast<std::size_t>(nt), 0.0);
    double vmax = 0.0;
    for (int i = 0; i < nt; ++i) {
        const double t = i * dt;
        c.times[static_cast<std::size_t>(i)] = t;
        if (t > onset) {
            const double x = t - onset;
            c.values[static_cast<std::size_t>(i)] = std::pow(x, shape) * std::exp(-x / scale);
            vmax = std::max(vmax, c.values[static_cast<std::size_t>(i)]);
        }
    }
    if (vmax > 0.0)
        for (auto& v : c.values) v *= peak / vmax;
    return c;
}

inline SampledCurve boxcar_aif(int nt, double dt, double level = 1.0, double width = 10.0) {
    SampledCurve c;
    c.kind = CurveKind::aif;
    c.times.resize(static_cast<std::size_t>(nt));
    c.values.resize(static_cast<std::size_t>(nt));
    for (int i = 0; i < nt; ++i) {
        const double t = i * dt;
        c.times[static_cast<std::size_t>(i)] = t;
        c.values[static_cast<std::size_t>(i)] = (t > 0.0 && t <= width) ? level : 0.0;
    }
    return c;
}

inline double rel_l2(const std::vector<double>& a, const std::vector<double>& b) {
    double num = 0.0, den = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) {
        num += (a[i] - b[i]) * (a[i] - b[i]);
        den += b[i] * b[i];
    }
    return den > 0.0 ? std::sqrt(num / den) : std::sqrt(num);
}

}  // namespace perfquant::testing
