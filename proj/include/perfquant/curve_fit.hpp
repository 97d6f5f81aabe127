// Levenberg-Marquardt estimation of the kinetic parameters from an AIF and
// tissue curve, with box bounds via a logistic reparameterisation and
// Latin-hypercube multi-start.
#pragma once

#include <array>
#include <cstdint>
#include <functional>

#include "perfquant/kinetics.hpp"

namespace perfquant {

/// Box bounds over (Fp, vp, ve, PS, delay).
struct FitBounds {
    std::array<double, 5> lower{0.01, 0.001, 0.001, 0.0, 0.0};
    std::array<double, 5> upper{10.0, 0.5, 0.8, 5.0, 10.0};

    void validate() const;
    KineticParams clamp_inside(const KineticParams& p, double margin = 1e-6) const;
};

struct FitResult {
    KineticParams params;
    double rss = 0.0;
    bool converged = false;
    int n_iter = 0;       ///< iterations used by the winning start
    int start_index = 0;  ///< which multi-start seed won
};

struct FitOptions {
    int n_starts = 10;
    int max_iter = 500;
    std::uint64_t seed = 0;   ///< drives the Latin-hypercube starts
    bool fit_delay = true;    ///< when false, delay is frozen at fixed_delay
    double fixed_delay = 0.0;
    /// Optional per-accepted-step observer (iteration, rss); used by tests.
    std::function<void(int, double)> trace;
};

/// r_i = y_i - C_p(t_i) on the tissue grid.
std::vector<double> residuals(const KineticParams& p, const SampledCurve& aif,
                              const SampledCurve& tissue);

double rss_of(const std::vector<double>& r);

/// Best-of-n_starts damped Gauss-Newton fit. Throws ValidationError for a
/// degenerate (identically zero) tissue curve, and a runtime error when no
/// start converges within max_iter.
FitResult fit_nlls(const SampledCurve& aif, const SampledCurve& tissue,
                   const FitBounds& bounds, const FitOptions& opt = {});

}  // namespace perfquant
