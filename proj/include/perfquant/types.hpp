// Core domain types shared across the library.
#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>
#include <vector>

namespace perfquant {

/// Bad input: invalid config, malformed file, violated precondition.
/// The CLI maps this class to exit code 1; everything else to 2.
struct ValidationError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

enum class CurveKind { aif, tissue, signal };

/// A time/value series: AIF, myocardial concentration, or raw signal.
struct SampledCurve {
    std::vector<double> times;   ///< seconds, strictly increasing
    std::vector<double> values;  ///< mmol/L for aif/tissue, arbitrary units for signal
    CurveKind kind = CurveKind::tissue;

    std::size_t size() const { return times.size(); }

    /// Throws ValidationError unless times are strictly increasing, finite,
    /// and the two arrays have equal length.
    void validate() const;

    /// Grid spacing. Throws ValidationError if the grid is not uniform
    /// (relative tolerance 1e-9 on the spacing).
    double uniform_dt() const;
};

/// Two-compartment exchange model parameters.
/// Flows are in ml/min/ml at this boundary; internals convert to 1/s once.
struct KineticParams {
    double Fp = 1.0;     ///< plasma flow, ml/min/ml
    double vp = 0.05;    ///< fractional plasma volume
    double ve = 0.2;     ///< fractional interstitial volume
    double PS = 0.5;     ///< permeability-surface-area product, ml/min/ml
    double delay = 0.0;  ///< bolus arrival delay, s

    /// Fp > 0, 0 < vp < 1, 0 < ve < 1, vp + ve <= 1, PS >= 0, delay >= 0.
    void validate() const;
};

struct PhysioConstants {
    double hct = 0.45;     ///< haematocrit fraction
    double density = 1.05; ///< myocardial specific density, g/ml

    void validate() const;
};

}  // namespace perfquant
