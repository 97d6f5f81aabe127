// Two-compartment exchange model: analytic residue function, forward
// convolution with the AIF, an independent ODE reference solution, bolus
// delay, and plasma-to-blood unit conversions.
#pragma once

#include <span>

#include "perfquant/types.hpp"

namespace perfquant {

/// Roots of the transfer-function denominator and the partial-fraction weight.
///
/// The denominator is s^2 + s*(Fp/vp + PS/vp + PS/ve) + (Fp/vp)*(PS/ve) with
/// flows in 1/s. alpha is the root of larger magnitude (fast mode), and
/// A = (alpha + PS/vp + PS/ve) / (alpha - beta).
///
/// When |alpha - beta| < 1e-10 * max(|alpha|,|beta|) the partial fraction is
/// ill-conditioned and the confluent limit is used instead: `confluent` is set
/// and `A` holds the linear coefficient of R(t)/Fp = e^{alpha t} (1 + A t),
/// i.e. A = alpha + PS/vp + PS/ve in 1/s.
struct ResidueCoefficients {
    double alpha = 0.0;  ///< 1/s, root of larger magnitude; <= 0 for valid params
    double beta = 0.0;   ///< 1/s, slow root; <= 0 for valid params
    double A = 1.0;      ///< partial-fraction weight (dimensionless), or 1/s when confluent
    bool confluent = false;
};

struct DegenerateRootsError : ValidationError {
    using ValidationError::ValidationError;
};

ResidueCoefficients residue_coefficients(const KineticParams& p,
                                         bool allow_confluent = true);

/// Residue function R(t) = Fp * (A e^{alpha t} + (1-A) e^{beta t}).
/// R(0) = Fp in the same ml/min/ml units as p.Fp; non-increasing in t.
double residue_function(const KineticParams& p, double t);
double residue_function(double Fp_ml_min_ml, const ResidueCoefficients& rc, double t);

/// Tissue concentration C(t) = (Fp R(t)/Fp) * C_aif(t) evaluated at `times`.
///
/// The AIF must lie on a uniform grid covering [0, max(times)] and `times`
/// must be a subset of that grid. The delay-shifted AIF is treated as
/// piecewise linear between samples and convolved with the residue
/// exponentials in closed form per segment, so the only discretisation in
/// the result is the linear interpolation of the AIF itself.
SampledCurve forward_model(const KineticParams& p, const SampledCurve& aif,
                           std::span<const double> times);

/// Independent reference solution: classical RK4 on the coupled compartment
/// ODEs
///   vp dCp/dt = Fp (C_aif(t) - Cp) + PS (Ce - Cp)
///   ve dCe/dt = PS (Cp - Ce)
/// with the AIF interpolated linearly at half-steps; returns vp Cp + ve Ce.
///
/// `step` is the integration step in seconds. step = 0 picks the largest
/// divisor of the grid spacing satisfying the stability guard
/// step * max(|alpha|,|beta|) <= 0.1; an explicit step violating the guard
/// throws ValidationError.
SampledCurve ode_reference(const KineticParams& p, const SampledCurve& aif,
                           std::span<const double> times, double step = 0.0);

/// Right-shift by tau seconds with linear interpolation back onto the
/// original grid; samples before the shifted support are zero.
SampledCurve apply_delay(const SampledCurve& aif, double tau);

struct BloodUnits {
    double Fb;  ///< myocardial blood flow, ml/min/g
    double vb;  ///< fractional blood volume
};

/// Fb = Fp / ((1-hct) * density), vb = vp / (1-hct).
BloodUnits to_blood_units(const KineticParams& p, const PhysioConstants& c);

}  // namespace perfquant
