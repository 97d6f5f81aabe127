// Saturation-recovery spoiled gradient-echo signal model: signal <-> T1 <->
// gadolinium concentration conversions and dual-bolus AIF construction.
#pragma once

#include <span>

#include "perfquant/types.hpp"

namespace perfquant {

/// Acquisition constants of the signal equation. Defaults follow a 3T
/// perfusion protocol (TR 3 ms, TSAT 120 ms, flip 15 deg, gadovist r1 4.5).
struct SequenceParams {
    double TR = 0.003;       ///< repetition time, s
    double TSAT = 0.120;     ///< saturation delay to k-space centre, s
    double alpha_deg = 15.0; ///< flip angle, degrees
    int n = 40;              ///< excitation pulses to k-space centre
    double r1 = 4.5;         ///< relaxivity, L/mmol/s
    double T10 = 1.2;        ///< pre-contrast T1, s
    double S0 = 1.0;         ///< baseline signal level, a.u.
    double psi = 1.0;        ///< scale factor absorbing coil sensitivities/gains

    void validate() const;
};

/// S = psi S0 [(1 - e^{-TSAT/T1}) a^{n-1} + (1 - e^{-TR/T1}) (1-a^{n-1})/(1-a)]
/// with a = cos(alpha) e^{-TR/T1}. Strictly decreasing in T1 for the defaults.
double signal_from_T1(const SequenceParams& seq, double T1);

/// psi such that the model reproduces the mean of the pre-contrast signals at
/// T1 = T10: psi = mean(baseline) / signal_from_T1(seq with psi = 1, T10).
double estimate_psi(const SequenceParams& seq, std::span<const double> baseline_signals);

/// Inverts signal_from_T1 by bisection on [bracket_lo, bracket_hi].
/// Throws ValidationError when s is above the attainable maximum (signal at
/// bracket_lo) or below the value at bracket_hi (non-bracketing).
double T1_from_signal(const SequenceParams& seq, double s, double bracket_lo = 1e-3,
                      double bracket_hi = 10.0);

/// [Gd] = (1/T1 - 1/T10) / r1, mmol/L. May be negative for noisy T1 > T10.
double gd_from_T1(const SequenceParams& seq, double T1);

/// Inverse relaxivity relation: T1 = 1 / (1/T10 + r1 c).
double T1_from_concentration(const SequenceParams& seq, double c);

struct ConversionStats {
    int clamped_negative = 0;  ///< samples where noise drove [Gd] below zero
};

/// Per-sample signal -> T1 -> [Gd] conversion. The input must be a signal
/// curve; out_kind tags the result (aif or tissue). Negative concentrations
/// are clamped to zero and counted. Per-sample failures are rethrown with the
/// sample index.
SampledCurve concentration_from_signal(const SequenceParams& seq, const SampledCurve& curve,
                                       CurveKind out_kind, ConversionStats* stats = nullptr);

/// Linear low-concentration approximation C ~= (1/(T10 r1)) (S - S(0))/S(0),
/// with S(0) the mean of the first n_baseline samples.
SampledCurve relative_enhancement(const SampledCurve& curve, const SequenceParams& seq,
                                  int n_baseline = 3);

/// Scales a pre-bolus AIF (concentration units) to main-bolus amplitude and
/// shifts its clock so t = 0 of the pre-bolus lands at main_bolus_start.
SampledCurve build_dual_bolus_aif(const SampledCurve& prebolus_aif, double scale,
                                  double main_bolus_start);

}  // namespace perfquant
