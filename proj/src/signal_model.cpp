#include "perfquant/signal_model.hpp"

#include <cmath>
#include <numeric>
#include <string>

namespace perfquant {

namespace {
constexpr double kPi = 3.14159265358979323846;
constexpr double kBisectTol = 1e-12;  // s; see T1_from_signal
}

void SequenceParams::validate() const {
    if (!(TR > 0.0)) throw ValidationError("sequence: TR must be > 0");
    if (!(TSAT > 0.0)) throw ValidationError("sequence: TSAT must be > 0");
    if (!(alpha_deg > 0.0 && alpha_deg < 90.0))
        throw ValidationError("sequence: flip angle must be in (0,90) degrees");
    if (n < 1) throw ValidationError("sequence: n must be >= 1");
    if (!(r1 > 0.0)) throw ValidationError("sequence: r1 must be > 0");
    if (!(T10 > 0.0)) throw ValidationError("sequence: T10 must be > 0");
    if (!(S0 > 0.0)) throw ValidationError("sequence: S0 must be > 0");
}

double signal_from_T1(const SequenceParams& seq, double T1) {
    if (!(T1 > 0.0)) throw ValidationError("signal_from_T1: T1 must be > 0");
    const double a = std::cos(seq.alpha_deg * kPi / 180.0) * std::exp(-seq.TR / T1);
    const double an1 = std::pow(a, seq.n - 1);
    const double sat = -std::expm1(-seq.TSAT / T1);  // 1 - e^{-TSAT/T1}
    const double rep = -std::expm1(-seq.TR / T1);
    // (1-a^{n-1})/(1-a): finite geometric sum; a < 1 for valid sequences
    const double geo = (seq.n == 1) ? 0.0 : (1.0 - an1) / (1.0 - a);
    return seq.psi * seq.S0 * (sat * an1 + rep * geo);
}

double estimate_psi(const SequenceParams& seq, std::span<const double> baseline_signals) {
    if (baseline_signals.empty())
        throw ValidationError("estimate_psi: no baseline samples");
    const double mean =
        std::accumulate(baseline_signals.begin(), baseline_signals.end(), 0.0) /
        static_cast<double>(baseline_signals.size());
    SequenceParams unit = seq;
    unit.psi = 1.0;
    const double f = signal_from_T1(unit, seq.T10);
    if (!(f > 0.0)) throw ValidationError("estimate_psi: model signal at T10 is zero");
    return mean / f;
}

double T1_from_signal(const SequenceParams& seq, double s, double bracket_lo,
                      double bracket_hi) {
    if (!(bracket_lo > 0.0 && bracket_hi > bracket_lo))
        throw ValidationError("T1_from_signal: bad bracket");
    const double s_hi = signal_from_T1(seq, bracket_lo);  // model decreasing in T1
    const double s_lo = signal_from_T1(seq, bracket_hi);
    if (!(s > 0.0) || s > s_hi)
        throw ValidationError("T1_from_signal: signal outside attainable range");
    if (s < s_lo)
        throw ValidationError("T1_from_signal: signal below bracket (T1 > " +
                              std::to_string(bracket_hi) + " s)");

    double lo = bracket_lo, hi = bracket_hi;
    while (hi - lo > kBisectTol) {
        const double mid = 0.5 * (lo + hi);
        if (signal_from_T1(seq, mid) >= s)
            lo = mid;
        else
            hi = mid;
    }
    return 0.5 * (lo + hi);
}

double gd_from_T1(const SequenceParams& seq, double T1) {
    if (!(T1 > 0.0)) throw ValidationError("gd_from_T1: T1 must be > 0");
    return (1.0 / T1 - 1.0 / seq.T10) / seq.r1;
}

double T1_from_concentration(const SequenceParams& seq, double c) {
    return 1.0 / (1.0 / seq.T10 + seq.r1 * c);
}

SampledCurve concentration_from_signal(const SequenceParams& seq, const SampledCurve& curve,
                                       CurveKind out_kind, ConversionStats* stats) {
    curve.validate();
    if (curve.kind != CurveKind::signal)
        throw ValidationError("concentration_from_signal: input is not a signal curve");
    SampledCurve out;
    out.times = curve.times;
    out.kind = out_kind;
    out.values.resize(curve.size());
    for (std::size_t i = 0; i < curve.size(); ++i) {
        double c;
        try {
            c = gd_from_T1(seq, T1_from_signal(seq, curve.values[i]));
        } catch (const ValidationError& e) {
            throw ValidationError("sample " + std::to_string(i) + ": " + e.what());
        }
        if (c < 0.0) {
            c = 0.0;
            if (stats) ++stats->clamped_negative;
        }
        out.values[i] = c;
    }
    return out;
}

SampledCurve relative_enhancement(const SampledCurve& curve, const SequenceParams& seq,
                                  int n_baseline) {
    curve.validate();
    if (n_baseline < 1 || static_cast<std::size_t>(n_baseline) > curve.size())
        throw ValidationError("relative_enhancement: bad baseline count");
    double s0 = 0.0;
    for (int i = 0; i < n_baseline; ++i) s0 += curve.values[static_cast<std::size_t>(i)];
    s0 /= n_baseline;
    if (!(s0 > 0.0)) throw ValidationError("relative_enhancement: zero baseline");

    SampledCurve out;
    out.times = curve.times;
    out.kind = CurveKind::tissue;
    out.values.resize(curve.size());
    const double scale = 1.0 / (seq.T10 * seq.r1);
    for (std::size_t i = 0; i < curve.size(); ++i)
        out.values[i] = scale * (curve.values[i] - s0) / s0;
    return out;
}

SampledCurve build_dual_bolus_aif(const SampledCurve& prebolus_aif, double scale,
                                  double main_bolus_start) {
    prebolus_aif.validate();
    if (!(scale > 0.0)) throw ValidationError("dual bolus: scale must be > 0");
    SampledCurve out = prebolus_aif;
    out.kind = CurveKind::aif;
    for (auto& v : out.values) v *= scale;
    for (auto& t : out.times) t += main_bolus_start;
    return out;
}

}  // namespace perfquant
