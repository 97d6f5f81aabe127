#include "perfquant/kinetics.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

namespace perfquant {

namespace {

constexpr double kMinPerSec = 1.0 / 60.0;
constexpr double kRootEps = 1e-10;

bool finite_all(const std::vector<double>& v) {
    return std::all_of(v.begin(), v.end(), [](double x) { return std::isfinite(x); });
}

double interp_left_zero(const std::vector<double>& t, const std::vector<double>& v,
                        double x) {
    if (x < t.front()) return 0.0;
    if (x >= t.back()) return v.back();
    auto it = std::upper_bound(t.begin(), t.end(), x);
    std::size_t i = static_cast<std::size_t>(it - t.begin()) - 1;
    double w = (x - t[i]) / (t[i + 1] - t[i]);
    return v[i] + w * (v[i + 1] - v[i]);
}

// expm1(x)/x, stable near zero.
double expm1_over(double x) {
    if (std::abs(x) < 1e-8) return 1.0 + 0.5 * x;
    return std::expm1(x) / x;
}

}  // namespace

void SampledCurve::validate() const {
    if (times.size() != values.size())
        throw ValidationError("curve: times and values lengths differ");
    if (times.size() < 2) throw ValidationError("curve: needs at least 2 samples");
    for (std::size_t i = 1; i < times.size(); ++i)
        if (!(times[i] > times[i - 1]))
            throw ValidationError("curve: times not strictly increasing at sample " +
                                  std::to_string(i));
    if (!finite_all(times) || !finite_all(values))
        throw ValidationError("curve: non-finite entries");
}

double SampledCurve::uniform_dt() const {
    validate();
    double dt = times[1] - times[0];
    for (std::size_t i = 1; i + 1 < times.size(); ++i) {
        double d = times[i + 1] - times[i];
        if (std::abs(d - dt) > 1e-9 * std::max(dt, d))
            throw ValidationError("curve: grid not uniform at sample " + std::to_string(i));
    }
    return dt;
}

void KineticParams::validate() const {
    if (!(Fp > 0.0)) throw ValidationError("params: Fp must be > 0");
    if (!(vp > 0.0 && vp < 1.0)) throw ValidationError("params: vp must be in (0,1)");
    if (!(ve > 0.0 && ve < 1.0)) throw ValidationError("params: ve must be in (0,1)");
    if (vp + ve > 1.0) throw ValidationError("params: vp + ve must be <= 1");
    if (!(PS >= 0.0)) throw ValidationError("params: PS must be >= 0");
    if (!(delay >= 0.0)) throw ValidationError("params: delay must be >= 0");
}

void PhysioConstants::validate() const {
    if (!(hct > 0.0 && hct < 1.0)) throw ValidationError("physio: hct must be in (0,1)");
    if (!(density > 0.0)) throw ValidationError("physio: density must be > 0");
}

ResidueCoefficients residue_coefficients(const KineticParams& p, bool allow_confluent) {
    p.validate();
    const double fp = p.Fp * kMinPerSec;
    const double ps = p.PS * kMinPerSec;
    const double b = fp / p.vp + ps / p.vp + ps / p.ve;
    const double c = (fp / p.vp) * (ps / p.ve);

    // b > 0 and b^2 - 4c = (fp/vp - ps/ve)^2 + (ps/vp)^2 + 2 ps/vp (fp/vp + ps/ve) >= 0,
    // so both roots are real and non-positive.
    const double disc = std::max(0.0, b * b - 4.0 * c);
    const double q = -0.5 * (b + std::sqrt(disc));

    ResidueCoefficients rc;
    rc.alpha = q;                          // larger magnitude (fast mode)
    rc.beta = (q != 0.0) ? c / q : 0.0;    // stable slow root

    const double k = ps / p.vp + ps / p.ve;
    const double sep = std::abs(rc.alpha - rc.beta);
    if (sep < kRootEps * std::max(std::abs(rc.alpha), std::abs(rc.beta))) {
        if (!allow_confluent)
            throw DegenerateRootsError("residue roots degenerate and confluent limit disabled");
        rc.confluent = true;
        rc.A = rc.alpha + k;  // R/Fp = e^{alpha t}(1 + A t)
        return rc;
    }
    rc.A = (rc.alpha + k) / (rc.alpha - rc.beta);
    return rc;
}

double residue_function(double Fp_ml_min_ml, const ResidueCoefficients& rc, double t) {
    if (rc.confluent)
        return Fp_ml_min_ml * std::exp(rc.alpha * t) * (1.0 + rc.A * t);
    return Fp_ml_min_ml *
           (rc.A * std::exp(rc.alpha * t) + (1.0 - rc.A) * std::exp(rc.beta * t));
}

double residue_function(const KineticParams& p, double t) {
    if (t < 0.0) throw ValidationError("residue_function: t must be >= 0");
    return residue_function(p.Fp, residue_coefficients(p), t);
}

namespace {

// Exact convolution of c*e^{lambda u} with a piecewise-linear signal a(t)
// sampled at spacing h: y_{i+1} = e^{lambda h} y_i + a_{i+1} E0 - s_i E1 where
// s_i is the segment slope, E0 = int_0^h e^{lambda w} dw and
// E1 = int_0^h w e^{lambda w} dw (w measured back from t_{i+1}).
struct ExpConvolver {
    double eh, E0, E1;

    ExpConvolver(double lambda, double h) {
        eh = std::exp(lambda * h);
        E0 = h * expm1_over(lambda * h);
        if (std::abs(lambda * h) < 1e-6) {
            E1 = h * h * (0.5 + lambda * h / 3.0);
        } else {
            E1 = (h * eh - E0) / lambda;
        }
    }
};

// Convolution of u*e^{lambda u} with the same signal, propagated as the
// second state of the Jordan pair x1' = lambda x1 + a, x2' = lambda x2 + x1.
// Exact per linear segment; only used in the confluent root case.
struct JordanConvolver {
    double lambda, h, eh, E0, E1, E2;

    JordanConvolver(double lam, double step) : lambda(lam), h(step) {
        eh = std::exp(lambda * h);
        E0 = h * expm1_over(lambda * h);
        if (std::abs(lambda * h) < 1e-6) {
            E1 = h * h * (0.5 + lambda * h / 3.0);
            E2 = h * h * h * (1.0 / 3.0 + lambda * h / 4.0);
        } else {
            E1 = (h * eh - E0) / lambda;
            E2 = (h * h * eh - 2.0 * E1) / lambda;
        }
    }

    // advance (x1, x2) over one segment with a(w) = a1 - s*w, w back from the
    // segment's right edge (a1 = right-edge value, s = slope).
    void step(double& x1, double& x2, double a1, double s) const {
        double f1 = a1 * E0 - s * E1;             // forcing into x1
        double f2 = a1 * E1 - s * E2;             // int w e^{lambda w} a dw
        double nx1 = eh * x1 + f1;
        double nx2 = eh * (x2 + h * x1) + f2;
        x1 = nx1;
        x2 = nx2;
    }
};

std::vector<std::size_t> grid_indices(const SampledCurve& aif,
                                      std::span<const double> times, double dt) {
    std::vector<std::size_t> idx(times.size());
    const double t0 = aif.times.front();
    for (std::size_t i = 0; i < times.size(); ++i) {
        double pos = (times[i] - t0) / dt;
        auto k = static_cast<long>(std::llround(pos));
        if (k < 0 || k >= static_cast<long>(aif.size()) ||
            std::abs(pos - static_cast<double>(k)) > 1e-6)
            throw ValidationError("forward model: requested time " +
                                  std::to_string(times[i]) + " not on the AIF grid");
        idx[i] = static_cast<std::size_t>(k);
    }
    return idx;
}

}  // namespace

SampledCurve forward_model(const KineticParams& p, const SampledCurve& aif,
                           std::span<const double> times) {
    const double dt = aif.uniform_dt();
    if (times.empty()) throw ValidationError("forward model: empty time vector");
    if (times.back() > aif.times.back() + 1e-9)
        throw ValidationError("forward model: AIF grid does not cover requested times");
    const auto idx = grid_indices(aif, times, dt);

    const ResidueCoefficients rc = residue_coefficients(p);
    const SampledCurve input = apply_delay(aif, p.delay);
    const std::size_t n = input.size();

    // R(u)/60 in 1/s so that [1/s]*[mmol/L]*[s] = mmol/L.
    const double fp = p.Fp * kMinPerSec;

    std::vector<double> conv(n, 0.0);
    if (!rc.confluent) {
        const double cA = fp * rc.A;
        const double cB = fp * (1.0 - rc.A);
        ExpConvolver ea(rc.alpha, dt), eb(rc.beta, dt);
        double ya = 0.0, yb = 0.0;
        for (std::size_t i = 0; i + 1 < n; ++i) {
            const double a1 = input.values[i + 1];
            const double s = (input.values[i + 1] - input.values[i]) / dt;
            ya = ea.eh * ya + a1 * ea.E0 - s * ea.E1;
            yb = eb.eh * yb + a1 * eb.E0 - s * eb.E1;
            conv[i + 1] = cA * ya + cB * yb;
        }
    } else {
        // R(u) = Fp e^{alpha u} (1 + A u): propagate the Jordan pair.
        JordanConvolver jc(rc.alpha, dt);
        double x1 = 0.0, x2 = 0.0;
        for (std::size_t i = 0; i + 1 < n; ++i) {
            const double a1 = input.values[i + 1];
            const double s = (input.values[i + 1] - input.values[i]) / dt;
            jc.step(x1, x2, a1, s);
            conv[i + 1] = fp * (x1 + rc.A * x2);
        }
    }

    SampledCurve out;
    out.kind = CurveKind::tissue;
    out.times.assign(times.begin(), times.end());
    out.values.resize(times.size());
    for (std::size_t i = 0; i < times.size(); ++i) out.values[i] = conv[idx[i]];
    return out;
}

SampledCurve ode_reference(const KineticParams& p, const SampledCurve& aif,
                           std::span<const double> times, double step) {
    const double dt = aif.uniform_dt();
    if (times.empty()) throw ValidationError("ode reference: empty time vector");
    if (times.back() > aif.times.back() + 1e-9)
        throw ValidationError("ode reference: AIF grid does not cover requested times");
    const auto idx = grid_indices(aif, times, dt);

    const ResidueCoefficients rc = residue_coefficients(p);
    const double max_rate = std::max(std::abs(rc.alpha), std::abs(rc.beta));

    int sub;
    if (step <= 0.0) {
        sub = std::max(1, static_cast<int>(std::ceil(dt * max_rate / 0.1)));
    } else {
        if (step * max_rate > 0.1)
            throw ValidationError("ode reference: step exceeds stability guard");
        sub = std::max(1, static_cast<int>(std::ceil(dt / step - 1e-9)));
    }
    const double h = dt / sub;

    const SampledCurve input = apply_delay(aif, p.delay);
    const double fp = p.Fp * kMinPerSec;
    const double ps = p.PS * kMinPerSec;

    auto aif_at = [&](double t) {
        return interp_left_zero(input.times, input.values, t);
    };
    auto deriv = [&](double t, double cp, double ce, double& dcp, double& dce) {
        dcp = (fp * (aif_at(t) - cp) + ps * (ce - cp)) / p.vp;
        dce = ps * (cp - ce) / p.ve;
    };

    const std::size_t n = input.size();
    std::vector<double> total(n, 0.0);
    double cp = 0.0, ce = 0.0, t = input.times.front();
    double k1p, k1e, k2p, k2e, k3p, k3e, k4p, k4e;
    for (std::size_t i = 0; i + 1 < n; ++i) {
        for (int s = 0; s < sub; ++s) {
            deriv(t, cp, ce, k1p, k1e);
            deriv(t + 0.5 * h, cp + 0.5 * h * k1p, ce + 0.5 * h * k1e, k2p, k2e);
            deriv(t + 0.5 * h, cp + 0.5 * h * k2p, ce + 0.5 * h * k2e, k3p, k3e);
            deriv(t + h, cp + h * k3p, ce + h * k3e, k4p, k4e);
            cp += h / 6.0 * (k1p + 2.0 * k2p + 2.0 * k3p + k4p);
            ce += h / 6.0 * (k1e + 2.0 * k2e + 2.0 * k3e + k4e);
            t += h;
        }
        t = input.times[i + 1];  // avoid drift
        total[i + 1] = p.vp * cp + p.ve * ce;
    }

    SampledCurve out;
    out.kind = CurveKind::tissue;
    out.times.assign(times.begin(), times.end());
    out.values.resize(times.size());
    for (std::size_t i = 0; i < times.size(); ++i) out.values[i] = total[idx[i]];
    return out;
}

SampledCurve apply_delay(const SampledCurve& aif, double tau) {
    aif.validate();
    if (tau < 0.0) throw ValidationError("apply_delay: tau must be >= 0");
    SampledCurve out = aif;
    if (tau == 0.0) return out;
    for (std::size_t i = 0; i < aif.size(); ++i)
        out.values[i] = interp_left_zero(aif.times, aif.values, aif.times[i] - tau);
    return out;
}

BloodUnits to_blood_units(const KineticParams& p, const PhysioConstants& c) {
    c.validate();
    return {p.Fp / ((1.0 - c.hct) * c.density), p.vp / (1.0 - c.hct)};
}

}  // namespace perfquant
