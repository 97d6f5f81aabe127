// Synthetic ground truth: gamma-variate AIF, annular myocardium with optional
// perfusion defects, signal synthesis through the full forward chain, and
// noise/motion injection. Everything is deterministic given the seed.
#pragma once

#include <array>
#include <cstdint>
#include <optional>
#include <vector>

#include "perfquant/analysis.hpp"
#include "perfquant/image_series.hpp"
#include "perfquant/kinetics.hpp"
#include "perfquant/signal_model.hpp"

namespace perfquant {

/// c(t) = peak-normalised (t-t0)^shape exp(-(t-t0)/scale) for t > t0.
struct AifSpec {
    double peak = 5.0;     ///< main-bolus peak, mmol/L (blood)
    double shape = 2.5;
    double scale_s = 4.0;
    double onset_s = 5.0;
    double prebolus_fraction = 0.1;  ///< pre-bolus dose as a fraction of main

    SampledCurve main_bolus(int nt, double dt) const;
};

struct DefectSpec {
    double angle_start_deg = 0.0;  ///< ccw from the anterior RV insertion ray
    double angle_end_deg = 0.0;
    int layer = 2;                 ///< 0 endo, 1 epi, 2 both
    KineticParams params;
};

struct MotionSpec {
    enum class Type { none, sinusoid, trace };
    Type type = Type::none;
    double amplitude_y = 0.0;  ///< px
    double amplitude_x = 0.0;
    double period_s = 5.0;
    std::vector<double> trace_dy, trace_dx;  ///< used when type == trace

    std::vector<std::array<double, 2>> per_frame(int nt, double dt) const;
};

struct PhantomSpec {
    int ny = 64, nx = 64;
    int nt = 90;
    double dt = 1.0;              ///< s
    double centre_y = 32.0, centre_x = 32.0;
    double r_inner = 14.0, r_outer = 24.0;   ///< annulus, px
    double lv_radius = 9.0;                  ///< LV pool disk at the centre
    double rv_centre_y = 32.0, rv_centre_x = 6.0;
    double rv_radius = 5.0;
    double rv_insertion_angle_deg = 90.0;    ///< anterior insertion ray, ccw from +x
    KineticParams background{1.155, 0.08, 0.18, 0.65, 0.0};
    std::vector<DefectSpec> defects;
    AifSpec aif;
    double noise_sd = 0.0;        ///< additive Gaussian, signal units
    MotionSpec motion;
    SequenceParams seq;           ///< T10 = tissue baseline
    double T10_blood = 1.6;       ///< s, pools
    PhysioConstants physio;
    double S0 = 1000.0;           ///< baseline signal level
    double background_level = 0.06;   ///< static background intensity (fraction of S0)
    double texture_amplitude = 0.40;  ///< smooth random texture (multiplicative)
    int n_baseline_frames = 3;    ///< pre-contrast frames (AIF onset must respect this)

    void validate() const;
};

struct PhantomOutput {
    ImageSeries series;           ///< noisy, moved signal frames
    Eigen::MatrixXd truth_Fp, truth_vp, truth_ve, truth_PS, truth_delay;
    Eigen::MatrixXd truth_mbf;    ///< blood units, ml/min/g
    Eigen::MatrixXd mask;         ///< 1 inside the annulus
    std::array<PixelPoint, 2> rv_points;
    PixelPoint centroid;
    SampledCurve aif_blood;       ///< main-bolus blood concentration (ground truth)
    SampledCurve aif_prebolus_signal;  ///< unsaturated pre-bolus LV signal curve
    std::vector<std::array<double, 2>> motion;  ///< injected (dy, dx) per frame
    std::vector<double> times;
    std::map<std::string, int> territory_truth;  ///< territory name -> defect present
};

PhantomOutput generate_phantom(const PhantomSpec& spec, std::uint64_t seed);

}  // namespace perfquant
