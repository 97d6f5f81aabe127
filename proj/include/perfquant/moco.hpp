// Translation-only motion estimation and the two-stage correction scheme:
// register on the RPCA low-rank component, then clean up residual motion
// against a PCA-denoised reconstruction.
#pragma once

#include "perfquant/image_series.hpp"
#include "perfquant/rpca.hpp"

namespace perfquant {

/// Per-frame displacement relative to the reference frame, pixels.
struct MotionEstimate {
    std::vector<double> dy;
    std::vector<double> dx;
    int reference_index = 0;
};

/// Translates image content by (dy, dx) pixels with bilinear resampling,
/// edge values clamped.
Eigen::MatrixXd shift_bilinear(const Eigen::MatrixXd& img, double dy, double dx);

/// Integer-search normalized cross-correlation against the reference frame,
/// refined to sub-pixel by quadratic interpolation of the correlation peak.
/// A flat frame (undefined correlation) yields a zero shift.
MotionEstimate register_translation(const ImageSeries& series, int reference_index,
                                    int max_shift = 8);

struct MocoConfig {
    double lambda = 0.0;        ///< RPCA weight; <= 0 selects 1/sqrt(max dim)
    double mu = 0.0;            ///< RPCA penalty; <= 0 selects the default
    double tol = 1e-7;
    int max_iter = 500;
    int reference_index = -1;   ///< < 0 selects the middle frame
    int max_shift = 8;
    double pca_variance = 0.95; ///< variance fraction retained in stage 2
    int stage1_passes = 3;      ///< decompose+register repetitions (early-stopped)
    int stage2_passes = 3;      ///< residual re-registration passes
};

struct MocoResult {
    ImageSeries corrected;
    MotionEstimate shifts;      ///< composite stage-1 + stage-2 estimate
    int rpca_iterations = 0;
    double rpca_residual = 0.0;
};

/// Stage 1: RPCA on the Casorati matrix, registration on the low-rank frames,
/// shifts undone on the original frames. Stage 2: PCA truncation of the
/// corrected series, re-registration of each frame to its own reconstruction.
/// A single composite resample of the originals produces the output.
MocoResult motion_correct(const ImageSeries& series, const MocoConfig& config = {});

}  // namespace perfquant
