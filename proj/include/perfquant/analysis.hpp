// Segmental diagnostic analysis: temporal-variance bounding box, AHA segment
// assignment with endo/epi layers, per-territory statistics, threshold
// classification, and ROC analysis.
#pragma once

#include <Eigen/Core>
#include <array>
#include <map>
#include <span>
#include <vector>

#include "perfquant/image_series.hpp"

namespace perfquant {

struct BoundingBox {
    int y0 = 0, x0 = 0;  ///< inclusive
    int y1 = 0, x1 = 0;  ///< exclusive
};

/// Thresholds the per-pixel temporal SD at the given quantile and requires
/// exactly two large connected components (the ventricles); the box is their
/// joint bounding rectangle dilated by `margin`. Throws ValidationError when
/// the component count differs (the documented failure mode).
BoundingBox bounding_box_temporal_variance(const ImageSeries& series,
                                           double threshold_quantile = 0.95,
                                           int margin = 16, int min_area = 20);

enum class SliceLevel { basal, mid, apical };
enum class Territory { LAD, LCx, RCA };

struct PixelPoint {
    double y = 0.0;
    double x = 0.0;
};

/// Angular AHA segments about the LV centroid, anchored at the anterior RV
/// insertion point (rv_points[0]), counterclockwise; 6 sectors for basal/mid,
/// 4 rotated by 45 degrees for apical. Each sector is split endo/epi at the
/// radial midline of the mask along its ray. Returned ids: 0 background,
/// 1..16 endocardial, 17..32 epicardial (base AHA id + 16).
Eigen::MatrixXi assign_segments(const Eigen::MatrixXd& mask,
                                const std::array<PixelPoint, 2>& rv_points,
                                SliceLevel slice_level, const PixelPoint& centroid);

/// AHA base segment (1..16) -> coronary territory per the standard mapping.
Territory territory_of(int base_segment);

/// Mean MBF of each labelled segment present in the image.
std::map<int, double> segment_means(const Eigen::MatrixXd& mbf_map,
                                    const Eigen::MatrixXi& segments);

/// Per territory, the mean of the four lowest segment means. Requires at
/// least four populated segments per territory.
std::map<Territory, double> per_vessel_statistic(const Eigen::MatrixXd& mbf_map,
                                                 const Eigen::MatrixXi& segments);

struct DiagnosticResult {
    std::map<Territory, double> statistic;  ///< ml/min/g
    std::map<Territory, bool> positive;     ///< statistic strictly below threshold
    bool patient_positive = false;
    double threshold = 1.34;
};

DiagnosticResult classify(const std::map<Territory, double>& values,
                          double threshold = 1.34);

struct RocPoint {
    double threshold;
    double sensitivity;
    double specificity;
};

struct RocResult {
    double auc = 0.0;
    std::vector<RocPoint> points;
    double optimal_threshold = 0.0;  ///< maximizes sensitivity + specificity - 1
};

/// ROC for a marker where the positive class takes LOWER scores (as MBF does:
/// a vessel is called positive when its statistic falls below the threshold).
/// labels: 1 = positive. Throws ValidationError unless both classes appear.
RocResult roc_analysis(std::span<const double> scores, std::span<const int> labels);

const char* territory_name(Territory t);

}  // namespace perfquant
