// File formats: the PQIS binary image-series container, CSV curves and motion
// tables, PGM map renders, and JSON (de)serialisation of the domain types.
#pragma once

#include <filesystem>
#include <string>

#include <nlohmann/json_fwd.hpp>

#include "perfquant/analysis.hpp"
#include "perfquant/image_series.hpp"
#include "perfquant/kinetics.hpp"
#include "perfquant/moco.hpp"
#include "perfquant/signal_model.hpp"

namespace perfquant {

// PQIS layout: magic "PQIS" (4), version u16 LE, nt/ny/nx u32 LE,
// spacing_y/spacing_x f32 LE, then f32 LE pixels, frame-major, row-major
// within a frame. File length is exactly 26 + 4*nt*ny*nx bytes
// (4 magic + 2 version + 12 dims + 8 spacing).
inline constexpr std::uint16_t kSeriesVersion = 1;

void write_series(const std::filesystem::path& path, const ImageSeries& series);
ImageSeries read_series(const std::filesystem::path& path);

/// Single-frame convenience wrappers for parameter maps.
void write_map(const std::filesystem::path& path, const Eigen::MatrixXd& map,
               double spacing_y = 1.0, double spacing_x = 1.0);
Eigen::MatrixXd read_map(const std::filesystem::path& path);

/// CSV with header `time_s,value`.
void write_curve_csv(const std::filesystem::path& path, const SampledCurve& curve);
SampledCurve read_curve_csv(const std::filesystem::path& path, CurveKind kind);

/// CSV with header `frame,dy_px,dx_px`.
void write_motion_csv(const std::filesystem::path& path, const MotionEstimate& motion);
MotionEstimate read_motion_csv(const std::filesystem::path& path);

/// 8-bit binary PGM (P5); values windowed to [wmin, wmax].
void write_pgm(const std::filesystem::path& path, const Eigen::MatrixXd& map, double wmin,
               double wmax);

nlohmann::json to_json(const KineticParams& p);
KineticParams kinetic_params_from_json(const nlohmann::json& j);

nlohmann::json to_json(const SequenceParams& s);
SequenceParams sequence_params_from_json(const nlohmann::json& j);

struct RvPointsFile {
    std::array<PixelPoint, 2> rv_points;
    PixelPoint centroid;
    SliceLevel slice_level = SliceLevel::basal;
};

void write_rv_points(const std::filesystem::path& path, const RvPointsFile& f);
RvPointsFile read_rv_points(const std::filesystem::path& path);

void write_json_file(const std::filesystem::path& path, const nlohmann::json& j);
nlohmann::json read_json_file(const std::filesystem::path& path);

SliceLevel slice_level_from_string(const std::string& s);
std::string to_string(SliceLevel level);

}  // namespace perfquant
