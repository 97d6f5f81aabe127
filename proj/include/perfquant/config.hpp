// Run configuration: one JSON file drives the whole pipeline. Unknown keys
// are rejected so typos fail loudly.
#pragma once

#include <cstdint>
#include <filesystem>

#include "perfquant/bayes.hpp"
#include "perfquant/moco.hpp"
#include "perfquant/phantom.hpp"

namespace perfquant {

struct ConvertConfig {
    int baseline_frames = 3;
    double dual_bolus_scale = 10.0;
    double main_bolus_start_s = 0.0;
    double T10_blood_s = 1.6;
};

struct AnalyzeConfig {
    SliceLevel slice_level = SliceLevel::basal;
    double patient_threshold_mbf = 1.34;  ///< ml/min/g, per-patient cut-off
    double vessel_threshold_mbf = 1.31;   ///< ml/min/g, per-vessel cut-off
    double variance_quantile = 0.95;
    int margin_px = 16;
    int min_component_area = 20;
};

struct RunConfig {
    SequenceParams sequence;
    PhysioConstants physio;
    std::string fit_method = "nlls";  ///< nlls | bayes
    FitBounds bounds;
    FitOptions fit;
    PriorSpec prior;
    InferOptions infer;
    MocoConfig moco;
    ConvertConfig convert;
    AnalyzeConfig analyze;
    std::uint64_t seed = 0;

    void validate() const;
};

RunConfig run_config_from_json_file(const std::filesystem::path& path);
PhantomSpec phantom_spec_from_json_file(const std::filesystem::path& path);

}  // namespace perfquant
