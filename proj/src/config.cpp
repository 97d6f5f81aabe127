#include "perfquant/config.hpp"

#include <nlohmann/json.hpp>

#include <set>

#include "perfquant/io.hpp"

namespace perfquant {

namespace {

using nlohmann::json;

void require_keys(const json& j, const std::set<std::string>& allowed,
                  const std::string& where) {
    if (!j.is_object()) throw ValidationError(where + ": expected a JSON object");
    for (const auto& [key, _] : j.items())
        if (!allowed.count(key))
            throw ValidationError(where + ": unknown key '" + key + "'");
}

std::array<double, 2> pair_of(const json& j, const std::string& where) {
    if (!j.is_array() || j.size() != 2)
        throw ValidationError(where + ": expected [lower, upper]");
    return {j.at(0).get<double>(), j.at(1).get<double>()};
}

FitBounds bounds_from_json(const json& j) {
    require_keys(j, {"Fp", "vp", "ve", "PS", "delay"}, "bounds");
    FitBounds b;
    const char* names[5] = {"Fp", "vp", "ve", "PS", "delay"};
    for (int k = 0; k < 5; ++k)
        if (j.contains(names[k])) {
            const auto p = pair_of(j.at(names[k]), std::string("bounds.") + names[k]);
            b.lower[k] = p[0];
            b.upper[k] = p[1];
        }
    b.validate();
    return b;
}

KineticParams params_from_json_strict(const json& j, const std::string& where) {
    require_keys(j, {"Fp_ml_min_ml", "vp", "ve", "PS_ml_min_ml", "delay_s"}, where);
    return kinetic_params_from_json(j);
}

SequenceParams sequence_from_json_strict(const json& j) {
    require_keys(j, {"TR_s", "TSAT_s", "alpha_deg", "n", "r1_L_per_mmol_s", "T10_s"},
                 "sequence");
    return sequence_params_from_json(j);
}

PhysioConstants physio_from_json(const json& j) {
    require_keys(j, {"hct", "density_g_per_ml"}, "physio");
    PhysioConstants c;
    c.hct = j.value("hct", c.hct);
    c.density = j.value("density_g_per_ml", c.density);
    c.validate();
    return c;
}

}  // namespace

void RunConfig::validate() const {
    sequence.validate();
    physio.validate();
    if (fit_method != "nlls" && fit_method != "bayes")
        throw ValidationError("config: fit method must be nlls or bayes");
    bounds.validate();
    // noise_sigma = 0 requests estimation from the pre-contrast frames
    if (prior.spatial_weight < 0.0)
        throw ValidationError("config: spatial_weight must be >= 0");
    if (prior.noise_sigma < 0.0)
        throw ValidationError("config: noise_sigma must be >= 0");
    if (convert.baseline_frames < 1)
        throw ValidationError("config: baseline_frames must be >= 1");
    if (!(convert.dual_bolus_scale > 0.0))
        throw ValidationError("config: dual_bolus_scale must be > 0");
    if (!(analyze.patient_threshold_mbf > 0.0) || !(analyze.vessel_threshold_mbf > 0.0))
        throw ValidationError("config: thresholds must be > 0");
}

RunConfig run_config_from_json_file(const std::filesystem::path& path) {
    const json j = read_json_file(path);
    require_keys(j,
                 {"sequence", "physio", "fit", "prior", "moco", "convert", "analyze", "seed"},
                 "config");
    RunConfig c;
    if (j.contains("sequence")) c.sequence = sequence_from_json_strict(j.at("sequence"));
    if (j.contains("physio")) c.physio = physio_from_json(j.at("physio"));
    if (j.contains("seed")) c.seed = j.at("seed").get<std::uint64_t>();

    if (j.contains("fit")) {
        const json& f = j.at("fit");
        require_keys(f,
                     {"method", "n_starts", "max_iter", "bounds", "fit_delay",
                      "fixed_delay_s"},
                     "fit");
        c.fit_method = f.value("method", c.fit_method);
        c.fit.n_starts = f.value("n_starts", c.fit.n_starts);
        c.fit.max_iter = f.value("max_iter", c.fit.max_iter);
        c.fit.fit_delay = f.value("fit_delay", c.fit.fit_delay);
        c.fit.fixed_delay = f.value("fixed_delay_s", c.fit.fixed_delay);
        if (f.contains("bounds")) c.bounds = bounds_from_json(f.at("bounds"));
    }
    if (j.contains("prior")) {
        const json& p = j.at("prior");
        require_keys(p,
                     {"spatial_weight", "noise_sigma", "n_iter", "burn_in", "thin", "sweeps",
                      "eight_connected", "update_sigma", "fixed_delay_s"},
                     "prior");
        c.prior.spatial_weight = p.value("spatial_weight", c.prior.spatial_weight);
        c.prior.noise_sigma = p.value("noise_sigma", c.prior.noise_sigma);
        c.prior.eight_connected = p.value("eight_connected", c.prior.eight_connected);
        c.infer.mh.n_iter = p.value("n_iter", c.infer.mh.n_iter);
        c.infer.mh.burn_in = p.value("burn_in", c.infer.mh.burn_in);
        c.infer.mh.thin = p.value("thin", c.infer.mh.thin);
        c.infer.sweeps = p.value("sweeps", c.infer.sweeps);
        c.infer.update_sigma = p.value("update_sigma", c.infer.update_sigma);
        c.infer.fixed_delay = p.value("fixed_delay_s", c.infer.fixed_delay);
    }
    c.prior.box = c.bounds;
    if (j.contains("moco")) {
        const json& m = j.at("moco");
        require_keys(m,
                     {"lambda", "mu", "tol", "max_iter", "reference_index", "max_shift",
                      "pca_variance"},
                     "moco");
        c.moco.lambda = m.value("lambda", c.moco.lambda);
        c.moco.mu = m.value("mu", c.moco.mu);
        c.moco.tol = m.value("tol", c.moco.tol);
        c.moco.max_iter = m.value("max_iter", c.moco.max_iter);
        c.moco.reference_index = m.value("reference_index", c.moco.reference_index);
        c.moco.max_shift = m.value("max_shift", c.moco.max_shift);
        c.moco.pca_variance = m.value("pca_variance", c.moco.pca_variance);
    }
    if (j.contains("convert")) {
        const json& v = j.at("convert");
        require_keys(v,
                     {"baseline_frames", "dual_bolus_scale", "main_bolus_start_s",
                      "T10_blood_s"},
                     "convert");
        c.convert.baseline_frames = v.value("baseline_frames", c.convert.baseline_frames);
        c.convert.dual_bolus_scale = v.value("dual_bolus_scale", c.convert.dual_bolus_scale);
        c.convert.main_bolus_start_s =
            v.value("main_bolus_start_s", c.convert.main_bolus_start_s);
        c.convert.T10_blood_s = v.value("T10_blood_s", c.convert.T10_blood_s);
    }
    if (j.contains("analyze")) {
        const json& a = j.at("analyze");
        require_keys(a,
                     {"slice_level", "patient_threshold_mbf", "vessel_threshold_mbf",
                      "variance_quantile", "margin_px", "min_component_area"},
                     "analyze");
        if (a.contains("slice_level"))
            c.analyze.slice_level = slice_level_from_string(a.at("slice_level").get<std::string>());
        c.analyze.patient_threshold_mbf =
            a.value("patient_threshold_mbf", c.analyze.patient_threshold_mbf);
        c.analyze.vessel_threshold_mbf =
            a.value("vessel_threshold_mbf", c.analyze.vessel_threshold_mbf);
        c.analyze.variance_quantile = a.value("variance_quantile", c.analyze.variance_quantile);
        c.analyze.margin_px = a.value("margin_px", c.analyze.margin_px);
        c.analyze.min_component_area =
            a.value("min_component_area", c.analyze.min_component_area);
    }
    c.validate();
    return c;
}

PhantomSpec phantom_spec_from_json_file(const std::filesystem::path& path) {
    const json j = read_json_file(path);
    require_keys(j,
                 {"grid", "annulus", "lv_radius", "rv", "rv_insertion_angle_deg",
                  "background", "defects", "aif", "noise_sd", "motion", "sampling",
                  "sequence", "T10_blood_s", "physio", "S0", "background_level",
                  "texture_amplitude", "baseline_frames"},
                 "phantom");
    PhantomSpec s;
    if (j.contains("grid")) {
        const auto g = pair_of(j.at("grid"), "phantom.grid");
        s.ny = static_cast<int>(g[0]);
        s.nx = static_cast<int>(g[1]);
        s.centre_y = 0.5 * s.ny;
        s.centre_x = 0.5 * s.nx;
    }
    if (j.contains("annulus")) {
        const json& a = j.at("annulus");
        require_keys(a, {"centre", "r_inner", "r_outer"}, "phantom.annulus");
        if (a.contains("centre")) {
            const auto c = pair_of(a.at("centre"), "phantom.annulus.centre");
            s.centre_y = c[0];
            s.centre_x = c[1];
        }
        s.r_inner = a.value("r_inner", s.r_inner);
        s.r_outer = a.value("r_outer", s.r_outer);
    }
    s.lv_radius = j.value("lv_radius", s.lv_radius);
    if (j.contains("rv")) {
        const json& r = j.at("rv");
        require_keys(r, {"centre", "radius"}, "phantom.rv");
        if (r.contains("centre")) {
            const auto c = pair_of(r.at("centre"), "phantom.rv.centre");
            s.rv_centre_y = c[0];
            s.rv_centre_x = c[1];
        }
        s.rv_radius = r.value("radius", s.rv_radius);
    }
    s.rv_insertion_angle_deg = j.value("rv_insertion_angle_deg", s.rv_insertion_angle_deg);
    if (j.contains("background"))
        s.background = params_from_json_strict(j.at("background"), "phantom.background");
    if (j.contains("defects")) {
        for (const auto& d : j.at("defects")) {
            require_keys(d, {"angle_start_deg", "angle_end_deg", "layer", "params"},
                         "phantom.defect");
            DefectSpec def;
            def.angle_start_deg = d.at("angle_start_deg").get<double>();
            def.angle_end_deg = d.at("angle_end_deg").get<double>();
            const std::string layer = d.value("layer", "both");
            def.layer = layer == "endo" ? 0 : layer == "epi" ? 1 : 2;
            def.params = params_from_json_strict(d.at("params"), "phantom.defect.params");
            s.defects.push_back(def);
        }
    }
    if (j.contains("aif")) {
        const json& a = j.at("aif");
        require_keys(a, {"peak_mmol_l", "shape", "scale_s", "onset_s", "prebolus_fraction"},
                     "phantom.aif");
        s.aif.peak = a.value("peak_mmol_l", s.aif.peak);
        s.aif.shape = a.value("shape", s.aif.shape);
        s.aif.scale_s = a.value("scale_s", s.aif.scale_s);
        s.aif.onset_s = a.value("onset_s", s.aif.onset_s);
        s.aif.prebolus_fraction = a.value("prebolus_fraction", s.aif.prebolus_fraction);
    }
    s.noise_sd = j.value("noise_sd", s.noise_sd);
    if (j.contains("motion")) {
        const json& m = j.at("motion");
        require_keys(m, {"type", "amplitude_px", "period_s", "dy", "dx"}, "phantom.motion");
        const std::string type = m.value("type", "none");
        if (type == "none") {
            s.motion.type = MotionSpec::Type::none;
        } else if (type == "sinusoid") {
            s.motion.type = MotionSpec::Type::sinusoid;
            if (m.contains("amplitude_px")) {
                const auto a = pair_of(m.at("amplitude_px"), "phantom.motion.amplitude_px");
                s.motion.amplitude_y = a[0];
                s.motion.amplitude_x = a[1];
            }
            s.motion.period_s = m.value("period_s", s.motion.period_s);
        } else if (type == "trace") {
            s.motion.type = MotionSpec::Type::trace;
            s.motion.trace_dy = m.at("dy").get<std::vector<double>>();
            s.motion.trace_dx = m.at("dx").get<std::vector<double>>();
        } else {
            throw ValidationError("phantom.motion: unknown type '" + type + "'");
        }
    }
    if (j.contains("sampling")) {
        const json& t = j.at("sampling");
        require_keys(t, {"nt", "dt_s"}, "phantom.sampling");
        s.nt = t.value("nt", s.nt);
        s.dt = t.value("dt_s", s.dt);
    }
    if (j.contains("sequence")) s.seq = sequence_from_json_strict(j.at("sequence"));
    s.T10_blood = j.value("T10_blood_s", s.T10_blood);
    if (j.contains("physio")) s.physio = physio_from_json(j.at("physio"));
    s.S0 = j.value("S0", s.S0);
    s.background_level = j.value("background_level", s.background_level);
    s.texture_amplitude = j.value("texture_amplitude", s.texture_amplitude);
    s.n_baseline_frames = j.value("baseline_frames", s.n_baseline_frames);
    s.validate();
    return s;
}

}  // namespace perfquant
