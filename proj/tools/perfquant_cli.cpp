// perfquant: quantitative myocardial perfusion analysis on synthetic phantoms
// or externally supplied image series.
//
// subcommands: simulate, moco, convert, fit, analyze, report
// exit codes: 0 success, 1 validation error, 2 runtime error

#include <CLI11.hpp>
#include <nlohmann/json.hpp>

#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>

#include "perfquant/bayes.hpp"
#include "perfquant/config.hpp"
#include "perfquant/io.hpp"
#include "perfquant/parallel.hpp"
#include "perfquant/phantom.hpp"
#include "perfquant/rng.hpp"

namespace fs = std::filesystem;
using nlohmann::json;
using namespace perfquant;

namespace {

struct CommonArgs {
    std::string config_path;
    std::string out_dir;
    std::optional<std::uint64_t> seed;
};

RunConfig load_config(const CommonArgs& args) {
    RunConfig cfg;
    if (!args.config_path.empty()) cfg = run_config_from_json_file(args.config_path);
    if (args.seed) cfg.seed = *args.seed;
    return cfg;
}

fs::path ensure_out(const std::string& dir) {
    fs::path p(dir);
    fs::create_directories(p);
    return p;
}

double estimate_noise_sigma(const ImageSeries& conc, const Eigen::MatrixXd& mask,
                            int baseline_frames) {
    // pre-contrast concentration is zero-mean noise clamped at zero, so
    // E[c^2] = sigma^2 / 2 over the baseline window
    double sq = 0.0;
    long n = 0;
    const int nb = std::min(baseline_frames, conc.nt());
    for (int t = 0; t < nb; ++t)
        for (int y = 0; y < conc.ny(); ++y)
            for (int x = 0; x < conc.nx(); ++x) {
                if (mask(y, x) == 0.0) continue;
                const double c = conc.frames[static_cast<std::size_t>(t)](y, x);
                sq += c * c;
                ++n;
            }
    if (n == 0) throw ValidationError("sigma estimate: no baseline samples in mask");
    return std::max(std::sqrt(2.0 * sq / static_cast<double>(n)), 1e-6);
}

int cmd_simulate(const CommonArgs& args, const std::string& phantom_path) {
    const PhantomSpec spec = phantom_spec_from_json_file(phantom_path);
    const std::uint64_t seed = args.seed.value_or(0);
    const PhantomOutput out = generate_phantom(spec, seed);
    const fs::path dir = ensure_out(args.out_dir);

    write_series(dir / "series.pqis", out.series);
    write_map(dir / "mask.pqis", out.mask, out.series.spacing_y, out.series.spacing_x);
    write_map(dir / "truth_Fp.pqis", out.truth_Fp);
    write_map(dir / "truth_vp.pqis", out.truth_vp);
    write_map(dir / "truth_ve.pqis", out.truth_ve);
    write_map(dir / "truth_PS.pqis", out.truth_PS);
    write_map(dir / "truth_delay.pqis", out.truth_delay);
    write_map(dir / "truth_mbf.pqis", out.truth_mbf);
    write_curve_csv(dir / "aif_signal.csv", out.aif_prebolus_signal);
    write_curve_csv(dir / "aif_blood.csv", out.aif_blood);

    MotionEstimate motion;
    motion.dy.reserve(out.motion.size());
    motion.dx.reserve(out.motion.size());
    for (const auto& m : out.motion) {
        motion.dy.push_back(m[0]);
        motion.dx.push_back(m[1]);
    }
    write_motion_csv(dir / "motion_truth.csv", motion);

    RvPointsFile rv;
    rv.rv_points = out.rv_points;
    rv.centroid = out.centroid;
    rv.slice_level = SliceLevel::basal;
    write_rv_points(dir / "rv_points.json", rv);

    write_json_file(dir / "truth_labels.json", json(out.territory_truth));
    return 0;
}

int cmd_moco(const CommonArgs& args, const std::string& in_path) {
    const RunConfig cfg = load_config(args);
    const ImageSeries series = read_series(in_path);
    const MocoResult res = motion_correct(series, cfg.moco);
    const fs::path dir = ensure_out(args.out_dir);
    write_series(dir / "corrected.pqis", res.corrected);
    write_motion_csv(dir / "motion.csv", res.shifts);
    const json summary{{"rpca_iterations", res.rpca_iterations},
                       {"rpca_residual", res.rpca_residual},
                       {"reference_index", res.shifts.reference_index}};
    write_json_file(dir / "moco_summary.json", summary);
    return 0;
}

int cmd_convert(const CommonArgs& args, const std::string& in_path,
                const std::string& mask_path, const std::string& aif_path) {
    const RunConfig cfg = load_config(args);
    const ImageSeries series = read_series(in_path);
    const Eigen::MatrixXd mask = read_map(mask_path);
    if (mask.rows() != series.ny() || mask.cols() != series.nx())
        throw ValidationError("convert: mask shape does not match the series");
    const int nb = cfg.convert.baseline_frames;
    if (series.nt() <= nb) throw ValidationError("convert: series shorter than baseline");

    // pixel-wise conversion with a per-pixel scale calibrated on its baseline
    ImageSeries conc;
    conc.spacing_y = series.spacing_y;
    conc.spacing_x = series.spacing_x;
    conc.frames.assign(static_cast<std::size_t>(series.nt()),
                       Eigen::MatrixXd::Zero(series.ny(), series.nx()));
    std::vector<double> times(static_cast<std::size_t>(series.nt()));
    for (int t = 0; t < series.nt(); ++t) times[static_cast<std::size_t>(t)] = t;

    std::vector<std::pair<int, int>> pixels;
    for (int y = 0; y < series.ny(); ++y)
        for (int x = 0; x < series.nx(); ++x)
            if (mask(y, x) != 0.0) pixels.emplace_back(y, x);
    if (pixels.empty()) throw ValidationError("convert: empty mask");

    std::vector<int> clamped(pixels.size(), 0);
    std::vector<std::string> errors(pixels.size());
    parallel_for(static_cast<int>(pixels.size()), [&](int i) {
        const auto [y, x] = pixels[static_cast<std::size_t>(i)];
        SampledCurve sig;
        sig.kind = CurveKind::signal;
        sig.times = times;
        sig.values.resize(static_cast<std::size_t>(series.nt()));
        for (int t = 0; t < series.nt(); ++t)
            sig.values[static_cast<std::size_t>(t)] =
                series.frames[static_cast<std::size_t>(t)](y, x);
        SequenceParams seq = cfg.sequence;
        double s0 = 0.0;
        for (int t = 0; t < nb; ++t) s0 += sig.values[static_cast<std::size_t>(t)];
        seq.S0 = s0 / nb;
        if (!(seq.S0 > 0.0)) {
            errors[static_cast<std::size_t>(i)] = "zero baseline";
            return;
        }
        const std::vector<double> baseline(sig.values.begin(), sig.values.begin() + nb);
        seq.psi = estimate_psi(seq, baseline);
        ConversionStats stats;
        try {
            const SampledCurve c =
                concentration_from_signal(seq, sig, CurveKind::tissue, &stats);
            for (int t = 0; t < series.nt(); ++t)
                conc.frames[static_cast<std::size_t>(t)](y, x) =
                    c.values[static_cast<std::size_t>(t)];
        } catch (const std::exception& e) {
            errors[static_cast<std::size_t>(i)] = e.what();
            return;
        }
        clamped[static_cast<std::size_t>(i)] = stats.clamped_negative;
    });
    for (std::size_t i = 0; i < pixels.size(); ++i)
        if (!errors[i].empty())
            throw ValidationError("convert: pixel (" + std::to_string(pixels[i].first) +
                                  "," + std::to_string(pixels[i].second) + "): " + errors[i]);

    // AIF: pre-bolus signal -> concentration -> main-bolus scale
    const SampledCurve aif_sig = read_curve_csv(aif_path, CurveKind::signal);
    SequenceParams aif_seq = cfg.sequence;
    aif_seq.T10 = cfg.convert.T10_blood_s;
    const int aif_nb = static_cast<int>(
        std::min<std::size_t>(static_cast<std::size_t>(nb), aif_sig.size()));
    double aif_s0 = 0.0;
    for (int t = 0; t < aif_nb; ++t) aif_s0 += aif_sig.values[static_cast<std::size_t>(t)];
    aif_seq.S0 = aif_s0 / aif_nb;
    const std::vector<double> aif_base(aif_sig.values.begin(),
                                       aif_sig.values.begin() + aif_nb);
    aif_seq.psi = estimate_psi(aif_seq, aif_base);
    ConversionStats aif_stats;
    const SampledCurve aif_pre =
        concentration_from_signal(aif_seq, aif_sig, CurveKind::aif, &aif_stats);
    const SampledCurve aif_main = build_dual_bolus_aif(
        aif_pre, cfg.convert.dual_bolus_scale, cfg.convert.main_bolus_start_s);

    const fs::path dir = ensure_out(args.out_dir);
    write_series(dir / "conc.pqis", conc);
    write_curve_csv(dir / "aif_conc.csv", aif_main);
    long total_clamped = 0;
    for (int c : clamped) total_clamped += c;
    const json summary{{"pixels", pixels.size()},
                       {"clamped_negative_samples", total_clamped},
                       {"aif_clamped_samples", aif_stats.clamped_negative},
                       {"aif_scale", cfg.convert.dual_bolus_scale}};
    write_json_file(dir / "conversion_summary.json", summary);
    return 0;
}

struct FitFlags {
    std::string method;
    std::optional<double> spatial_weight;
};

int cmd_fit(const CommonArgs& args, const std::string& in_path, const std::string& mask_path,
            const std::string& aif_path, const FitFlags& flags) {
    RunConfig cfg = load_config(args);
    if (!flags.method.empty()) cfg.fit_method = flags.method;
    if (flags.spatial_weight) cfg.prior.spatial_weight = *flags.spatial_weight;
    cfg.validate();

    const ImageSeries conc = read_series(in_path);
    const Eigen::MatrixXd mask = read_map(mask_path);
    if (mask.rows() != conc.ny() || mask.cols() != conc.nx())
        throw ValidationError("fit: mask shape does not match the series");
    SampledCurve aif = read_curve_csv(aif_path, CurveKind::aif);
    if (aif.size() != static_cast<std::size_t>(conc.nt()))
        throw ValidationError("fit: AIF length does not match the series");

    // arterial blood -> plasma concentration
    for (auto& v : aif.values) v /= (1.0 - cfg.physio.hct);

    const std::vector<double>& times = aif.times;
    const int ny = conc.ny(), nx = conc.nx(), nt = conc.nt();
    const fs::path dir = ensure_out(args.out_dir);

    auto blood = [&](double fp) {
        return fp / ((1.0 - cfg.physio.hct) * cfg.physio.density);
    };

    json summary{{"method", cfg.fit_method}, {"seed", cfg.seed}};
    if (cfg.fit_method == "nlls") {
        Eigen::MatrixXd mFp = Eigen::MatrixXd::Zero(ny, nx), mvp = mFp, mve = mFp,
                        mPS = mFp, mdelay = mFp, mrss = mFp, mmbf = mFp;
        std::vector<std::pair<int, int>> pixels;
        for (int y = 0; y < ny; ++y)
            for (int x = 0; x < nx; ++x)
                if (mask(y, x) != 0.0) pixels.emplace_back(y, x);
        if (pixels.empty()) throw ValidationError("fit: empty mask");
        std::vector<int> degenerate(pixels.size(), 0);
        parallel_for(static_cast<int>(pixels.size()), [&](int i) {
            const auto [y, x] = pixels[static_cast<std::size_t>(i)];
            SampledCurve tissue;
            tissue.kind = CurveKind::tissue;
            tissue.times = times;
            tissue.values.resize(static_cast<std::size_t>(nt));
            for (int t = 0; t < nt; ++t)
                tissue.values[static_cast<std::size_t>(t)] =
                    conc.frames[static_cast<std::size_t>(t)](y, x);
            FitOptions opt = cfg.fit;
            opt.seed = substream_seed(cfg.seed, "fit-pixel",
                                      static_cast<std::uint64_t>(y) * nx + x);
            try {
                const FitResult r = fit_nlls(aif, tissue, cfg.bounds, opt);
                mFp(y, x) = r.params.Fp;
                mvp(y, x) = r.params.vp;
                mve(y, x) = r.params.ve;
                mPS(y, x) = r.params.PS;
                mdelay(y, x) = r.params.delay;
                mrss(y, x) = r.rss;
                mmbf(y, x) = blood(r.params.Fp);
            } catch (const std::exception&) {
                degenerate[static_cast<std::size_t>(i)] = 1;
            }
        });
        write_map(dir / "map_Fp.pqis", mFp);
        write_map(dir / "map_vp.pqis", mvp);
        write_map(dir / "map_ve.pqis", mve);
        write_map(dir / "map_PS.pqis", mPS);
        write_map(dir / "map_delay.pqis", mdelay);
        write_map(dir / "map_rss.pqis", mrss);
        write_map(dir / "map_mbf.pqis", mmbf);
        long skipped = 0;
        for (int d : degenerate) skipped += d;
        summary["pixels"] = pixels.size();
        summary["skipped_pixels"] = skipped;
        summary["n_starts"] = cfg.fit.n_starts;
    } else {
        PriorSpec prior = cfg.prior;
        if (!(prior.noise_sigma > 0.0))
            prior.noise_sigma = estimate_noise_sigma(conc, mask, cfg.convert.baseline_frames);
        const FieldResult field =
            infer_field(aif, conc, times, mask, prior, cfg.seed, cfg.infer);
        write_map(dir / "map_Fp.pqis", field.mean[0]);
        write_map(dir / "map_vp.pqis", field.mean[1]);
        write_map(dir / "map_ve.pqis", field.mean[2]);
        write_map(dir / "map_PS.pqis", field.mean[3]);
        write_map(dir / "map_Fp_sd.pqis", field.sd[0]);
        write_map(dir / "map_vp_sd.pqis", field.sd[1]);
        write_map(dir / "map_ve_sd.pqis", field.sd[2]);
        write_map(dir / "map_PS_sd.pqis", field.sd[3]);
        write_map(dir / "map_acceptance.pqis", field.acceptance);
        Eigen::MatrixXd mmbf = Eigen::MatrixXd::Zero(ny, nx), mmbf_sd = mmbf;
        for (int y = 0; y < ny; ++y)
            for (int x = 0; x < nx; ++x) {
                if (mask(y, x) == 0.0) continue;
                mmbf(y, x) = blood(field.mean[0](y, x));
                mmbf_sd(y, x) = blood(field.sd[0](y, x));
            }
        write_map(dir / "map_mbf.pqis", mmbf);
        write_map(dir / "map_mbf_sd.pqis", mmbf_sd);
        summary["noise_sigma"] = field.sigma_used;
        summary["spatial_weight"] = prior.spatial_weight;
        summary["n_iter"] = cfg.infer.mh.n_iter;
        summary["sweeps"] = cfg.infer.sweeps;
    }
    write_json_file(dir / "fit_summary.json", summary);
    return 0;
}

struct AnalyzeFlags {
    std::optional<double> threshold;
    std::string labels_path;
    std::string series_path;  // optional ventricle detection input
};

int cmd_analyze(const CommonArgs& args, const std::string& mbf_path,
                const std::string& mask_path, const std::string& rv_path,
                const AnalyzeFlags& flags) {
    const RunConfig cfg = load_config(args);
    const Eigen::MatrixXd mbf = read_map(mbf_path);
    const Eigen::MatrixXd mask = read_map(mask_path);
    const RvPointsFile rv = read_rv_points(rv_path);
    const fs::path dir = ensure_out(args.out_dir);

    const Eigen::MatrixXi seg =
        assign_segments(mask, rv.rv_points, cfg.analyze.slice_level, rv.centroid);
    write_map(dir / "segments.pqis", seg.cast<double>());

    const auto stats = per_vessel_statistic(mbf, seg);
    const double threshold = flags.threshold.value_or(cfg.analyze.patient_threshold_mbf);
    const DiagnosticResult diag = classify(stats, threshold);

    json vessels;
    for (const auto& [t, v] : diag.statistic)
        vessels[territory_name(t)] = {{"mbf_ml_min_g", v},
                                      {"positive", diag.positive.at(t)}};
    const json out{{"vessels", vessels},
                   {"patient_positive", diag.patient_positive},
                   {"threshold_ml_min_g", diag.threshold}};
    write_json_file(dir / "vessels.json", out);

    if (!flags.labels_path.empty()) {
        const json labels = read_json_file(flags.labels_path);
        std::vector<double> scores;
        std::vector<int> truth;
        for (const auto& [t, v] : diag.statistic) {
            scores.push_back(v);
            truth.push_back(labels.at(territory_name(t)).get<int>());
        }
        const RocResult roc = roc_analysis(scores, truth);
        std::ofstream os(dir / "roc.csv");
        os << "threshold,sensitivity,specificity\n";
        for (const auto& p : roc.points) {
            char buf[128];
            std::snprintf(buf, sizeof buf, "%.17g,%.17g,%.17g\n", p.threshold,
                          p.sensitivity, p.specificity);
            os << buf;
        }
        write_json_file(dir / "roc.json",
                        json{{"auc", roc.auc}, {"optimal_threshold", roc.optimal_threshold}});
    }

    if (!flags.series_path.empty()) {
        const ImageSeries series = read_series(flags.series_path);
        const BoundingBox box = bounding_box_temporal_variance(
            series, cfg.analyze.variance_quantile, cfg.analyze.margin_px,
            cfg.analyze.min_component_area);
        write_json_file(dir / "box.json", json{{"y0", box.y0},
                                               {"x0", box.x0},
                                               {"y1", box.y1},
                                               {"x1", box.x1}});
    }
    return 0;
}

int cmd_report(const CommonArgs& args, const std::string& in_dir,
               std::optional<double> wmin, std::optional<double> wmax) {
    const fs::path src(in_dir);
    if (!fs::is_directory(src)) throw ValidationError("report: not a directory: " + in_dir);
    const fs::path dir = ensure_out(args.out_dir);

    std::vector<fs::path> maps, jsons;
    for (const auto& entry : fs::directory_iterator(src)) {
        if (entry.path().extension() == ".pqis") maps.push_back(entry.path());
        if (entry.path().extension() == ".json") jsons.push_back(entry.path());
    }
    std::sort(maps.begin(), maps.end());
    std::sort(jsons.begin(), jsons.end());

    json bundle;
    json rendered = json::array();
    for (const auto& p : maps) {
        try {
            const Eigen::MatrixXd m = read_map(p);
            double lo = wmin.value_or(m.minCoeff());
            double hi = wmax.value_or(m.maxCoeff());
            if (!(hi > lo)) hi = lo + 1.0;
            const fs::path pgm = dir / (p.stem().string() + ".pgm");
            write_pgm(pgm, m, lo, hi);
            rendered.push_back({{"map", p.filename().string()},
                                {"render", pgm.filename().string()},
                                {"wmin", lo},
                                {"wmax", hi}});
        } catch (const ValidationError&) {
            // multi-frame series are not rendered
        }
    }
    bundle["renders"] = rendered;
    for (const auto& p : jsons) bundle[p.stem().string()] = read_json_file(p);
    write_json_file(dir / "report.json", bundle);
    return 0;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"quantitative myocardial perfusion analysis"};
    app.require_subcommand(1);

    CommonArgs common;
    std::uint64_t seed_val = 0;
    std::string in_path, mask_path, aif_path;

    auto add_common = [&](CLI::App* sub, bool needs_config) {
        auto* c = sub->add_option("--config", common.config_path, "run configuration JSON");
        if (needs_config) c->required();
        sub->add_option("--out", common.out_dir, "output directory")->required();
        sub->add_option("--seed", seed_val, "master RNG seed")
            ->each([&](const std::string&) { common.seed = seed_val; });
    };

    auto* sim = app.add_subcommand("simulate", "generate a synthetic phantom");
    std::string phantom_path;
    sim->add_option("--config", phantom_path, "phantom spec JSON")->required();
    sim->add_option("--out", common.out_dir, "output directory")->required();
    sim->add_option("--seed", seed_val, "master RNG seed")
        ->each([&](const std::string&) { common.seed = seed_val; });

    auto* moco = app.add_subcommand("moco", "motion-correct an image series");
    moco->add_option("--in", in_path, "input series (.pqis)")->required();
    add_common(moco, false);

    auto* conv = app.add_subcommand("convert", "signal to concentration conversion");
    conv->add_option("--in", in_path, "input series (.pqis)")->required();
    conv->add_option("--mask", mask_path, "myocardial mask (.pqis)")->required();
    conv->add_option("--aif", aif_path, "pre-bolus AIF signal curve (.csv)")->required();
    add_common(conv, true);

    auto* fit = app.add_subcommand("fit", "estimate kinetic parameter maps");
    FitFlags fit_flags;
    double spatial_weight = 0.0;
    fit->add_option("--in", in_path, "concentration series (.pqis)")->required();
    fit->add_option("--mask", mask_path, "myocardial mask (.pqis)")->required();
    fit->add_option("--aif", aif_path, "AIF concentration curve (.csv)")->required();
    fit->add_option("--method", fit_flags.method, "nlls | bayes")
        ->check(CLI::IsMember({"nlls", "bayes"}));
    fit->add_option("--spatial-weight", spatial_weight, "spatial prior weight (bayes)")
        ->each([&](const std::string&) { fit_flags.spatial_weight = spatial_weight; });
    add_common(fit, true);

    auto* ana = app.add_subcommand("analyze", "segmental diagnosis and ROC");
    AnalyzeFlags ana_flags;
    std::string mbf_path, rv_path;
    double threshold = 0.0;
    ana->add_option("--mbf", mbf_path, "MBF map (.pqis)")->required();
    ana->add_option("--mask", mask_path, "myocardial mask (.pqis)")->required();
    ana->add_option("--rv-points", rv_path, "RV insertion points (.json)")->required();
    ana->add_option("--threshold", threshold, "MBF cut-off, ml/min/g")
        ->each([&](const std::string&) { ana_flags.threshold = threshold; });
    ana->add_option("--labels", ana_flags.labels_path, "per-territory truth labels JSON");
    ana->add_option("--series", ana_flags.series_path,
                    "image series for ventricle detection (.pqis)");
    add_common(ana, true);

    auto* rep = app.add_subcommand("report", "render maps and bundle results");
    std::optional<double> wmin, wmax;
    double wmin_val = 0.0, wmax_val = 0.0;
    rep->add_option("--in", in_path, "directory of maps and summaries")->required();
    rep->add_option("--wmin", wmin_val, "window minimum")
        ->each([&](const std::string&) { wmin = wmin_val; });
    rep->add_option("--wmax", wmax_val, "window maximum")
        ->each([&](const std::string&) { wmax = wmax_val; });
    rep->add_option("--out", common.out_dir, "output directory")->required();

    CLI11_PARSE(app, argc, argv);

    try {
        if (sim->parsed()) return cmd_simulate(common, phantom_path);
        if (moco->parsed()) return cmd_moco(common, in_path);
        if (conv->parsed()) return cmd_convert(common, in_path, mask_path, aif_path);
        if (fit->parsed()) return cmd_fit(common, in_path, mask_path, aif_path, fit_flags);
        if (ana->parsed()) return cmd_analyze(common, mbf_path, mask_path, rv_path, ana_flags);
        if (rep->parsed()) return cmd_report(common, in_path, wmin, wmax);
    } catch (const ValidationError& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    } catch (const std::exception& e) {
        std::cerr << "runtime error: " << e.what() << "\n";
        return 2;
    }
    return 1;
}
