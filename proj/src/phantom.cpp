#include "perfquant/phantom.hpp"

#include <cmath>

#include "perfquant/moco.hpp"
#include "perfquant/rng.hpp"

namespace perfquant {

namespace {
constexpr double kPi = 3.14159265358979323846;

double wrap_deg(double a) {
    while (a < 0.0) a += 360.0;
    while (a >= 360.0) a -= 360.0;
    return a;
}
}

SampledCurve AifSpec::main_bolus(int nt, double dt) const {
    SampledCurve c;
    c.kind = CurveKind::aif;
    c.times.resize(static_cast<std::size_t>(nt));
    c.values.assign(static_cast<std::size_t>(nt), 0.0);
    double vmax = 0.0;
    for (int i = 0; i < nt; ++i) {
        const double t = i * dt;
        c.times[static_cast<std::size_t>(i)] = t;
        if (t > onset_s) {
            const double x = t - onset_s;
            c.values[static_cast<std::size_t>(i)] = std::pow(x, shape) * std::exp(-x / scale_s);
            vmax = std::max(vmax, c.values[static_cast<std::size_t>(i)]);
        }
    }
    if (vmax > 0.0)
        for (auto& v : c.values) v *= peak / vmax;
    return c;
}

std::vector<std::array<double, 2>> MotionSpec::per_frame(int nt, double dt) const {
    std::vector<std::array<double, 2>> m(static_cast<std::size_t>(nt), {0.0, 0.0});
    switch (type) {
        case Type::none:
            break;
        case Type::sinusoid:
            for (int t = 0; t < nt; ++t) {
                const double phase = 2.0 * kPi * (t * dt) / period_s;
                m[static_cast<std::size_t>(t)] = {amplitude_y * std::sin(phase),
                                                  amplitude_x * std::sin(phase)};
            }
            break;
        case Type::trace:
            if (trace_dy.size() != static_cast<std::size_t>(nt) ||
                trace_dx.size() != static_cast<std::size_t>(nt))
                throw ValidationError("motion trace length != frame count");
            for (int t = 0; t < nt; ++t)
                m[static_cast<std::size_t>(t)] = {trace_dy[static_cast<std::size_t>(t)],
                                                  trace_dx[static_cast<std::size_t>(t)]};
            break;
    }
    return m;
}

void PhantomSpec::validate() const {
    if (ny < 8 || nx < 8) throw ValidationError("phantom: grid too small");
    if (nt < 4) throw ValidationError("phantom: needs at least 4 frames");
    if (!(dt > 0.0)) throw ValidationError("phantom: dt must be > 0");
    if (!(r_inner > 0.0 && r_outer > r_inner))
        throw ValidationError("phantom: annulus radii invalid");
    if (noise_sd < 0.0) throw ValidationError("phantom: noise_sd must be >= 0");
    background.validate();
    for (const auto& d : defects) {
        d.params.validate();
        if (d.layer < 0 || d.layer > 2) throw ValidationError("phantom: defect layer invalid");
    }
    seq.validate();
    physio.validate();
    if (!(T10_blood > 0.0)) throw ValidationError("phantom: T10_blood must be > 0");
    if (n_baseline_frames < 1 || n_baseline_frames >= nt)
        throw ValidationError("phantom: baseline frame count invalid");
    if (aif.onset_s < n_baseline_frames * dt)
        throw ValidationError("phantom: AIF onset inside the baseline window");
}

namespace {

// static anatomy texture: smooth Gaussian blobs, seeded. Blobs stay broad so
// the low-rank decomposition keeps them out of the sparse component.
Eigen::MatrixXd make_texture(int ny, int nx, double amplitude, std::uint64_t seed) {
    Eigen::MatrixXd tex = Eigen::MatrixXd::Zero(ny, nx);
    if (amplitude <= 0.0) return tex;
    auto rng = make_rng(seed);
    std::uniform_real_distribution<double> uy(0.0, ny - 1.0), ux(0.0, nx - 1.0);
    const double scale = std::min(ny, nx);
    std::uniform_real_distribution<double> uw(scale / 10.0, scale / 4.0);
    std::uniform_real_distribution<double> ua(-1.0, 1.0);
    const int blobs = 12;
    for (int b = 0; b < blobs; ++b) {
        const double by = uy(rng), bx = ux(rng), w = uw(rng), a = ua(rng);
        for (int y = 0; y < ny; ++y)
            for (int x = 0; x < nx; ++x) {
                const double d2 = (y - by) * (y - by) + (x - bx) * (x - bx);
                tex(y, x) += a * std::exp(-d2 / (2.0 * w * w));
            }
    }
    const double peak = tex.array().abs().maxCoeff();
    if (peak > 0.0) tex *= amplitude / peak;
    return tex;
}

}  // namespace

PhantomOutput generate_phantom(const PhantomSpec& spec, std::uint64_t seed) {
    spec.validate();
    const int ny = spec.ny, nx = spec.nx, nt = spec.nt;

    PhantomOutput out;
    out.times.resize(static_cast<std::size_t>(nt));
    for (int t = 0; t < nt; ++t) out.times[static_cast<std::size_t>(t)] = t * spec.dt;

    out.aif_blood = spec.aif.main_bolus(nt, spec.dt);
    SampledCurve aif_plasma = out.aif_blood;
    for (auto& v : aif_plasma.values) v /= (1.0 - spec.physio.hct);

    // prebolus LV signal: scaled-down bolus through the blood relaxivity chain
    {
        SequenceParams blood_seq = spec.seq;
        blood_seq.T10 = spec.T10_blood;
        blood_seq.S0 = spec.S0;
        blood_seq.psi = 1.0;
        out.aif_prebolus_signal.kind = CurveKind::signal;
        out.aif_prebolus_signal.times = out.times;
        out.aif_prebolus_signal.values.resize(static_cast<std::size_t>(nt));
        auto rng = make_rng(substream_seed(seed, "phantom-aif-noise"));
        std::normal_distribution<double> gauss(0.0, 1.0);
        const double lv_area = kPi * spec.lv_radius * spec.lv_radius;
        const double aif_noise = spec.noise_sd / std::sqrt(std::max(lv_area, 1.0));
        for (int t = 0; t < nt; ++t) {
            const double c = spec.aif.prebolus_fraction *
                             out.aif_blood.values[static_cast<std::size_t>(t)];
            const double T1 = T1_from_concentration(blood_seq, c);
            out.aif_prebolus_signal.values[static_cast<std::size_t>(t)] =
                signal_from_T1(blood_seq, T1) + aif_noise * gauss(rng);
        }
    }

    // per-pixel parameter assignment: -1 outside mask, 0 background, 1+ defects
    const double insertion_rad = spec.rv_insertion_angle_deg * kPi / 180.0;
    out.centroid = {spec.centre_y, spec.centre_x};
    out.rv_points[0] = {spec.centre_y - std::sin(insertion_rad) * (spec.r_outer + 1.0),
                        spec.centre_x + std::cos(insertion_rad) * (spec.r_outer + 1.0)};
    const double inferior_rad = insertion_rad + 240.0 * kPi / 180.0;
    out.rv_points[1] = {spec.centre_y - std::sin(inferior_rad) * (spec.r_outer + 1.0),
                        spec.centre_x + std::cos(inferior_rad) * (spec.r_outer + 1.0)};

    Eigen::MatrixXi region = Eigen::MatrixXi::Constant(ny, nx, -1);
    out.mask = Eigen::MatrixXd::Zero(ny, nx);
    const double mid_r = 0.5 * (spec.r_inner + spec.r_outer);
    for (int y = 0; y < ny; ++y)
        for (int x = 0; x < nx; ++x) {
            const double dy = spec.centre_y - y, dx = x - spec.centre_x;
            const double r = std::hypot(dy, dx);
            if (r < spec.r_inner || r > spec.r_outer) continue;
            out.mask(y, x) = 1.0;
            region(y, x) = 0;
            const double ang = wrap_deg((std::atan2(dy, dx) - insertion_rad) * 180.0 / kPi);
            const bool endo = r < mid_r;
            for (std::size_t d = 0; d < spec.defects.size(); ++d) {
                const auto& def = spec.defects[d];
                const double a0 = wrap_deg(def.angle_start_deg);
                const double a1 = wrap_deg(def.angle_end_deg);
                const bool in_range = a0 <= a1 ? (ang >= a0 && ang < a1)
                                               : (ang >= a0 || ang < a1);
                const bool in_layer = def.layer == 2 || (def.layer == 0 && endo) ||
                                      (def.layer == 1 && !endo);
                if (in_range && in_layer) region(y, x) = static_cast<int>(d) + 1;
            }
        }

    // tissue concentration per distinct parameter set
    std::vector<KineticParams> region_params{spec.background};
    for (const auto& d : spec.defects) region_params.push_back(d.params);
    std::vector<SampledCurve> region_conc(region_params.size());
    for (std::size_t i = 0; i < region_params.size(); ++i)
        region_conc[i] = forward_model(region_params[i], aif_plasma, out.times);

    // truth maps
    out.truth_Fp = Eigen::MatrixXd::Zero(ny, nx);
    out.truth_vp = Eigen::MatrixXd::Zero(ny, nx);
    out.truth_ve = Eigen::MatrixXd::Zero(ny, nx);
    out.truth_PS = Eigen::MatrixXd::Zero(ny, nx);
    out.truth_delay = Eigen::MatrixXd::Zero(ny, nx);
    out.truth_mbf = Eigen::MatrixXd::Zero(ny, nx);
    for (int y = 0; y < ny; ++y)
        for (int x = 0; x < nx; ++x) {
            if (region(y, x) < 0) continue;
            const auto& p = region_params[static_cast<std::size_t>(region(y, x))];
            out.truth_Fp(y, x) = p.Fp;
            out.truth_vp(y, x) = p.vp;
            out.truth_ve(y, x) = p.ve;
            out.truth_PS(y, x) = p.PS;
            out.truth_delay(y, x) = p.delay;
            out.truth_mbf(y, x) = to_blood_units(p, spec.physio).Fb;
        }

    // signal synthesis
    SequenceParams tissue_seq = spec.seq;
    tissue_seq.S0 = spec.S0;
    tissue_seq.psi = 1.0;
    SequenceParams blood_seq = tissue_seq;
    blood_seq.T10 = spec.T10_blood;

    const Eigen::MatrixXd texture =
        make_texture(ny, nx, spec.texture_amplitude, substream_seed(seed, "phantom-texture"));
    const double base_signal = spec.background_level * spec.S0;

    // RV pool leads the LV bolus slightly
    AifSpec rv_spec = spec.aif;
    rv_spec.onset_s = std::max(0.5, spec.aif.onset_s - 2.0);
    const SampledCurve rv_conc = rv_spec.main_bolus(nt, spec.dt);

    out.motion = spec.motion.per_frame(nt, spec.dt);
    auto noise_rng = make_rng(substream_seed(seed, "phantom-noise"));
    std::normal_distribution<double> gauss(0.0, 1.0);

    out.series.spacing_y = 1.5;
    out.series.spacing_x = 1.5;
    out.series.frames.resize(static_cast<std::size_t>(nt));
    for (int t = 0; t < nt; ++t) {
        Eigen::MatrixXd frame(ny, nx);
        const auto ts = static_cast<std::size_t>(t);
        const double lv_T1 = T1_from_concentration(blood_seq, out.aif_blood.values[ts]);
        const double lv_sig = signal_from_T1(blood_seq, lv_T1);
        const double rv_T1 = T1_from_concentration(blood_seq, rv_conc.values[ts]);
        const double rv_sig = signal_from_T1(blood_seq, rv_T1);
        for (int y = 0; y < ny; ++y)
            for (int x = 0; x < nx; ++x) {
                double v = base_signal;
                const double d_rv = std::hypot(y - spec.rv_centre_y, x - spec.rv_centre_x);
                if (d_rv <= spec.rv_radius) v = rv_sig;
                const double d_c = std::hypot(y - spec.centre_y, x - spec.centre_x);
                if (region(y, x) >= 0) {
                    const double c = region_conc[static_cast<std::size_t>(region(y, x))].values[ts];
                    v = signal_from_T1(tissue_seq, T1_from_concentration(tissue_seq, c));
                } else if (d_c <= spec.lv_radius) {
                    v = lv_sig;
                }
                frame(y, x) = v * (1.0 + texture(y, x));
            }
        if (out.motion[ts][0] != 0.0 || out.motion[ts][1] != 0.0)
            frame = shift_bilinear(frame, out.motion[ts][0], out.motion[ts][1]);
        if (spec.noise_sd > 0.0)
            for (int y = 0; y < ny; ++y)
                for (int x = 0; x < nx; ++x) frame(y, x) += spec.noise_sd * gauss(noise_rng);
        out.series.frames[ts] = std::move(frame);
    }

    // which territories actually contain a defect (basal 6-sector geometry)
    {
        Eigen::MatrixXi seg =
            assign_segments(out.mask, out.rv_points, SliceLevel::basal, out.centroid);
        std::map<std::string, int> truth{{"LAD", 0}, {"LCx", 0}, {"RCA", 0}};
        for (int y = 0; y < ny; ++y)
            for (int x = 0; x < nx; ++x) {
                if (seg(y, x) == 0 || region(y, x) <= 0) continue;
                const int base = seg(y, x) > 16 ? seg(y, x) - 16 : seg(y, x);
                truth[territory_name(territory_of(base))] = 1;
            }
        out.territory_truth = std::move(truth);
    }
    return out;
}

}  // namespace perfquant
