// pybind11 bindings for the main perfquant operations.

#include <pybind11/eigen.h>
#include <pybind11/functional.h>
#include <pybind11/numpy.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

#include "perfquant/analysis.hpp"
#include "perfquant/bayes.hpp"
#include "perfquant/curve_fit.hpp"
#include "perfquant/kinetics.hpp"
#include "perfquant/moco.hpp"
#include "perfquant/phantom.hpp"
#include "perfquant/rpca.hpp"
#include "perfquant/signal_model.hpp"

namespace py = pybind11;
using namespace perfquant;

namespace {

SampledCurve make_curve(const std::vector<double>& times, const std::vector<double>& values,
                        CurveKind kind) {
    SampledCurve c;
    c.times = times;
    c.values = values;
    c.kind = kind;
    c.validate();
    return c;
}

ImageSeries series_from_array(const py::array_t<double, py::array::c_style>& a) {
    if (a.ndim() != 3) throw ValidationError("expected a (nt, ny, nx) array");
    ImageSeries s;
    const auto nt = a.shape(0), ny = a.shape(1), nx = a.shape(2);
    auto r = a.unchecked<3>();
    s.frames.resize(static_cast<std::size_t>(nt));
    for (py::ssize_t t = 0; t < nt; ++t) {
        Eigen::MatrixXd f(ny, nx);
        for (py::ssize_t y = 0; y < ny; ++y)
            for (py::ssize_t x = 0; x < nx; ++x) f(y, x) = r(t, y, x);
        s.frames[static_cast<std::size_t>(t)] = std::move(f);
    }
    return s;
}

py::array_t<double> series_to_array(const ImageSeries& s) {
    py::array_t<double> a({s.nt(), s.ny(), s.nx()});
    auto w = a.mutable_unchecked<3>();
    for (int t = 0; t < s.nt(); ++t)
        for (int y = 0; y < s.ny(); ++y)
            for (int x = 0; x < s.nx(); ++x)
                w(t, y, x) = s.frames[static_cast<std::size_t>(t)](y, x);
    return a;
}

}  // namespace

PYBIND11_MODULE(_perfquant, m) {
    m.doc() = "quantitative myocardial perfusion analysis";

    py::register_exception<ValidationError>(m, "ValidationError", PyExc_ValueError);

    py::class_<KineticParams>(m, "KineticParams")
        .def(py::init<>())
        .def(py::init([](double Fp, double vp, double ve, double PS, double delay) {
                 KineticParams p{Fp, vp, ve, PS, delay};
                 p.validate();
                 return p;
             }),
             py::arg("Fp"), py::arg("vp"), py::arg("ve"), py::arg("PS"),
             py::arg("delay") = 0.0)
        .def_readwrite("Fp", &KineticParams::Fp)
        .def_readwrite("vp", &KineticParams::vp)
        .def_readwrite("ve", &KineticParams::ve)
        .def_readwrite("PS", &KineticParams::PS)
        .def_readwrite("delay", &KineticParams::delay)
        .def("__repr__", [](const KineticParams& p) {
            return "KineticParams(Fp=" + std::to_string(p.Fp) + ", vp=" + std::to_string(p.vp) +
                   ", ve=" + std::to_string(p.ve) + ", PS=" + std::to_string(p.PS) +
                   ", delay=" + std::to_string(p.delay) + ")";
        });

    py::class_<PhysioConstants>(m, "PhysioConstants")
        .def(py::init<>())
        .def_readwrite("hct", &PhysioConstants::hct)
        .def_readwrite("density", &PhysioConstants::density);

    py::class_<SequenceParams>(m, "SequenceParams")
        .def(py::init<>())
        .def_readwrite("TR", &SequenceParams::TR)
        .def_readwrite("TSAT", &SequenceParams::TSAT)
        .def_readwrite("alpha_deg", &SequenceParams::alpha_deg)
        .def_readwrite("n", &SequenceParams::n)
        .def_readwrite("r1", &SequenceParams::r1)
        .def_readwrite("T10", &SequenceParams::T10)
        .def_readwrite("S0", &SequenceParams::S0)
        .def_readwrite("psi", &SequenceParams::psi);

    py::class_<ResidueCoefficients>(m, "ResidueCoefficients")
        .def_readonly("alpha", &ResidueCoefficients::alpha)
        .def_readonly("beta", &ResidueCoefficients::beta)
        .def_readonly("A", &ResidueCoefficients::A)
        .def_readonly("confluent", &ResidueCoefficients::confluent);

    m.def("residue_coefficients", &residue_coefficients, py::arg("params"),
          py::arg("allow_confluent") = true);
    m.def("residue_function",
          py::overload_cast<const KineticParams&, double>(&residue_function),
          py::arg("params"), py::arg("t"));

    m.def(
        "forward_model",
        [](const KineticParams& p, const std::vector<double>& aif_times,
           const std::vector<double>& aif_values, const std::vector<double>& times) {
            const SampledCurve aif = make_curve(aif_times, aif_values, CurveKind::aif);
            return forward_model(p, aif, times.empty() ? aif.times : times).values;
        },
        py::arg("params"), py::arg("aif_times"), py::arg("aif_values"),
        py::arg("times") = std::vector<double>{},
        "Tissue concentration curve of the exchange model for a sampled AIF.");

    m.def(
        "ode_reference",
        [](const KineticParams& p, const std::vector<double>& aif_times,
           const std::vector<double>& aif_values, double step) {
            const SampledCurve aif = make_curve(aif_times, aif_values, CurveKind::aif);
            return ode_reference(p, aif, aif.times, step).values;
        },
        py::arg("params"), py::arg("aif_times"), py::arg("aif_values"), py::arg("step") = 0.0,
        "Independent RK4 solution of the compartment ODEs.");

    m.def(
        "apply_delay",
        [](const std::vector<double>& times, const std::vector<double>& values, double tau) {
            return apply_delay(make_curve(times, values, CurveKind::aif), tau).values;
        },
        py::arg("times"), py::arg("values"), py::arg("tau"));

    m.def(
        "to_blood_units",
        [](const KineticParams& p, const PhysioConstants& c) {
            const BloodUnits b = to_blood_units(p, c);
            return py::make_tuple(b.Fb, b.vb);
        },
        py::arg("params"), py::arg("physio") = PhysioConstants{});

    m.def("signal_from_T1", &signal_from_T1, py::arg("seq"), py::arg("T1"));
    m.def("T1_from_signal", &T1_from_signal, py::arg("seq"), py::arg("signal"),
          py::arg("bracket_lo") = 1e-3, py::arg("bracket_hi") = 10.0);
    m.def("gd_from_T1", &gd_from_T1, py::arg("seq"), py::arg("T1"));
    m.def("T1_from_concentration", &T1_from_concentration, py::arg("seq"), py::arg("c"));
    m.def("estimate_psi",
          [](const SequenceParams& seq, const std::vector<double>& baseline) {
              return estimate_psi(seq, baseline);
          },
          py::arg("seq"), py::arg("baseline_signals"));
    m.def(
        "concentration_from_signal",
        [](const SequenceParams& seq, const std::vector<double>& times,
           const std::vector<double>& values) {
            ConversionStats stats;
            const SampledCurve out = concentration_from_signal(
                seq, make_curve(times, values, CurveKind::signal), CurveKind::tissue, &stats);
            return py::make_tuple(out.values, stats.clamped_negative);
        },
        py::arg("seq"), py::arg("times"), py::arg("values"));
    m.def(
        "build_dual_bolus_aif",
        [](const std::vector<double>& times, const std::vector<double>& values, double scale,
           double start) {
            const SampledCurve out =
                build_dual_bolus_aif(make_curve(times, values, CurveKind::aif), scale, start);
            return py::make_tuple(out.times, out.values);
        },
        py::arg("times"), py::arg("values"), py::arg("scale") = 10.0,
        py::arg("main_bolus_start") = 0.0);

    py::class_<FitBounds>(m, "FitBounds")
        .def(py::init<>())
        .def_readwrite("lower", &FitBounds::lower)
        .def_readwrite("upper", &FitBounds::upper);

    py::class_<FitResult>(m, "FitResult")
        .def_readonly("params", &FitResult::params)
        .def_readonly("rss", &FitResult::rss)
        .def_readonly("converged", &FitResult::converged)
        .def_readonly("n_iter", &FitResult::n_iter)
        .def_readonly("start_index", &FitResult::start_index);

    m.def(
        "fit_nlls",
        [](const std::vector<double>& times, const std::vector<double>& aif_values,
           const std::vector<double>& tissue_values, const FitBounds& bounds, int n_starts,
           std::uint64_t seed, bool fit_delay, double fixed_delay) {
            FitOptions opt;
            opt.n_starts = n_starts;
            opt.seed = seed;
            opt.fit_delay = fit_delay;
            opt.fixed_delay = fixed_delay;
            return fit_nlls(make_curve(times, aif_values, CurveKind::aif),
                            make_curve(times, tissue_values, CurveKind::tissue), bounds, opt);
        },
        py::arg("times"), py::arg("aif_values"), py::arg("tissue_values"),
        py::arg("bounds") = FitBounds{}, py::arg("n_starts") = 10, py::arg("seed") = 0,
        py::arg("fit_delay") = true, py::arg("fixed_delay") = 0.0,
        "Multi-start Levenberg-Marquardt estimate of the kinetic parameters.");

    py::class_<PriorSpec>(m, "PriorSpec")
        .def(py::init<>())
        .def_readwrite("box", &PriorSpec::box)
        .def_readwrite("spatial_weight", &PriorSpec::spatial_weight)
        .def_readwrite("noise_sigma", &PriorSpec::noise_sigma);

    py::class_<PosteriorSamples>(m, "PosteriorSamples")
        .def_readonly("draws", &PosteriorSamples::draws)
        .def_readonly("acceptance_rate", &PosteriorSamples::acceptance_rate)
        .def_readonly("mean", &PosteriorSamples::mean)
        .def_readonly("sd", &PosteriorSamples::sd);

    m.def(
        "infer_pixel",
        [](const std::vector<double>& times, const std::vector<double>& aif_values,
           const std::vector<double>& tissue_values, const PriorSpec& spec, std::uint64_t seed,
           int n_iter, int burn_in, int thin, double fixed_delay) {
            InferOptions opt;
            opt.mh.n_iter = n_iter;
            opt.mh.burn_in = burn_in;
            opt.mh.thin = thin;
            opt.fixed_delay = fixed_delay;
            return infer_pixel(make_curve(times, aif_values, CurveKind::aif),
                               make_curve(times, tissue_values, CurveKind::tissue), spec, seed,
                               opt);
        },
        py::arg("times"), py::arg("aif_values"), py::arg("tissue_values"),
        py::arg("spec") = PriorSpec{}, py::arg("seed") = 0, py::arg("n_iter") = 20000,
        py::arg("burn_in") = 5000, py::arg("thin") = 5, py::arg("fixed_delay") = 0.0,
        "Random-walk Metropolis-Hastings posterior for one tissue curve.");

    m.def("log_likelihood",
          [](const KineticParams& p, const std::vector<double>& times,
             const std::vector<double>& aif_values, const std::vector<double>& tissue_values,
             double sigma) {
              return log_likelihood(p, make_curve(times, aif_values, CurveKind::aif),
                                    make_curve(times, tissue_values, CurveKind::tissue), sigma);
          },
          py::arg("params"), py::arg("times"), py::arg("aif_values"),
          py::arg("tissue_values"), py::arg("sigma"));

    m.def("soft_threshold", &soft_threshold, py::arg("x"), py::arg("eps"));
    m.def("svt", &svt, py::arg("x"), py::arg("eps"));

    py::class_<Decomposition>(m, "Decomposition")
        .def_readonly("L", &Decomposition::L)
        .def_readonly("S", &Decomposition::S)
        .def_readonly("iterations", &Decomposition::iterations)
        .def_readonly("primal_residual", &Decomposition::primal_residual)
        .def_readonly("converged", &Decomposition::converged)
        .def_readonly("objective_history", &Decomposition::objective_history);

    m.def("rpca_admm", &rpca_admm, py::arg("m"), py::arg("lambda_") = 0.0,
          py::arg("mu") = 0.0, py::arg("tol") = 1e-7, py::arg("max_iter") = 500,
          "Low-rank + sparse split via the alternating direction method.");

    m.def(
        "register_translation",
        [](const py::array_t<double, py::array::c_style>& series, int reference_index,
           int max_shift) {
            const MotionEstimate e =
                register_translation(series_from_array(series), reference_index, max_shift);
            return py::make_tuple(e.dy, e.dx);
        },
        py::arg("series"), py::arg("reference_index"), py::arg("max_shift") = 8);

    m.def(
        "motion_correct",
        [](const py::array_t<double, py::array::c_style>& series) {
            const MocoResult r = motion_correct(series_from_array(series));
            return py::make_tuple(series_to_array(r.corrected), r.shifts.dy, r.shifts.dx);
        },
        py::arg("series"), "Two-stage low-rank motion correction; returns (corrected, dy, dx).");

    m.def(
        "roc_analysis",
        [](const std::vector<double>& scores, const std::vector<int>& labels) {
            const RocResult r = roc_analysis(scores, labels);
            return py::make_tuple(r.auc, r.optimal_threshold);
        },
        py::arg("scores"), py::arg("labels"),
        "AUC and Youden-optimal threshold; positives take lower scores.");

    m.def(
        "generate_phantom",
        [](int ny, int nx, int nt, double dt, double noise_sd, std::uint64_t seed) {
            PhantomSpec spec;
            spec.ny = ny;
            spec.nx = nx;
            spec.nt = nt;
            spec.dt = dt;
            spec.noise_sd = noise_sd;
            spec.centre_y = 0.5 * ny;
            spec.centre_x = 0.5 * nx;
            spec.r_inner = 0.19 * std::min(ny, nx);
            spec.r_outer = 0.33 * std::min(ny, nx);
            spec.lv_radius = 0.12 * std::min(ny, nx);
            spec.rv_centre_y = 0.5 * ny;
            spec.rv_centre_x = 0.10 * nx;
            spec.rv_radius = 0.08 * std::min(ny, nx);
            const PhantomOutput out = generate_phantom(spec, seed);
            py::dict d;
            d["series"] = series_to_array(out.series);
            d["mask"] = out.mask;
            d["truth_Fp"] = out.truth_Fp;
            d["truth_mbf"] = out.truth_mbf;
            d["aif_times"] = out.aif_blood.times;
            d["aif_values"] = out.aif_blood.values;
            return d;
        },
        py::arg("ny") = 48, py::arg("nx") = 48, py::arg("nt") = 40, py::arg("dt") = 1.0,
        py::arg("noise_sd") = 0.0, py::arg("seed") = 0,
        "Simple uniform annulus phantom; returns a dict of arrays.");
}
