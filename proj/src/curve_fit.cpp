#include "perfquant/curve_fit.hpp"

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>

#include "perfquant/rng.hpp"

namespace perfquant {

namespace {

constexpr int kNP = 5;  // Fp, vp, ve, PS, delay

double logit(double u) { return std::log(u / (1.0 - u)); }
double sigmoid(double z) { return 1.0 / (1.0 + std::exp(-z)); }

std::array<double, kNP> to_array(const KineticParams& p) {
    return {p.Fp, p.vp, p.ve, p.PS, p.delay};
}

KineticParams from_array(const std::array<double, kNP>& a) {
    return {a[0], a[1], a[2], a[3], a[4]};
}

}  // namespace

void FitBounds::validate() const {
    for (int j = 0; j < kNP; ++j)
        if (!(lower[j] < upper[j]))
            throw ValidationError("bounds: lower must be < upper elementwise");
}

KineticParams FitBounds::clamp_inside(const KineticParams& p, double margin) const {
    auto a = to_array(p);
    for (int j = 0; j < kNP; ++j) {
        const double w = upper[j] - lower[j];
        a[j] = std::clamp(a[j], lower[j] + margin * w, upper[j] - margin * w);
    }
    return from_array(a);
}

std::vector<double> residuals(const KineticParams& p, const SampledCurve& aif,
                              const SampledCurve& tissue) {
    tissue.validate();
    if (tissue.size() < 2) throw ValidationError("residuals: tissue too short");
    SampledCurve model = forward_model(p, aif, tissue.times);
    std::vector<double> r(tissue.size());
    for (std::size_t i = 0; i < r.size(); ++i) r[i] = tissue.values[i] - model.values[i];
    return r;
}

double rss_of(const std::vector<double>& r) {
    return std::inner_product(r.begin(), r.end(), r.begin(), 0.0);
}

namespace {

// Parameters live in an unconstrained z-space; theta = lo + (hi-lo) sigmoid(z)
// keeps every trial point inside the box while staying smooth for LM.
struct Transform {
    const FitBounds& b;
    bool fit_delay;
    double fixed_delay;

    int dim() const { return fit_delay ? kNP : kNP - 1; }

    KineticParams decode(const Eigen::VectorXd& z) const {
        std::array<double, kNP> a;
        for (int j = 0; j < dim(); ++j)
            a[j] = b.lower[j] + (b.upper[j] - b.lower[j]) * sigmoid(z[j]);
        if (!fit_delay) a[4] = fixed_delay;
        return from_array(a);
    }

    Eigen::VectorXd encode(const KineticParams& p) const {
        auto a = to_array(p);
        Eigen::VectorXd z(dim());
        for (int j = 0; j < dim(); ++j) {
            double u = (a[j] - b.lower[j]) / (b.upper[j] - b.lower[j]);
            u = std::clamp(u, 1e-9, 1.0 - 1e-9);
            z[j] = logit(u);
        }
        return z;
    }
};

struct LmOutcome {
    Eigen::VectorXd z;
    double rss;
    bool converged;
    int n_iter;
};

LmOutcome levenberg_marquardt(const SampledCurve& aif, const SampledCurve& tissue,
                              const Transform& tr, Eigen::VectorXd z, int max_iter,
                              const std::function<void(int, double)>& trace) {
    const int d = tr.dim();
    // the box is a rectangle but the model needs vp + ve <= 1: inadmissible
    // trial points are treated as infinitely bad and never accepted
    const auto eval = [&](const Eigen::VectorXd& zz, std::vector<double>& out) {
        const KineticParams p = tr.decode(zz);
        if (p.vp + p.ve > 1.0) return false;
        out = residuals(p, aif, tissue);
        return true;
    };

    std::vector<double> r;
    if (!eval(z, r)) throw ValidationError("fit: inadmissible start point");
    double rss = rss_of(r);
    if (trace) trace(0, rss);

    double lambda = 1e-3;
    bool converged = false;
    int iter = 0;
    const int m = static_cast<int>(r.size());
    Eigen::MatrixXd J(m, d);
    const double fd_step = 1e-6;

    for (iter = 1; iter <= max_iter; ++iter) {
        // forward-difference Jacobian of the residual vector in z-space
        for (int j = 0; j < d; ++j) {
            Eigen::VectorXd zp = z;
            zp[j] += fd_step;
            std::vector<double> rp;
            if (!eval(zp, rp)) {  // probe crossed vp + ve = 1: flip direction
                zp[j] = z[j] - fd_step;
                if (!eval(zp, rp)) rp = r;
                for (int i = 0; i < m; ++i) J(i, j) = (r[i] - rp[i]) / fd_step;
            } else {
                for (int i = 0; i < m; ++i) J(i, j) = (rp[i] - r[i]) / fd_step;
            }
        }
        Eigen::Map<const Eigen::VectorXd> rv(r.data(), m);
        Eigen::MatrixXd JtJ = J.transpose() * J;
        Eigen::VectorXd g = J.transpose() * rv;

        if (g.lpNorm<Eigen::Infinity>() < 1e-12 * (1.0 + rss)) {
            converged = true;
            break;
        }

        bool accepted = false;
        while (!accepted && lambda < 1e12) {
            Eigen::MatrixXd Aug = JtJ;
            for (int j = 0; j < d; ++j)
                Aug(j, j) += lambda * std::max(JtJ(j, j), 1e-12);
            Eigen::VectorXd step = Aug.ldlt().solve(-g);
            Eigen::VectorXd zn = z + step;
            std::vector<double> rn;
            const bool admissible = eval(zn, rn);
            double rss_n = admissible ? rss_of(rn) : std::numeric_limits<double>::infinity();
            if (rss_n < rss) {
                const double rel_drop = (rss - rss_n) / std::max(rss, 1e-300);
                const double step_norm = step.lpNorm<Eigen::Infinity>();
                z = zn;
                r = std::move(rn);
                rss = rss_n;
                lambda = std::max(lambda / 10.0, 1e-12);
                accepted = true;
                if (trace) trace(iter, rss);
                if (rel_drop < 1e-12 || step_norm < 1e-10 || rss < 1e-300)
                    converged = true;
            } else {
                lambda *= 10.0;
            }
        }
        if (!accepted) {  // no downhill step found at any damping
            converged = true;
        }
        if (converged) break;
    }
    return {z, rss, converged, std::min(iter, max_iter)};
}

}  // namespace

FitResult fit_nlls(const SampledCurve& aif, const SampledCurve& tissue,
                   const FitBounds& bounds, const FitOptions& opt) {
    bounds.validate();
    tissue.validate();
    if (opt.n_starts < 1) throw ValidationError("fit: n_starts must be >= 1");
    const bool all_zero =
        std::all_of(tissue.values.begin(), tissue.values.end(),
                    [](double v) { return v == 0.0; });
    if (all_zero) throw ValidationError("fit: tissue curve is identically zero");

    Transform tr{bounds, opt.fit_delay, opt.fixed_delay};
    const int d = tr.dim();

    // Start 0 is a plain uniform draw, identical for every n_starts at a
    // given seed, so a multi-start run always contains the single-start run.
    // The remaining starts form a jittered Latin hypercube over the box.
    auto rng = make_rng(substream_seed(opt.seed, "nlls-starts"));
    std::uniform_real_distribution<double> unif(0.0, 1.0);
    std::vector<Eigen::VectorXd> starts;
    {
        Eigen::VectorXd u0(d);
        for (int j = 0; j < d; ++j) u0[j] = unif(rng);
        starts.push_back(u0);
    }
    if (opt.n_starts > 1) {
        const int m = opt.n_starts - 1;
        std::vector<std::vector<int>> perm(static_cast<std::size_t>(d), std::vector<int>(static_cast<std::size_t>(m)));
        for (int j = 0; j < d; ++j) {
            std::iota(perm[static_cast<std::size_t>(j)].begin(), perm[static_cast<std::size_t>(j)].end(), 0);
            std::shuffle(perm[static_cast<std::size_t>(j)].begin(), perm[static_cast<std::size_t>(j)].end(), rng);
        }
        for (int s = 0; s < m; ++s) {
            Eigen::VectorXd u(d);
            for (int j = 0; j < d; ++j)
                u[j] = (perm[static_cast<std::size_t>(j)][static_cast<std::size_t>(s)] + unif(rng)) / m;
            starts.push_back(u);
        }
    }

    FitResult best;
    best.rss = std::numeric_limits<double>::infinity();
    bool any_converged = false;

    for (int s = 0; s < opt.n_starts; ++s) {
        Eigen::VectorXd z(d);
        for (int j = 0; j < d; ++j) {
            const double u = std::clamp(starts[static_cast<std::size_t>(s)][j], 1e-6, 1.0 - 1e-6);
            z[j] = logit(u);
        }
        {  // project starts violating vp + ve <= 1 back inside
            KineticParams p = tr.decode(z);
            if (p.vp + p.ve > 1.0) {
                p.ve = std::max(bounds.lower[2], 0.95 * (1.0 - p.vp));
                const double u = std::clamp(
                    (p.ve - bounds.lower[2]) / (bounds.upper[2] - bounds.lower[2]), 1e-6,
                    1.0 - 1e-6);
                z[2] = logit(u);
            }
        }
        LmOutcome out = levenberg_marquardt(aif, tissue, tr, z, opt.max_iter, opt.trace);
        any_converged = any_converged || out.converged;
        if (out.rss < best.rss) {
            best.params = tr.decode(out.z);
            best.rss = out.rss;
            best.converged = out.converged;
            best.n_iter = out.n_iter;
            best.start_index = s;
        }
    }
    if (!any_converged)
        throw std::runtime_error("fit: no start converged within max_iter");
    return best;
}

}  // namespace perfquant
