#include "perfquant/moco.hpp"

#include <Eigen/SVD>

#include <algorithm>
#include <cmath>

#include "perfquant/parallel.hpp"

namespace perfquant {

Eigen::MatrixXd shift_bilinear(const Eigen::MatrixXd& img, double dy, double dx) {
    const int ny = static_cast<int>(img.rows());
    const int nx = static_cast<int>(img.cols());
    Eigen::MatrixXd out(ny, nx);
    for (int y = 0; y < ny; ++y) {
        const double sy = std::clamp(y - dy, 0.0, ny - 1.0);
        const int y0 = static_cast<int>(std::floor(sy));
        const int y1 = std::min(y0 + 1, ny - 1);
        const double wy = sy - y0;
        for (int x = 0; x < nx; ++x) {
            const double sx = std::clamp(x - dx, 0.0, nx - 1.0);
            const int x0 = static_cast<int>(std::floor(sx));
            const int x1 = std::min(x0 + 1, nx - 1);
            const double wx = sx - x0;
            out(y, x) = (1.0 - wy) * ((1.0 - wx) * img(y0, x0) + wx * img(y0, x1)) +
                        wy * ((1.0 - wx) * img(y1, x0) + wx * img(y1, x1));
        }
    }
    return out;
}

namespace {

// NCC between the reference and a frame displaced by integer (sy, sx),
// evaluated over the overlap region.
double ncc_at(const Eigen::MatrixXd& ref, const Eigen::MatrixXd& frame, int sy, int sx) {
    const int ny = static_cast<int>(ref.rows());
    const int nx = static_cast<int>(ref.cols());
    const int y0 = std::max(0, -sy), y1 = std::min(ny, ny - sy);
    const int x0 = std::max(0, -sx), x1 = std::min(nx, nx - sx);
    const int count = (y1 - y0) * (x1 - x0);
    if (count < 16) return -2.0;

    double sr = 0, sf = 0;
    for (int y = y0; y < y1; ++y)
        for (int x = x0; x < x1; ++x) {
            sr += ref(y, x);
            sf += frame(y + sy, x + sx);
        }
    const double mr = sr / count, mf = sf / count;
    double num = 0, dr = 0, df = 0;
    for (int y = y0; y < y1; ++y)
        for (int x = x0; x < x1; ++x) {
            const double a = ref(y, x) - mr;
            const double b = frame(y + sy, x + sx) - mf;
            num += a * b;
            dr += a * a;
            df += b * b;
        }
    if (dr <= 0.0 || df <= 0.0) return -2.0;  // flat region
    return num / std::sqrt(dr * df);
}

// peak offset of a parabola through (-1,c0),(0,c1),(+1,c2), clamped to +-0.5
double parabola_peak(double c0, double c1, double c2) {
    const double denom = c0 - 2.0 * c1 + c2;
    if (std::abs(denom) < 1e-12) return 0.0;
    return std::clamp(0.5 * (c0 - c2) / denom, -0.5, 0.5);
}

// 2D quadratic fit over the 3x3 neighbourhood of the integer peak; falls back
// to separable parabolas when the Hessian is not negative definite
std::pair<double, double> quadratic_peak_2d(const Eigen::MatrixXd& c, int iy, int ix) {
    const double dy_ = 0.5 * (c(iy + 1, ix) - c(iy - 1, ix));
    const double dx_ = 0.5 * (c(iy, ix + 1) - c(iy, ix - 1));
    const double hyy = c(iy + 1, ix) - 2.0 * c(iy, ix) + c(iy - 1, ix);
    const double hxx = c(iy, ix + 1) - 2.0 * c(iy, ix) + c(iy, ix - 1);
    const double hyx = 0.25 * (c(iy + 1, ix + 1) - c(iy + 1, ix - 1) -
                               c(iy - 1, ix + 1) + c(iy - 1, ix - 1));
    const double det = hyy * hxx - hyx * hyx;
    if (hyy < 0.0 && det > 1e-16) {
        const double py = (-dy_ * hxx + dx_ * hyx) / det;
        const double px = (-dx_ * hyy + dy_ * hyx) / det;
        if (std::abs(py) <= 0.75 && std::abs(px) <= 0.75)
            return {std::clamp(py, -0.5, 0.5), std::clamp(px, -0.5, 0.5)};
    }
    return {parabola_peak(c(iy - 1, ix), c(iy, ix), c(iy + 1, ix)),
            parabola_peak(c(iy, ix - 1), c(iy, ix), c(iy, ix + 1))};
}

}  // namespace

MotionEstimate register_translation(const ImageSeries& series, int reference_index,
                                    int max_shift) {
    series.validate();
    if (reference_index < 0 || reference_index >= series.nt())
        throw ValidationError("register_translation: reference index out of range");
    if (max_shift < 1) throw ValidationError("register_translation: max_shift must be >= 1");

    const Eigen::MatrixXd& ref = series.frames[static_cast<std::size_t>(reference_index)];
    MotionEstimate est;
    est.reference_index = reference_index;
    est.dy.assign(static_cast<std::size_t>(series.nt()), 0.0);
    est.dx.assign(static_cast<std::size_t>(series.nt()), 0.0);

    const int w = 2 * max_shift + 1;
    parallel_for(series.nt(), [&](int t) {
        if (t == reference_index) return;
        const Eigen::MatrixXd& frame = series.frames[static_cast<std::size_t>(t)];
        Eigen::MatrixXd score(w, w);
        double best = -3.0;
        int by = 0, bx = 0;
        for (int sy = -max_shift; sy <= max_shift; ++sy)
            for (int sx = -max_shift; sx <= max_shift; ++sx) {
                const double c = ncc_at(ref, frame, sy, sx);
                score(sy + max_shift, sx + max_shift) = c;
                if (c > best) {
                    best = c;
                    by = sy;
                    bx = sx;
                }
            }
        if (best <= -2.0) return;  // flat image: keep zero shift

        double fy = by, fx = bx;
        const int iy = by + max_shift, ix = bx + max_shift;
        if (iy > 0 && iy < w - 1 && ix > 0 && ix < w - 1) {
            const auto [py, px] = quadratic_peak_2d(score, iy, ix);
            fy += py;
            fx += px;
        }
        est.dy[static_cast<std::size_t>(t)] = fy;
        est.dx[static_cast<std::size_t>(t)] = fx;
    });
    return est;
}

namespace {

ImageSeries apply_correction(const ImageSeries& series, const MotionEstimate& est) {
    ImageSeries out;
    out.spacing_y = series.spacing_y;
    out.spacing_x = series.spacing_x;
    out.frames.resize(static_cast<std::size_t>(series.nt()));
    parallel_for(series.nt(), [&](int t) {
        const auto ti = static_cast<std::size_t>(t);
        out.frames[ti] = shift_bilinear(series.frames[ti], -est.dy[ti], -est.dx[ti]);
    });
    return out;
}

// rank truncation keeping >= var_frac of the (centred) variance
ImageSeries pca_reconstruct(const ImageSeries& series, double var_frac) {
    Eigen::MatrixXd m = series.casorati();
    const Eigen::VectorXd mean = m.rowwise().mean();
    m.colwise() -= mean;
    Eigen::BDCSVD<Eigen::MatrixXd> svd(m, Eigen::ComputeThinU | Eigen::ComputeThinV);
    const Eigen::VectorXd sv = svd.singularValues();
    const double total = sv.squaredNorm();
    int rank = static_cast<int>(sv.size());
    if (total > 0.0) {
        double acc = 0.0;
        for (int i = 0; i < sv.size(); ++i) {
            acc += sv[i] * sv[i];
            if (acc / total >= var_frac) {
                rank = i + 1;
                break;
            }
        }
    }
    Eigen::MatrixXd rec = svd.matrixU().leftCols(rank) *
                          sv.head(rank).asDiagonal() *
                          svd.matrixV().leftCols(rank).transpose();
    rec.colwise() += mean;
    return ImageSeries::from_casorati(rec, series.ny(), series.nx(), series.spacing_y,
                                      series.spacing_x);
}

}  // namespace

MocoResult motion_correct(const ImageSeries& series, const MocoConfig& config) {
    series.validate();
    const int ref = config.reference_index >= 0 ? config.reference_index : series.nt() / 2;
    if (ref >= series.nt())
        throw ValidationError("motion_correct: reference index out of range");
    const int nt_total = series.nt();

    // stage 1: estimate on the low-rank component. The low-rank view
    // under-represents large motion, so re-decompose and re-register while
    // the estimates still move appreciably.
    MotionEstimate stage1;
    stage1.reference_index = ref;
    stage1.dy.assign(static_cast<std::size_t>(nt_total), 0.0);
    stage1.dx.assign(static_cast<std::size_t>(nt_total), 0.0);
    ImageSeries corrected = series;
    int rpca_iters = 0;
    double rpca_resid = 0.0;
    for (int pass = 0; pass < config.stage1_passes; ++pass) {
        Decomposition dec = rpca_admm(corrected.casorati(), config.lambda, config.mu,
                                      config.tol, config.max_iter);
        rpca_iters = dec.iterations;
        rpca_resid = dec.primal_residual;
        ImageSeries low_rank = ImageSeries::from_casorati(
            dec.L, series.ny(), series.nx(), series.spacing_y, series.spacing_x);
        MotionEstimate inc = register_translation(low_rank, ref, config.max_shift);
        double inc_rms = 0.0;
        for (int t = 0; t < nt_total; ++t) {
            const auto ti = static_cast<std::size_t>(t);
            stage1.dy[ti] += inc.dy[ti];
            stage1.dx[ti] += inc.dx[ti];
            inc_rms += inc.dy[ti] * inc.dy[ti] + inc.dx[ti] * inc.dx[ti];
        }
        corrected = apply_correction(series, stage1);
        if (std::sqrt(inc_rms / (2.0 * nt_total)) < 0.25) break;
    }

    // stage 2: the motion left after stage 1 is noise-like across frames;
    // register each corrected frame to its PCA-denoised reconstruction and
    // keep only the fast component of the estimates. The slow component is
    // enhancement-induced registration bias, not motion.
    MotionEstimate composite = stage1;
    composite.reference_index = ref;
    const int nt = series.nt();
    auto high_pass = [nt](std::vector<double>& v) {
        std::vector<double> trend(v.size(), 0.0);
        for (int t = 0; t < nt; ++t) {
            const int lo = std::max(0, t - 1), hi = std::min(nt - 1, t + 1);
            double sum = 0.0;
            for (int k = lo; k <= hi; ++k) sum += v[static_cast<std::size_t>(k)];
            trend[static_cast<std::size_t>(t)] = sum / (hi - lo + 1);
        }
        for (int t = 0; t < nt; ++t) v[static_cast<std::size_t>(t)] -= trend[static_cast<std::size_t>(t)];
    };
    for (int pass = 0; pass < config.stage2_passes; ++pass) {
        ImageSeries denoised = pca_reconstruct(corrected, config.pca_variance);
        std::vector<double> r_dy(static_cast<std::size_t>(nt), 0.0);
        std::vector<double> r_dx(static_cast<std::size_t>(nt), 0.0);
        parallel_for(nt, [&](int t) {
            const auto ti = static_cast<std::size_t>(t);
            // per-frame reference: the frame's own denoised reconstruction
            ImageSeries pair;
            pair.frames = {denoised.frames[ti], corrected.frames[ti]};
            MotionEstimate e = register_translation(pair, 0, config.max_shift);
            r_dy[ti] = e.dy[1];
            r_dx[ti] = e.dx[1];
        });
        high_pass(r_dy);
        high_pass(r_dx);
        double largest = 0.0;
        for (int t = 0; t < nt; ++t) {
            if (t == ref) continue;
            const auto ti = static_cast<std::size_t>(t);
            composite.dy[ti] += r_dy[ti];
            composite.dx[ti] += r_dx[ti];
            largest = std::max({largest, std::abs(r_dy[ti]), std::abs(r_dx[ti])});
        }
        corrected = apply_correction(series, composite);  // resample originals once
        if (largest < 0.02) break;
    }

    MocoResult res;
    res.shifts = composite;
    res.corrected = std::move(corrected);
    res.rpca_iterations = rpca_iters;
    res.rpca_residual = rpca_resid;
    return res;
}

}  // namespace perfquant
