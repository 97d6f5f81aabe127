#include "perfquant/bayes.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "perfquant/parallel.hpp"
#include "perfquant/rng.hpp"

namespace perfquant {

namespace {
constexpr double kNegInf = -std::numeric_limits<double>::infinity();
constexpr double kLog2Pi = 1.8378770664093453;
constexpr double kMinPS = 1e-4;  // log-space floor when the box allows PS = 0
constexpr int kAdaptWindow = 200;
}

void PriorSpec::validate() const {
    box.validate();
    if (spatial_weight < 0.0) throw ValidationError("prior: spatial_weight must be >= 0");
    if (!(noise_sigma > 0.0)) throw ValidationError("prior: noise_sigma must be > 0");
}

double log_likelihood(const KineticParams& p, const SampledCurve& aif,
                      const SampledCurve& tissue, double sigma) {
    if (!(sigma > 0.0)) throw ValidationError("log_likelihood: sigma must be > 0");
    const std::vector<double> r = residuals(p, aif, tissue);
    const double n = static_cast<double>(r.size());
    return -0.5 * n * (kLog2Pi + 2.0 * std::log(sigma)) - rss_of(r) / (2.0 * sigma * sigma);
}

namespace {

bool inside_box(const KineticParams& p, const FitBounds& b) {
    const std::array<double, 5> a{p.Fp, p.vp, p.ve, p.PS, p.delay};
    for (int j = 0; j < 5; ++j)
        if (a[j] < b.lower[j] || a[j] > b.upper[j]) return false;
    return p.vp + p.ve <= 1.0;  // fractional volumes must fit in a voxel
}

std::array<double, 4> log_kinetic(const KineticParams& p) {
    return {std::log(p.Fp), std::log(p.vp), std::log(p.ve), std::log(p.PS)};
}

}  // namespace

double log_prior(const KineticParams& p, const PriorSpec& spec,
                 std::span<const KineticParams> neighbors) {
    if (!inside_box(p, spec.box)) return kNegInf;
    if (spec.spatial_weight == 0.0 || neighbors.empty()) return 0.0;
    const auto lp = log_kinetic(p);
    double sum = 0.0;
    for (const auto& nb : neighbors) {
        const auto ln = log_kinetic(nb);
        for (int j = 0; j < 4; ++j) {
            if (!spec.spatial_on[static_cast<std::size_t>(j)]) continue;
            const double d = lp[static_cast<std::size_t>(j)] - ln[static_cast<std::size_t>(j)];
            sum += d * d;
        }
    }
    return -0.5 * spec.spatial_weight * sum;
}

bool mh_accept(double delta_log_target, double u) {
    if (delta_log_target >= 0.0) return true;
    return std::log(u) < delta_log_target;
}

namespace {

// One random-walk chain. Blocks may be run separately (infer_field sweeps);
// state, RNG, adaptation and recording all key off the global iteration
// count, so a chain split into blocks is identical to a contiguous run when
// the target does not change between blocks.
class Chain {
public:
    Chain(Eigen::VectorXd init, Eigen::VectorXd proposal_sd, MhOptions opt,
          std::uint64_t seed)
        : z_(std::move(init)), sd_(std::move(proposal_sd)), opt_(opt),
          rng_(make_rng(seed)) {
        sum_ = Eigen::VectorXd::Zero(z_.size());
        sumsq_ = Eigen::VectorXd::Zero(z_.size());
        psum_ = Eigen::VectorXd::Zero(z_.size());
        psumsq_ = Eigen::VectorXd::Zero(z_.size());
        block_sum_ = Eigen::VectorXd::Zero(z_.size());
    }

    void run_block(int iters, const std::function<double(const Eigen::VectorXd&)>& target,
                   bool record_draws) {
        double lt = target(z_);
        if (!std::isfinite(lt))
            throw ValidationError("metropolis_hastings: log target not finite at init");
        std::normal_distribution<double> gauss(0.0, 1.0);
        std::uniform_real_distribution<double> unif(0.0, 1.0);
        block_sum_.setZero();
        block_count_ = 0;
        Eigen::VectorXd cand(z_.size());
        for (int k = 0; k < iters; ++k) {
            for (Eigen::Index j = 0; j < z_.size(); ++j)
                cand[j] = z_[j] + scale_ * sd_[j] * gauss(rng_);
            const double lt_c = target(cand);
            const double u = unif(rng_);
            if (std::isfinite(lt_c) && mh_accept(lt_c - lt, u)) {
                z_ = cand;
                lt = lt_c;
                ++accepted_;
                ++window_accepted_;
            }
            ++iter_;
            if (opt_.adapt && iter_ <= opt_.burn_in && iter_ % kAdaptWindow == 0) {
                const double rate = static_cast<double>(window_accepted_) / kAdaptWindow;
                if (rate < 0.2) scale_ *= 0.8;
                else if (rate > 0.4) scale_ *= 1.25;
                window_accepted_ = 0;
            }
            block_sum_ += z_;
            ++block_count_;
            if (iter_ > opt_.burn_in && (iter_ - opt_.burn_in - 1) % opt_.thin == 0) {
                const Eigen::VectorXd p = z_.array().exp().matrix();
                sum_ += z_;
                sumsq_ += z_.cwiseProduct(z_);
                psum_ += p;
                psumsq_ += p.cwiseProduct(p);
                ++n_draws_;
                if (record_draws) draws_.push_back(z_);
            }
        }
    }

    const Eigen::VectorXd& state() const { return z_; }
    Eigen::VectorXd block_mean() const {
        return block_count_ > 0 ? Eigen::VectorXd(block_sum_ / block_count_) : z_;
    }
    int total_iterations() const { return iter_; }
    double acceptance_rate() const {
        return iter_ > 0 ? static_cast<double>(accepted_) / iter_ : 0.0;
    }
    int draw_count() const { return n_draws_; }
    Eigen::VectorXd mean() const { return sum_ / std::max(1, n_draws_); }
    Eigen::VectorXd sd() const {
        const double n = std::max(1, n_draws_);
        Eigen::VectorXd m = sum_ / n;
        Eigen::VectorXd v = sumsq_ / n - m.cwiseProduct(m);
        return v.cwiseMax(0.0).cwiseSqrt();
    }
    /// arithmetic mean/sd of exp(z) over the recorded draws
    Eigen::VectorXd param_mean() const { return psum_ / std::max(1, n_draws_); }
    Eigen::VectorXd param_sd() const {
        const double n = std::max(1, n_draws_);
        Eigen::VectorXd m = psum_ / n;
        Eigen::VectorXd v = psumsq_ / n - m.cwiseProduct(m);
        return v.cwiseMax(0.0).cwiseSqrt();
    }
    const std::vector<Eigen::VectorXd>& draws() const { return draws_; }

private:
    Eigen::VectorXd z_, sd_;
    MhOptions opt_;
    std::mt19937_64 rng_;
    double scale_ = 1.0;
    int iter_ = 0;
    long accepted_ = 0;
    int window_accepted_ = 0;
    Eigen::VectorXd sum_, sumsq_, psum_, psumsq_, block_sum_;
    int n_draws_ = 0;
    double block_count_ = 0;
    std::vector<Eigen::VectorXd> draws_;
};

}  // namespace

MhResult metropolis_hastings(const std::function<double(const Eigen::VectorXd&)>& log_target,
                             const Eigen::VectorXd& init, const Eigen::VectorXd& proposal_sd,
                             const MhOptions& opt, std::uint64_t seed) {
    if (opt.n_iter <= opt.burn_in)
        throw ValidationError("metropolis_hastings: n_iter must exceed burn_in");
    if (opt.thin < 1) throw ValidationError("metropolis_hastings: thin must be >= 1");
    Chain chain(init, proposal_sd, opt, seed);
    chain.run_block(opt.n_iter, log_target, /*record_draws=*/true);
    MhResult res;
    res.draws = chain.draws();
    res.acceptance_rate = chain.acceptance_rate();
    res.mean = chain.mean();
    res.sd = chain.sd();
    return res;
}

namespace {

struct LogBox {
    std::array<double, 4> lo, hi;

    explicit LogBox(const FitBounds& b) {
        for (int j = 0; j < 4; ++j) {
            double lower = b.lower[j];
            // a zero lower bound (PS defaults to [0, 5]) has no log image
            if (!(lower > 0.0)) lower = (j == 3) ? kMinPS : 1e-6;
            lo[static_cast<std::size_t>(j)] = std::log(lower);
            hi[static_cast<std::size_t>(j)] = std::log(b.upper[j]);
        }
    }

    Eigen::VectorXd midpoint() const {
        Eigen::VectorXd z(4);
        for (int j = 0; j < 4; ++j)
            z[j] = 0.5 * (lo[static_cast<std::size_t>(j)] + hi[static_cast<std::size_t>(j)]);
        return z;
    }
};

KineticParams params_from_log(const Eigen::VectorXd& z, double delay) {
    return {std::exp(z[0]), std::exp(z[1]), std::exp(z[2]), std::exp(z[3]), delay};
}

PosteriorSamples summarize(const Chain& chain) {
    PosteriorSamples out;
    out.acceptance_rate = chain.acceptance_rate();
    out.draws.reserve(chain.draws().size());
    for (const auto& z : chain.draws()) {
        std::array<double, 4> p;
        for (int j = 0; j < 4; ++j) p[static_cast<std::size_t>(j)] = std::exp(z[j]);
        out.draws.push_back(p);
    }
    const Eigen::VectorXd m = chain.param_mean();
    const Eigen::VectorXd s = chain.param_sd();
    for (int j = 0; j < 4; ++j) {
        out.mean[static_cast<std::size_t>(j)] = m[j];
        out.sd[static_cast<std::size_t>(j)] = s[j];
    }
    return out;
}

Eigen::VectorXd default_proposal_sd() {
    Eigen::VectorXd sd(4);
    sd.setConstant(0.15);
    return sd;
}

}  // namespace

PosteriorSamples infer_pixel(const SampledCurve& aif, const SampledCurve& tissue,
                             const PriorSpec& spec, std::uint64_t seed,
                             const InferOptions& opt) {
    spec.validate();
    const LogBox box(spec.box);
    const double sigma = spec.noise_sigma;
    auto target = [&](const Eigen::VectorXd& z) {
        const KineticParams p = params_from_log(z, opt.fixed_delay);
        const double lp = log_prior(p, spec, {});
        if (!std::isfinite(lp)) return kNegInf;
        return log_likelihood(p, aif, tissue, sigma) + lp;
    };
    Chain chain(box.midpoint(), default_proposal_sd(), opt.mh, seed);
    chain.run_block(opt.mh.n_iter, target, /*record_draws=*/true);
    return summarize(chain);
}

namespace {

struct PixelSite {
    int y, x;
    SampledCurve tissue;
    std::vector<int> neighbors;  // indices into the site list
    std::array<double, 4> estimate_log;  // current log-parameter estimate
};

}  // namespace

FieldResult infer_field(const SampledCurve& aif, const ImageSeries& conc,
                        const std::vector<double>& times, const Eigen::MatrixXd& mask,
                        const PriorSpec& spec, std::uint64_t seed,
                        const InferOptions& opt) {
    spec.validate();
    conc.validate();
    const int ny = conc.ny(), nx = conc.nx(), nt = conc.nt();
    if (mask.rows() != ny || mask.cols() != nx)
        throw ValidationError("infer_field: mask shape mismatch");
    if (static_cast<int>(times.size()) != nt)
        throw ValidationError("infer_field: times length != frame count");
    if (opt.sweeps < 1) throw ValidationError("infer_field: sweeps must be >= 1");

    // collect masked sites
    Eigen::MatrixXi site_of = Eigen::MatrixXi::Constant(ny, nx, -1);
    std::vector<PixelSite> sites;
    for (int y = 0; y < ny; ++y)
        for (int x = 0; x < nx; ++x)
            if (mask(y, x) != 0.0) {
                site_of(y, x) = static_cast<int>(sites.size());
                PixelSite s;
                s.y = y;
                s.x = x;
                s.tissue.kind = CurveKind::tissue;
                s.tissue.times = times;
                s.tissue.values.resize(static_cast<std::size_t>(nt));
                for (int t = 0; t < nt; ++t)
                    s.tissue.values[static_cast<std::size_t>(t)] = conc.frames[static_cast<std::size_t>(t)](y, x);
                sites.push_back(std::move(s));
            }
    if (sites.empty()) throw ValidationError("infer_field: empty mask");

    const int dy4[] = {-1, 1, 0, 0}, dx4[] = {0, 0, -1, 1};
    const int dy8[] = {-1, 1, 0, 0, -1, -1, 1, 1}, dx8[] = {0, 0, -1, 1, -1, 1, -1, 1};
    const int nn = spec.eight_connected ? 8 : 4;
    const int* dys = spec.eight_connected ? dy8 : dy4;
    const int* dxs = spec.eight_connected ? dx8 : dx4;
    for (auto& s : sites)
        for (int k = 0; k < nn; ++k) {
            const int yy = s.y + dys[k], xx = s.x + dxs[k];
            if (yy >= 0 && yy < ny && xx >= 0 && xx < nx && site_of(yy, xx) >= 0)
                s.neighbors.push_back(site_of(yy, xx));
        }

    const LogBox box(spec.box);
    const Eigen::VectorXd init = box.midpoint();
    for (auto& s : sites)
        for (int j = 0; j < 4; ++j) s.estimate_log[static_cast<std::size_t>(j)] = init[j];

    std::vector<Chain> chains;
    chains.reserve(sites.size());
    for (std::size_t i = 0; i < sites.size(); ++i) {
        const auto& s = sites[i];
        const std::uint64_t px_seed = substream_seed(
            seed, "bayes-pixel", static_cast<std::uint64_t>(s.y) * nx + s.x);
        chains.emplace_back(init, default_proposal_sd(), opt.mh, px_seed);
    }

    double sigma = spec.noise_sigma;

    // iterations per sweep; the last sweep absorbs the remainder
    const int base_block = opt.mh.n_iter / opt.sweeps;

    auto run_site = [&](int i) {
        auto& s = sites[static_cast<std::size_t>(i)];
        auto& chain = chains[static_cast<std::size_t>(i)];
        // neighbour estimates are frozen for this half-sweep
        std::vector<KineticParams> nb;
        nb.reserve(s.neighbors.size());
        if (spec.spatial_weight > 0.0)
            for (int j : s.neighbors) {
                const auto& e = sites[static_cast<std::size_t>(j)].estimate_log;
                nb.push_back({std::exp(e[0]), std::exp(e[1]), std::exp(e[2]), std::exp(e[3]),
                              opt.fixed_delay});
            }
        auto target = [&](const Eigen::VectorXd& z) {
            const KineticParams p = params_from_log(z, opt.fixed_delay);
            const double lp = log_prior(p, spec, nb);
            if (!std::isfinite(lp)) return kNegInf;
            return log_likelihood(p, aif, s.tissue, sigma) + lp;
        };
        const int remaining = opt.mh.n_iter - chain.total_iterations();
        const int block = std::min(remaining, base_block > 0 ? base_block : remaining);
        chain.run_block(block > 0 ? block : remaining, target, /*record_draws=*/false);
    };

    for (int sweep = 0; sweep < opt.sweeps; ++sweep) {
        const bool last = (sweep == opt.sweeps - 1);
        for (int color = 0; color < 2; ++color) {
            std::vector<int> todo;
            for (std::size_t i = 0; i < sites.size(); ++i)
                if ((sites[i].y + sites[i].x) % 2 == color) todo.push_back(static_cast<int>(i));
            parallel_for(static_cast<int>(todo.size()),
                         [&](int k) { run_site(todo[static_cast<std::size_t>(k)]); });
            for (int i : todo) {
                const Eigen::VectorXd m = chains[static_cast<std::size_t>(i)].block_mean();
                for (int j = 0; j < 4; ++j)
                    sites[static_cast<std::size_t>(i)].estimate_log[static_cast<std::size_t>(j)] = m[j];
            }
        }
        if (last) {
            // drain any remainder left by integer division
            std::vector<int> todo;
            for (std::size_t i = 0; i < sites.size(); ++i)
                if (chains[i].total_iterations() < opt.mh.n_iter) todo.push_back(static_cast<int>(i));
            parallel_for(static_cast<int>(todo.size()),
                         [&](int k) { run_site(todo[static_cast<std::size_t>(k)]); });
        }
        if (opt.update_sigma && !last) {
            double acc = 0.0;
            for (auto& s : sites) {
                const KineticParams p{std::exp(s.estimate_log[0]), std::exp(s.estimate_log[1]),
                                      std::exp(s.estimate_log[2]), std::exp(s.estimate_log[3]),
                                      opt.fixed_delay};
                acc += rss_of(residuals(p, aif, s.tissue)) / static_cast<double>(nt);
            }
            sigma = std::sqrt(std::max(acc / static_cast<double>(sites.size()), 1e-12));
        }
    }

    FieldResult out;
    for (int j = 0; j < 4; ++j) {
        out.mean[static_cast<std::size_t>(j)] = Eigen::MatrixXd::Zero(ny, nx);
        out.sd[static_cast<std::size_t>(j)] = Eigen::MatrixXd::Zero(ny, nx);
    }
    out.acceptance = Eigen::MatrixXd::Zero(ny, nx);
    out.sigma_used = sigma;
    for (std::size_t i = 0; i < sites.size(); ++i) {
        const auto& s = sites[i];
        const Eigen::VectorXd m = chains[i].param_mean();
        const Eigen::VectorXd sd = chains[i].param_sd();
        for (int j = 0; j < 4; ++j) {
            out.mean[static_cast<std::size_t>(j)](s.y, s.x) = m[j];
            out.sd[static_cast<std::size_t>(j)](s.y, s.x) = sd[j];
        }
        out.acceptance(s.y, s.x) = chains[i].acceptance_rate();
    }
    return out;
}

}  // namespace perfquant
