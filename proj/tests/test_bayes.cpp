#include <doctest.h>

#include <cmath>
#include <numeric>

#include "helpers.hpp"
#include "perfquant/bayes.hpp"
#include "perfquant/rng.hpp"

using namespace perfquant;
using namespace perfquant::testing;

namespace {

const KineticParams kTruth{1.5, 0.08, 0.18, 0.65, 0.0};

SampledCurve make_aif() { return gamma_aif(61, 1.0, 5.0); }

SampledCurve add_noise(const SampledCurve& c, double sigma, std::uint64_t seed) {
    auto rng = make_rng(seed);
    std::normal_distribution<double> g(0.0, sigma);
    SampledCurve out = c;
    for (auto& v : out.values) v += g(rng);
    return out;
}

}  // namespace

TEST_CASE("log likelihood") {
    const SampledCurve aif = make_aif();
    const SampledCurve tissue = forward_model(kTruth, aif, aif.times);
    const double n = static_cast<double>(tissue.size());

    // zero residual: only the normalisation term remains
    const double s = 0.05;
    CHECK(log_likelihood(kTruth, aif, tissue, s) ==
          doctest::Approx(-0.5 * n * std::log(2.0 * M_PI * s * s)).epsilon(1e-12));

    // doubling sigma at zero residual shifts the value by -N log 2
    CHECK(log_likelihood(kTruth, aif, tissue, 2 * s) -
              log_likelihood(kTruth, aif, tissue, s) ==
          doctest::Approx(-n * std::log(2.0)).epsilon(1e-10));

    // random parameters: -rss/(2 sigma^2) plus the constant
    const KineticParams other{0.8, 0.12, 0.3, 0.3, 0.0};
    const double rss = rss_of(residuals(other, aif, tissue));
    CHECK(log_likelihood(other, aif, tissue, s) ==
          doctest::Approx(-0.5 * n * std::log(2.0 * M_PI * s * s) - rss / (2 * s * s))
              .epsilon(1e-12));

    CHECK_THROWS_AS(log_likelihood(kTruth, aif, tissue, 0.0), ValidationError);
}

TEST_CASE("log prior") {
    PriorSpec spec;
    spec.spatial_weight = 2.0;

    KineticParams outside = kTruth;
    outside.Fp = 1e5;
    CHECK(log_prior(outside, spec, {}) == -std::numeric_limits<double>::infinity());

    // equal neighbours contribute nothing
    std::vector<KineticParams> nbs{kTruth, kTruth, kTruth};
    CHECK(log_prior(kTruth, spec, nbs) == doctest::Approx(0.0));

    // single neighbour: -w/2 ||log p - log nb||^2 by hand
    KineticParams nb{1.0, 0.10, 0.25, 0.50, 0.0};
    double hand = 0.0;
    hand += std::pow(std::log(kTruth.Fp) - std::log(nb.Fp), 2);
    hand += std::pow(std::log(kTruth.vp) - std::log(nb.vp), 2);
    hand += std::pow(std::log(kTruth.ve) - std::log(nb.ve), 2);
    hand += std::pow(std::log(kTruth.PS) - std::log(nb.PS), 2);
    std::vector<KineticParams> one{nb};
    CHECK(log_prior(kTruth, spec, one) == doctest::Approx(-1.0 * hand).epsilon(1e-12));

    // zero weight or no neighbours
    PriorSpec flat;
    flat.spatial_weight = 0.0;
    CHECK(log_prior(kTruth, flat, one) == 0.0);
    CHECK(log_prior(kTruth, spec, {}) == 0.0);
}

TEST_CASE("acceptance rule") {
    CHECK(mh_accept(0.5, 0.999));   // uphill: always
    CHECK(mh_accept(0.0, 0.999));
    CHECK(mh_accept(-1.0, std::exp(-1.1)));
    CHECK_FALSE(mh_accept(-1.0, std::exp(-0.9)));
    CHECK_FALSE(mh_accept(-std::numeric_limits<double>::infinity(), 0.5));
}

TEST_CASE("sampler recovers a standard Gaussian") {
    auto target = [](const Eigen::VectorXd& z) { return -0.5 * z[0] * z[0]; };
    Eigen::VectorXd init(1), sd(1);
    init << 0.0;
    sd << 1.0;
    MhOptions opt;
    opt.n_iter = 50000;
    opt.burn_in = 5000;
    opt.thin = 1;
    const MhResult res = metropolis_hastings(target, init, sd, opt, 99);
    CHECK(std::abs(res.mean[0]) < 0.05);
    CHECK(res.sd[0] > 0.93);
    CHECK(res.sd[0] < 1.07);
    CHECK(res.acceptance_rate > 0.1);
    CHECK(res.acceptance_rate < 0.9);
}

TEST_CASE("sampler is deterministic under a seed") {
    auto target = [](const Eigen::VectorXd& z) { return -0.5 * z.squaredNorm(); };
    Eigen::VectorXd init = Eigen::VectorXd::Zero(3);
    Eigen::VectorXd sd = Eigen::VectorXd::Constant(3, 0.8);
    MhOptions opt;
    opt.n_iter = 3000;
    opt.burn_in = 500;
    const MhResult a = metropolis_hastings(target, init, sd, opt, 12345);
    const MhResult b = metropolis_hastings(target, init, sd, opt, 12345);
    REQUIRE(a.draws.size() == b.draws.size());
    for (std::size_t i = 0; i < a.draws.size(); ++i)
        CHECK(a.draws[i] == b.draws[i]);  // bitwise
    const MhResult c = metropolis_hastings(target, init, sd, opt, 54321);
    CHECK(a.draws[0] != c.draws[0]);
}

TEST_CASE("sampler rejects an infinite start") {
    auto target = [](const Eigen::VectorXd&) {
        return -std::numeric_limits<double>::infinity();
    };
    Eigen::VectorXd init = Eigen::VectorXd::Zero(1);
    Eigen::VectorXd sd = Eigen::VectorXd::Ones(1);
    CHECK_THROWS_AS(metropolis_hastings(target, init, sd, {}, 1), ValidationError);
}

TEST_CASE("detailed balance on a five-state target") {
    // uses the production acceptance rule with a symmetric uniform proposal
    const std::array<double, 5> weight{0.05, 0.30, 0.10, 0.40, 0.15};
    auto rng = make_rng(2024);
    std::uniform_int_distribution<int> prop(0, 4);
    std::uniform_real_distribution<double> unif(0.0, 1.0);
    std::array<long, 5> count{};
    int state = 0;
    const long n = 1000000;
    for (long i = 0; i < n; ++i) {
        const int cand = prop(rng);
        const double delta = std::log(weight[static_cast<std::size_t>(cand)]) -
                             std::log(weight[static_cast<std::size_t>(state)]);
        if (mh_accept(delta, unif(rng))) state = cand;
        ++count[static_cast<std::size_t>(state)];
    }
    double tv = 0.0;
    for (int s = 0; s < 5; ++s)
        tv += std::abs(static_cast<double>(count[static_cast<std::size_t>(s)]) / n -
                       weight[static_cast<std::size_t>(s)]);
    CHECK(0.5 * tv < 0.01);
}

TEST_CASE("pixel inference approaches the least-squares answer on clean data") {
    const SampledCurve aif = make_aif();
    const SampledCurve tissue = forward_model(kTruth, aif, aif.times);

    PriorSpec spec;
    spec.noise_sigma = 0.005;
    InferOptions opt;
    opt.fixed_delay = 0.0;

    const PosteriorSamples post = infer_pixel(aif, tissue, spec, 7, opt);

    FitOptions fopt;
    fopt.n_starts = 10;
    fopt.seed = 7;
    fopt.fit_delay = false;
    const FitResult fit = fit_nlls(aif, tissue, FitBounds{}, fopt);

    CHECK(std::abs(post.mean[0] - fit.params.Fp) / fit.params.Fp < 0.02);
    CHECK(std::abs(post.mean[1] - fit.params.vp) / fit.params.vp < 0.02);
    CHECK(std::abs(post.mean[2] - fit.params.ve) / fit.params.ve < 0.02);
    CHECK(std::abs(post.mean[3] - fit.params.PS) / fit.params.PS < 0.02);
    CHECK(post.acceptance_rate > 0.05);
    for (const auto& d : post.draws) {
        CHECK(d[0] >= spec.box.lower[0]);
        CHECK(d[0] <= spec.box.upper[0]);
    }
}

TEST_CASE("pixel inference is deterministic and flattens to the prior") {
    const SampledCurve aif = make_aif();
    const SampledCurve tissue = forward_model(kTruth, aif, aif.times);

    PriorSpec spec;
    spec.noise_sigma = 0.005;
    InferOptions opt;
    opt.mh.n_iter = 4000;
    opt.mh.burn_in = 1000;

    const PosteriorSamples a = infer_pixel(aif, tissue, spec, 31, opt);
    const PosteriorSamples b = infer_pixel(aif, tissue, spec, 31, opt);
    REQUIRE(a.draws.size() == b.draws.size());
    for (std::size_t i = 0; i < a.draws.size(); ++i)
        for (int j = 0; j < 4; ++j)
            CHECK(a.draws[i][static_cast<std::size_t>(j)] ==
                  b.draws[i][static_cast<std::size_t>(j)]);

    // huge sigma: the posterior collapses to the log-uniform prior, whose
    // log-mean is the box log-midpoint
    PriorSpec vague = spec;
    vague.noise_sigma = 1e6;
    InferOptions long_run;
    long_run.mh.n_iter = 30000;
    long_run.mh.burn_in = 5000;
    const PosteriorSamples p = infer_pixel(aif, tissue, vague, 5, long_run);
    double logsum = 0.0;
    for (const auto& d : p.draws) logsum += std::log(d[0]);
    const double log_mid = 0.5 * (std::log(0.01) + std::log(10.0));
    CHECK(std::abs(logsum / p.draws.size() - log_mid) < 0.25);
}

TEST_CASE("posterior width shrinks as the noise level drops") {
    const SampledCurve aif = make_aif();
    const SampledCurve clean = forward_model(kTruth, aif, aif.times);

    InferOptions opt;
    opt.mh.n_iter = 12000;
    opt.mh.burn_in = 3000;

    PriorSpec low;
    low.noise_sigma = 0.05;
    PriorSpec high;
    high.noise_sigma = 0.005;
    const PosteriorSamples wide =
        infer_pixel(aif, add_noise(clean, low.noise_sigma, 3), low, 11, opt);
    const PosteriorSamples narrow =
        infer_pixel(aif, add_noise(clean, high.noise_sigma, 3), high, 11, opt);
    CHECK(narrow.sd[0] < wide.sd[0] * 1.1);
}

TEST_CASE("joint rescaling of data and noise leaves the chain unchanged") {
    const SampledCurve aif = make_aif();
    const SampledCurve tissue =
        add_noise(forward_model(kTruth, aif, aif.times), 0.02, 17);

    PriorSpec spec;
    spec.noise_sigma = 0.02;
    InferOptions opt;
    opt.mh.n_iter = 4000;
    opt.mh.burn_in = 1000;
    const PosteriorSamples base = infer_pixel(aif, tissue, spec, 23, opt);

    const double k = 3.7;
    SampledCurve aif_k = aif, tissue_k = tissue;
    for (auto& v : aif_k.values) v *= k;
    for (auto& v : tissue_k.values) v *= k;
    PriorSpec spec_k = spec;
    spec_k.noise_sigma = k * spec.noise_sigma;
    const PosteriorSamples scaled = infer_pixel(aif_k, tissue_k, spec_k, 23, opt);

    REQUIRE(base.draws.size() == scaled.draws.size());
    for (std::size_t i = 0; i < base.draws.size(); ++i)
        for (int j = 0; j < 4; ++j)
            CHECK(base.draws[i][static_cast<std::size_t>(j)] ==
                  scaled.draws[i][static_cast<std::size_t>(j)]);
}

TEST_CASE("field inference with zero weight reproduces independent pixels") {
    const SampledCurve aif = make_aif();
    const int ny = 4, nx = 4, nt = static_cast<int>(aif.size());

    // 2x2 block of independent noisy pixels inside a 4x4 grid
    Eigen::MatrixXd mask = Eigen::MatrixXd::Zero(ny, nx);
    ImageSeries conc;
    conc.frames.assign(static_cast<std::size_t>(nt), Eigen::MatrixXd::Zero(ny, nx));
    const SampledCurve clean = forward_model(kTruth, aif, aif.times);
    for (int y = 1; y <= 2; ++y)
        for (int x = 1; x <= 2; ++x) {
            mask(y, x) = 1.0;
            const SampledCurve px = add_noise(clean, 0.02, substream_seed(0, "px", static_cast<std::uint64_t>(y) * 7 + static_cast<std::uint64_t>(x)));
            for (int t = 0; t < nt; ++t)
                conc.frames[static_cast<std::size_t>(t)](y, x) = px.values[static_cast<std::size_t>(t)];
        }

    PriorSpec spec;
    spec.noise_sigma = 0.02;
    spec.spatial_weight = 0.0;
    InferOptions opt;
    opt.mh.n_iter = 3000;
    opt.mh.burn_in = 600;
    opt.sweeps = 5;

    const std::uint64_t seed = 404;
    const FieldResult field = infer_field(aif, conc, aif.times, mask, spec, seed, opt);

    for (int y = 1; y <= 2; ++y)
        for (int x = 1; x <= 2; ++x) {
            SampledCurve tissue;
            tissue.kind = CurveKind::tissue;
            tissue.times = aif.times;
            tissue.values.resize(static_cast<std::size_t>(nt));
            for (int t = 0; t < nt; ++t)
                tissue.values[static_cast<std::size_t>(t)] =
                    conc.frames[static_cast<std::size_t>(t)](y, x);
            const PosteriorSamples px = infer_pixel(
                aif, tissue, spec,
                substream_seed(seed, "bayes-pixel", static_cast<std::uint64_t>(y) * nx + x),
                opt);
            CHECK(field.mean[0](y, x) == px.mean[0]);  // bitwise
            CHECK(field.sd[0](y, x) == px.sd[0]);
            CHECK(field.mean[3](y, x) == px.mean[3]);
        }
}

TEST_CASE("spatial prior smooths a homogeneous noisy field") {
    const SampledCurve aif = make_aif();
    const int side = 6, nt = static_cast<int>(aif.size());
    Eigen::MatrixXd mask = Eigen::MatrixXd::Ones(side, side);
    ImageSeries conc;
    conc.frames.assign(static_cast<std::size_t>(nt), Eigen::MatrixXd::Zero(side, side));
    const SampledCurve clean = forward_model(kTruth, aif, aif.times);
    double peak = 0.0;
    for (double v : clean.values) peak = std::max(peak, v);
    const double sigma = peak / 5.6;  // roughly SNR 15 dB against the peak
    for (int y = 0; y < side; ++y)
        for (int x = 0; x < side; ++x) {
            const SampledCurve px = add_noise(
                clean, sigma, substream_seed(9, "hn", static_cast<std::uint64_t>(y) * 31 + x));
            for (int t = 0; t < nt; ++t)
                conc.frames[static_cast<std::size_t>(t)](y, x) = px.values[static_cast<std::size_t>(t)];
        }

    InferOptions opt;
    opt.mh.n_iter = 2500;
    opt.mh.burn_in = 1000;
    opt.mh.thin = 3;
    opt.sweeps = 5;

    PriorSpec flat;
    flat.noise_sigma = sigma;
    flat.spatial_weight = 0.0;
    PriorSpec smooth = flat;
    smooth.spatial_weight = 8.0;

    const FieldResult f0 = infer_field(aif, conc, aif.times, mask, flat, 77, opt);
    const FieldResult f1 = infer_field(aif, conc, aif.times, mask, smooth, 77, opt);

    auto spatial_sd = [&](const Eigen::MatrixXd& m) {
        const double mean = m.mean();
        return std::sqrt((m.array() - mean).square().mean());
    };
    CHECK(spatial_sd(f1.mean[0]) < spatial_sd(f0.mean[0]));
}

TEST_CASE("field inference validates its inputs") {
    const SampledCurve aif = make_aif();
    ImageSeries conc;
    conc.frames.assign(aif.size(), Eigen::MatrixXd::Zero(4, 4));
    Eigen::MatrixXd empty = Eigen::MatrixXd::Zero(4, 4);
    PriorSpec spec;
    CHECK_THROWS_AS(infer_field(aif, conc, aif.times, empty, spec, 0, {}), ValidationError);
}
