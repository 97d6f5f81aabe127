// Posterior inference of the kinetic parameters by random-walk
// Metropolis-Hastings in log-parameter space, with physiological box priors
// and an optional first-order spatial prior over a pixel grid.
#pragma once

#include <Eigen/Core>
#include <cstdint>
#include <functional>
#include <span>

#include "perfquant/curve_fit.hpp"
#include "perfquant/image_series.hpp"

namespace perfquant {

struct PriorSpec {
    FitBounds box;                ///< uniform support (log-uniform over the kinetic params)
    double spatial_weight = 0.0;  ///< precision of the neighbour log-difference penalty
    double noise_sigma = 0.05;    ///< observation noise SD (fixed)
    bool eight_connected = false; ///< neighbourhood for infer_field; 4-connected default
    std::array<bool, 4> spatial_on{true, true, true, true};  ///< which of (Fp,vp,ve,PS)

    void validate() const;
};

struct PosteriorSamples {
    std::vector<std::array<double, 4>> draws;  ///< (Fp,vp,ve,PS), post burn-in, thinned
    double acceptance_rate = 0.0;
    std::array<double, 4> mean{};
    std::array<double, 4> sd{};
};

/// Gaussian log-likelihood: -N/2 log(2 pi sigma^2) - rss/(2 sigma^2).
double log_likelihood(const KineticParams& p, const SampledCurve& aif,
                      const SampledCurve& tissue, double sigma);

/// -inf outside the box; inside, -(w/2) sum_nb || log p - log p_nb ||^2 over
/// the kinetic parameters (0 with no neighbours or zero weight).
double log_prior(const KineticParams& p, const PriorSpec& spec,
                 std::span<const KineticParams> neighbors);

/// min{1, exp(delta)} acceptance: returns true when log(u) < delta.
bool mh_accept(double delta_log_target, double u);

struct MhOptions {
    int n_iter = 20000;
    int burn_in = 5000;
    int thin = 5;
    bool adapt = true;  ///< scale proposals during burn-in towards 0.2-0.4 acceptance
};

struct MhResult {
    std::vector<Eigen::VectorXd> draws;  ///< post burn-in, thinned
    double acceptance_rate = 0.0;
    Eigen::VectorXd mean;
    Eigen::VectorXd sd;
};

/// Generic random-walk sampler with Gaussian proposals, deterministic under
/// `seed`. Throws ValidationError when log_target(init) is not finite.
MhResult metropolis_hastings(const std::function<double(const Eigen::VectorXd&)>& log_target,
                             const Eigen::VectorXd& init, const Eigen::VectorXd& proposal_sd,
                             const MhOptions& opt, std::uint64_t seed);

struct InferOptions {
    MhOptions mh;
    double fixed_delay = 0.0;  ///< delay is not sampled; see docs
    int sweeps = 5;            ///< outer checkerboard sweeps for infer_field
    bool update_sigma = false; ///< re-estimate sigma from residuals each sweep
};

PosteriorSamples infer_pixel(const SampledCurve& aif, const SampledCurve& tissue,
                             const PriorSpec& spec, std::uint64_t seed,
                             const InferOptions& opt = {});

struct FieldResult {
    std::array<Eigen::MatrixXd, 4> mean;  ///< Fp, vp, ve, PS posterior means
    std::array<Eigen::MatrixXd, 4> sd;
    Eigen::MatrixXd acceptance;
    double sigma_used = 0.0;
};

/// Per-pixel chains over the mask with iterated conditional checkerboard
/// sweeps; the spatial prior conditions on the neighbours' current posterior
/// mean estimates, frozen per half-sweep. With spatial_weight = 0 each pixel
/// chain is bitwise identical to infer_pixel run with the per-pixel seed
/// substream_seed(seed, "bayes-pixel", y*nx+x).
FieldResult infer_field(const SampledCurve& aif, const ImageSeries& conc,
                        const std::vector<double>& times, const Eigen::MatrixXd& mask,
                        const PriorSpec& spec, std::uint64_t seed,
                        const InferOptions& opt = {});

}  // namespace perfquant
