// Low-rank + sparse decomposition via the alternating direction method of
// multipliers: singular-value thresholding for the low-rank part, elementwise
// soft thresholding for the sparse part.
#pragma once

#include <Eigen/Core>
#include <vector>

#include "perfquant/types.hpp"

namespace perfquant {

/// Elementwise sign(x) * max(|x| - eps, 0).
Eigen::MatrixXd soft_threshold(const Eigen::MatrixXd& x, double eps);

/// Singular value thresholding: SVD, soft-threshold the singular values,
/// reconstruct.
Eigen::MatrixXd svt(const Eigen::MatrixXd& x, double eps);

struct Decomposition {
    Eigen::MatrixXd L;  ///< low-rank component
    Eigen::MatrixXd S;  ///< sparse component
    int iterations = 0;
    double primal_residual = 0.0;  ///< ||M - L - S||_F at termination
    bool converged = false;
    /// ||L_k||_* + lambda ||M - L_k||_1 after each iteration: the constrained
    /// objective at the feasible completion of the iterate. Non-increasing at
    /// the default penalty.
    std::vector<double> objective_history;
};

/// ADMM iteration:
///   L <- SVT_{1/mu}(M - S + Y/mu)
///   S <- soft_threshold_{lambda/mu}(M - L + Y/mu)
///   Y <- Y + mu (M - L - S)
/// until ||M - L - S||_F / ||M||_F < tol or max_iter. lambda <= 0 selects
/// 1/sqrt(max(rows, cols)); mu <= 0 selects 0.25 * rows * cols / ||M||_1.
Decomposition rpca_admm(const Eigen::MatrixXd& m, double lambda = 0.0, double mu = 0.0,
                        double tol = 1e-7, int max_iter = 500);

}  // namespace perfquant
