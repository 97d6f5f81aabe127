#include "perfquant/rpca.hpp"

#include <Eigen/SVD>

#include <cmath>

namespace perfquant {

Eigen::MatrixXd soft_threshold(const Eigen::MatrixXd& x, double eps) {
    if (eps < 0.0) throw ValidationError("soft_threshold: eps must be >= 0");
    return x.array().sign() * (x.array().abs() - eps).max(0.0);
}

Eigen::MatrixXd svt(const Eigen::MatrixXd& x, double eps) {
    if (eps < 0.0) throw ValidationError("svt: eps must be >= 0");
    Eigen::BDCSVD<Eigen::MatrixXd> svd(x, Eigen::ComputeThinU | Eigen::ComputeThinV);
    if (svd.info() != Eigen::Success) throw std::runtime_error("svt: SVD failed");
    Eigen::VectorXd s = (svd.singularValues().array() - eps).max(0.0);
    return svd.matrixU() * s.asDiagonal() * svd.matrixV().transpose();
}

Decomposition rpca_admm(const Eigen::MatrixXd& m, double lambda, double mu, double tol,
                        int max_iter) {
    if (!m.allFinite()) throw ValidationError("rpca: input has non-finite entries");
    if (m.rows() < 1 || m.cols() < 1) throw ValidationError("rpca: empty matrix");

    const double norm_m = m.norm();
    if (lambda <= 0.0) lambda = 1.0 / std::sqrt(static_cast<double>(std::max(m.rows(), m.cols())));
    if (mu <= 0.0) {
        const double l1 = m.array().abs().sum();
        mu = l1 > 0.0 ? 0.25 * static_cast<double>(m.rows()) * static_cast<double>(m.cols()) / l1
                      : 1.0;
    }

    Decomposition d;
    d.L = Eigen::MatrixXd::Zero(m.rows(), m.cols());
    d.S = Eigen::MatrixXd::Zero(m.rows(), m.cols());
    Eigen::MatrixXd y = Eigen::MatrixXd::Zero(m.rows(), m.cols());

    if (norm_m == 0.0) {  // nothing to split
        d.converged = true;
        return d;
    }

    for (int k = 0; k < max_iter; ++k) {
        Eigen::BDCSVD<Eigen::MatrixXd> svd(m - d.S + y / mu,
                                           Eigen::ComputeThinU | Eigen::ComputeThinV);
        if (svd.info() != Eigen::Success) throw std::runtime_error("rpca: SVD failed");
        Eigen::VectorXd sv = (svd.singularValues().array() - 1.0 / mu).max(0.0);
        d.L = svd.matrixU() * sv.asDiagonal() * svd.matrixV().transpose();
        d.S = soft_threshold(m - d.L + y / mu, lambda / mu);
        Eigen::MatrixXd resid = m - d.L - d.S;
        y += mu * resid;

        // objective at the feasible completion (L, M - L); the raw iterate
        // pair is infeasible and its objective approaches the optimum from
        // below, so it is not the monotone quantity
        d.objective_history.push_back(sv.sum() + lambda * (m - d.L).array().abs().sum());
        d.iterations = k + 1;
        d.primal_residual = resid.norm();
        if (d.primal_residual / norm_m < tol) {
            d.converged = true;
            break;
        }
    }
    return d;
}

}  // namespace perfquant
