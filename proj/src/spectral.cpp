#include "mtlab/spectral.hpp"

#include "mtlab/error.hpp"

#include <Eigen/Dense>

#include <algorithm>
#include <sstream>

namespace mtlab {

EigenResult neumann_lambda1(const Discretization& d, const EigenOptions& opts) {
    if (!(opts.tol > 0.0)) throw ValidationError("eigen tolerance must be positive");
    const MeanZeroSolver& kplus = d.solver(0.0);
    const auto n = static_cast<Eigen::Index>(d.size());
    // Block inverse iteration with Rayleigh-Ritz: near-degenerate pairs (the
    // square's cos(pi x), cos(pi y)) converge at lambda1/lambda_{k+1}, not lambda1/lambda2.
    const Eigen::Index k = std::min<Eigen::Index>(6, n - 1);
    Eigen::MatrixXd X(n, k);
    for (Eigen::Index j = 0; j < k; ++j) {
        Vec v = d.interpolate([j](double x, double y) {
            switch (j) {
                case 0: return x;
                case 1: return y;
                case 2: return x * y;
                case 3: return x * x - 0.3 * y;
                case 4: return y * y + 0.2 * x;
                default: return x * x * x - y * y * x;
            }
        });
        X.col(j) = d.project_mean_zero(v);
    }

    EigenResult res;
    res.mesh_h = d.mesh->max_edge_length();
    double residual = 0.0;
    Vec v;
    for (int it = 1; it <= opts.max_iterations; ++it) {
        Eigen::MatrixXd MX = d.M * X;
        for (Eigen::Index j = 0; j < k; ++j) X.col(j) = kplus.solve(MX.col(j));
        Eigen::MatrixXd KX = d.K * X;
        MX = d.M * X;
        Eigen::MatrixXd Ks = X.transpose() * KX, Ms = X.transpose() * MX;
        Ks = 0.5 * (Ks + Ks.transpose()).eval();
        Ms = 0.5 * (Ms + Ms.transpose()).eval();
        Eigen::GeneralizedSelfAdjointEigenSolver<Eigen::MatrixXd> ritz(Ks, Ms);
        if (ritz.info() != Eigen::Success) throw ConvergenceError("Rayleigh-Ritz step failed", residual, it);
        X = X * ritz.eigenvectors();
        for (Eigen::Index j = 0; j < k; ++j) X.col(j) = d.project_mean_zero(X.col(j));
        v = X.col(0);
        v /= std::sqrt(v.dot(d.M * v));
        Vec Kv = d.K * v, Mv = d.M * v;
        res.lambda1 = v.dot(Kv) / v.dot(Mv);
        residual = d.dual_norm(Kv - res.lambda1 * Mv) / d.dual_norm(res.lambda1 * Mv);
        res.iterations = it;
        if (residual <= opts.tol) break;
    }
    if (residual > opts.tol) {
        std::ostringstream msg;
        msg << "inverse iteration did not reach tol " << opts.tol << " (residual " << residual << ")";
        throw ConvergenceError(msg.str(), residual, res.iterations);
    }
    Eigen::Index imax = 0;
    v.cwiseAbs().maxCoeff(&imax);
    if (v[imax] < 0.0) v = -v;
    res.eigenfield = v;
    res.residual = residual;
    return res;
}

void check_alpha(double alpha, double lambda1) {
    if (!(alpha >= 0.0) || !(alpha < lambda1)) {
        std::ostringstream msg;
        msg << "alpha = " << alpha << " is outside [0, lambda1) with discrete lambda1 = " << lambda1;
        throw ValidationError(msg.str());
    }
}

}  // namespace mtlab
