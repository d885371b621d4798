#pragma once

#include "mtlab/fem.hpp"

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

namespace mtlab {

struct SubcriticalParams {
    double eps = 1.0;
    double alpha = 0.0;
    int restarts = 8;
    double tol = 1e-9;  ///< on the A-norm of the tangent step d - u
    int max_iterations = 5000;
    std::uint64_t seed = 1;
    /// Discrete lambda1 when already known; computed otherwise.
    std::optional<double> lambda1;

    double alpha_eps() const;
};

struct TraceEntry {
    int iteration = 0;
    double C = 0.0;
    double step_norm = 0.0;  ///< ||d - u||_A before the step
    double step = 0.0;       ///< accepted line-search parameter
};

struct MaximizerResult {
    Vec u_eps;
    double eps = 0.0;
    double alpha = 0.0;
    double C_eps = 0.0;
    double lambda_eps = 0.0;
    double mu_eps = 0.0;
    double c_eps = 0.0;
    Point x_eps;
    NodeIndex x_node = 0;
    double r_eps = 0.0;
    double el_residual = 0.0;
    double step_norm = 0.0;
    bool converged = false;
    bool flat = false;  ///< eps = 2 pi: the objective is |Omega| on the whole sphere
    int iterations = 0;
    int best_start = 0;  ///< 0 = first eigenfunction, k >= 1 = random start k, -1 = warm start
    std::vector<double> start_C;  ///< final C of every start, in start order
    std::vector<TraceEntry> trace;
};

/// Maximizes the integral of exp((2 pi - eps) u^2) over mean-zero u with ||u||_{1,alpha} = 1.
MaximizerResult maximize_subcritical(const Discretization& d, const SubcriticalParams& params,
                                     const Vec* warm_start = nullptr);

/// Dual-norm residual of the Euler-Lagrange system, recomputed from u alone,
/// divided by ||u||_M.
double el_residual(const Discretization& d, const Vec& u, double eps, double alpha);

/// Runs maximize_subcritical along a strictly decreasing eps grid, warm-starting
/// each step from the previous maximizer.
std::vector<MaximizerResult> sweep_subcritical(const Discretization& d, const std::vector<double>& eps_grid,
                                               const SubcriticalParams& base);

struct DiagnosticsEntry {
    double eps = 0.0;
    double C_eps = 0.0;
    double lambda_eps = 0.0;
    double mu_eps = 0.0;
    double c_eps = 0.0;
    double r_eps = 0.0;
    double mu_bound = 0.0;  ///< e |Omega| + lambda_eps
    bool bound_ok = false;  ///< |mu_eps| <= e |Omega| + lambda_eps
    bool liminf_ok = false;  ///< alpha_eps lambda_eps >= C_eps - |Omega|
    double dist_to_boundary = 0.0;
    double energy_fraction_01 = 0.0;   ///< share of the Dirichlet energy inside B_0.1(x_eps)
    double energy_fraction_005 = 0.0;  ///< same for B_0.05(x_eps)
    bool monotone_ok = true;  ///< C_eps >= C of the previous (larger) eps
};

struct DiagnosticsReport {
    std::vector<DiagnosticsEntry> entries;
    bool all_bounds_ok = true;
    bool monotone = true;
    /// lambda_eps >= (C_smallest - |Omega|)/(2 pi) at the smallest eps.
    bool liminf_ok = true;
};

DiagnosticsReport blowup_diagnostics(const Discretization& d, const std::vector<MaximizerResult>& results);

/// Fraction of the integral of |grad u|^2 carried by the disk B_rho(center).
double energy_fraction(const Mesh& mesh, const Vec& u, Point center, double rho);

}  // namespace mtlab
