#pragma once

#include "mtlab/fem.hpp"

#include <cstdint>
#include <optional>
#include <vector>

namespace mtlab {

struct MeanFieldProblem {
    DiscretizationPtr disc;
    double alpha = 0.0;
    double rho = 1.0;
    Vec f;  ///< nodal, strictly positive
    /// Discrete lambda1 when already known; computed otherwise for alpha > 0.
    std::optional<double> lambda1;
};

/// Throws ValidationError unless 0 < rho < 4 pi, f > 0 nodally and 0 <= alpha < lambda1.
void validate(const MeanFieldProblem& problem);

struct MeanFieldOptions {
    double tol = 1e-10;  ///< on the M^-1 norm of the projected gradient
    int max_iterations = 200;
    /// When set, every iterate is checked against
    /// F(u) >= (1 - rho/4 pi) ||u||^2_{1,alpha} / 2 - rho C_emp - rho max log f.
    std::optional<double> C_emp;
};

struct MeanFieldTraceEntry {
    int iteration = 0;
    double F = 0.0;
    double grad_norm = 0.0;
    double step = 0.0;
    /// F(u_k) - F(u_{k-1}), evaluated in increment form so that it stays accurate
    /// after F itself stops changing in floating point.
    double dF = 0.0;
    bool newton = true;  ///< false when the gradient fallback was taken
    bool witness_ok = true;
};

struct MeanFieldSolution {
    Vec u;
    double F_value = 0.0;
    double mu = 0.0;  ///< rho / |Omega|
    double residual = 0.0;
    double grad_norm = 0.0;
    double norm_1alpha = 0.0;
    bool converged = false;
    bool stagnated = false;
    bool witness_ok = true;
    int iterations = 0;
    std::vector<MeanFieldTraceEntry> trace;
};

/// F(u) = (1/2) u^T (K - alpha M) u - rho log int f e^u.
double energy_F(const MeanFieldProblem& problem, const Vec& u);

/// F(u + v) - F(u) from u^T A v + v^T A v / 2 - rho log1p(int f e^u expm1(v) / int f e^u).
double energy_change(const MeanFieldProblem& problem, const Vec& u, const Vec& v);

/// Damped Newton on the mean-zero subspace starting from u = 0.
MeanFieldSolution minimize_F(const MeanFieldProblem& problem, const MeanFieldOptions& opts = {});

/// M^-1 norm of (K - alpha M) u - rho (b(u)/Z(u) - m/|Omega|), assembled on its own path.
double residual_meanfield(const MeanFieldProblem& problem, const Vec& u);
inline double residual_meanfield(const MeanFieldSolution& sol, const MeanFieldProblem& problem) {
    return residual_meanfield(problem, sol.u);
}

/// D(u) = log int e^u - (1/8 pi) int |grad u|^2 + (alpha/8 pi) int u^2 - |Omega|^-1 int u.
double corollary_D(const Discretization& d, const Vec& u, double alpha);

struct CorollaryReport {
    std::uint64_t seed = 0;
    int samples = 0;
    double C_emp = 0.0;
    int argmax = 0;  ///< 0 is the constant field, k >= 1 random sample k
    double C_random = 0.0;  ///< largest D over the random samples alone
    double D_const = 0.0;
    double log_area = 0.0;
    double D_min = 0.0;
    double D_mean = 0.0;
    int violations = 0;  ///< samples whose recomputed D exceeds C_emp + 1e-12
    int rescaled = 0;    ///< samples halved to stay below the exp guard
};

/// Samples u_k = M xi_k / mean(m), xi_k standard Gaussian from a generator
/// seeded by (seed, k), plus the constant field; C_emp is the largest D.
CorollaryReport check_corollary(const Discretization& d, double alpha, int samples, std::uint64_t seed);

}  // namespace mtlab
