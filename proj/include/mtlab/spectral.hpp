#pragma once

#include "mtlab/fem.hpp"

namespace mtlab {

struct EigenResult {
    double lambda1 = 0.0;
    Vec eigenfield;  ///< mean-zero, M-normalized, largest-magnitude entry positive
    double residual = 0.0;  ///< ||K v - lambda M v||_{M^-1} / ||lambda M v||_{M^-1}
    double mesh_h = 0.0;
    int iterations = 0;
};

struct EigenOptions {
    double tol = 1e-10;
    int max_iterations = 2000;
};

/// First nonzero Neumann eigenpair by inverse iteration on the mean-zero subspace.
EigenResult neumann_lambda1(const Discretization& d, const EigenOptions& opts = {});

/// Throws ValidationError unless 0 <= alpha < lambda1.
void check_alpha(double alpha, double lambda1);

}  // namespace mtlab
