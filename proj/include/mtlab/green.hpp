#pragma once

#include "mtlab/fem.hpp"

#include <array>
#include <optional>
#include <string>
#include <vector>

namespace mtlab {

struct GreenOptions {
    /// Fit annulus; zero selects the default (r_in = 3h, r_out = 3 r_in).
    double r_in = 0.0;
    double r_out = 0.0;
    /// Adds (x - p) (x - p)^T terms to the fit model.
    bool quadratic = true;
    /// Discrete lambda1 when already known; otherwise computed for alpha > 0.
    std::optional<double> lambda1;
    /// Sources whose interior angle differs from pi by more than this are rejected.
    double corner_tolerance = 0.1 * 3.14159265358979323846;
};

/// Least-squares fit of c0 + c1 . d (+ q_xx dx^2 + q_xy dx dy + q_yy dy^2), d = x - p,
/// to the regular part on r_in <= |d| <= r_out.
struct AnnulusFit {
    double c0 = 0.0;
    Point c1;
    std::array<double, 3> q{};
    int nodes = 0;
    double rms = 0.0;

    double operator()(Point d) const { return c0 + dot(c1, d) + q[0] * d.x * d.x + q[1] * d.x * d.y + q[2] * d.y * d.y; }
};

struct GreenResult {
    BoundaryPoint p;
    double alpha = 0.0;
    double area = 0.0;
    Vec G;
    /// G + (1/pi) log|x - p| at every node except p, where it holds A_p.
    Vec regular_part;
    double A_p = 0.0;
    AnnulusFit fit;  ///< fit.c0 == A_p
    double r_in = 0.0;
    double r_out = 0.0;
    double bound_B = 0.0;
    double mean_residual = 0.0;  ///< |integral of G| / |Omega|
    double weak_residual = 0.0;  ///< ||(K - alpha M) G - (e_p - m/|Omega|)||_{M^-1}
    double interior_angle = 0.0;
};

/// Neumann Green function with nodal delta at p and the constant A_p of its expansion.
GreenResult solve_green(const Discretization& d, double alpha, const BoundaryPoint& p, const GreenOptions& opts = {});

AnnulusFit fit_regular_part(const Mesh& mesh, const Vec& regular_part, NodeIndex p, double r_in, double r_out,
                            bool quadratic);

/// |Omega| + (pi/2) e^{1 + 2 pi A_p}.
double theorem_bound(double area, double A_p);
inline double theorem_bound(const GreenResult& g) { return theorem_bound(g.area, g.A_p); }

struct SurveyEntry {
    int sample = 0;
    double arc = 0.0;  ///< arc-length position requested along the boundary loop
    BoundaryPoint p;
    bool skipped = false;
    std::string note;
    double A_p = 0.0;
    double bound_B = 0.0;
};

struct SurveyReport {
    std::vector<SurveyEntry> entries;
    double min_A_p = 0.0;
    double max_A_p = 0.0;
    int argmax = -1;  ///< index into entries
};

/// A_p and the bound at `samples` boundary nodes spaced equally in arc length,
/// at positions (k + 1/2) P / samples measured from the smallest boundary node.
/// Corner nodes are recorded as skipped.
SurveyReport bound_over_boundary(const Discretization& d, double alpha, int samples, const GreenOptions& opts = {});

}  // namespace mtlab
