#pragma once

#include "mtlab/green.hpp"

#include <array>
#include <string>
#include <vector>

namespace mtlab {

/// phi(r) = -(1/2 pi) log(1 + (pi/2) r^2), the entire solution of -Delta phi = e^{4 pi phi}.
double profile_phi(double r);

struct BlowupProfile {
    double r_max = 1e3;
    std::size_t n = 10000;
};

struct ProfileReport {
    double mass = 0.0;  ///< 2 pi int_0^inf e^{4 pi phi} r dr
    double mass_tail = 0.0;  ///< analytic part beyond r_max
    double phi0 = 0.0;
    bool monotone = false;
    double residual_max = 0.0;  ///< max over the grid of |-phi'' - phi'/r - e^{4 pi phi}|, finite differences
    /// (n, residual_max) at n, 2n, 4n and the fitted log-log slope (positive).
    std::vector<std::pair<std::size_t, double>> refinement;
    double order = 0.0;
    double laplacian_at_1 = 0.0;  ///< -Delta phi(1) from the differentiated closed form
    double rhs_at_1 = 0.0;        ///< e^{4 pi phi(1)}
};

ProfileReport verify_profile(const BlowupProfile& profile);

/// The explicit family: W = c w_eps is c-independent, so every integral is
/// assembled once and c follows from ||phi_eps||_{1,alpha} = 1.
struct MoserTestFunction {
    double eps = 0.0;
    double R = 0.0;
    double a = 0.0;  ///< R eps
    double b = 0.0;  ///< 2 R eps
    double alpha = 0.0;
    double area = 0.0;
    double A_p = 0.0;      ///< from the Green solve
    double delta = 0.0;    ///< mean correction of the discrete Green model
    double A_model = 0.0;  ///< A_p - delta: the constant of the zero-mean model
    double c2 = 0.0;
    double c = 0.0;
    double c2_paper = 0.0;
    double A = 0.0;  ///< matching constant of the inner piece, -c^2 + ... (continuity at R eps)
    double chart_cap = 0.0;
    bool chart_cap_exceeded = false;
    bool bracket_ok = true;  ///< c^2 within [c2_paper/2, 2 c2_paper]

    // c-independent integrals of W over Omega (inner + mid + far).
    double int_W = 0.0;
    double int_W2 = 0.0;
    double int_grad2 = 0.0;
    double int_grad2_inner = 0.0;  ///< over the half-disk B_a, by quadrature
    double int_grad2_outer = 0.0;  ///< over Omega minus B_a
    double int_grad2_whole = 0.0;  ///< single-pass quadrature over Omega, breakpoint at a only
    double int_G2 = 0.0;           ///< integral of the Green model squared over Omega
    double mean_w = 0.0;           ///< |Omega|^-1 int w for the chosen c
    double norm_check = 0.0;       ///< ||phi_eps||_{1,alpha} with the inner energy in closed form
    double jump_a = 0.0;           ///< max |W(a-) - W(a+)| over sampled directions
    double jump_b = 0.0;           ///< same at 2 R eps

    Point p;
    Point normal;  ///< inward unit normal at p
    /// Evaluates W = c w at x (x != p).
    double W(Point x) const;
    /// Evaluates phi_eps = W/c - mean_w for the chosen c.
    double phi(Point x) const { return W(x) / c - mean_w; }

    // State used by W(x) and the integrators.
    MeshPtr mesh;
    Vec B;  ///< nodal regular part; nodes with |x - p| < chart_cap hold the fit model
    NodeIndex p_node = 0;
};

/// Builds the family at one eps from a Green solve at the same boundary point.
/// Throws ValidationError when c^2 leaves [c2_paper/2, 2 c2_paper], unless
/// require_bracket is false; the outcome is then only recorded in bracket_ok.
MoserTestFunction build_test_function(const Discretization& d, const GreenResult& green, double eps,
                                      bool require_bracket = true);

/// (1/2 pi)[log(pi R^2 + 2) - log 2 - pi R^2/(pi R^2 + 2)]: energy of W over the half-disk B_{R eps}.
double inner_gradient_closed_form(double R);

struct LowerBoundReport {
    double eps = 0.0;
    double integral = 0.0;        ///< int_Omega e^{2 pi phi_eps^2} with the numeric c
    double integral_paper = 0.0;  ///< same with c^2 = c2_paper
    double bound_B = 0.0;
    double margin = 0.0;
    double margin_paper = 0.0;
    double inner = 0.0;  ///< contribution of B_{R eps}
    bool chart_cap_exceeded = false;
};

/// Evaluates int e^{2 pi phi_eps^2} against |Omega| + (pi/2) e^{1 + 2 pi A_p}.
LowerBoundReport check_lower_bound(const MoserTestFunction& tf, const GreenResult& green);

struct AnnulusCapacitySpec {
    double delta = 1.0;
    double Rr_eps = 1e-3;
    double s_eps = 0.0;
    double i_eps = 1.0;
};

struct CapacityReport {
    double energy_quadrature = 0.0;
    double energy_closed_form = 0.0;
    double rel_diff = 0.0;
    double boundary_error = 0.0;  ///< max of |h(delta) - s|, |h(Rr) - i|
};

double capacity_h(const AnnulusCapacitySpec& spec, double r);
CapacityReport annulus_capacity(const AnnulusCapacitySpec& spec, std::size_t panels = 64);

struct AppendixReport {
    double eps = 0.0;
    double R = 0.0;
    // (i) energy of W on the half-disk B_{R eps}
    double grad_inner_quadrature = 0.0;
    double grad_inner_closed_form = 0.0;
    double grad_inner_rel_diff = 0.0;
    // (ii) inner integrals of W and W^2 on B_{R eps}
    double int_W_inner_quadrature = 0.0;
    double int_W_inner_closed_form = 0.0;
    double int_W2_inner_quadrature = 0.0;
    double int_W2_inner_closed_form = 0.0;
    // (iii) order constants, normalized by (R eps)^2 |log R eps| (B) and (R eps log R eps)^2 (C)
    double K_B_inner = 0.0;
    double K_B_outer = 0.0;
    double K_B_total = 0.0;
    double K_C_inner = 0.0;
    double K_C_outer = 0.0;
    double K_C_total = 0.0;
};

AppendixReport appendix_integrals(const MoserTestFunction& tf);

}  // namespace mtlab
