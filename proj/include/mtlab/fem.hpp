#pragma once

#include "mtlab/mesh.hpp"

#include <Eigen/Sparse>
#include <Eigen/SparseCholesky>

#include <array>
#include <cmath>
#include <iosfwd>
#include <memory>
#include <mutex>
#include <string>
#include <utility>
#include <vector>

namespace mtlab {

using Vec = Eigen::VectorXd;
using SpMat = Eigen::SparseMatrix<double>;

/// Degree-5, 7-point rule on the reference triangle; weights sum to 1.
struct TriangleRule {
    std::array<std::array<double, 3>, 7> bary;
    std::array<double, 7> weight;
};
const TriangleRule& dunavant5();

SpMat assemble_stiffness(const Mesh& mesh);
SpMat assemble_mass(const Mesh& mesh);

/// Applies the V0-restricted inverse of K - alpha*M.
///
/// For a right-hand side b it returns the unique x with m^T x = 0 and
/// (K - alpha M) x = b - c m for some scalar c, where m = M 1. The pure
/// Neumann operator K+ is applied through a Cholesky factor of K with one
/// pinned row, followed by re-projection; for alpha > 0 the solve is PCG on
/// V0 preconditioned by K+.
class MeanZeroSolver {
public:
    MeanZeroSolver(const SpMat& K, const SpMat& M, const Vec& m, double area, double alpha);

    Vec solve(const Vec& b) const;
    double alpha() const { return alpha_; }
    int last_iterations() const { return last_iterations_; }

private:
    Vec apply_kplus(const Vec& b) const;
    Vec reduce(const Vec& r) const;
    Vec project(const Vec& x) const;

    const SpMat* K_;
    const SpMat* M_;
    const Vec* m_;
    double area_;
    double alpha_;
    Eigen::SimplicialLLT<SpMat> pinned_;
    mutable int last_iterations_ = 0;
};

/// Mesh plus the assembled operators every solver needs.
struct Discretization {
    MeshPtr mesh;
    SpMat K;
    SpMat M;
    Vec m;  ///< M * 1, the integration weights of P1 fields.
    double area = 0.0;
    Eigen::SimplicialLLT<SpMat> M_factor;

    explicit Discretization(MeshPtr mesh);
    Discretization(const Discretization&) = delete;
    Discretization& operator=(const Discretization&) = delete;

    std::size_t size() const { return static_cast<std::size_t>(m.size()); }

    double integral(const Vec& u) const { return m.dot(u); }
    double mean(const Vec& u) const { return m.dot(u) / area; }
    Vec project_mean_zero(const Vec& u) const;
    /// sqrt(r^T M^{-1} r): the dual norm of a weak-form residual.
    double dual_norm(const Vec& r) const;
    double l2_norm(const Vec& u) const { return std::sqrt(u.dot(M * u)); }
    /// Nodal interpolant of f(x, y).
    template <class F>
    Vec interpolate(F&& f) const {
        Vec u(static_cast<Eigen::Index>(mesh->num_nodes()));
        for (std::size_t i = 0; i < mesh->num_nodes(); ++i) u[static_cast<Eigen::Index>(i)] = f(mesh->nodes[i].x, mesh->nodes[i].y);
        return u;
    }

    /// Solver for K - alpha M on V0; cached per alpha value, safe to call concurrently.
    const MeanZeroSolver& solver(double alpha) const;

private:
    mutable std::mutex solvers_mutex_;
    mutable std::vector<std::pair<double, std::unique_ptr<MeanZeroSolver>>> solvers_;
};

using DiscretizationPtr = std::shared_ptr<const Discretization>;
DiscretizationPtr discretize(MeshPtr mesh);

/// sqrt(u^T K u - alpha u^T M u); throws ValidationError when the form is negative.
double norm_1alpha(const Discretization& d, const Vec& u, double alpha);

/// Integral of exp(beta*u^2) with the degree-5 rule on every triangle.
/// Throws OverflowError when beta*u^2 > 700 at a quadrature point.
double functional_exp(const Mesh& mesh, const Vec& u, double beta);

/// Quantities of the exponential functional at one field, all by the same rule.
struct ExpMoments {
    double I0 = 0.0;  ///< integral of e^{beta u^2}
    double I1 = 0.0;  ///< integral of e^{beta u^2} u
    double I2 = 0.0;  ///< integral of e^{beta u^2} u^2
    Vec load;         ///< load[i] = integral of e^{beta u^2} u phi_i
};
ExpMoments exp_moments(const Mesh& mesh, const Vec& u, double beta);

/// Returns the load vector b_i = int f e^u phi_i (f, u nodal P1) and Z = int f e^u.
/// When matrix is non-null, D_ij = int f e^u phi_i phi_j is written to *matrix.
double exp_load(const Mesh& mesh, const Vec& f, const Vec& u, Vec& load, SpMat* matrix = nullptr);

std::string sha256_hex(const std::string& bytes);
std::string mesh_hash(const Mesh& mesh);

// mt-field v1 text format.
void write_field(std::ostream& os, const Vec& u, const std::string& mesh_sha);
std::string field_to_string(const Vec& u, const std::string& mesh_sha);
/// Reads a field; when expected_sha is non-empty it must match the stored hash.
Vec read_field(std::istream& is, const std::string& expected_sha = {});
Vec load_field(const std::string& path, const std::string& expected_sha = {});
void save_field(const std::string& path, const Vec& u, const std::string& mesh_sha);

}  // namespace mtlab
