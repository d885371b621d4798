#include "mtlab/maximizer.hpp"

#include "mtlab/error.hpp"
#include "mtlab/parallel.hpp"
#include "mtlab/spectral.hpp"

#include <Eigen/QR>

#include <algorithm>
#include <cmath>
#include <numbers>
#include <random>
#include <sstream>

namespace mtlab {

double SubcriticalParams::alpha_eps() const { return 2.0 * std::numbers::pi - eps; }

namespace {

constexpr double kArmijo = 1e-4;
constexpr double kMinStep = 1e-12;
// Anderson history length for the fixed-point map u -> lift(u).
constexpr std::size_t kDepth = 6;

// Exact-difference form of J(v) - J(u): sum w e^{b u^2} expm1(b (v - u)(v + u)).
// Avoids the cancellation of subtracting two O(|Omega|) totals near convergence.
double exp_increment(const Mesh& mesh, const Vec& u, const Vec& v, double beta) {
    const auto& rule = dunavant5();
    std::vector<double> local(mesh.triangles.size());
    parallel_for(mesh.triangles.size(), [&](std::size_t begin, std::size_t end) {
        for (std::size_t t = begin; t < end; ++t) {
            const auto& tr = mesh.triangles[t];
            double area = mesh.signed_area(t), s = 0.0;
            for (int q = 0; q < 7; ++q) {
                const auto& l = rule.bary[q];
                double uq = l[0] * u[tr[0]] + l[1] * u[tr[1]] + l[2] * u[tr[2]];
                double dq = l[0] * (v[tr[0]] - u[tr[0]]) + l[1] * (v[tr[1]] - u[tr[1]]) + l[2] * (v[tr[2]] - u[tr[2]]);
                s += rule.weight[q] * std::exp(beta * uq * uq) * std::expm1(beta * dq * (2.0 * uq + dq));
            }
            local[t] = area * s;
        }
    });
    double sum = 0.0;
    for (double x : local) sum += x;
    return sum;
}

struct Ascent {
    Vec u;
    ExpMoments mom;
    double step_norm = 0.0;
    int iterations = 0;
    bool converged = false;
    std::vector<TraceEntry> trace;
};

class Problem {
public:
    Problem(const Discretization& d, const SubcriticalParams& p)
        : d_(d), p_(p), beta_(p.alpha_eps()), solver_(d.solver(p.alpha)) {}

    double a_norm(const Vec& u) const { return std::sqrt(std::max(0.0, u.dot(d_.K * u) - p_.alpha * u.dot(d_.M * u))); }

    Vec feasible(const Vec& u) const {
        Vec v = d_.project_mean_zero(u);
        double n = a_norm(v);
        if (!(n > 0.0)) throw ValidationError("start field has zero norm after mean-zero projection");
        v /= n;
        return d_.project_mean_zero(v);
    }

    // The gain of a trial point passes when it meets the Armijo bound, or when the
    // predicted gain is below the rounding of J and the trial does not lose more.
    bool sufficient(double gain, double slope, double s, double J) const {
        if (gain >= kArmijo * s * slope) return true;
        return s == 1.0 && slope <= 1e-13 * J && gain >= -1e-14 * J;
    }

    Ascent run(const Vec& start) const {
        Ascent a;
        a.u = feasible(start);
        a.mom = exp_moments(*d_.mesh, a.u, beta_);
        // Differences of iterates and of residuals t = lift(u) - u. When the two
        // leading modes nearly coincide (the disk) the plain lift contracts at a
        // rate close to 1; mixing over the history removes that direction.
        std::vector<Vec> dU, dT;
        Vec u_prev, t_prev;
        for (int it = 0;; ++it) {
            const double lambda = a.mom.I2;
            Vec dir = solver_.solve(a.mom.load) / lambda;
            Vec t = dir - a.u;
            a.step_norm = a_norm(t);
            a.iterations = it;
            if (a.step_norm <= p_.tol) {
                a.converged = true;
                a.trace.push_back({it, a.mom.I0, a.step_norm, 0.0});
                break;
            }
            if (it >= p_.max_iterations) break;
            const double slope = 2.0 * beta_ * lambda * a.step_norm * a.step_norm;
            if (u_prev.size()) {
                dU.push_back(a.u - u_prev);
                dT.push_back(t - t_prev);
                if (dU.size() > kDepth) {
                    dU.erase(dU.begin());
                    dT.erase(dT.begin());
                }
            }
            u_prev = a.u;
            t_prev = t;
            double s = 1.0;
            bool accepted = false;
            Vec v;
            ExpMoments mv;
            if (!dT.empty()) {
                const auto n = t.size();
                const auto m = static_cast<Eigen::Index>(dT.size());
                Eigen::MatrixXd T(n, m), U(n, m);
                for (Eigen::Index j = 0; j < m; ++j) {
                    T.col(j) = dT[static_cast<std::size_t>(j)];
                    U.col(j) = dU[static_cast<std::size_t>(j)];
                }
                Vec gamma = T.colPivHouseholderQr().solve(t);
                if (gamma.allFinite()) {
                    try {
                        v = feasible(a.u + t - (U + T) * gamma);
                        mv = exp_moments(*d_.mesh, v, beta_);
                        accepted = sufficient(exp_increment(*d_.mesh, a.u, v, beta_), slope, 1.0, a.mom.I0);
                    } catch (const Error&) {
                        accepted = false;
                    }
                }
                if (!accepted) {
                    dU.clear();
                    dT.clear();
                }
            }
            while (!accepted && s >= kMinStep) {
                v = feasible(a.u + s * t);
                try {
                    mv = exp_moments(*d_.mesh, v, beta_);
                } catch (const OverflowError&) {
                    s *= 0.5;
                    continue;
                }
                // J is convex, so the full step (the normalized Riesz lift) never decreases it.
                if (sufficient(exp_increment(*d_.mesh, a.u, v, beta_), slope, s, a.mom.I0)) {
                    accepted = true;
                    break;
                }
                s *= 0.5;
            }
            a.trace.push_back({it, a.mom.I0, a.step_norm, accepted ? s : 0.0});
            if (!accepted) break;
            a.u = std::move(v);
            a.mom = std::move(mv);
        }
        return a;
    }

private:
    const Discretization& d_;
    const SubcriticalParams& p_;
    double beta_;
    const MeanZeroSolver& solver_;
};

Vec random_start(const Discretization& d, std::uint64_t seed, int k) {
    std::seed_seq seq{static_cast<std::uint32_t>(seed), static_cast<std::uint32_t>(seed >> 32), static_cast<std::uint32_t>(k)};
    std::mt19937_64 rng(seq);
    std::normal_distribution<double> gauss(0.0, 1.0);
    Vec xi(static_cast<Eigen::Index>(d.size()));
    for (Eigen::Index i = 0; i < xi.size(); ++i) xi[i] = gauss(rng);
    // One K+ M smoothing gives an H1 field with the white-noise randomness.
    return d.solver(0.0).solve(d.M * xi);
}

void fill_summary(const Discretization& d, MaximizerResult& r) {
    const double beta = 2.0 * std::numbers::pi - r.eps;
    if (r.u_eps.maxCoeff() < -r.u_eps.minCoeff()) r.u_eps = -r.u_eps;
    ExpMoments mom = exp_moments(*d.mesh, r.u_eps, beta);
    r.C_eps = mom.I0;
    r.lambda_eps = mom.I2;
    r.mu_eps = mom.I1 / d.area;
    Eigen::Index imax = 0;
    r.c_eps = r.u_eps.maxCoeff(&imax);
    r.x_node = static_cast<NodeIndex>(imax);
    r.x_eps = d.mesh->nodes[static_cast<std::size_t>(imax)];
    r.r_eps = std::sqrt(r.lambda_eps) / r.c_eps * std::exp(-0.5 * beta * r.c_eps * r.c_eps);
    r.el_residual = el_residual(d, r.u_eps, r.eps, r.alpha);
}

MaximizerResult maximize_impl(const Discretization& d, const SubcriticalParams& params, const EigenResult& eig,
                              const Vec* warm_start) {
    if (!(params.eps > 0.0) || !(params.eps <= 2.0 * std::numbers::pi))
        throw ValidationError("eps must lie in (0, 2 pi]");
    if (params.restarts < 0) throw ValidationError("restarts must be non-negative");
    if (!(params.tol > 0.0)) throw ValidationError("tol must be positive");
    check_alpha(params.alpha, params.lambda1 ? *params.lambda1 : eig.lambda1);

    MaximizerResult res;
    res.eps = params.eps;
    res.alpha = params.alpha;
    Problem prob(d, params);
    const double beta = params.alpha_eps();

    if (beta == 0.0) {
        res.u_eps = prob.feasible(eig.eigenfield);
        res.flat = true;
        res.converged = true;
        res.start_C = {d.area};
        fill_summary(d, res);
        return res;
    }

    std::vector<Vec> starts;
    starts.push_back(eig.eigenfield);
    for (int k = 1; k <= params.restarts; ++k) starts.push_back(random_start(d, params.seed, k));
    if (warm_start) starts.push_back(*warm_start);

    std::vector<Ascent> runs(starts.size());
    parallel_for(starts.size(), [&](std::size_t begin, std::size_t end) {
        for (std::size_t k = begin; k < end; ++k) runs[k] = prob.run(starts[k]);
    });

    std::size_t best = 0;
    for (std::size_t k = 0; k < runs.size(); ++k) {
        res.start_C.push_back(runs[k].mom.I0);
        if (runs[k].mom.I0 > runs[best].mom.I0) best = k;
    }
    const Ascent& b = runs[best];
    res.u_eps = b.u;
    res.step_norm = b.step_norm;
    res.converged = b.converged;
    res.iterations = b.iterations;
    res.trace = b.trace;
    res.best_start = (warm_start && best + 1 == runs.size()) ? -1 : static_cast<int>(best);
    fill_summary(d, res);
    return res;
}

}  // namespace

double el_residual(const Discretization& d, const Vec& u, double eps, double alpha) {
    const double beta = 2.0 * std::numbers::pi - eps;
    ExpMoments mom = exp_moments(*d.mesh, u, beta);
    if (!(mom.I2 > 0.0)) throw ValidationError("lambda_eps = 0: the Euler-Lagrange residual is undefined for u = 0");
    const double lambda = mom.I2;
    const double mu = mom.I1 / d.area;
    Vec r = d.K * u - alpha * (d.M * u) - (mom.load - mu * d.m) / lambda;
    return d.dual_norm(r) / d.l2_norm(u);
}

MaximizerResult maximize_subcritical(const Discretization& d, const SubcriticalParams& params, const Vec* warm_start) {
    EigenResult eig = neumann_lambda1(d);
    return maximize_impl(d, params, eig, warm_start);
}

std::vector<MaximizerResult> sweep_subcritical(const Discretization& d, const std::vector<double>& eps_grid,
                                               const SubcriticalParams& base) {
    if (eps_grid.empty()) throw ValidationError("eps grid is empty");
    for (std::size_t i = 1; i < eps_grid.size(); ++i)
        if (!(eps_grid[i] < eps_grid[i - 1])) throw ValidationError("eps grid must be strictly decreasing");
    EigenResult eig = neumann_lambda1(d);
    std::vector<MaximizerResult> out;
    for (double eps : eps_grid) {
        SubcriticalParams p = base;
        p.eps = eps;
        out.push_back(maximize_impl(d, p, eig, out.empty() ? nullptr : &out.back().u_eps));
    }
    return out;
}

namespace {

double point_triangle_distance(Point x, const Point& a, const Point& b, const Point& c) {
    double d1 = cross(b - a, x - a), d2 = cross(c - b, x - b), d3 = cross(a - c, x - c);
    if (d1 >= 0.0 && d2 >= 0.0 && d3 >= 0.0) return 0.0;
    auto seg = [&](Point p, Point q) {
        Point e = q - p;
        double t = std::clamp(dot(x - p, e) / dot(e, e), 0.0, 1.0);
        return norm(x - (p + t * e));
    };
    return std::min({seg(a, b), seg(b, c), seg(c, a)});
}

// Area of the part of triangle abc inside the disk, by recursive 4-split with a centroid test.
double clipped_area(Point a, Point b, Point c, Point center, double rho, int depth) {
    double area = 0.5 * cross(b - a, c - a);
    bool ia = norm(a - center) <= rho, ib = norm(b - center) <= rho, ic = norm(c - center) <= rho;
    if (ia && ib && ic) return area;
    if (point_triangle_distance(center, a, b, c) >= rho) return 0.0;
    if (depth == 0) return norm((1.0 / 3.0) * (a + b + c) - center) <= rho ? area : 0.0;
    Point ab = 0.5 * (a + b), bc = 0.5 * (b + c), ca = 0.5 * (c + a);
    return clipped_area(a, ab, ca, center, rho, depth - 1) + clipped_area(ab, b, bc, center, rho, depth - 1) +
           clipped_area(ca, bc, c, center, rho, depth - 1) + clipped_area(ab, bc, ca, center, rho, depth - 1);
}

}  // namespace

double energy_fraction(const Mesh& mesh, const Vec& u, Point center, double rho) {
    double inside = 0.0, total = 0.0;
    for (std::size_t t = 0; t < mesh.triangles.size(); ++t) {
        const auto& tr = mesh.triangles[t];
        const Point &a = mesh.nodes[tr[0]], &b = mesh.nodes[tr[1]], &c = mesh.nodes[tr[2]];
        double area = mesh.signed_area(t);
        double s = 0.5 / area;
        Point g = s * (u[tr[0]] * Point{b.y - c.y, c.x - b.x} + u[tr[1]] * Point{c.y - a.y, a.x - c.x} +
                       u[tr[2]] * Point{a.y - b.y, b.x - a.x});
        double e = dot(g, g);
        total += e * area;
        inside += e * clipped_area(a, b, c, center, rho, 5);
    }
    return total > 0.0 ? inside / total : 0.0;
}

DiagnosticsReport blowup_diagnostics(const Discretization& d, const std::vector<MaximizerResult>& results) {
    for (std::size_t i = 1; i < results.size(); ++i)
        if (!(results[i].eps < results[i - 1].eps)) throw ValidationError("diagnostics need a strictly decreasing eps grid");
    DiagnosticsReport rep;
    const double e_area = std::numbers::e * d.area;
    for (std::size_t i = 0; i < results.size(); ++i) {
        const auto& r = results[i];
        DiagnosticsEntry e;
        e.eps = r.eps;
        e.C_eps = r.C_eps;
        e.lambda_eps = r.lambda_eps;
        e.mu_eps = r.mu_eps;
        e.c_eps = r.c_eps;
        e.r_eps = r.r_eps;
        e.mu_bound = e_area + r.lambda_eps;
        e.bound_ok = std::abs(r.mu_eps) <= e.mu_bound;
        e.liminf_ok = (2.0 * std::numbers::pi - r.eps) * r.lambda_eps >= r.C_eps - d.area;
        e.dist_to_boundary = distance_to_boundary(*d.mesh, r.x_eps);
        e.energy_fraction_01 = energy_fraction(*d.mesh, r.u_eps, r.x_eps, 0.1);
        e.energy_fraction_005 = energy_fraction(*d.mesh, r.u_eps, r.x_eps, 0.05);
        e.monotone_ok = i == 0 || r.C_eps >= results[i - 1].C_eps;
        rep.all_bounds_ok = rep.all_bounds_ok && e.bound_ok && e.liminf_ok;
        rep.monotone = rep.monotone && e.monotone_ok;
        rep.entries.push_back(e);
    }
    if (!results.empty()) {
        const auto& last = results.back();
        rep.liminf_ok = last.lambda_eps >= (last.C_eps - d.area) / (2.0 * std::numbers::pi);
    }
    return rep;
}

}  // namespace mtlab
