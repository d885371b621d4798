#include "mtlab/meanfield.hpp"

#include "mtlab/error.hpp"
#include "mtlab/parallel.hpp"
#include "mtlab/spectral.hpp"

#include <Eigen/SparseLU>

#include <algorithm>
#include <cmath>
#include <numbers>
#include <random>
#include <sstream>

namespace mtlab {

namespace {

constexpr double kPi = std::numbers::pi;
constexpr double kArmijo = 1e-4;

struct State {
    Vec u;
    Vec Au;  // (K - alpha M) u
    double Z = 0.0;
    Vec load;  // int f e^u phi_i
    double F = 0.0;
};

State evaluate(const MeanFieldProblem& pb, const Vec& u, SpMat* D = nullptr) {
    const Discretization& d = *pb.disc;
    State s;
    s.u = u;
    s.Au = d.K * u - pb.alpha * (d.M * u);
    s.Z = exp_load(*d.mesh, pb.f, u, s.load, D);
    s.F = 0.5 * u.dot(s.Au) - pb.rho * std::log(s.Z);
    return s;
}

/// Gradient of F restricted to V0, as a dual vector orthogonal to 1.
Vec gradient(const MeanFieldProblem& pb, const State& s) {
    const Discretization& d = *pb.disc;
    return s.Au - (pb.rho / s.Z) * s.load + (pb.rho / d.area) * d.m;
}

/// Solves H delta = -g on V0, H = A - (rho/Z) D + (rho/Z^2) b b^T, through the
/// bordered system [H0 m; m^T 0] and one Sherman-Morrison correction.
/// Returns false when the factorization fails.
bool newton_direction(const MeanFieldProblem& pb, const State& s, const SpMat& D, const Vec& g, Vec& delta) {
    const Discretization& d = *pb.disc;
    const auto n = static_cast<Eigen::Index>(d.size());
    SpMat H0 = d.K - pb.alpha * d.M - (pb.rho / s.Z) * D;
    std::vector<Eigen::Triplet<double>> trip;
    trip.reserve(static_cast<std::size_t>(H0.nonZeros() + 2 * n));
    for (int k = 0; k < H0.outerSize(); ++k)
        for (SpMat::InnerIterator it(H0, k); it; ++it) trip.emplace_back(it.row(), it.col(), it.value());
    for (Eigen::Index i = 0; i < n; ++i) {
        trip.emplace_back(i, n, d.m[i]);
        trip.emplace_back(n, i, d.m[i]);
    }
    SpMat S(n + 1, n + 1);
    S.setFromTriplets(trip.begin(), trip.end());
    Eigen::SparseLU<SpMat> lu;
    lu.compute(S);
    if (lu.info() != Eigen::Success) return false;
    Vec r = Vec::Zero(n + 1), w = Vec::Zero(n + 1);
    r.head(n) = -g;
    w.head(n) = (std::sqrt(pb.rho) / s.Z) * s.load;
    // The zero block makes the LU pivots poor; a few refinement sweeps recover full accuracy.
    auto solve = [&](const Vec& rhs) {
        Vec x = lu.solve(rhs);
        for (int k = 0; k < 3 && x.allFinite(); ++k) x += lu.solve(rhs - S * x);
        return x;
    };
    Vec x = solve(r), y = solve(w);
    if (lu.info() != Eigen::Success || !x.allFinite() || !y.allFinite()) return false;
    double denom = 1.0 + w.dot(y);
    if (std::abs(denom) < 1e-14) return false;
    delta = (x - y * (w.dot(x) / denom)).head(n);
    return delta.allFinite();
}

double max_log(const Vec& f) { return std::log(f.maxCoeff()); }

/// int f e^u (e^v - 1) and int f e^u by the degree-5 rule, serially in triangle order.
std::pair<double, double> exp_increment(const MeanFieldProblem& pb, const Vec& u, const Vec& v) {
    const Mesh& mesh = *pb.disc->mesh;
    const auto& rule = dunavant5();
    double inc = 0.0, Z = 0.0;
    for (std::size_t t = 0; t < mesh.num_triangles(); ++t) {
        const Triangle& T = mesh.triangles[t];
        const double area = mesh.signed_area(t);
        for (int q = 0; q < 7; ++q) {
            const auto& l = rule.bary[q];
            double uq = 0.0, vq = 0.0, fq = 0.0;
            for (int i = 0; i < 3; ++i) {
                uq += l[i] * u[T[i]];
                vq += l[i] * v[T[i]];
                fq += l[i] * pb.f[T[i]];
            }
            if (uq > 700.0 || uq + vq > 700.0) throw OverflowError("exp argument exceeds 700 in the energy increment", t, std::max(uq, uq + vq));
            const double w = rule.weight[q] * area * fq * std::exp(uq);
            Z += w;
            inc += w * std::expm1(vq);
        }
    }
    return {inc, Z};
}

}  // namespace

void validate(const MeanFieldProblem& pb) {
    if (!pb.disc) throw ValidationError("mean-field problem has no discretization");
    if (!(pb.rho > 0.0) || !(pb.rho < 4.0 * kPi)) {
        std::ostringstream msg;
        msg << "rho = " << pb.rho << " must lie in (0, 4 pi); coercivity fails at rho >= 4 pi";
        throw ValidationError(msg.str());
    }
    if (pb.f.size() != static_cast<Eigen::Index>(pb.disc->size())) throw ValidationError("f does not match the mesh");
    if (!(pb.f.minCoeff() > 0.0)) throw ValidationError("f must be strictly positive at every node");
    if (pb.alpha != 0.0) check_alpha(pb.alpha, pb.lambda1 ? *pb.lambda1 : neumann_lambda1(*pb.disc).lambda1);
}

double energy_F(const MeanFieldProblem& pb, const Vec& u) { return evaluate(pb, u).F; }

double energy_change(const MeanFieldProblem& pb, const Vec& u, const Vec& v) {
    const Discretization& d = *pb.disc;
    const Vec Av = d.K * v - pb.alpha * (d.M * v);
    auto [inc, Z] = exp_increment(pb, u, v);
    return u.dot(Av) + 0.5 * v.dot(Av) - pb.rho * std::log1p(inc / Z);
}

MeanFieldSolution minimize_F(const MeanFieldProblem& pb, const MeanFieldOptions& opts) {
    validate(pb);
    const Discretization& d = *pb.disc;
    const double logf = max_log(pb.f);
    auto witness = [&](const State& s) {
        if (!opts.C_emp) return true;
        double lower = 0.5 * (1.0 - pb.rho / (4.0 * kPi)) * s.u.dot(s.Au) - pb.rho * *opts.C_emp - pb.rho * logf;
        return s.F >= lower;
    };

    MeanFieldSolution sol;
    sol.mu = pb.rho / d.area;
    SpMat D;
    State s = evaluate(pb, Vec::Zero(static_cast<Eigen::Index>(d.size())), &D);
    Vec g = gradient(pb, s);
    double gn = d.dual_norm(g);
    sol.trace.push_back({0, s.F, gn, 0.0, 0.0, true, witness(s)});
    int it = 0;
    while (gn > opts.tol && it < opts.max_iterations) {
        ++it;
        Vec delta;
        bool newton = newton_direction(pb, s, D, g, delta);
        if (newton) delta = d.project_mean_zero(delta);
        if (!newton || !(g.dot(delta) < 0.0)) {
            newton = false;
            delta = -d.solver(pb.alpha).solve(g);
        }
        const double slope = g.dot(delta);
        double step = 1.0, dF = 0.0;
        bool accepted = false;
        State trial;
        for (int ls = 0; ls < 60; ++ls, step *= 0.5) {
            try {
                dF = energy_change(pb, s.u, step * delta);
                if (!(dF <= kArmijo * step * slope && dF < 0.0)) continue;
                trial = evaluate(pb, s.u + step * delta, &D);
            } catch (const OverflowError&) {
                continue;
            }
            accepted = true;
            break;
        }
        if (!accepted) {
            sol.stagnated = true;
            break;
        }
        s = std::move(trial);
        g = gradient(pb, s);
        gn = d.dual_norm(g);
        sol.trace.push_back({it, s.F, gn, step, dF, newton, witness(s)});
    }
    sol.u = s.u;
    sol.F_value = s.F;
    sol.grad_norm = gn;
    sol.iterations = it;
    sol.converged = gn <= opts.tol;
    sol.residual = residual_meanfield(pb, s.u);
    sol.norm_1alpha = std::sqrt(std::max(0.0, s.u.dot(s.Au)));
    for (const auto& e : sol.trace) sol.witness_ok = sol.witness_ok && e.witness_ok;
    return sol;
}

double residual_meanfield(const MeanFieldProblem& pb, const Vec& u) {
    const Discretization& d = *pb.disc;
    const Mesh& mesh = *d.mesh;
    const auto& rule = dunavant5();
    // Element loop kept apart from exp_load so the check does not share the optimizer's code.
    Vec load = Vec::Zero(u.size());
    double Z = 0.0;
    for (std::size_t t = 0; t < mesh.num_triangles(); ++t) {
        const Triangle& T = mesh.triangles[t];
        double area = mesh.signed_area(t);
        for (int q = 0; q < 7; ++q) {
            const auto& l = rule.bary[q];
            double uq = 0.0, fq = 0.0;
            for (int i = 0; i < 3; ++i) {
                uq += l[i] * u[T[i]];
                fq += l[i] * pb.f[T[i]];
            }
            double w = rule.weight[q] * area * fq * std::exp(uq);
            Z += w;
            for (int i = 0; i < 3; ++i) load[T[i]] += w * l[i];
        }
    }
    Vec r = d.K * u - pb.alpha * (d.M * u) - pb.rho * (load / Z - d.m / d.area);
    return d.dual_norm(r);
}

double corollary_D(const Discretization& d, const Vec& u, double alpha) {
    Vec ones = Vec::Ones(u.size()), load;
    double Z = exp_load(*d.mesh, ones, u, load);
    double grad2 = u.dot(d.K * u), l2 = u.dot(d.M * u);
    return std::log(Z) - grad2 / (8.0 * kPi) + alpha * l2 / (8.0 * kPi) - d.integral(u) / d.area;
}

CorollaryReport check_corollary(const Discretization& d, double alpha, int samples, std::uint64_t seed) {
    if (samples < 1) throw ValidationError("corollary sampler needs at least one sample");
    if (alpha != 0.0) check_alpha(alpha, neumann_lambda1(d).lambda1);
    const auto n = static_cast<Eigen::Index>(d.size());
    const double mbar = d.area / static_cast<double>(n);
    CorollaryReport rep;
    rep.seed = seed;
    rep.samples = samples;
    rep.log_area = std::log(d.area);
    rep.D_const = corollary_D(d, Vec::Ones(n), alpha);

    std::vector<double> D(static_cast<std::size_t>(samples));
    std::vector<Vec> fields(static_cast<std::size_t>(samples));
    std::vector<char> halved(static_cast<std::size_t>(samples), 0);
    parallel_for(static_cast<std::size_t>(samples), [&](std::size_t begin, std::size_t end) {
        for (std::size_t k = begin; k < end; ++k) {
            std::seed_seq seq{static_cast<std::uint32_t>(seed), static_cast<std::uint32_t>(seed >> 32),
                              static_cast<std::uint32_t>(k + 1)};
            std::mt19937_64 rng(seq);
            std::normal_distribution<double> gauss(0.0, 1.0);
            Vec xi(n);
            for (Eigen::Index i = 0; i < n; ++i) xi[i] = gauss(rng);
            Vec u = (d.M * xi) / mbar;
            for (;;) {
                try {
                    D[k] = corollary_D(d, u, alpha);
                    break;
                } catch (const OverflowError&) {
                    u *= 0.5;
                    halved[k] = 1;
                }
            }
            fields[k] = std::move(u);
        }
    });
    rep.C_emp = rep.D_const;
    rep.D_min = rep.D_const;
    double sum = rep.D_const;
    rep.C_random = D.front();
    for (int k = 0; k < samples; ++k) {
        double v = D[static_cast<std::size_t>(k)];
        rep.C_random = std::max(rep.C_random, v);
        sum += v;
        rep.D_min = std::min(rep.D_min, v);
        if (v > rep.C_emp) {
            rep.C_emp = v;
            rep.argmax = k + 1;
        }
        rep.rescaled += halved[static_cast<std::size_t>(k)];
    }
    rep.D_mean = sum / static_cast<double>(samples + 1);
    for (int k = 0; k < samples; ++k)
        if (corollary_D(d, fields[static_cast<std::size_t>(k)], alpha) > rep.C_emp + 1e-12) ++rep.violations;
    return rep;
}

}  // namespace mtlab
