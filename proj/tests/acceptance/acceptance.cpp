// One PASS/FAIL line per acceptance criterion; exit status 1 if any line fails.

#include "../oracles.hpp"

#include "mtlab/green.hpp"
#include "mtlab/maximizer.hpp"
#include "mtlab/meanfield.hpp"
#include "mtlab/moser.hpp"
#include "mtlab/parallel.hpp"
#include "mtlab/report.hpp"
#include "mtlab/spectral.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <stdexcept>
#include <functional>
#include <numbers>
#include <sstream>
#include <string>
#include <vector>

using namespace mtlab;
namespace fs = std::filesystem;

namespace {

constexpr double kPi = std::numbers::pi;

using Clock = std::chrono::steady_clock;

double seconds_since(Clock::time_point t0) { return std::chrono::duration<double>(Clock::now() - t0).count(); }

// Sub-checks of one criterion; the criterion passes when every sub-check does.
struct Criterion {
    int id;
    std::string name;
    std::vector<std::string> details;
    bool ok = true;

    void check(bool pass, const std::string& what) {
        details.push_back(std::string(pass ? "ok   " : "FAIL ") + what);
        ok = ok && pass;
    }
};

std::string fmt(const char* f, double a, double b = 0.0, double c = 0.0) {
    char buf[256];
    std::snprintf(buf, sizeof buf, f, a, b, c);
    return buf;
}

double spread(const std::vector<double>& v) {
    auto [lo, hi] = std::minmax_element(v.begin(), v.end());
    return (*hi - *lo) / std::abs(*hi);
}

void eigenvalues(Criterion& c) {
    auto t0 = Clock::now();
    auto sq = discretize(build_mesh({UnitSquare{}, 1.0 / 96.0}));
    auto e = neumann_lambda1(*sq);
    double dt = seconds_since(t0);
    double rel = std::abs(e.lambda1 - kPi * kPi) / (kPi * kPi);
    c.check(e.mesh_h <= 1.0 / 64.0, fmt("square h = %.5f <= 1/64", e.mesh_h));
    c.check(rel <= 0.005, fmt("square lambda1 = %.8f, rel err %.2e <= 5e-3", e.lambda1, rel));
    c.check(dt < 30.0, fmt("square mesh + assembly + solve %.2f s < 30 s", dt));

    double j = oracle::bessel_j1_prime_root();
    auto dk = discretize(build_mesh({Disk{1.0}, 0.05}));
    auto ed = neumann_lambda1(*dk);
    double rel_d = std::abs(ed.lambda1 - j * j) / (j * j);
    c.check(std::abs(j * j - 3.390) < 5e-4, fmt("bisection root %.10f, squared %.6f", j, j * j));
    c.check(rel_d <= 0.01, fmt("disk lambda1 = %.6f, rel err %.2e <= 1e-2", ed.lambda1, rel_d));

    for (double s : {0.5, 3.0}) {
        auto ds = discretize(scale(*dk->mesh, s));
        double ls = neumann_lambda1(*ds).lambda1;
        double r = std::abs(ls * s * s - ed.lambda1) / ed.lambda1;
        c.check(r <= 1e-10, fmt("scale s = %.1f: |s^2 lambda(s) - lambda| / lambda = %.2e <= 1e-10", s, r));
    }
}

void profile(Criterion& c) {
    auto r = verify_profile({});
    c.check(std::abs(r.mass - 2.0) <= 1e-8, fmt("mass %.15f, |mass - 2| = %.2e <= 1e-8", r.mass, std::abs(r.mass - 2.0)));
    c.check(std::abs(r.order - 2.0) <= 0.2, fmt("FD residual order %.4f in [1.8, 2.2]", r.order));
    c.check(r.phi0 == 0.0, fmt("phi(0) = %g exactly", r.phi0));
}

struct GreenLevels {
    std::vector<DiscretizationPtr> disc;
    std::vector<GreenResult> green;
};

GreenLevels green(Criterion& c) {
    GreenLevels L;
    const double exact = oracle::disk_green_constant();
    MeshPtr m = build_mesh({Disk{1.0}, 0.04});
    for (int level = 0; level < 3; ++level) {
        if (level) m = refine(*m);
        auto d = discretize(m);
        auto g = solve_green(*d, 0.0, pick_boundary_point(*m, {1.0, 0.0}));
        c.check(std::abs(d->integral(g.G)) <= 1e-10,
                fmt("h = %.4f: |int G| = %.2e <= 1e-10, A_p = %.6f", m->max_edge_length(), std::abs(d->integral(g.G)), g.A_p));
        L.disc.push_back(d);
        L.green.push_back(std::move(g));
    }
    double rel = std::abs(L.green.back().A_p - exact) / exact;
    c.check(rel <= 0.02, fmt("finest A_p %.6f vs images %.6f, rel %.2e <= 2e-2", L.green.back().A_p, exact, rel));
    double d01 = std::abs(L.green[0].A_p - L.green[1].A_p), d12 = std::abs(L.green[1].A_p - L.green[2].A_p);
    c.check(d12 < d01, fmt("Cauchy differences %.3e > %.3e", d01, d12));

    auto survey = bound_over_boundary(*L.disc.back(), 0.0, 4);
    std::vector<double> A;
    for (const auto& e : survey.entries)
        if (!e.skipped) A.push_back(e.A_p);
    c.check(A.size() == 4 && spread(A) <= 0.01, fmt("4-point survey: %g points, spread %.2e <= 1e-2", double(A.size()), spread(A)));
    return L;
}

void appendix(Criterion& c, const GreenLevels& L) {
    if (L.green.empty()) throw std::runtime_error("no Green solve available");
    const auto& d = *L.disc.back();
    const auto& g = L.green.back();
    std::vector<AppendixReport> reps;
    for (double eps : {1e-3, 1e-4, 1e-5}) {
        auto a = appendix_integrals(build_test_function(d, g, eps));
        double q = oracle::inner_gradient_quadrature(eps);
        double rel = std::abs(a.grad_inner_closed_form - q) / q;
        c.check(rel <= 1e-10, fmt("eps %.0e: closed form vs Gauss-Kronrod rel %.2e <= 1e-10", eps, rel));
        reps.push_back(a);
    }
    auto ratio = [&](double AppendixReport::*field) {
        double lo = reps[0].*field, hi = lo;
        for (const auto& a : reps) {
            lo = std::min(lo, a.*field);
            hi = std::max(hi, a.*field);
        }
        return hi / lo;
    };
    struct Named {
        const char* name;
        double AppendixReport::*field;
    };
    for (Named n : {Named{"K_B_inner", &AppendixReport::K_B_inner}, Named{"K_B_outer", &AppendixReport::K_B_outer},
                    Named{"K_C_inner", &AppendixReport::K_C_inner}, Named{"K_C_outer", &AppendixReport::K_C_outer}}) {
        double r = ratio(n.field);
        c.check(r < 2.0, std::string(n.name) + fmt(": max/min %.4f < 2", r));
    }
}

void testfn(Criterion& c, const GreenLevels& L) {
    if (L.green.empty()) throw std::runtime_error("no Green solve available");
    const auto& d = *L.disc.back();
    const auto& g = L.green.back();
    auto tf5 = build_test_function(d, g, 1e-5);
    auto lb = check_lower_bound(tf5, g);
    c.check(std::abs(tf5.norm_check - 1.0) <= 1e-8, fmt("eps 1e-5: ||phi||_{1,0} = %.12f", tf5.norm_check));
    c.check(lb.margin > 0.0, fmt("eps 1e-5: margin %.6f > 0 (integral %.6f, bound %.6f)", lb.margin, lb.integral, lb.bound_B));
    auto tf4 = build_test_function(d, g, 1e-4);
    double rel = std::abs(tf4.c2 - tf4.c2_paper) / tf4.c2_paper;
    c.check(rel <= 0.05, fmt("eps 1e-4: c^2 = %.6f vs %.6f, rel %.2e <= 5e-2", tf4.c2, tf4.c2_paper, rel));
}

void maximizer(Criterion& c) {
    auto t0 = Clock::now();
    auto d = discretize(build_mesh({UnitSquare{}, 0.125}));
    SubcriticalParams p;
    const std::vector<double> grid{5.0, 3.0, 2.0, 1.0, 0.5, 0.1};
    auto rs = sweep_subcritical(*d, grid, p);
    auto diag = blowup_diagnostics(*d, rs);
    for (std::size_t i = 0; i < rs.size(); ++i) {
        const auto& r = rs[i];
        if (!r.converged) {
            c.check(false, fmt("eps %.2f did not converge", r.eps));
            continue;
        }
        double mz = std::abs(d->integral(r.u_eps));
        double nm = std::abs(norm_1alpha(*d, r.u_eps, 0.0) - 1.0);
        double el = el_residual(*d, r.u_eps, r.eps, 0.0);
        double bound = std::exp(1.0) * d->area + r.lambda_eps;
        c.check(mz <= 1e-12 && nm <= 1e-10, fmt("eps %.2f: |int u| %.1e, |norm - 1| %.1e", r.eps, mz, nm));
        c.check(el <= 1e-6, fmt("eps %.2f: EL residual %.2e <= 1e-6", r.eps, el));
        c.check(std::abs(r.mu_eps) <= bound, fmt("eps %.2f: |mu| %.4f <= e|Omega| + lambda = %.4f", r.eps, std::abs(r.mu_eps), bound));
        if (i) c.check(r.C_eps >= rs[i - 1].C_eps, fmt("eps %.2f: C %.8f >= %.8f", r.eps, r.C_eps, rs[i - 1].C_eps));
    }
    c.check(diag.monotone && diag.all_bounds_ok, "diagnostics agree: monotone, all bounds");
    auto o = oracle::six_mode_oracle(*d, 2.0 * kPi - 5.0, 200);
    double rel = std::abs(rs[0].C_eps - o.C) / o.C;
    c.check(rel <= 0.005, fmt("eps 5: C %.6f vs six-mode oracle %.6f, rel %.2e <= 5e-3", rs[0].C_eps, o.C, rel));
    double dt = seconds_since(t0);
    c.check(dt < 300.0, fmt("sweep + oracle %.1f s < 300 s", dt));
}

void capacity(Criterion& c) {
    for (AnnulusCapacitySpec s : {AnnulusCapacitySpec{1.0, 1e-3, 0.0, 1.0}, AnnulusCapacitySpec{0.5, 1e-5, -2.0, 3.0},
                                  AnnulusCapacitySpec{0.2, 1e-2, 1.5, 1.5}}) {
        auto rep = annulus_capacity(s);
        double closed = 2.0 * kPi * (s.s_eps - s.i_eps) * (s.s_eps - s.i_eps) / (std::log(s.delta) - std::log(s.Rr_eps));
        double err = std::abs(rep.energy_quadrature - closed);
        c.check(err <= 1e-10 * std::max(1.0, closed),
                fmt("s - i = %.1f: energy %.12f vs %.12f", s.s_eps - s.i_eps, rep.energy_quadrature, closed));
    }
}

void meanfield(Criterion& c) {
    auto sq = discretize(build_mesh({UnitSquare{}, 0.1}));
    MeanFieldProblem one{sq, 0.0, 2.0, Vec::Ones(static_cast<Eigen::Index>(sq->size())), std::nullopt};
    auto s1 = minimize_F(one);
    double res1 = residual_meanfield(s1, one);
    c.check(s1.converged && s1.u.cwiseAbs().maxCoeff() < 1e-12 && res1 <= 1e-10,
            fmt("f = 1: max|u| %.1e, residual %.1e <= 1e-10", s1.u.cwiseAbs().maxCoeff(), res1));

    auto dk = discretize(build_mesh({Disk{1.0}, 0.1}));
    Vec f = dk->interpolate([](double x, double) { return std::exp(x); });
    MeanFieldProblem pb{dk, 1.0, kPi, f, std::nullopt};
    auto s = minimize_F(pb);
    int its = 0;
    Vec picard = oracle::meanfield_picard(*dk, 1.0, kPi, f, 0.3, 5000, &its);
    double l2 = dk->l2_norm(s.u - picard);
    c.check(s.converged, fmt("Newton converged in %g iterations, residual %.1e", s.iterations, s.residual));
    c.check(its < 5000 && l2 <= 1e-6, fmt("Picard (%g iterations): L2 difference %.2e <= 1e-6", its, l2));
    bool decreasing = true;
    for (std::size_t k = 1; k < s.trace.size(); ++k) decreasing = decreasing && s.trace[k].dF < 0.0;
    c.check(decreasing && s.trace.size() > 1, fmt("F strictly decreases over %g steps", double(s.trace.size() - 1)));

    MeanFieldProblem twice = pb;
    twice.f = 2.0 * f;
    auto s2 = minimize_F(twice);
    double shift = std::abs(s2.F_value - s.F_value + kPi * std::log(2.0));
    double du = dk->l2_norm(s2.u - s.u);
    c.check(shift <= 1e-10 && du <= 1e-10, fmt("2f: |dF + rho log 2| %.1e, ||du|| %.1e", shift, du));
}

void corollary(Criterion& c) {
    auto d = discretize(build_mesh({UnitSquare{}, 0.1}));
    Vec k = Vec::Constant(static_cast<Eigen::Index>(d->size()), 1.7);
    double dc = corollary_D(*d, k, 0.0);
    c.check(std::abs(dc - std::log(d->area)) <= 1e-14, fmt("D(const) %.16f vs log|Omega| %.16f", dc, std::log(d->area)));
    std::vector<double> C, Cr;
    int violations = 0;
    for (std::uint64_t seed : {1, 2, 3}) {
        auto r = check_corollary(*d, 0.0, 1000, seed);
        C.push_back(r.C_emp);
        Cr.push_back(r.C_random);
        violations += r.violations;
    }
    c.check(spread(C) <= 0.10, fmt("C_emp spread %.3e <= 0.1", spread(C)));
    c.check(spread(Cr) <= 0.10, fmt("largest random D spread %.3e <= 0.1 (%.5f .. %.5f)", spread(Cr),
                                    *std::min_element(Cr.begin(), Cr.end()), *std::max_element(Cr.begin(), Cr.end())));
    c.check(violations == 0, fmt("violations at 1e-12: %g", violations));
}

std::string slurp(const fs::path& p) {
    std::ifstream in(p, std::ios::binary);
    std::ostringstream s;
    s << in.rdbuf();
    return s.str();
}

// The same config (same output directory) run with 1, 3 and 8 workers.
void reproducibility(Criterion& c) {
    fs::path dir = fs::temp_directory_path() / "mtlab_acceptance_repro";
    std::vector<RunManifest> runs;
    std::vector<std::string> manifests;
    for (int threads : {1, 3, 8}) {
        fs::remove_all(dir);
        set_thread_count(threads);
        ExperimentConfig cfg;
        cfg.command = "full-report";
        cfg.domain = {{"kind", "disk"}, {"h", 0.1}};
        cfg.seed = 11;
        cfg.params = {{"sweep_grid", {5.0, 2.0, 1.0}}, {"restarts", 4}};
        cfg.output_dir = dir.string();
        runs.push_back(run_experiment(cfg));
        manifests.push_back(slurp(dir / "manifest.json"));
    }
    set_thread_count(0);
    const int workers[] = {1, 3, 8};
    for (std::size_t r = 1; r < runs.size(); ++r) {
        bool same = runs[r].outputs.size() == runs[0].outputs.size();
        for (std::size_t i = 0; same && i < runs[0].outputs.size(); ++i)
            same = runs[r].outputs[i].path == runs[0].outputs[i].path && runs[r].outputs[i].sha256 == runs[0].outputs[i].sha256;
        c.check(same, fmt("%g output files: SHA-256 identical for 1 and %g workers", double(runs[0].outputs.size()), workers[r]));
        c.check(!manifests[0].empty() && manifests[r] == manifests[0], fmt("manifest.json bytes identical for 1 and %g workers", workers[r]));
    }
}

}  // namespace

int main() {
    std::vector<Criterion> all;
    auto run = [&](int id, const std::string& name, const std::function<void(Criterion&)>& body) {
        Criterion c{id, name, {}};
        auto t0 = Clock::now();
        try {
            body(c);
        } catch (const std::exception& e) {
            c.check(false, std::string("exception: ") + e.what());
        }
        std::printf("%s  %2d %-22s (%.1f s)\n", c.ok ? "PASS" : "FAIL", c.id, c.name.c_str(), seconds_since(t0));
        for (const auto& line : c.details) std::printf("        %s\n", line.c_str());
        std::fflush(stdout);
        all.push_back(std::move(c));
    };

    GreenLevels L;
    run(1, "eigenvalues", eigenvalues);
    run(2, "blow-up profile", profile);
    run(3, "Green constant", [&](Criterion& c) { L = green(c); });
    run(4, "appendix integrals", [&](Criterion& c) { appendix(c, L); });
    run(5, "test function margin", [&](Criterion& c) { testfn(c, L); });
    run(6, "subcritical maximizer", maximizer);
    run(7, "capacity identity", capacity);
    run(8, "mean-field equation", meanfield);
    run(9, "corollary sampler", corollary);
    run(10, "reproducibility", reproducibility);

    int failed = static_cast<int>(std::count_if(all.begin(), all.end(), [](const Criterion& c) { return !c.ok; }));
    std::printf("%d/%zu criteria passed\n", static_cast<int>(all.size()) - failed, all.size());
    return failed ? 1 : 0;
}
