#include "../oracles.hpp"

#include "mtlab/error.hpp"
#include "mtlab/moser.hpp"

#include <doctest.h>

#include <cmath>
#include <numbers>

using namespace mtlab;

namespace {

constexpr double kPi = std::numbers::pi;

struct DiskSetup {
    DiscretizationPtr d;
    GreenResult g;
};

const DiskSetup& disk() {
    static const DiskSetup s = [] {
        DiskSetup out;
        out.d = discretize(build_mesh({Disk{1.0}, 0.05}));
        out.g = solve_green(*out.d, 0.0, pick_boundary_point(*out.d->mesh, {1.0, 0.0}));
        return out;
    }();
    return s;
}

}  // namespace

TEST_CASE("blow-up profile: mass, origin, residual order") {
    auto r = verify_profile({});
    CHECK(std::abs(r.mass - 2.0) < 1e-8);
    CHECK(r.phi0 == 0.0);
    CHECK(r.monotone);
    CHECK(r.order == doctest::Approx(2.0).epsilon(0.1));
    const double expected = 1.0 / ((1.0 + kPi / 2.0) * (1.0 + kPi / 2.0));
    CHECK(r.rhs_at_1 == doctest::Approx(expected).epsilon(1e-14));
    CHECK(r.laplacian_at_1 == doctest::Approx(expected).epsilon(1e-14));
    CHECK(profile_phi(0.0) == 0.0);
    CHECK_THROWS_AS(verify_profile({100.0, 10000}), ValidationError);
    CHECK_THROWS_AS(verify_profile({1e3, 100}), ValidationError);
}

TEST_CASE("capacity identity on three triples, including s = i") {
    for (AnnulusCapacitySpec s : {AnnulusCapacitySpec{1.0, 1e-3, 0.0, 1.0}, AnnulusCapacitySpec{0.5, 1e-5, -2.0, 3.0},
                                  AnnulusCapacitySpec{0.2, 1e-2, 1.5, 1.5}}) {
        auto rep = annulus_capacity(s);
        double closed = 2.0 * kPi * (s.s_eps - s.i_eps) * (s.s_eps - s.i_eps) / (std::log(s.delta) - std::log(s.Rr_eps));
        CHECK(std::abs(rep.energy_quadrature - closed) <= 1e-10 * std::max(1.0, closed));
        CHECK(rep.boundary_error < 1e-12);
    }
    auto base = annulus_capacity({1.0, 1e-3, 0.0, 1.0});
    CHECK(base.energy_closed_form == doctest::Approx(2.0 * kPi / std::log(1000.0)).epsilon(1e-14));
    CHECK(base.energy_closed_form == doctest::Approx(0.909585).epsilon(1e-6));
    CHECK_THROWS_AS(annulus_capacity({1.0, 2.0, 0.0, 1.0}), ValidationError);
}

TEST_CASE("inner gradient closed form against Boost quadrature") {
    for (double eps : {1e-3, 1e-4, 1e-5}) {
        double q = oracle::inner_gradient_quadrature(eps);
        CHECK(std::abs(inner_gradient_closed_form(-std::log(eps)) - q) / q < 1e-10);
    }
}

TEST_CASE("test function on the disk: normalization, continuity, split energy") {
    const auto& s = disk();
    for (double eps : {1e-3, 1e-4, 1e-5}) {
        auto tf = build_test_function(*s.d, s.g, eps);
        CAPTURE(eps);
        CHECK_FALSE(tf.chart_cap_exceeded);
        CHECK(tf.bracket_ok);
        CHECK(tf.norm_check == doctest::Approx(1.0).epsilon(1e-8));
        CHECK(tf.jump_a < 1e-12);
        CHECK(tf.jump_b < 1e-12);
        CHECK(std::abs(tf.int_grad2 - tf.int_grad2_whole) <= 1e-8 * tf.int_grad2);
        CHECK(std::abs(tf.int_W / tf.c - tf.mean_w * s.d->area) < 1e-12);
        // Direct evaluation on both sides of R eps along the inward normal.
        Point in = tf.p + (tf.a * (1.0 - 1e-13)) * tf.normal, out = tf.p + (tf.a * (1.0 + 1e-13)) * tf.normal;
        CHECK(std::abs(tf.W(in) - tf.W(out)) < 1e-10);
    }
    auto tf4 = build_test_function(*s.d, s.g, 1e-4);
    CHECK(std::abs(tf4.c2 - tf4.c2_paper) / tf4.c2_paper <= 0.05);
    auto tf5 = build_test_function(*s.d, s.g, 1e-5);
    CHECK(std::abs(tf5.A - 1.0 / (2.0 * kPi)) <= 0.1);
}

TEST_CASE("lower bound margin is positive at the smallest eps") {
    const auto& s = disk();
    auto tf = build_test_function(*s.d, s.g, 1e-5);
    auto lb = check_lower_bound(tf, s.g);
    CHECK(lb.bound_B == s.g.bound_B);
    CHECK(lb.margin == doctest::Approx(lb.integral - lb.bound_B));
    CHECK(lb.margin > 0.0);
    CHECK(lb.inner > 0.0);
}

TEST_CASE("margin at eps = 1e-5 barely depends on which c is used, on a fine disk") {
    // The gap is a discretization effect of A_p in the far field: 50%, 26%, 7.6% at h = 0.059, 0.029, 0.015.
    MeshPtr m = build_mesh({Disk{1.0}, 0.04});
    m = refine(*refine(*m));
    auto d = discretize(m);
    auto g = solve_green(*d, 0.0, pick_boundary_point(*m, {1.0, 0.0}));
    auto lb = check_lower_bound(build_test_function(*d, g, 1e-5), g);
    CHECK(lb.margin > 0.0);
    CHECK(lb.margin_paper > 0.0);
    CHECK(std::abs(lb.margin - lb.margin_paper) <= 0.10 * std::abs(lb.margin));
}

TEST_CASE("eps = 0.5 leaves the bracket: error by default, recorded on request") {
    const auto& s = disk();
    CHECK_THROWS_AS(build_test_function(*s.d, s.g, 0.5), ValidationError);
    auto tf = build_test_function(*s.d, s.g, 0.5, false);
    CHECK_FALSE(tf.bracket_ok);
    CHECK(tf.chart_cap_exceeded);
    auto lb = check_lower_bound(tf, s.g);
    CHECK(std::isfinite(lb.margin));
}

TEST_CASE("appendix: closed forms and bounded order constants") {
    const auto& s = disk();
    std::vector<AppendixReport> reps;
    for (double eps : {1e-3, 1e-4, 1e-5, 1e-6}) reps.push_back(appendix_integrals(build_test_function(*s.d, s.g, eps)));
    for (const auto& a : reps) {
        CHECK(a.grad_inner_rel_diff < 1e-10);
        CHECK(std::abs(a.int_W_inner_quadrature - a.int_W_inner_closed_form) <= 1e-10 * std::abs(a.int_W_inner_closed_form));
        CHECK(std::abs(a.int_W2_inner_quadrature - a.int_W2_inner_closed_form) <= 1e-10 * std::abs(a.int_W2_inner_closed_form));
    }
    auto spread = [&](double AppendixReport::*field) {
        double lo = reps[0].*field, hi = lo;
        for (const auto& a : reps) {
            lo = std::min(lo, a.*field);
            hi = std::max(hi, a.*field);
        }
        return hi / lo;
    };
    CHECK(spread(&AppendixReport::K_B_inner) < 2.0);
    CHECK(spread(&AppendixReport::K_B_outer) < 2.0);
    CHECK(spread(&AppendixReport::K_C_inner) < 2.0);
    CHECK(spread(&AppendixReport::K_C_outer) < 2.0);
}
