#include "../oracles.hpp"

#include "mtlab/error.hpp"
#include "mtlab/expr.hpp"
#include "mtlab/meanfield.hpp"
#include "mtlab/parallel.hpp"
#include "mtlab/spectral.hpp"

#include <doctest.h>

#include <cmath>
#include <numbers>

using namespace mtlab;

namespace {

constexpr double kPi = std::numbers::pi;

}  // namespace

TEST_CASE("f = 1 gives u = 0") {
    auto d = discretize(build_mesh({UnitSquare{}, 0.1}));
    MeanFieldProblem pb{d, 0.0, 2.0, Vec::Ones(static_cast<Eigen::Index>(d->size())), std::nullopt};
    auto s = minimize_F(pb);
    CHECK(s.converged);
    CHECK(s.u.cwiseAbs().maxCoeff() < 1e-12);
    CHECK(residual_meanfield(s, pb) <= 1e-10);
    CHECK(s.F_value == doctest::Approx(-2.0 * std::log(d->area)));
}

TEST_CASE("disk, f = e^x, rho = pi, alpha = 1: Newton against Picard") {
    auto d = discretize(build_mesh({Disk{1.0}, 0.1}));
    Vec f = d->interpolate([](double x, double) { return std::exp(x); });
    MeanFieldProblem pb{d, 1.0, kPi, f, std::nullopt};
    auto s = minimize_F(pb);
    REQUIRE(s.converged);
    CHECK(s.residual <= 1e-10);
    CHECK(std::abs(d->integral(s.u)) < 1e-12);
    int it = 0;
    Vec picard = oracle::meanfield_picard(*d, 1.0, kPi, f, 0.3, 5000, &it);
    CHECK(it < 5000);
    CHECK(d->l2_norm(s.u - picard) < 1e-6);
    for (std::size_t k = 1; k < s.trace.size(); ++k) CHECK(s.trace[k].dF < 0.0);
}

TEST_CASE("doubling f shifts F by -rho log 2 and keeps the minimizer") {
    auto d = discretize(build_mesh({Disk{1.0}, 0.1}));
    Vec f = d->interpolate([](double x, double y) { return 1.0 + 0.5 * x * x + 0.2 * y; });
    MeanFieldProblem pb{d, 0.5, 5.0, f, std::nullopt};
    auto a = minimize_F(pb);
    pb.f = 2.0 * f;
    auto b = minimize_F(pb);
    CHECK(std::abs(b.F_value - a.F_value + 5.0 * std::log(2.0)) < 1e-10);
    CHECK(d->l2_norm(a.u - b.u) < 1e-10);
}

TEST_CASE("energy_change agrees with differences of F where F resolves them") {
    auto d = discretize(build_mesh({Disk{1.0}, 0.15}));
    Vec f = d->interpolate([](double x, double) { return std::exp(x); });
    MeanFieldProblem pb{d, 1.0, 2.0, f, std::nullopt};
    Vec u = d->project_mean_zero(d->interpolate([](double x, double y) { return 0.4 * x - 0.2 * y * y; }));
    Vec v = d->project_mean_zero(d->interpolate([](double x, double y) { return 0.1 * std::cos(2.0 * x + y); }));
    CHECK(energy_change(pb, u, v) == doctest::Approx(energy_F(pb, u + v) - energy_F(pb, u)).epsilon(1e-10));
    Vec tiny = 1e-9 * v;
    double lin = (d->K * u - 1.0 * (d->M * u)).dot(tiny);
    Vec load;
    double Z = oracle::exp_load_oracle(*d->mesh, f, u, load);
    lin -= 2.0 * load.dot(tiny) / Z;
    CHECK(energy_change(pb, u, tiny) == doctest::Approx(lin).epsilon(1e-6));
}

TEST_CASE("energy_F matches its definition") {
    auto d = discretize(build_mesh({UnitSquare{}, 0.2}));
    Vec f = Vec::Ones(static_cast<Eigen::Index>(d->size()));
    Vec u = d->project_mean_zero(d->interpolate([](double x, double y) { return std::sin(x) * y; }));
    MeanFieldProblem pb{d, 0.0, 3.0, f, std::nullopt};
    Vec load;
    double Z = oracle::exp_load_oracle(*d->mesh, f, u, load);
    CHECK(energy_F(pb, u) == doctest::Approx(0.5 * u.dot(d->K * u) - 3.0 * std::log(Z)).epsilon(1e-14));
}

TEST_CASE("precondition failures") {
    auto d = discretize(build_mesh({UnitSquare{}, 0.2}));
    Vec one = Vec::Ones(static_cast<Eigen::Index>(d->size()));
    CHECK_THROWS_AS(validate(MeanFieldProblem{d, 0.0, 4.0 * kPi, one, std::nullopt}), ValidationError);
    CHECK_THROWS_AS(validate(MeanFieldProblem{d, 0.0, 0.0, one, std::nullopt}), ValidationError);
    Vec neg = one;
    neg[0] = -1.0;
    CHECK_THROWS_AS(validate(MeanFieldProblem{d, 0.0, 1.0, neg, std::nullopt}), ValidationError);
    CHECK_THROWS_AS(validate(MeanFieldProblem{d, 20.0, 1.0, one, std::nullopt}), ValidationError);
}

TEST_CASE("witness inequality holds along the iterates") {
    auto d = discretize(build_mesh({Disk{1.0}, 0.15}));
    auto cr = check_corollary(*d, 0.0, 50, 3);
    Vec f = d->interpolate([](double x, double) { return std::exp(2.0 * x); });
    MeanFieldOptions o;
    o.C_emp = cr.C_emp;
    auto s = minimize_F({d, 0.0, 6.0, f, std::nullopt}, o);
    CHECK(s.converged);
    CHECK(s.witness_ok);
}

TEST_CASE("corollary: constant field, stability, no violations") {
    auto d = discretize(build_mesh({UnitSquare{}, 0.1}));
    Vec c = Vec::Constant(static_cast<Eigen::Index>(d->size()), 2.7);
    CHECK(corollary_D(*d, c, 0.0) == doctest::Approx(std::log(d->area)).epsilon(1e-14));
    auto d2 = discretize(build_mesh({Disk{1.0}, 0.1}));
    Vec c2 = Vec::Constant(static_cast<Eigen::Index>(d2->size()), -1.3);
    CHECK(std::abs(corollary_D(*d2, c2, 0.0) - std::log(d2->area)) < 1e-14);

    std::vector<double> Cr;
    for (std::uint64_t seed : {1, 2, 3}) {
        auto r = check_corollary(*d, 0.0, 1000, seed);
        CHECK(r.violations == 0);
        CHECK(r.C_emp >= r.log_area - 1e-14);
        CHECK(r.D_const == doctest::Approx(r.log_area).epsilon(1e-14));
        Cr.push_back(r.C_random);
    }
    double lo = *std::min_element(Cr.begin(), Cr.end()), hi = *std::max_element(Cr.begin(), Cr.end());
    CHECK((hi - lo) / std::abs(hi) < 0.10);
}

TEST_CASE("corollary sampler is independent of the worker count") {
    auto d = discretize(build_mesh({UnitSquare{}, 0.1}));
    set_thread_count(1);
    auto a = check_corollary(*d, 0.0, 64, 9);
    set_thread_count(5);
    auto b = check_corollary(*d, 0.0, 64, 9);
    set_thread_count(0);
    CHECK(a.C_random == b.C_random);
    CHECK(a.D_mean == b.D_mean);
}

TEST_CASE("expression parser") {
    auto e = Expr::parse("exp(x) + 2*y^2 - -pi/2");
    CHECK(e(0.0, 1.0) == doctest::Approx(1.0 + 2.0 + kPi / 2.0));
    CHECK(Expr::parse("2^3^2")(0, 0) == doctest::Approx(512.0));
    CHECK(Expr::parse("-x^2")(3.0, 0.0) == doctest::Approx(-9.0));
    CHECK(Expr::parse("sqrt(abs(x))*cos(0)")(-4.0, 0.0) == doctest::Approx(2.0));
    CHECK_THROWS_AS(Expr::parse("exp(x"), ValidationError);
    CHECK_THROWS_AS(Expr::parse("foo(x)"), ValidationError);
    CHECK_THROWS_AS(Expr::parse("x y"), ValidationError);
    CHECK_THROWS_AS(Expr::parse(""), ValidationError);
}
