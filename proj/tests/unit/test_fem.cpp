#include "mtlab/error.hpp"
#include "mtlab/fem.hpp"
#include "mtlab/parallel.hpp"
#include "mtlab/quadrature.hpp"

#include <doctest.h>

#include <boost/math/quadrature/gauss_kronrod.hpp>

#include <cmath>
#include <numbers>
#include <sstream>

using namespace mtlab;

TEST_CASE("Dunavant rule integrates degree-5 monomials exactly") {
    const auto& r = dunavant5();
    double wsum = 0.0;
    for (double w : r.weight) wsum += w;
    CHECK(wsum == doctest::Approx(1.0).epsilon(1e-15));
    // On the reference triangle, int x^a y^b = a! b! / (a + b + 2)!; the rule is normalized by area 1/2.
    auto fact = [](int n) { return std::tgamma(n + 1.0); };
    for (int a = 0; a <= 5; ++a)
        for (int b = 0; a + b <= 5; ++b) {
            double q = 0.0;
            for (int k = 0; k < 7; ++k) q += r.weight[k] * std::pow(r.bary[k][1], a) * std::pow(r.bary[k][2], b);
            CHECK(0.5 * q == doctest::Approx(fact(a) * fact(b) / fact(a + b + 2)).epsilon(1e-14));
        }
}

TEST_CASE("Gauss-Legendre against Boost Gauss-Kronrod") {
    auto f = [](double x) { return std::exp(-x) * std::sin(3.0 * x); };
    double ref = boost::math::quadrature::gauss_kronrod<double, 31>::integrate(f, 0.0, 2.0);
    CHECK(composite_gauss(f, 0.0, 2.0, 4, 12) == doctest::Approx(ref).epsilon(1e-14));
    const auto& g = gauss_legendre(20);
    double s = 0.0;
    for (double w : g.w) s += w;
    CHECK(s == doctest::Approx(2.0).epsilon(1e-15));
}

TEST_CASE("stiffness annihilates constants, mass integrates to the area") {
    auto d = discretize(build_mesh({Disk{1.0}, 0.1}));
    Vec one = Vec::Ones(static_cast<Eigen::Index>(d->size()));
    CHECK((d->K * one).lpNorm<Eigen::Infinity>() < 1e-12);
    CHECK(one.dot(d->M * one) == doctest::Approx(d->mesh->area).epsilon(1e-13));
    CHECK(d->m.sum() == doctest::Approx(d->area).epsilon(1e-13));
    // Linear fields: energy of x is the area.
    Vec x = d->interpolate([](double x, double) { return x; });
    CHECK(x.dot(d->K * x) == doctest::Approx(d->area).epsilon(1e-12));
}

TEST_CASE("mean-zero solver satisfies the constrained system") {
    auto d = discretize(build_mesh({UnitSquare{}, 0.1}));
    Vec b = d->interpolate([](double x, double y) { return std::cos(3 * x) + y * y; });
    b = d->M * b;
    for (double alpha : {0.0, 4.0}) {
        Vec u = d->solver(alpha).solve(b);
        CHECK(std::abs(d->integral(u)) < 1e-12);
        Vec r = d->K * u - alpha * (d->M * u) - b;
        double c = -r.sum() / d->area;  // r + c m must vanish
        CHECK(d->dual_norm(r + c * d->m) < 1e-9 * d->dual_norm(b));
    }
}

TEST_CASE("norm_1alpha rejects an indefinite form") {
    auto d = discretize(build_mesh({UnitSquare{}, 0.25}));
    Vec u = d->project_mean_zero(d->interpolate([](double x, double) { return std::cos(std::numbers::pi * x); }));
    CHECK(norm_1alpha(*d, u, 0.0) > 0.0);
    CHECK_THROWS_AS(norm_1alpha(*d, u, 100.0), ValidationError);
}

TEST_CASE("exponential functional: constant field and overflow guard") {
    auto m = build_mesh({UnitSquare{}, 0.2});
    Vec u = Vec::Constant(static_cast<Eigen::Index>(m->num_nodes()), 0.5);
    CHECK(functional_exp(*m, u, 2.0) == doctest::Approx(std::exp(0.5)).epsilon(1e-14));
    auto mom = exp_moments(*m, u, 2.0);
    CHECK(mom.I1 == doctest::Approx(0.5 * std::exp(0.5)).epsilon(1e-14));
    CHECK(mom.I2 == doctest::Approx(0.25 * std::exp(0.5)).epsilon(1e-14));
    Vec big = Vec::Constant(u.size(), 30.0);
    CHECK_THROWS_AS(functional_exp(*m, big, 1.0), OverflowError);
}

TEST_CASE("exp_load with matrix: D 1 equals the load") {
    auto d = discretize(build_mesh({Disk{1.0}, 0.15}));
    Vec f = d->interpolate([](double x, double) { return std::exp(x); });
    Vec u = d->interpolate([](double x, double y) { return 0.3 * x * y; });
    Vec load;
    SpMat D;
    double Z = exp_load(*d->mesh, f, u, load, &D);
    CHECK(load.sum() == doctest::Approx(Z).epsilon(1e-13));
    Vec one = Vec::Ones(u.size());
    CHECK((D * one - load).lpNorm<Eigen::Infinity>() < 1e-14);
}

TEST_CASE("parallel reductions are identical for any worker count") {
    auto m = build_mesh({Disk{1.0}, 0.05});
    Vec u(static_cast<Eigen::Index>(m->num_nodes()));
    for (Eigen::Index i = 0; i < u.size(); ++i) u[i] = std::sin(0.37 * static_cast<double>(i));
    set_thread_count(1);
    double one = functional_exp(*m, u, 3.0);
    auto mom1 = exp_moments(*m, u, 3.0);
    set_thread_count(7);
    double seven = functional_exp(*m, u, 3.0);
    auto mom7 = exp_moments(*m, u, 3.0);
    set_thread_count(0);
    CHECK(one == seven);
    CHECK((mom1.load - mom7.load).cwiseAbs().maxCoeff() == 0.0);
}

TEST_CASE("SHA-256 of a known string") {
    CHECK(sha256_hex("abc") == "ba7816bf8f01cfea414140de5dae2223b00361a396177a9cb410ff61f20015ad");
}

TEST_CASE("field round trip and mesh binding") {
    auto m = build_mesh({UnitSquare{}, 0.25});
    Vec u(static_cast<Eigen::Index>(m->num_nodes()));
    for (Eigen::Index i = 0; i < u.size(); ++i) u[i] = 1.0 / (1.0 + static_cast<double>(i)) - 0.1;
    std::string sha = mesh_hash(*m);
    std::istringstream in(field_to_string(u, sha));
    Vec back = read_field(in, sha);
    CHECK((back - u).cwiseAbs().maxCoeff() == 0.0);
    std::istringstream again(field_to_string(u, sha));
    CHECK_THROWS_AS(read_field(again, std::string(64, '0')), ValidationError);
    std::istringstream bad("mt-field v1\nmesh-sha256 x\nnodes 3\n1\n2\n");
    CHECK_THROWS_AS(read_field(bad), ValidationError);
}
