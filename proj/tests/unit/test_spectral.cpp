#include "../oracles.hpp"

#include "mtlab/error.hpp"
#include "mtlab/spectral.hpp"

#include <doctest.h>

#include <cmath>
#include <numbers>

using namespace mtlab;

TEST_CASE("Bessel oracle: first zero of J1'") {
    double j = oracle::bessel_j1_prime_root();
    CHECK(j == doctest::Approx(1.8411837813).epsilon(1e-9));
}

TEST_CASE("unit square lambda1 converges to pi^2 at second order") {
    const double exact = std::numbers::pi * std::numbers::pi;
    double prev_err = 0.0;
    for (double h : {0.1, 0.05, 0.025}) {
        auto d = discretize(build_mesh({UnitSquare{}, h}));
        auto e = neumann_lambda1(*d);
        double err = std::abs(e.lambda1 - exact);
        CHECK(e.residual < 1e-8);
        CHECK(std::abs(d->integral(e.eigenfield)) < 1e-12);
        CHECK(e.eigenfield.dot(d->M * e.eigenfield) == doctest::Approx(1.0).epsilon(1e-12));
        if (prev_err > 0.0) CHECK(prev_err / err > 3.0);
        prev_err = err;
    }
}

TEST_CASE("unit disk lambda1 against the Bessel oracle") {
    double j = oracle::bessel_j1_prime_root();
    auto d = discretize(build_mesh({Disk{1.0}, 0.05}));
    auto e = neumann_lambda1(*d);
    CHECK(std::abs(e.lambda1 - j * j) / (j * j) < 0.01);
}

TEST_CASE("scaling the domain by s scales lambda1 by s^-2") {
    auto m = build_mesh({Disk{1.0}, 0.1});
    double l = neumann_lambda1(*discretize(m)).lambda1;
    double ls = neumann_lambda1(*discretize(scale(*m, 2.5))).lambda1;
    CHECK(std::abs(ls * 6.25 - l) / l < 1e-10);
}

TEST_CASE("eigenfield sign normalization and dense cross-check") {
    auto d = discretize(build_mesh({UnitSquare{}, 0.125}));
    auto e = neumann_lambda1(*d);
    Eigen::Index imax;
    e.eigenfield.cwiseAbs().maxCoeff(&imax);
    CHECK(e.eigenfield[imax] > 0.0);
    Eigen::MatrixXd K(d->K), M(d->M);
    Eigen::GeneralizedSelfAdjointEigenSolver<Eigen::MatrixXd> es(K, M);
    CHECK(e.lambda1 == doctest::Approx(es.eigenvalues()[1]).epsilon(1e-10));
}

TEST_CASE("alpha must lie below lambda1") {
    CHECK_NOTHROW(check_alpha(0.0, 3.0));
    CHECK_NOTHROW(check_alpha(2.9, 3.0));
    CHECK_THROWS_AS(check_alpha(3.0, 3.0), ValidationError);
    CHECK_THROWS_AS(check_alpha(-0.1, 3.0), ValidationError);
}
