#include "doctest.h"

#include <stdexcept>

#include <cmath>
#include <vector>

#include "ipwqr/model_frame.hpp"
#include "ipwqr/spline.hpp"

using namespace ipwqr;

TEST_CASE("partition of unity for degrees 1-3 and 0-4 knots") {
    for (int degree = 1; degree <= 3; ++degree) {
        for (int k = 0; k <= 4; ++k) {
            std::vector<double> knots;
            for (int i = 1; i <= k; ++i) knots.push_back(static_cast<double>(i) / (k + 1));
            const SplineBasis basis(degree, knots);
            for (int g = 0; g <= 1000; ++g) {
                const double z = static_cast<double>(g) / 1000.0;
                const double sum = basis.evaluate_full(z).sum();
                CHECK(std::abs(sum - 1.0) <= 1e-12);
            }
        }
    }
}

TEST_CASE("degree-1 hat basis by hand") {
    const SplineBasis basis(1, {0.5});
    const Eigen::VectorXd full = basis.evaluate_full(0.25);
    REQUIRE(full.size() == 3);
    CHECK(full[0] == doctest::Approx(0.5).epsilon(1e-15));
    CHECK(full[1] == doctest::Approx(0.5).epsilon(1e-15));
    CHECK(full[2] == 0.0);
    const Eigen::VectorXd b = basis.evaluate(0.25);
    REQUIRE(b.size() == 2);
    CHECK(b[0] == doctest::Approx(0.5).epsilon(1e-15));
    CHECK(b[1] == 0.0);
}

TEST_CASE("returned width is knots + degree") {
    const SplineBasis basis(3, {1.0 / 3.0, 2.0 / 3.0});
    CHECK(basis.width() == 5);
    CHECK(basis.evaluate(0.4).size() == 5);
}

TEST_CASE("local support") {
    // cubic with knots at .25,.5,.75: b_j vanishes outside its span
    const SplineBasis basis(3, {0.25, 0.5, 0.75});
    const Eigen::VectorXd at_zero = basis.evaluate_full(0.0);
    CHECK(at_zero[0] == 1.0);
    for (int j = 1; j < at_zero.size(); ++j) CHECK(at_zero[j] == 0.0);
    const Eigen::VectorXd at_one = basis.evaluate_full(1.0);
    CHECK(at_one[at_one.size() - 1] == doctest::Approx(1.0).epsilon(1e-15));
    // the last basis function is zero before its support starts at .5
    for (double z = 0.0; z < 0.5; z += 0.01)
        CHECK(basis.evaluate_full(z)[at_one.size() - 1] == 0.0);
    // entries are within [0,1]
    for (double z = 0.0; z <= 1.0; z += 0.001) {
        const Eigen::VectorXd v = basis.evaluate_full(z);
        CHECK(v.minCoeff() >= 0.0);
        CHECK(v.maxCoeff() <= 1.0 + 1e-15);
    }
}

TEST_CASE("evaluation outside the unit interval is a domain error") {
    const SplineBasis basis(3, {});
    CHECK_THROWS_AS(basis.evaluate(-0.01), std::domain_error);
    CHECK_THROWS_AS(basis.evaluate(1.01), std::domain_error);
}

TEST_CASE("quantile knots collapse ties with a warning") {
    std::vector<double> values(50, 0.5);
    values.insert(values.end(), {0.0, 1.0});
    std::vector<std::string> warnings;
    const SplineBasis basis = quantile_knot_basis(values, 3, 3, &warnings);
    CHECK(basis.internal_knots().size() == 1);
    CHECK(!warnings.empty());
}

namespace {

ModelFrame two_variable_frame(int n) {
    Eigen::VectorXd y(n);
    Eigen::MatrixXd x(n, 1), z(n, 2);
    for (int i = 0; i < n; ++i) {
        const double u = static_cast<double>(i) / (n - 1);
        y[i] = u;
        x(i, 0) = u - 0.5;
        z(i, 0) = u;
        z(i, 1) = 2.0 * u - 1.0;
    }
    return make_frame(y, x, z, {});
}

}  // namespace

TEST_CASE("design widths and the constant column") {
    const ModelFrame frame = two_variable_frame(40);
    const NonlinearDesign d0 = build_design(frame, {0, 0}, 3);
    CHECK(d0.width() == 7);
    const NonlinearDesign d1 = build_design(frame, {1, 2}, 3);
    CHECK(d1.width() == 10);
    CHECK((d1.matrix.col(0).array() == 1.0).all());
    CHECK_THROWS_AS(build_design(frame, {0, 0}, 0), std::invalid_argument);
}

TEST_CASE("basis evaluation is deterministic") {
    const SplineBasis basis(3, {0.3, 0.6});
    const Eigen::VectorXd a = basis.evaluate(0.456789);
    const Eigen::VectorXd b = basis.evaluate(0.456789);
    CHECK((a - b).cwiseAbs().maxCoeff() == 0.0);
}
