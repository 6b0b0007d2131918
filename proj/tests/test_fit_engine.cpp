#include "doctest.h"

#include <stdexcept>

#include <cmath>
#include <random>

#include "ipwqr/fit_engine.hpp"
#include "ipwqr/simlab.hpp"

using namespace ipwqr;

namespace {

// partial-linear toy data: y = x1 - x2 + sin(2*pi*z) + noise
ModelFrame toy_frame(int n, unsigned seed, double noise_sd = 0.3) {
    std::mt19937_64 eng(seed);
    std::normal_distribution<double> g;
    std::uniform_real_distribution<double> u;
    Eigen::VectorXd y(n);
    Eigen::MatrixXd x(n, 4), z(n, 1);
    for (int i = 0; i < n; ++i) {
        for (int j = 0; j < 4; ++j) x(i, j) = g(eng);
        z(i, 0) = u(eng);
        y[i] = x(i, 0) - x(i, 1) + std::sin(6.283185307179586 * z(i, 0)) +
               noise_sd * g(eng);
    }
    return make_frame(y, x, z, {});
}

}  // namespace

TEST_CASE("unpenalized fit reduces to the plain solver") {
    const ModelFrame frame = toy_frame(80, 1);
    FitConfig config;
    config.tau = 0.5;
    config.knot_grid = {{1}};
    const WeightEstimate w = unit_weights(frame.n_rows());
    const FitResult fit = fit_unpenalized(frame, w, config);

    const NonlinearDesign nl = build_design(frame, {1}, 3);
    QrProblem p;
    p.design.resize(frame.n_rows(), 4 + nl.width());
    p.design.leftCols(4) = frame.x;
    p.design.rightCols(nl.width()) = nl.matrix;
    p.response = frame.y;
    p.tau = 0.5;
    const QrSolution direct = solve(p);
    CHECK((fit.beta - direct.coef.head(4)).cwiseAbs().maxCoeff() <= 1e-9);
    CHECK((fit.xi - direct.coef.tail(nl.width())).cwiseAbs().maxCoeff() <= 1e-9);
}

TEST_CASE("lasso needs exactly one inner solve") {
    const ModelFrame frame = toy_frame(60, 2);
    FitConfig config;
    config.penalty = PenaltySpec::lasso(1.0);
    const FitResult fit = fit_lla(frame, unit_weights(60), config, 0.05, {1});
    CHECK(fit.lla.iterations == 1);
    CHECK(fit.lla.converged);
}

TEST_CASE("a large lambda zeroes every penalized coefficient") {
    const ModelFrame frame = toy_frame(60, 3);
    FitConfig config;
    config.penalty = PenaltySpec::scad(1.0, 3.7);
    const double lmax = lambda_max_bisect(frame, unit_weights(60), config, {1});
    const FitResult fit = fit_lla(frame, unit_weights(60), config, 2.0 * lmax, {1});
    CHECK(fit.active_set.empty());
    CHECK(fit.beta.cwiseAbs().maxCoeff() == 0.0);
    // just below lambda_max something becomes active under the lasso start
    const FitResult loose = fit_lla(frame, unit_weights(60), config, lmax / 50.0, {1});
    CHECK(!loose.active_set.empty());
}

TEST_CASE("lla objective path is monotone and convergent") {
    std::mt19937_64 eng(4);
    for (int k = 0; k < 8; ++k) {
        const ModelFrame frame = toy_frame(70, 10 + k);
        FitConfig config;
        config.penalty = k % 2 == 0 ? PenaltySpec::scad(1.0, 3.7) : PenaltySpec::mcp(1.0, 3.0);
        const double lambda = 0.01 + 0.05 * (k + 1);
        const FitResult fit = fit_lla(frame, unit_weights(70), config, lambda, {1});
        CHECK(fit.lla.converged);
        CHECK(fit.lla.max_ascent <= 1e-9);
        for (std::size_t i = 1; i < fit.lla.objective_path.size(); ++i)
            CHECK(fit.lla.objective_path[i] <= fit.lla.objective_path[i - 1] + 1e-9);
    }
}

TEST_CASE("qbic matches the formula") {
    const ModelFrame frame = toy_frame(100, 5);
    FitConfig config;
    config.penalty = PenaltySpec::scad(1.0, 3.7);
    const WeightEstimate w = unit_weights(100);
    const FitResult fit = fit_lla(frame, w, config, 0.05, {1});
    const double qbic = qbic_score(frame, fit, w);
    const int nu = static_cast<int>(fit.active_set.size()) + 1 + 3;  // one block, k=1, cubic
    const double expected = std::log(fit.weighted_loss) + nu * std::log(100.0) / 200.0;
    CHECK(qbic == doctest::Approx(expected).epsilon(1e-10));

    // worked arithmetic example of the same formula
    CHECK(std::log(10.0) + 11.0 * std::log(100.0) / 200.0 ==
          doctest::Approx(2.5558694).epsilon(1e-7));
}

TEST_CASE("select_fit with singleton grids is fit_lla") {
    const ModelFrame frame = toy_frame(60, 6);
    FitConfig config;
    config.penalty = PenaltySpec::scad(1.0, 3.7);
    config.lambda_grid = {0.08};
    config.knot_grid = {{1}};
    const WeightEstimate w = unit_weights(60);
    const FitResult a = select_fit(frame, w, config);
    const FitResult b = fit_lla(frame, w, config, 0.08, {1});
    CHECK((a.beta - b.beta).cwiseAbs().maxCoeff() == 0.0);
    CHECK(a.score_table.size() == 1);
}

TEST_CASE("score ties break toward smaller lambda") {
    const ModelFrame frame = toy_frame(60, 7);
    FitConfig config;
    config.penalty = PenaltySpec::scad(1.0, 3.7);
    const double lmax = lambda_max_bisect(frame, unit_weights(60), config, {1});
    // both lambdas zero everything: identical fit and score
    config.lambda_grid = {3.0 * lmax, 2.0 * lmax};
    config.knot_grid = {{1}};
    const FitResult fit = select_fit(frame, unit_weights(60), config);
    CHECK(fit.selected_lambda == doctest::Approx(2.0 * lmax));
}

TEST_CASE("select_fit recovers the toy support") {
    const ModelFrame frame = toy_frame(300, 8, 0.5);
    FitConfig config;
    config.penalty = PenaltySpec::scad(1.0, 3.7);
    config.knot_grid = knot_combinations({0, 1, 2}, 1);
    const FitResult fit = select_fit(frame, unit_weights(300), config);
    CHECK(fit.active_set == std::vector<int>{0, 1});
}

TEST_CASE("rows with zero weight never change a fit") {
    const ModelFrame frame = toy_frame(50, 9);
    FitConfig config;
    config.penalty = PenaltySpec::scad(1.0, 3.7);
    WeightEstimate w = unit_weights(50);
    w.weights.tail(10).setZero();
    const FitResult a = fit_lla(frame, w, config, 0.05, {1});

    // same data without those rows
    Eigen::VectorXd y = frame.y.head(40);
    Eigen::MatrixXd x = frame.x.topRows(40);
    Eigen::MatrixXd z = frame.z_raw.topRows(40);
    const ModelFrame sub = make_frame(y, x, z, {});
    const FitResult b = fit_lla(sub, unit_weights(40), config, 0.05, {1});
    CHECK((a.beta - b.beta).cwiseAbs().maxCoeff() <= 1e-9);
}

TEST_CASE("all-zero weights raise the no-data error") {
    const ModelFrame frame = toy_frame(30, 10);
    WeightEstimate w = unit_weights(30);
    w.weights.setZero();
    FitConfig config;
    CHECK_THROWS_AS(fit_unpenalized(frame, w, config), std::runtime_error);
}

TEST_CASE("designation finds the right class") {
    std::mt19937_64 eng(11);
    std::normal_distribution<double> g;
    std::uniform_real_distribution<double> u;
    const int n = 500;
    Eigen::VectorXd y_sin(n), y_lin(n);
    Eigen::MatrixXd x(n, 1), z(n, 0);
    for (int i = 0; i < n; ++i) {
        x(i, 0) = u(eng);
        y_sin[i] = std::sin(6.283185307179586 * x(i, 0)) + 0.5 * g(eng);
        y_lin[i] = 1.5 * x(i, 0) + 0.5 * g(eng);
    }
    const ModelFrame sin_frame = make_frame(y_sin, x, z, {});
    const Designation dn =
        wqbic_designate(sin_frame, 0, 0.5, unit_weights(n));
    CHECK(dn.cls == Designation::Class::Nonlinear);

    const ModelFrame lin_frame = make_frame(y_lin, x, z, {});
    const Designation dl =
        wqbic_designate(lin_frame, 0, 0.5, unit_weights(n));
    CHECK(dl.cls == Designation::Class::Linear);
    CHECK(!dl.weak_signal);
}

TEST_CASE("binary covariates are rejected by designation") {
    const int n = 60;
    Eigen::VectorXd y = Eigen::VectorXd::LinSpaced(n, 0.0, 1.0);
    Eigen::MatrixXd x(n, 1), z(n, 0);
    for (int i = 0; i < n; ++i) x(i, 0) = i % 2;
    const ModelFrame frame = make_frame(y, x, z, {});
    CHECK_THROWS_AS(wqbic_designate(frame, 0, 0.5, unit_weights(n)),
                    std::invalid_argument);
}

TEST_CASE("prediction interval on a homoskedastic toy") {
    std::mt19937_64 eng(12);
    std::normal_distribution<double> g;
    const int n = 500, ntest = 200;
    const auto make = [&](int rows) {
        Eigen::VectorXd y(rows);
        Eigen::MatrixXd x(rows, 2), z(rows, 0);
        for (int i = 0; i < rows; ++i) {
            x(i, 0) = g(eng);
            x(i, 1) = g(eng);
            y[i] = 1.0 + x(i, 0) + g(eng);
        }
        return make_frame(y, x, z, {}, {"u", "v"});
    };
    const ModelFrame train = make(n);
    const ModelFrame test = make(ntest);
    FitConfig config;
    config.penalty = PenaltySpec::scad(1.0, 3.7);
    config.lambda_grid_size = 10;
    WeightPlan plan;  // no missing data: naive weights are all ones
    const auto report = prediction_interval(train, test, 0.05, 0.95, config, plan);
    CHECK(report.scored_rows == ntest);
    CHECK(report.capture_rate >= 0.82);
    CHECK(report.capture_rate <= 0.98);
    // interval length should hover near 2 * 1.645
    CHECK(report.mean_length >= 2.4);
    CHECK(report.mean_length <= 4.2);
}

TEST_CASE("degenerate equal quantiles are rejected") {
    const ModelFrame frame = toy_frame(50, 13);
    FitConfig config;
    WeightPlan plan;
    CHECK_THROWS_AS(prediction_interval(frame, frame, 0.5, 0.5, config, plan),
                    std::invalid_argument);
}
