#include "doctest.h"

#include <stdexcept>

#include <cmath>

#include "ipwqr/simlab.hpp"

using namespace ipwqr;

namespace {

SimConfig small_config() {
    SimConfig config;
    config.n = 200;
    config.p = 8;
    config.replications = 2;
    config.seed = 11;
    return config;
}

}  // namespace

TEST_CASE("replications are reproducible and distinct") {
    const SimConfig config = small_config();
    const Replication a = generate_replication(config, 0);
    const Replication b = generate_replication(config, 0);
    const Replication c = generate_replication(config, 1);
    CHECK((a.full.y - b.full.y).cwiseAbs().maxCoeff() == 0.0);
    CHECK((a.full.x - b.full.x).cwiseAbs().maxCoeff() == 0.0);
    CHECK((a.full.y - c.full.y).cwiseAbs().maxCoeff() > 0.0);
}

TEST_CASE("the truth matches the generating mechanism") {
    const SimConfig config = small_config();
    const Replication rep = generate_replication(config, 3);
    CHECK(rep.beta_true[0] == 1.0);
    CHECK(rep.beta_true[2] == -1.0);
    CHECK(rep.beta_true[7] == 1.0);
    CHECK(rep.beta_true.cwiseAbs().sum() == 3.0);
    CHECK(rep.true_support == std::vector<int>{0, 2, 7});
    // g0 = sin(2 pi z1) + z2^3 at tau = .5 with symmetric errors
    for (int i = 0; i < 5; ++i) {
        const double expected = std::sin(6.283185307179586 * rep.full.z_raw(i, 0)) +
                                std::pow(rep.full.z_raw(i, 1), 3);
        CHECK(rep.g0[i] == doctest::Approx(expected).epsilon(1e-12));
    }
    // x_u is uniform on [0, sqrt(12)]
    CHECK(rep.full.x.col(7).minCoeff() >= 0.0);
    CHECK(rep.full.x.col(7).maxCoeff() <= std::sqrt(12.0));
}

TEST_CASE("masking blanks x1, x7 and z2 jointly") {
    const SimConfig config = small_config();
    const Replication rep = generate_replication(config, 5);
    CHECK(rep.full.complete_case_count() == config.n);
    int masked_rows = 0;
    for (int i = 0; i < config.n; ++i) {
        if (rep.masked.r[i]) {
            CHECK(std::isfinite(rep.masked.x(i, 0)));
            CHECK(std::isfinite(rep.masked.x(i, 6)));
            CHECK(std::isfinite(rep.masked.z_raw(i, 1)));
        } else {
            ++masked_rows;
            CHECK(std::isnan(rep.masked.x(i, 0)));
            CHECK(std::isnan(rep.masked.x(i, 6)));
            CHECK(std::isnan(rep.masked.z_raw(i, 1)));
            // the rest of the row stays observed
            CHECK(std::isfinite(rep.masked.x(i, 1)));
            CHECK(std::isfinite(rep.masked.z_raw(i, 0)));
        }
    }
    CHECK(masked_rows == config.n - rep.masked.complete_case_count());
    CHECK(rep.masked.missing.missing_capable == std::vector<int>{0, 6, 9});
}

TEST_CASE("hetero errors shift the x_u coefficient and intercept") {
    SimConfig config = small_config();
    config.error_model = ErrorModel::HeteroNormal;
    config.tau = 0.7;
    const Replication rep = generate_replication(config, 1);
    const double shift = 0.524400512708041;  // standard normal .7 quantile
    CHECK(rep.beta_true[7] == doctest::Approx(1.0 + shift).epsilon(1e-9));
    const double expected_g0 = std::sin(6.283185307179586 * rep.full.z_raw(0, 0)) +
                               std::pow(rep.full.z_raw(0, 1), 3) + shift;
    CHECK(rep.g0[0] == doctest::Approx(expected_g0).epsilon(1e-9));
}

TEST_CASE("complete-case counts track the tables") {
    SimConfig config = small_config();
    config.n = 200;
    double mean1 = 0.0;
    const int reps = 120;
    for (int rep = 0; rep < reps; ++rep)
        mean1 += generate_replication(config, rep).masked.complete_case_count();
    mean1 /= reps;
    CHECK(mean1 >= 135.0);
    CHECK(mean1 <= 145.0);

    config.missing_model = SimMissingModel::Model2;
    config.n = 400;
    double mean2 = 0.0;
    for (int rep = 0; rep < reps; ++rep)
        mean2 += generate_replication(config, rep).masked.complete_case_count();
    mean2 /= reps;
    CHECK(mean2 >= 277.0);
    CHECK(mean2 <= 291.0);
}

TEST_CASE("replication scoring") {
    const SimConfig config = small_config();
    const Replication rep = generate_replication(config, 2);

    FitResult fit;
    fit.beta = rep.beta_true;
    fit.active_set = {0, 2, 7};
    fit.xi = Eigen::VectorXd::Zero(1);
    fit.tau = 0.5;

    // exact support recovery
    Replication flat = rep;
    flat.g0.setZero();  // fit has no nonlinear part, so make the truth match
    const RepScore score = score_replication(flat, fit);
    CHECK(score.tv == 3.0);
    CHECK(score.fv == 0.0);
    CHECK(score.exact);
    CHECK(score.aade == 0.0);

    // one miss, one false positive
    FitResult off = fit;
    off.active_set = {0, 2, 5};
    off.beta[7] = 0.0;
    off.beta[5] = 0.4;
    const RepScore s2 = score_replication(flat, off);
    CHECK(s2.tv == 2.0);
    CHECK(s2.fv == 1.0);
    CHECK(!s2.exact);
}

TEST_CASE("a tiny experiment runs deterministically") {
    SimConfig config;
    config.n = 120;
    config.p = 8;
    config.replications = 2;
    config.seed = 42;
    config.methods = {SimMethod::Naive};
    config.fit.lambda_grid = {0.05, 0.2};
    config.fit.knot_grid = {{0, 0}};
    const SimReport a = run_experiment(config);
    const SimReport b = run_experiment(config);
    REQUIRE(a.methods.size() == 1);
    CHECK(a.methods[0].completed == 2);
    CHECK(a.methods[0].failures == 0);
    CHECK(a.methods[0].tv == b.methods[0].tv);
    CHECK(a.methods[0].bias == b.methods[0].bias);
    CHECK(a.methods[0].aade == b.methods[0].aade);
    CHECK(a.methods[0].tv >= 0.0);
    CHECK(a.methods[0].tv <= 3.0);
    CHECK(a.methods[0].true_rate >= 0.0);
    CHECK(a.methods[0].true_rate <= 1.0);
    // bit-identical summaries under threading
    SimConfig threaded = config;
    threaded.threads = 4;
    const SimReport c = run_experiment(threaded);
    CHECK(c.methods[0].bias == a.methods[0].bias);
    CHECK(c.methods[0].mse == a.methods[0].mse);
}
