#pragma once

#include <Eigen/Dense>

#include <optional>
#include <string>
#include <vector>

#include "ipwqr/ipw.hpp"
#include "ipwqr/model_frame.hpp"
#include "ipwqr/penalty.hpp"
#include "ipwqr/qr_solver.hpp"
#include "ipwqr/spline.hpp"

namespace ipwqr {

struct FitConfig {
    double tau = 0.5;
    std::optional<PenaltySpec> penalty;  // family and shape; lambda taken from the grid
    std::vector<double> lambda_grid;     // empty: 30 log-spaced points down from lambda_max
    std::vector<std::vector<int>> knot_grid;  // per-combination internal knot counts; empty: one knot per variable... see default_knot_grid
    int degree = 3;
    double lla_tol = 1e-7;
    int lla_max_iter = 50;
    double zero_tol = 1e-6;     // sparsification threshold for LLA iterates
    int lambda_grid_size = 30;
    int threads = 1;

    void validate(int n_nonlinear) const;
};

// All (k_1,...,k_d) combinations with each k_j drawn from `counts`.
std::vector<std::vector<int>> knot_combinations(const std::vector<int>& counts, int d);

struct LlaDiagnostics {
    int iterations = 0;
    bool converged = true;
    double max_ascent = 0.0;               // largest objective increase over the path
    std::vector<double> objective_path;    // penalized objective per accepted iterate
};

struct ScoreTableRow {
    double lambda = 0.0;
    std::vector<int> knots;
    double qbic = 0.0;
    int nu = 0;
    int active_count = 0;
    bool converged = true;
};

// Fitted partial-linear quantile model. beta holds the linear coefficients,
// xi the intercept-plus-spline block; ghat(z) = b(z)' xi includes the
// intercept, which is part of the nonlinear function.
struct FitResult {
    Eigen::VectorXd beta;
    Eigen::VectorXd xi;
    std::vector<int> active_set;
    std::vector<SplineBasis> bases;
    std::vector<int> block_offsets;
    std::vector<UnitRescale> z_scale;
    double tau = 0.5;
    double objective = 0.0;       // (1/n) weighted loss + penalty
    double weighted_loss = 0.0;   // sum_i w_i rho_tau(resid_i), unnormalized
    std::optional<PenaltySpec> penalty;
    double selected_lambda = 0.0;
    std::vector<int> selected_knots;
    double qbic = 0.0;
    WeightMethod weight_method = WeightMethod::None;
    LlaDiagnostics lla;
    std::vector<ScoreTableRow> score_table;
    mutable int clamped_predictions = 0;  // out-of-range z at prediction time

    // Additive fit at a nonlinear covariate row given on the unit scale.
    double ghat_unit(const Eigen::VectorXd& z_unit) const;
    // Same, from raw-scale z (rescaled and clamped to [0,1], counted).
    double ghat_raw(const Eigen::VectorXd& z_raw) const;
    // x' beta + ghat(z).
    double predict(const Eigen::VectorXd& x_row, const Eigen::VectorXd& z_raw) const;
};

// Weighted (or unweighted) estimator without a penalty: one exact solve of
// the check-loss program over [X | 1 | b(z)].
FitResult fit_unpenalized(const ModelFrame& frame,
                          const WeightEstimate& weights,
                          const FitConfig& config);

// Penalized fit for a single (lambda, knots) pair by local linear
// approximation: iterated weighted-L1 solves with weights
// p'_lambda(|beta^{t-1}|), started from beta^0 = 0 (a LASSO first step),
// stopped when ||beta^t - beta^{t-1}||_1 < lla_tol. Iterates are sparsified
// at zero_tol, and a step that would raise the penalized objective is
// discarded, which keeps the objective path non-increasing.
FitResult fit_lla(const ModelFrame& frame,
                  const WeightEstimate& weights,
                  const FitConfig& config,
                  double lambda,
                  const std::vector<int>& knots);

// QBIC^W: ln(weighted check loss) + nu ln(n)/(2n) with
// nu = #nonzero linear + sum_j (k_j + degree).
double qbic_score(const ModelFrame& frame,
                  const FitResult& fit,
                  const WeightEstimate& weights);

// Grid search over (lambda, knot combination), returns the QBIC-minimizing
// fit with the full score table attached. Ties break toward smaller nu,
// then smaller lambda.
FitResult select_fit(const ModelFrame& frame,
                     const WeightEstimate& weights,
                     const FitConfig& config);

// Smallest lambda that zeroes every penalized coefficient under the LASSO
// initialization, located by bisection.
double lambda_max_bisect(const ModelFrame& frame,
                         const WeightEstimate& weights,
                         const FitConfig& config,
                         const std::vector<int>& knots);

// Linear-vs-nonlinear designation of one quantitative covariate by WQBIC
// over seven univariate models: intercept-only, linear, and cubic B-splines
// with 0-4 internal knots.
struct Designation {
    enum class Class { InterceptOnly, Linear, Nonlinear };
    Class cls = Class::Linear;
    int knots = 0;            // chosen internal knots when Nonlinear
    bool weak_signal = false; // intercept-only minimum: kept as linear
    std::vector<double> wqbic;  // scores: [intercept, linear, spline k=0..max]
};

Designation wqbic_designate(const ModelFrame& frame,
                            int covariate_index,
                            double tau,
                            const WeightEstimate& weights,
                            int degree = 3,
                            int max_knots = 4);

// Weight-estimation front end shared by the CLI, the simulation lab and the
// prediction-interval pipeline: screens when the method needs it and fits
// the chosen weights.
struct WeightPlan {
    WeightMethod method = WeightMethod::None;
    double cap = 25.0;
    double screen_alpha = 0.05;
    std::optional<double> bandwidth;
    std::optional<Eigen::VectorXd> pi0;  // required for WeightMethod::True
};

WeightEstimate compute_weights(const ModelFrame& frame,
                               const WeightPlan& plan,
                               std::vector<std::string>* warnings = nullptr);

// The data-analysis pipeline: designate each quantitative covariate, refit
// the penalized model at both quantiles, and score interval coverage on the
// test rows. Crossed intervals are counted and scored as the ordered pair.
struct PredictionIntervalReport {
    double capture_rate = 0.0;
    double mean_length = 0.0;
    double sd_length = 0.0;
    int crossings = 0;
    int scored_rows = 0;
    int skipped_rows = 0;  // test rows with missing covariates
};

PredictionIntervalReport prediction_interval(const ModelFrame& train,
                                             const ModelFrame& test,
                                             double lo_tau,
                                             double hi_tau,
                                             const FitConfig& config,
                                             const WeightPlan& plan);

}  // namespace ipwqr
