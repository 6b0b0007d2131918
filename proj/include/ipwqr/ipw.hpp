#pragma once

#include <Eigen/Dense>

#include <functional>
#include <optional>
#include <string>
#include <vector>

#include "ipwqr/model_frame.hpp"

namespace ipwqr {

enum class WeightMethod { None, True, Parametric, Kernel };

std::string to_string(WeightMethod method);
WeightMethod weight_method_from_string(const std::string& name);

// Per-observation inverse-probability weights R_i / pi_hat_i, capped.
struct WeightEstimate {
    Eigen::VectorXd pi;       // estimated complete-data probabilities, in (0,1]
    Eigen::VectorXd weights;  // R_i/pi_i capped; exactly 0 where r_i = 0
    WeightMethod method = WeightMethod::None;
    double cap = 25.0;
    int capped_count = 0;
    Eigen::VectorXd eta_hat;          // Parametric: logistic MLE on [1, t_S]
    Eigen::VectorXd bandwidth;        // Kernel: per-dimension bandwidths
    std::vector<int> screen_set;      // t-column indices used (0 = response)
};

struct ScreenOptions {
    double alpha = 0.05;        // Bonferroni level across candidates
    bool nonparametric = false; // spline-transform candidates before the test
    int spline_internal_knots = 2;
    int spline_degree = 3;
};

// Sure-independence screen of the missing model: one univariate binomial GLM
// of R per always-observed variable (response included), kept when the
// chi-square likelihood-ratio test survives a Bonferroni correction. In
// nonparametric mode the candidate is expanded by a cubic B-spline with two
// internal knots and tested jointly. Returns t-column indices (0 = y).
std::vector<int> screen_missing_model(const ModelFrame& frame,
                                      const ScreenOptions& options = {},
                                      std::vector<std::string>* warnings = nullptr);

// Logistic MLE of P(R=1 | t_S) by Newton iteration to gradient sup-norm
// <= 1e-8; throws on separation or non-convergence within 100 iterations.
WeightEstimate fit_parametric_weights(const ModelFrame& frame,
                                      const std::vector<int>& t_columns,
                                      double cap = 25.0);

// Nadaraya-Watson estimate with a Gaussian product kernel,
//   pi_i = sum_j R_j K_h(t_i - t_j) / sum_j K_h(t_i - t_j),
// default per-dimension bandwidth h_k = sd(t_k) * n^{-1/(s+2)}. A supplied
// bandwidth is used for every dimension.
WeightEstimate fit_kernel_weights(const ModelFrame& frame,
                                  const std::vector<int>& t_columns,
                                  std::optional<double> bandwidth = std::nullopt,
                                  double cap = 25.0);

// Weights from known probabilities (simulation only).
WeightEstimate true_weights(const ModelFrame& frame,
                            const Eigen::VectorXd& pi0,
                            double cap = 25.0);

// Complete-case indicator as weights (the naive estimator).
WeightEstimate naive_weights(const ModelFrame& frame);

// All-ones weights for full-data fits.
WeightEstimate unit_weights(int n);

}  // namespace ipwqr
