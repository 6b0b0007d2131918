#pragma once

#include <Eigen/Dense>

#include <vector>

namespace ipwqr {

// Check loss rho_tau(u) = u * (tau - I(u < 0)).
double check_loss(double u, double tau);

// Weighted check-loss problem with per-coefficient L1 weights:
//
//   min_c  sum_i obs_weights_i * rho_tau(response_i - design_i' c)
//        + sum_j l1_weights_j * |c_j|
//
// Every estimator in the package (full, naive, weighted, each LLA step)
// reduces to one of these. Rows with obs_weight 0 are dropped before any
// arithmetic touches them, so poison NaN in masked rows is harmless.
struct QrProblem {
    Eigen::MatrixXd design;       // n x m
    Eigen::VectorXd response;     // n
    double tau = 0.5;
    Eigen::VectorXd obs_weights;  // n, nonnegative; empty means all ones
    Eigen::VectorXd l1_weights;   // m, nonnegative; empty means no penalty
};

struct QrSolution {
    Eigen::VectorXd coef;
    double objective = 0.0;       // weighted loss + L1 penalty at coef
    std::vector<int> active_set;  // penalized coordinates with |coef| > active_tol
    int iterations = 0;
    double duality_gap = 0.0;
    bool converged = false;
    bool rank_warning = false;    // design not full column rank on effective rows
};

struct SolveOptions {
    double gap_tol = 1e-8;     // relative duality-gap termination
    int max_iterations = 200;
    double active_tol = 1e-6;  // |coef| threshold for active-set reporting
};

// Exact convex solve via the bounded-variables dual LP with a Mehrotra
// predictor-corrector interior point. The L1 terms enter as pseudo-
// observations through |u| = rho_tau(u) + rho_tau(-u), so a single
// check-loss program covers the penalized objective.
QrSolution solve(const QrProblem& problem, const SolveOptions& options = {});

// Optimality report from the weighted-score subgradient components
//
//   s_j(a) = sum_i w_i d_ij psi_i,  psi_i = tau - I(resid_i < 0),
//
// where rows on the zero-residual set D contribute a free a_i in
// [tau-1, tau] instead of psi_i. The equality system over unpenalized and
// active coordinates (s_j = 0, resp. s_j = l1_j sign(c_j)) is solved for a,
// a is clipped into its box, and the violations at that a are reported.
// Inactive penalized coordinates must satisfy |s_j| <= lambda.
struct KktReport {
    double max_active = 0.0;           // violation over unpenalized + active coords
    double max_inactive_excess = 0.0;  // max(|s_j| - lambda, 0) over inactive coords
    double lambda = 0.0;
    int zero_residual_count = 0;       // |D|
    bool a_in_box = true;              // solved a_i stayed within [tau-1, tau]
    Eigen::VectorXd s;                 // subgradient components at the clipped a

    bool ok(double tol) const { return max_active <= tol && max_inactive_excess <= tol; }
};

KktReport verify_subgradient(const QrProblem& problem,
                             const QrSolution& solution,
                             double lambda,
                             double residual_tol = 1e-7);

}  // namespace ipwqr
