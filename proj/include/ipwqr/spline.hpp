#pragma once

#include <Eigen/Dense>

#include <span>
#include <string>
#include <vector>

namespace ipwqr {

class ModelFrame;

// Normalized B-spline basis of degree l on [0,1] with clamped boundary
// knots. The full basis b_0..b_L sums to one everywhere; model designs use
// b_1..b_L to avoid collinearity with the intercept, so the usable width is
// L = #internal_knots + degree.
class SplineBasis {
public:
    SplineBasis(int degree, std::vector<double> internal_knots);

    int degree() const { return degree_; }
    const std::vector<double>& internal_knots() const { return internal_knots_; }
    // Width of the returned vector (b_0 dropped).
    int width() const { return static_cast<int>(internal_knots_.size()) + degree_; }

    // b_1..b_L at z in [0,1]; throws std::domain_error outside.
    Eigen::VectorXd evaluate(double z) const;
    // b_0..b_L (partition of unity).
    Eigen::VectorXd evaluate_full(double z) const;

private:
    int degree_;
    std::vector<double> internal_knots_;
    std::vector<double> knots_;  // clamped knot vector
};

// Internal knots at sample quantiles i/(k+1) of the observed values, mapped
// to the unit scale. Exact ties or boundary hits collapse to the unique
// interior knots, so the effective count can be lower than requested; the
// warning sink (optional) receives a note when that happens.
SplineBasis quantile_knot_basis(std::span<const double> observed_unit,
                                int internal_knots,
                                int degree,
                                std::vector<std::string>* warnings = nullptr);

// Per-variable spline expansion of the nonlinear block:
//   [1 | b(z_1) | ... | b(z_d)],  width 1 + sum_j (k_j + degree).
// Knots come from complete-case sample quantiles. Rows whose z_j is missing
// get NaN in that block (never evaluated); callers drop those rows by weight.
struct NonlinearDesign {
    Eigen::MatrixXd matrix;
    std::vector<SplineBasis> bases;        // one per nonlinear variable
    std::vector<int> block_offsets;        // column start per variable block
    int width() const { return static_cast<int>(matrix.cols()); }
};

NonlinearDesign build_design(const ModelFrame& frame,
                             const std::vector<int>& knots_per_variable,
                             int degree,
                             std::vector<std::string>* warnings = nullptr);

}  // namespace ipwqr
