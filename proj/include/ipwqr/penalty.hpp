#pragma once

#include <string>

namespace ipwqr {

enum class PenaltyFamily { Lasso, Scad, Mcp };

// Penalty p_lambda(|beta|) for the linear coefficients. SCAD needs a > 2,
// MCP needs a > 1; the shape parameter is ignored for LASSO.
struct PenaltySpec {
    PenaltyFamily family = PenaltyFamily::Scad;
    double lambda = 0.0;
    double a = 3.7;

    // Throws std::invalid_argument on a violated shape constraint or
    // lambda <= 0.
    void validate() const;

    static PenaltySpec lasso(double lambda) { return {PenaltyFamily::Lasso, lambda, 0.0}; }
    static PenaltySpec scad(double lambda, double a = 3.7) { return {PenaltyFamily::Scad, lambda, a}; }
    static PenaltySpec mcp(double lambda, double a = 3.0) { return {PenaltyFamily::Mcp, lambda, a}; }
};

PenaltyFamily penalty_family_from_string(const std::string& name);
std::string to_string(PenaltyFamily family);

double penalty_value(const PenaltySpec& spec, double beta_abs);

// p'_lambda(|beta|), the weight of the next LLA majorization step. At the
// region breakpoints the left-branch value is used.
double penalty_derivative(const PenaltySpec& spec, double beta_abs);

}  // namespace ipwqr
