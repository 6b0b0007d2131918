#include "ipwqr/penalty.hpp"

#include <cmath>
#include <stdexcept>

namespace ipwqr {

void PenaltySpec::validate() const {
    if (!(lambda > 0.0) || !std::isfinite(lambda))
        throw std::invalid_argument("penalty: lambda must be positive");
    if (family == PenaltyFamily::Scad && !(a > 2.0))
        throw std::invalid_argument("penalty: SCAD requires a > 2");
    if (family == PenaltyFamily::Mcp && !(a > 1.0))
        throw std::invalid_argument("penalty: MCP requires a > 1");
}

PenaltyFamily penalty_family_from_string(const std::string& name) {
    if (name == "lasso") return PenaltyFamily::Lasso;
    if (name == "scad") return PenaltyFamily::Scad;
    if (name == "mcp") return PenaltyFamily::Mcp;
    throw std::invalid_argument("unknown penalty family: " + name);
}

std::string to_string(PenaltyFamily family) {
    switch (family) {
        case PenaltyFamily::Lasso: return "lasso";
        case PenaltyFamily::Scad: return "scad";
        case PenaltyFamily::Mcp: return "mcp";
    }
    return "?";
}

double penalty_value(const PenaltySpec& spec, double beta_abs) {
    spec.validate();
    if (beta_abs < 0.0) throw std::invalid_argument("penalty_value: |beta| must be >= 0");
    const double l = spec.lambda;
    const double a = spec.a;
    switch (spec.family) {
        case PenaltyFamily::Lasso:
            return l * beta_abs;
        case PenaltyFamily::Scad:
            if (beta_abs < l) return l * beta_abs;
            if (beta_abs <= a * l)
                return (a * l * beta_abs - (beta_abs * beta_abs + l * l) / 2.0) / (a - 1.0);
            return (a + 1.0) * l * l / 2.0;
        case PenaltyFamily::Mcp:
            if (beta_abs < a * l) return l * (beta_abs - beta_abs * beta_abs / (2.0 * a * l));
            return a * l * l / 2.0;
    }
    return 0.0;
}

double penalty_derivative(const PenaltySpec& spec, double beta_abs) {
    spec.validate();
    if (beta_abs < 0.0) throw std::invalid_argument("penalty_derivative: |beta| must be >= 0");
    const double l = spec.lambda;
    const double a = spec.a;
    switch (spec.family) {
        case PenaltyFamily::Lasso:
            return l;
        case PenaltyFamily::Scad:
            // left-branch value at the breakpoints
            if (beta_abs <= l) return l;
            if (beta_abs <= a * l) return (a * l - beta_abs) / (a - 1.0);
            return 0.0;
        case PenaltyFamily::Mcp:
            if (beta_abs <= a * l) return l - beta_abs / a;
            return 0.0;
    }
    return 0.0;
}

}  // namespace ipwqr
