#include "ipwqr/spline.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <stdexcept>

#include "ipwqr/model_frame.hpp"

namespace ipwqr {

SplineBasis::SplineBasis(int degree, std::vector<double> internal_knots)
    : degree_(degree), internal_knots_(std::move(internal_knots)) {
    if (degree_ < 0) throw std::invalid_argument("spline: degree must be >= 0");
    for (std::size_t i = 0; i < internal_knots_.size(); ++i) {
        if (!(internal_knots_[i] > 0.0 && internal_knots_[i] < 1.0))
            throw std::invalid_argument("spline: internal knots must lie in (0,1)");
        if (i > 0 && internal_knots_[i] <= internal_knots_[i - 1])
            throw std::invalid_argument("spline: internal knots must be strictly increasing");
    }
    // clamped knot vector: degree+1 copies of each boundary
    knots_.assign(degree_ + 1, 0.0);
    knots_.insert(knots_.end(), internal_knots_.begin(), internal_knots_.end());
    knots_.insert(knots_.end(), degree_ + 1, 1.0);
}

namespace {

int find_span(const std::vector<double>& knots, int degree, int n_basis, double u) {
    const int last = n_basis - 1;
    if (u >= 1.0) return last;
    if (u <= 0.0) return degree;
    int lo = degree, hi = last + 1;
    while (hi - lo > 1) {
        const int mid = (lo + hi) / 2;
        if (u < knots[mid])
            hi = mid;
        else
            lo = mid;
    }
    return lo;
}

// Cox-de Boor triangular recursion; fills the degree+1 nonzero values.
void basis_at_span(const std::vector<double>& knots, int degree, int span, double u,
                   std::vector<double>& values) {
    values.assign(degree + 1, 0.0);
    values[0] = 1.0;
    std::vector<double> left(degree + 1), right(degree + 1);
    for (int j = 1; j <= degree; ++j) {
        left[j] = u - knots[span + 1 - j];
        right[j] = knots[span + j] - u;
        double saved = 0.0;
        for (int r = 0; r < j; ++r) {
            const double temp = values[r] / (right[r + 1] + left[j - r]);
            values[r] = saved + right[r + 1] * temp;
            saved = left[j - r] * temp;
        }
        values[j] = saved;
    }
}

}  // namespace

Eigen::VectorXd SplineBasis::evaluate_full(double z) const {
    if (!(z >= 0.0 && z <= 1.0))
        throw std::domain_error("spline: evaluation point outside [0,1]");
    const int n_basis = static_cast<int>(internal_knots_.size()) + degree_ + 1;
    const int span = find_span(knots_, degree_, n_basis, z);
    std::vector<double> local;
    basis_at_span(knots_, degree_, span, z, local);
    Eigen::VectorXd full = Eigen::VectorXd::Zero(n_basis);
    for (int i = 0; i <= degree_; ++i) full[span - degree_ + i] = local[i];
    return full;
}

Eigen::VectorXd SplineBasis::evaluate(double z) const {
    const Eigen::VectorXd full = evaluate_full(z);
    return full.tail(full.size() - 1);
}

SplineBasis quantile_knot_basis(std::span<const double> observed_unit,
                                int internal_knots,
                                int degree,
                                std::vector<std::string>* warnings) {
    if (internal_knots < 0) throw std::invalid_argument("spline: knot count must be >= 0");
    std::vector<double> knots;
    if (internal_knots > 0) {
        std::vector<double> sorted(observed_unit.begin(), observed_unit.end());
        std::erase_if(sorted, [](double v) { return !std::isfinite(v); });
        if (sorted.empty())
            throw std::invalid_argument("spline: no observed values for knot placement");
        std::sort(sorted.begin(), sorted.end());
        const auto quantile = [&](double q) {
            const double h = q * static_cast<double>(sorted.size() - 1);
            const auto lo = static_cast<std::size_t>(std::floor(h));
            if (lo + 1 >= sorted.size()) return sorted.back();
            return sorted[lo] + (h - std::floor(h)) * (sorted[lo + 1] - sorted[lo]);
        };
        for (int i = 1; i <= internal_knots; ++i) {
            const double k = quantile(static_cast<double>(i) / (internal_knots + 1));
            if (k > 0.0 && k < 1.0) knots.push_back(k);
        }
        knots.erase(std::unique(knots.begin(), knots.end()), knots.end());
        if (static_cast<int>(knots.size()) < internal_knots && warnings)
            warnings->push_back("spline: tied sample quantiles collapsed to " +
                                std::to_string(knots.size()) + " of " +
                                std::to_string(internal_knots) + " requested knots");
    }
    return SplineBasis(degree, std::move(knots));
}

NonlinearDesign build_design(const ModelFrame& frame,
                             const std::vector<int>& knots_per_variable,
                             int degree,
                             std::vector<std::string>* warnings) {
    const int d = frame.n_nonlinear();
    if (d < 1) throw std::invalid_argument("build_design: frame has no nonlinear covariates");
    if (degree < 1) throw std::invalid_argument("build_design: degree must be >= 1");
    if (static_cast<int>(knots_per_variable.size()) != d)
        throw std::invalid_argument("build_design: one knot count per nonlinear variable required");

    const int n = frame.n_rows();
    NonlinearDesign design;
    design.bases.reserve(d);
    int width = 1;
    for (int j = 0; j < d; ++j) {
        std::vector<double> observed;
        observed.reserve(n);
        for (int i = 0; i < n; ++i) {
            const double v = frame.z(i, j);
            if (std::isfinite(v)) observed.push_back(v);
        }
        design.bases.push_back(
            quantile_knot_basis(observed, knots_per_variable[j], degree, warnings));
        design.block_offsets.push_back(width);
        width += design.bases.back().width();
    }

    design.matrix.resize(n, width);
    design.matrix.col(0).setOnes();
    for (int j = 0; j < d; ++j) {
        const int off = design.block_offsets[j];
        const int w = design.bases[j].width();
        for (int i = 0; i < n; ++i) {
            const double v = frame.z(i, j);
            if (std::isfinite(v)) {
                design.matrix.block(i, off, 1, w) = design.bases[j].evaluate(v).transpose();
            } else {
                design.matrix.block(i, off, 1, w)
                    .setConstant(std::numeric_limits<double>::quiet_NaN());
            }
        }
    }
    return design;
}

}  // namespace ipwqr
