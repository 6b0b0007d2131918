#pragma once

// Independent brute-force oracle for tiny check-loss programs. The objective
// is piecewise linear and convex, so some minimizer lies on an intersection
// of m hyperplanes drawn from the residual-zero planes d_i'c = y_i and the
// coordinate planes c_j = 0. Enumerating every size-m subset and taking the
// best objective is exact for the instance sizes used in tests.

#include <Eigen/Dense>

#include <cmath>
#include <limits>
#include <vector>

#include "ipwqr/qr_solver.hpp"

namespace ipwqr::testing {

inline double direct_objective(const QrProblem& p, const Eigen::VectorXd& c) {
    const Eigen::VectorXd w =
        p.obs_weights.size() ? p.obs_weights : Eigen::VectorXd::Ones(p.response.size());
    const Eigen::VectorXd l1 =
        p.l1_weights.size() ? p.l1_weights : Eigen::VectorXd::Zero(p.design.cols());
    double obj = 0.0;
    for (int i = 0; i < p.response.size(); ++i) {
        if (!(w[i] > 0.0)) continue;
        obj += w[i] * check_loss(p.response[i] - p.design.row(i).dot(c), p.tau);
    }
    for (int j = 0; j < c.size(); ++j) obj += l1[j] * std::abs(c[j]);
    return obj;
}

inline double brute_force_min_objective(const QrProblem& p) {
    const int m = static_cast<int>(p.design.cols());
    const Eigen::VectorXd w =
        p.obs_weights.size() ? p.obs_weights : Eigen::VectorXd::Ones(p.response.size());

    std::vector<Eigen::VectorXd> normals;
    std::vector<double> offsets;
    for (int i = 0; i < p.response.size(); ++i) {
        if (!(w[i] > 0.0)) continue;
        normals.push_back(p.design.row(i).transpose());
        offsets.push_back(p.response[i]);
    }
    for (int j = 0; j < m; ++j) {
        normals.push_back(Eigen::VectorXd::Unit(m, j));
        offsets.push_back(0.0);
    }

    const int H = static_cast<int>(normals.size());
    double best = std::numeric_limits<double>::infinity();
    std::vector<int> pick(m, 0);

    const auto evaluate_subset = [&](const std::vector<int>& subset) {
        Eigen::MatrixXd A(m, m);
        Eigen::VectorXd b(m);
        for (int r = 0; r < m; ++r) {
            A.row(r) = normals[subset[r]].transpose();
            b[r] = offsets[subset[r]];
        }
        Eigen::FullPivLU<Eigen::MatrixXd> lu(A);
        if (!lu.isInvertible()) return;
        const Eigen::VectorXd c = lu.solve(b);
        best = std::min(best, direct_objective(p, c));
    };

    // iterate over all size-m index subsets
    std::vector<int> subset(m);
    const auto recurse = [&](auto&& self, int pos, int start) -> void {
        if (pos == m) {
            evaluate_subset(subset);
            return;
        }
        for (int i = start; i < H; ++i) {
            subset[pos] = i;
            self(self, pos + 1, i + 1);
        }
    };
    recurse(recurse, 0, 0);
    return best;
}

}  // namespace ipwqr::testing
