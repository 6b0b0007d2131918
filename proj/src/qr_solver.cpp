#include "ipwqr/qr_solver.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <stdexcept>
#include <vector>

namespace ipwqr {

double check_loss(double u, double tau) { return u * (tau - (u < 0.0 ? 1.0 : 0.0)); }

namespace {

// Row-structured view of the augmented program: dense data rows scaled by
// their observation weight, plus two singleton pseudo-rows (+-l1_j e_j, 0)
// per penalized coordinate from |u| = rho_tau(u) + rho_tau(-u).
struct AugmentedRows {
    Eigen::MatrixXd data;      // n_eff x m, rows w_i * d_i
    Eigen::VectorXd response;  // n_eff, w_i * y_i
    std::vector<int> pen_index;     // coordinate of each penalized pair
    std::vector<double> pen_scale;  // l1 weight of each pair
    int m = 0;

    int n_data() const { return static_cast<int>(data.rows()); }
    int n_pen() const { return static_cast<int>(pen_index.size()); }
    int n_total() const { return n_data() + 2 * n_pen(); }

    // v = A u for the LP matrix A = [rows]' (m x N); here per-column a_i.
    // Data row i has a_i = data.row(i); pseudo pair k has a = -s e_j (first)
    // and +s e_j (second), interleaved after the data block.
    double row_dot(int i, const Eigen::VectorXd& y) const {
        if (i < n_data()) return data.row(i).dot(y);
        const int k = (i - n_data()) / 2;
        const double sign = ((i - n_data()) % 2 == 0) ? -1.0 : 1.0;
        return sign * pen_scale[k] * y[pen_index[k]];
    }

    double row_response(int i) const { return i < n_data() ? response[i] : 0.0; }

    // accum += sum_i coeff_i a_i
    void add_combination(const Eigen::VectorXd& coeff, Eigen::VectorXd& accum) const {
        accum.noalias() += data.transpose() * coeff.head(n_data());
        for (int k = 0; k < n_pen(); ++k) {
            const int base = n_data() + 2 * k;
            accum[pen_index[k]] += pen_scale[k] * (coeff[base + 1] - coeff[base]);
        }
    }

    // M = sum_i q_i a_i a_i'
    void normal_matrix(const Eigen::VectorXd& q, Eigen::MatrixXd& M,
                       Eigen::MatrixXd& scratch) const {
        scratch = q.head(n_data()).cwiseSqrt().asDiagonal() * data;
        M.setZero(m, m);
        M.selfadjointView<Eigen::Lower>().rankUpdate(scratch.transpose());
        for (int k = 0; k < n_pen(); ++k) {
            const int base = n_data() + 2 * k;
            M(pen_index[k], pen_index[k]) +=
                pen_scale[k] * pen_scale[k] * (q[base] + q[base + 1]);
        }
        M = M.selfadjointView<Eigen::Lower>();
    }
};

double objective_at(const AugmentedRows& rows, const Eigen::VectorXd& coef, double tau) {
    double obj = 0.0;
    for (int i = 0; i < rows.n_data(); ++i)
        obj += check_loss(rows.response[i] - rows.data.row(i).dot(coef), tau);
    for (std::size_t k = 0; k < rows.pen_index.size(); ++k)
        obj += rows.pen_scale[k] * std::abs(coef[rows.pen_index[k]]);
    return obj;
}

}  // namespace

QrSolution solve(const QrProblem& problem, const SolveOptions& options) {
    const int n = static_cast<int>(problem.response.size());
    const int m = static_cast<int>(problem.design.cols());
    if (problem.design.rows() != n)
        throw std::invalid_argument("qr solve: design/response row mismatch");
    if (m < 1) throw std::invalid_argument("qr solve: empty design");
    if (!(problem.tau > 0.0 && problem.tau < 1.0))
        throw std::invalid_argument("qr solve: tau must be in (0,1)");

    Eigen::VectorXd w = problem.obs_weights.size() ? problem.obs_weights
                                                   : Eigen::VectorXd::Ones(n);
    Eigen::VectorXd l1 = problem.l1_weights.size() ? problem.l1_weights
                                                   : Eigen::VectorXd::Zero(m);
    if (w.size() != n) throw std::invalid_argument("qr solve: obs_weights length mismatch");
    if (l1.size() != m) throw std::invalid_argument("qr solve: l1_weights length mismatch");
    if ((l1.array() < 0.0).any() || !l1.allFinite())
        throw std::invalid_argument("qr solve: l1_weights must be finite and nonnegative");

    // Effective rows only; masked rows are never read.
    std::vector<int> eff;
    eff.reserve(n);
    for (int i = 0; i < n; ++i) {
        if (!std::isfinite(w[i]) || w[i] < 0.0)
            throw std::invalid_argument("qr solve: obs_weights must be finite and nonnegative");
        if (w[i] > 0.0) eff.push_back(i);
    }
    if (eff.empty()) throw std::runtime_error("qr solve: no rows with positive weight");

    AugmentedRows rows;
    rows.m = m;
    rows.data.resize(static_cast<int>(eff.size()), m);
    rows.response.resize(static_cast<int>(eff.size()));
    for (std::size_t k = 0; k < eff.size(); ++k) {
        const int i = eff[k];
        if (!problem.design.row(i).allFinite() || !std::isfinite(problem.response[i]))
            throw std::runtime_error("qr solve: non-finite value in an effective row");
        rows.data.row(static_cast<int>(k)) = w[i] * problem.design.row(i);
        rows.response[static_cast<int>(k)] = w[i] * problem.response[i];
    }
    for (int j = 0; j < m; ++j) {
        if (l1[j] > 0.0) {
            rows.pen_index.push_back(j);
            rows.pen_scale.push_back(l1[j]);
        }
    }

    const int N = rows.n_total();
    const double tau = problem.tau;
    const double beta_step = 0.99995;

    // Interior start: x primal-feasible by construction (A x = (1-tau) A 1).
    Eigen::VectorXd x = Eigen::VectorXd::Constant(N, 1.0 - tau);
    Eigen::VectorXd s = Eigen::VectorXd::Constant(N, tau);
    Eigen::VectorXd c(N);
    for (int i = 0; i < N; ++i) c[i] = rows.row_response(i);

    Eigen::MatrixXd M(m, m), scratch;
    Eigen::VectorXd q = Eigen::VectorXd::Ones(N);
    rows.normal_matrix(q, M, scratch);

    const auto factorize = [&](Eigen::LDLT<Eigen::MatrixXd>& ldlt, const Eigen::MatrixXd& mat) {
        ldlt.compute(mat);
        if (ldlt.info() != Eigen::Success || !ldlt.vectorD().allFinite()) {
            Eigen::MatrixXd reg = mat;
            const double delta = 1e-10 * std::max(1.0, mat.diagonal().maxCoeff());
            reg.diagonal().array() += delta;
            ldlt.compute(reg);
        }
    };

    Eigen::LDLT<Eigen::MatrixXd> ldlt;
    factorize(ldlt, M);
    bool rank_warning = false;
    {
        const auto dmax = ldlt.vectorD().cwiseAbs().maxCoeff();
        if (ldlt.vectorD().cwiseAbs().minCoeff() <= 1e-10 * std::max(dmax, 1.0))
            rank_warning = true;
    }

    Eigen::VectorXd rhs = Eigen::VectorXd::Zero(m);
    rows.add_combination(c, rhs);
    Eigen::VectorXd y = ldlt.solve(rhs);

    Eigen::VectorXd z(N), wv(N);
    const double init_eps = 1e-6 * (1.0 + c.cwiseAbs().maxCoeff());
    for (int i = 0; i < N; ++i) {
        const double r = c[i] - rows.row_dot(i, y);
        z[i] = std::max(r, 0.0);
        wv[i] = std::max(-r, 0.0);
        if (std::abs(r) < init_eps) {
            z[i] += init_eps;
            wv[i] += init_eps;
        }
    }

    double gap = z.dot(x) + wv.dot(s);
    int iter = 0;
    bool converged = false;
    Eigen::VectorXd r_vec(N), dx(N), dz(N), dw(N), dy(m), dxa(N), dza(N), dwa(N);

    while (iter < options.max_iterations) {
        const double scale = 1.0 + std::abs(c.dot(x));
        if (gap <= options.gap_tol * scale) {
            converged = true;
            break;
        }
        ++iter;

        for (int i = 0; i < N; ++i) q[i] = 1.0 / (z[i] / x[i] + wv[i] / s[i]);
        rows.normal_matrix(q, M, scratch);
        factorize(ldlt, M);

        // affine (predictor) direction, mu = 0
        r_vec = wv - z;
        rhs.setZero();
        rows.add_combination((q.array() * r_vec.array()).matrix(), rhs);
        dy = ldlt.solve(rhs);
        for (int i = 0; i < N; ++i) {
            dx[i] = q[i] * (r_vec[i] - rows.row_dot(i, dy));
            dz[i] = -z[i] * (1.0 + dx[i] / x[i]);
            dw[i] = -wv[i] * (1.0 - dx[i] / s[i]);
        }

        const auto step_len = [&](const Eigen::VectorXd& v, const Eigen::VectorXd& dv) {
            double a = std::numeric_limits<double>::infinity();
            for (int i = 0; i < N; ++i)
                if (dv[i] < 0.0) a = std::min(a, -v[i] / dv[i]);
            return a;
        };
        double ap = std::min(1.0, beta_step * std::min(step_len(x, dx), step_len(s, -dx)));
        double ad = std::min(1.0, beta_step * std::min(step_len(z, dz), step_len(wv, dw)));

        if (std::min(ap, ad) < 1.0) {
            // Mehrotra corrector with centering
            dxa = dx;
            dza = dz;
            dwa = dw;
            double g_aff = 0.0;
            for (int i = 0; i < N; ++i)
                g_aff += (z[i] + ad * dza[i]) * (x[i] + ap * dxa[i]) +
                         (wv[i] + ad * dwa[i]) * (s[i] - ap * dxa[i]);
            const double mu = std::pow(g_aff / gap, 3.0) * gap / (2.0 * N);

            for (int i = 0; i < N; ++i)
                r_vec[i] = mu * (1.0 / x[i] - 1.0 / s[i]) + wv[i] - z[i] +
                           dxa[i] * dza[i] / x[i] + dxa[i] * dwa[i] / s[i];
            rhs.setZero();
            rows.add_combination((q.array() * r_vec.array()).matrix(), rhs);
            dy = ldlt.solve(rhs);
            for (int i = 0; i < N; ++i) {
                dx[i] = q[i] * (r_vec[i] - rows.row_dot(i, dy));
                dz[i] = mu / x[i] - z[i] - (z[i] / x[i]) * dx[i] - dxa[i] * dza[i] / x[i];
                dw[i] = mu / s[i] - wv[i] + (wv[i] / s[i]) * dx[i] + dxa[i] * dwa[i] / s[i];
            }
            ap = std::min(1.0, beta_step * std::min(step_len(x, dx), step_len(s, -dx)));
            ad = std::min(1.0, beta_step * std::min(step_len(z, dz), step_len(wv, dw)));
        }

        x += ap * dx;
        s -= ap * dx;
        y += ad * dy;
        z += ad * dz;
        wv += ad * dw;
        gap = z.dot(x) + wv.dot(s);
        if (!std::isfinite(gap)) throw std::runtime_error("qr solve: interior point diverged");
    }

    QrSolution solution;
    solution.coef = y;
    solution.iterations = iter;
    solution.duality_gap = gap;
    solution.converged = converged;
    solution.rank_warning = rank_warning;
    solution.objective = objective_at(rows, y, tau);
    for (int j = 0; j < m; ++j)
        if (l1[j] > 0.0 && std::abs(y[j]) > options.active_tol) solution.active_set.push_back(j);
    return solution;
}

KktReport verify_subgradient(const QrProblem& problem,
                             const QrSolution& solution,
                             double lambda,
                             double residual_tol) {
    const int n = static_cast<int>(problem.response.size());
    const int m = static_cast<int>(problem.design.cols());
    Eigen::VectorXd w = problem.obs_weights.size() ? problem.obs_weights
                                                   : Eigen::VectorXd::Ones(n);
    Eigen::VectorXd l1 = problem.l1_weights.size() ? problem.l1_weights
                                                   : Eigen::VectorXd::Zero(m);
    const double tau = problem.tau;

    // Classify residuals on effective rows; near-zero residuals carry the
    // free subgradient a_i in [tau-1, tau].
    double yscale = 1.0;
    for (int i = 0; i < n; ++i)
        if (w[i] > 0.0) yscale = std::max(yscale, std::abs(problem.response[i]));
    const double ztol = residual_tol * yscale;

    std::vector<int> zero_rows;
    Eigen::VectorXd base = Eigen::VectorXd::Zero(m);
    for (int i = 0; i < n; ++i) {
        if (!(w[i] > 0.0)) continue;
        const double resid = problem.response[i] - problem.design.row(i).dot(solution.coef);
        if (std::abs(resid) <= ztol) {
            zero_rows.push_back(i);
        } else {
            const double psi = tau - (resid < 0.0 ? 1.0 : 0.0);
            base.noalias() += w[i] * psi * problem.design.row(i).transpose();
        }
    }

    // Equality targets: score = 0 on unpenalized coordinates and
    // score = l1_j sign(coef_j) on active penalized coordinates.
    std::vector<int> eq_coords;
    std::vector<double> eq_target;
    std::vector<int> inactive;
    for (int j = 0; j < m; ++j) {
        if (l1[j] == 0.0) {
            eq_coords.push_back(j);
            eq_target.push_back(0.0);
        } else if (std::find(solution.active_set.begin(), solution.active_set.end(), j) !=
                   solution.active_set.end()) {
            eq_coords.push_back(j);
            eq_target.push_back(l1[j] * (solution.coef[j] > 0.0 ? 1.0 : -1.0));
        } else {
            inactive.push_back(j);
        }
    }

    // Solve the equality system for the a_i (least squares when |D| differs
    // from the coordinate count), then clip into the box.
    const int nd = static_cast<int>(zero_rows.size());
    Eigen::VectorXd a(nd);
    KktReport report;
    report.lambda = lambda;
    report.zero_residual_count = nd;
    if (nd > 0) {
        Eigen::MatrixXd MD(static_cast<int>(eq_coords.size()), nd);
        Eigen::VectorXd rhs(static_cast<int>(eq_coords.size()));
        for (std::size_t r = 0; r < eq_coords.size(); ++r) {
            const int j = eq_coords[r];
            for (int k = 0; k < nd; ++k)
                MD(static_cast<int>(r), k) = w[zero_rows[k]] * problem.design(zero_rows[k], j);
            rhs[static_cast<int>(r)] = eq_target[r] - base[j];
        }
        a = MD.colPivHouseholderQr().solve(rhs);
        for (int k = 0; k < nd; ++k) {
            const double clipped = std::clamp(a[k], tau - 1.0, tau);
            if (std::abs(clipped - a[k]) > 1e-8) report.a_in_box = false;
            a[k] = clipped;
        }
    }

    // Scores at the clipped a.
    Eigen::VectorXd score = base;
    for (int k = 0; k < nd; ++k)
        score.noalias() += w[zero_rows[k]] * a[k] * problem.design.row(zero_rows[k]).transpose();

    report.s = score;
    for (std::size_t r = 0; r < eq_coords.size(); ++r)
        report.max_active = std::max(report.max_active,
                                     std::abs(score[eq_coords[r]] - eq_target[r]));
    for (int j : inactive)
        report.max_inactive_excess =
            std::max(report.max_inactive_excess, std::abs(score[j]) - lambda);
    report.max_inactive_excess = std::max(report.max_inactive_excess, 0.0);
    return report;
}

}  // namespace ipwqr
