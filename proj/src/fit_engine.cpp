#include "ipwqr/fit_engine.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <set>
#include <stdexcept>

#include "parallel.hpp"

namespace ipwqr {

void FitConfig::validate(int n_nonlinear) const {
    if (!(tau > 0.0 && tau < 1.0)) throw std::invalid_argument("fit: tau must be in (0,1)");
    if (degree < 1) throw std::invalid_argument("fit: spline degree must be >= 1");
    if (!(lla_tol > 0.0)) throw std::invalid_argument("fit: lla_tol must be positive");
    if (lla_max_iter < 1) throw std::invalid_argument("fit: lla_max_iter must be >= 1");
    for (double l : lambda_grid)
        if (!(l > 0.0)) throw std::invalid_argument("fit: lambda grid entries must be positive");
    for (const auto& combo : knot_grid) {
        if (static_cast<int>(combo.size()) != n_nonlinear)
            throw std::invalid_argument("fit: knot combination size must match nonlinear count");
        for (int k : combo)
            if (k < 0) throw std::invalid_argument("fit: knot counts must be >= 0");
    }
    if (penalty) {
        PenaltySpec probe = *penalty;
        probe.lambda = probe.lambda > 0 ? probe.lambda : 1.0;  // lambda comes from the grid
        probe.validate();
    }
}

std::vector<std::vector<int>> knot_combinations(const std::vector<int>& counts, int d) {
    std::vector<std::vector<int>> out{{}};
    for (int j = 0; j < d; ++j) {
        std::vector<std::vector<int>> next;
        for (const auto& prefix : out) {
            for (int k : counts) {
                auto combo = prefix;
                combo.push_back(k);
                next.push_back(std::move(combo));
            }
        }
        out = std::move(next);
    }
    return out;
}

namespace {

struct AssembledDesign {
    Eigen::MatrixXd matrix;  // [X | 1 | b(z)]
    std::vector<SplineBasis> bases;
    std::vector<int> block_offsets;  // within the nonlinear block
    int p = 0;                       // linear columns
    int spline_width = 0;            // includes the constant
};

AssembledDesign assemble_design(const ModelFrame& frame, const std::vector<int>& knots,
                                int degree) {
    AssembledDesign a;
    a.p = frame.n_linear();
    const int n = frame.n_rows();
    if (frame.n_nonlinear() > 0) {
        NonlinearDesign nl = build_design(frame, knots, degree);
        a.bases = std::move(nl.bases);
        a.block_offsets = std::move(nl.block_offsets);
        a.spline_width = nl.width();
        a.matrix.resize(n, a.p + a.spline_width);
        if (a.p > 0) a.matrix.leftCols(a.p) = frame.x;
        a.matrix.rightCols(a.spline_width) = nl.matrix;
    } else {
        a.spline_width = 1;
        a.matrix.resize(n, a.p + 1);
        if (a.p > 0) a.matrix.leftCols(a.p) = frame.x;
        a.matrix.col(a.p).setOnes();
    }
    return a;
}

// sum_i w_i rho_tau(y_i - d_i'c) over rows with positive weight
double weighted_loss_at(const Eigen::MatrixXd& design, const Eigen::VectorXd& y,
                        const Eigen::VectorXd& w, const Eigen::VectorXd& coef, double tau) {
    double loss = 0.0;
    for (int i = 0; i < y.size(); ++i) {
        if (!(w[i] > 0.0)) continue;
        loss += w[i] * check_loss(y[i] - design.row(i).dot(coef), tau);
    }
    return loss;
}

double penalty_total(const PenaltySpec& spec, const Eigen::VectorXd& beta) {
    double total = 0.0;
    for (int j = 0; j < beta.size(); ++j) total += penalty_value(spec, std::abs(beta[j]));
    return total;
}

FitResult base_result(const ModelFrame& frame, const WeightEstimate& weights,
                      const FitConfig& config, AssembledDesign&& a) {
    FitResult fit;
    fit.tau = config.tau;
    fit.bases = std::move(a.bases);
    fit.block_offsets = std::move(a.block_offsets);
    fit.z_scale = frame.z_scale;
    fit.weight_method = weights.method;
    fit.penalty = config.penalty;
    return fit;
}

int effective_nu(const FitResult& fit, int degree) {
    int nu = static_cast<int>(fit.active_set.size());
    for (const auto& basis : fit.bases)
        nu += static_cast<int>(basis.internal_knots().size()) + degree;
    return nu;
}

}  // namespace

double FitResult::ghat_unit(const Eigen::VectorXd& z_unit) const {
    double g = xi.size() ? xi[0] : 0.0;
    for (std::size_t j = 0; j < bases.size(); ++j) {
        const int off = block_offsets[j];
        const int w = bases[j].width();
        g += bases[j].evaluate(z_unit[static_cast<int>(j)]).dot(xi.segment(off, w));
    }
    return g;
}

double FitResult::ghat_raw(const Eigen::VectorXd& z_raw) const {
    Eigen::VectorXd unit(z_raw.size());
    for (int j = 0; j < z_raw.size(); ++j) {
        double u = z_scale[j].to_unit(z_raw[j]);
        if (u < 0.0 || u > 1.0) {
            ++clamped_predictions;
            u = std::clamp(u, 0.0, 1.0);
        }
        unit[j] = u;
    }
    return ghat_unit(unit);
}

double FitResult::predict(const Eigen::VectorXd& x_row, const Eigen::VectorXd& z_raw) const {
    double v = beta.size() ? x_row.dot(beta) : 0.0;
    return v + (bases.empty() ? (xi.size() ? xi[0] : 0.0) : ghat_raw(z_raw));
}

FitResult fit_unpenalized(const ModelFrame& frame,
                          const WeightEstimate& weights,
                          const FitConfig& config) {
    if (config.penalty)
        throw std::invalid_argument("fit_unpenalized: penalty must be unset");
    config.validate(frame.n_nonlinear());
    const int n = frame.n_rows();
    const std::vector<int> knots = !config.knot_grid.empty()
                                       ? config.knot_grid.front()
                                       : std::vector<int>(frame.n_nonlinear(), 0);

    AssembledDesign a = assemble_design(frame, knots, config.degree);
    QrProblem problem;
    problem.design = a.matrix;
    problem.response = frame.y;
    problem.tau = config.tau;
    problem.obs_weights = weights.weights / static_cast<double>(n);

    const QrSolution sol = solve(problem);
    FitResult fit = base_result(frame, weights, config, std::move(a));
    const int p = frame.n_linear();
    fit.beta = sol.coef.head(p);
    fit.xi = sol.coef.tail(sol.coef.size() - p);
    fit.selected_knots = knots;
    for (int j = 0; j < p; ++j)
        if (std::abs(fit.beta[j]) > config.zero_tol) fit.active_set.push_back(j);
    fit.weighted_loss = weighted_loss_at(problem.design, frame.y, weights.weights, sol.coef,
                                         config.tau);
    fit.objective = fit.weighted_loss / n;
    fit.lla.iterations = 1;
    fit.lla.objective_path = {fit.objective};
    return fit;
}

FitResult fit_lla(const ModelFrame& frame,
                  const WeightEstimate& weights,
                  const FitConfig& config,
                  double lambda,
                  const std::vector<int>& knots) {
    if (!config.penalty) throw std::invalid_argument("fit_lla: penalty required");
    config.validate(frame.n_nonlinear());
    PenaltySpec pen = *config.penalty;
    pen.lambda = lambda;
    pen.validate();

    const int n = frame.n_rows();
    const int p = frame.n_linear();
    AssembledDesign a = assemble_design(frame, knots, config.degree);
    const int m = static_cast<int>(a.matrix.cols());

    QrProblem problem;
    problem.design = a.matrix;
    problem.response = frame.y;
    problem.tau = config.tau;
    problem.obs_weights = weights.weights / static_cast<double>(n);
    problem.l1_weights = Eigen::VectorXd::Zero(m);

    FitResult fit = base_result(frame, weights, config, std::move(a));
    fit.selected_lambda = lambda;
    fit.selected_knots = knots;

    Eigen::VectorXd beta_prev = Eigen::VectorXd::Zero(p);
    Eigen::VectorXd coef_prev;
    double obj_prev = std::numeric_limits<double>::infinity();
    Eigen::VectorXd l1_used = Eigen::VectorXd::Zero(m);
    fit.lla.converged = false;

    for (int t = 1; t <= config.lla_max_iter; ++t) {
        for (int j = 0; j < p; ++j)
            problem.l1_weights[j] = penalty_derivative(pen, std::abs(beta_prev[j]));

        const QrSolution sol = solve(problem);
        Eigen::VectorXd coef = sol.coef;
        for (int j = 0; j < p; ++j)
            if (std::abs(coef[j]) <= config.zero_tol) coef[j] = 0.0;
        const Eigen::VectorXd beta_new = coef.head(p);

        const double loss = weighted_loss_at(problem.design, frame.y, weights.weights, coef,
                                             config.tau);
        const double obj = loss / n + penalty_total(pen, beta_new);
        const double diff = (beta_new - beta_prev).lpNorm<1>();

        if (t > 1 && obj > obj_prev) {
            // A non-improving step means the solver noise floor was reached;
            // keep the previous iterate so the objective path stays monotone.
            fit.lla.converged = diff < config.lla_tol;
            break;
        }
        fit.lla.iterations = t;
        fit.lla.objective_path.push_back(obj);
        if (t > 1) fit.lla.max_ascent = std::max(fit.lla.max_ascent, obj - obj_prev);
        coef_prev = coef;
        obj_prev = obj;
        fit.weighted_loss = loss;

        if (t > 1 && diff < config.lla_tol) {
            beta_prev = beta_new;
            fit.lla.converged = true;
            break;
        }
        beta_prev = beta_new;

        // fixed point of the majorization weights: nothing further can change
        Eigen::VectorXd l1_next = Eigen::VectorXd::Zero(m);
        for (int j = 0; j < p; ++j)
            l1_next[j] = penalty_derivative(pen, std::abs(beta_prev[j]));
        if ((l1_next - problem.l1_weights).cwiseAbs().maxCoeff() == 0.0) {
            fit.lla.converged = true;
            break;
        }
    }

    fit.beta = beta_prev;
    fit.xi = coef_prev.tail(coef_prev.size() - p);
    fit.objective = obj_prev;
    for (int j = 0; j < p; ++j)
        if (fit.beta[j] != 0.0) fit.active_set.push_back(j);
    return fit;
}

double qbic_score(const ModelFrame& frame,
                  const FitResult& fit,
                  const WeightEstimate& weights) {
    const int n = frame.n_rows();
    // recompute the weighted check loss at the stored coefficients
    Eigen::VectorXd coef(fit.beta.size() + fit.xi.size());
    coef << fit.beta, fit.xi;
    const std::vector<int> knot_counts = [&] {
        std::vector<int> k;
        for (const auto& b : fit.bases) k.push_back(static_cast<int>(b.internal_knots().size()));
        return k;
    }();

    double loss = 0.0;
    for (int i = 0; i < n; ++i) {
        const double w = weights.weights[i];
        if (!(w > 0.0)) continue;
        double pred = 0.0;
        for (int j = 0; j < frame.n_linear(); ++j) pred += frame.x(i, j) * fit.beta[j];
        if (!fit.bases.empty()) {
            pred += fit.ghat_unit(frame.z.row(i).transpose());
        } else if (fit.xi.size()) {
            pred += fit.xi[0];
        }
        loss += w * check_loss(frame.y[i] - pred, fit.tau);
    }
    if (!(loss > 0.0)) throw std::runtime_error("qbic: weighted loss is zero");

    int degree = 3;
    if (!fit.bases.empty()) degree = fit.bases.front().degree();
    const int nu = effective_nu(fit, degree);
    return std::log(loss) + nu * std::log(static_cast<double>(n)) / (2.0 * n);
}

double lambda_max_bisect(const ModelFrame& frame,
                         const WeightEstimate& weights,
                         const FitConfig& config,
                         const std::vector<int>& knots) {
    if (!config.penalty) throw std::invalid_argument("lambda_max: penalty required");
    const int n = frame.n_rows();
    const int p = frame.n_linear();
    if (p == 0) throw std::invalid_argument("lambda_max: no penalized covariates");

    AssembledDesign a = assemble_design(frame, knots, config.degree);
    const int m = static_cast<int>(a.matrix.cols());
    QrProblem problem;
    problem.design = a.matrix;
    problem.response = frame.y;
    problem.tau = config.tau;
    problem.obs_weights = weights.weights / static_cast<double>(n);

    const auto all_zero_at = [&](double lambda) {
        problem.l1_weights = Eigen::VectorXd::Zero(m);
        problem.l1_weights.head(p).setConstant(lambda);
        const QrSolution sol = solve(problem);
        return sol.coef.head(p).cwiseAbs().maxCoeff() <= config.zero_tol;
    };

    // score bound from the spline-only fit gives a sound starting bracket
    QrProblem spline_only;
    spline_only.design = a.matrix.rightCols(a.spline_width);
    spline_only.response = frame.y;
    spline_only.tau = config.tau;
    spline_only.obs_weights = problem.obs_weights;
    const QrSolution s0 = solve(spline_only);
    double bound = 0.0;
    for (int j = 0; j < p; ++j) {
        double sj = 0.0;
        for (int i = 0; i < n; ++i) {
            const double w = problem.obs_weights[i];
            if (!(w > 0.0)) continue;
            const double resid =
                frame.y[i] - spline_only.design.row(i).dot(s0.coef);
            sj += w * frame.x(i, j) * (config.tau - (resid < 0.0 ? 1.0 : 0.0));
        }
        bound = std::max(bound, std::abs(sj));
    }

    double hi = std::max(bound * 1.05, 1e-8);
    int guard = 0;
    while (!all_zero_at(hi) && guard++ < 60) hi *= 2.0;
    double lo = hi / 2.0;
    while (all_zero_at(lo) && guard++ < 120) {
        hi = lo;
        lo /= 2.0;
    }
    for (int it = 0; it < 12; ++it) {
        const double mid = 0.5 * (lo + hi);
        if (all_zero_at(mid))
            hi = mid;
        else
            lo = mid;
        if ((hi - lo) / hi < 0.005) break;
    }
    return hi;
}

namespace {

std::vector<double> default_lambda_grid(const ModelFrame& frame, const WeightEstimate& weights,
                                        const FitConfig& config,
                                        const std::vector<int>& first_knots, int size) {
    const double lmax = lambda_max_bisect(frame, weights, config, first_knots);
    const double lmin = lmax / 1000.0;
    std::vector<double> grid(size);
    for (int i = 0; i < size; ++i) {
        const double f = size == 1 ? 1.0 : static_cast<double>(i) / (size - 1);
        grid[i] = lmin * std::pow(lmax / lmin, f);
    }
    return grid;
}

}  // namespace

FitResult select_fit(const ModelFrame& frame,
                     const WeightEstimate& weights,
                     const FitConfig& config) {
    if (!config.penalty) throw std::invalid_argument("select_fit: penalty required");
    config.validate(frame.n_nonlinear());

    std::vector<std::vector<int>> combos = config.knot_grid;
    if (combos.empty())
        combos = knot_combinations({0, 1, 2}, frame.n_nonlinear());
    std::vector<double> lambdas = config.lambda_grid;
    if (lambdas.empty())
        lambdas = default_lambda_grid(frame, weights, config, combos.front(),
                                      config.lambda_grid_size);

    struct Cell {
        FitResult fit;
        double qbic = 0.0;
        int nu = 0;
        bool ok = false;
        std::string error;
    };
    const int n_cells = static_cast<int>(combos.size() * lambdas.size());
    std::vector<Cell> cells(n_cells);

    detail::parallel_for(n_cells, config.threads, [&](int idx) {
        const auto& knots = combos[idx / lambdas.size()];
        const double lambda = lambdas[idx % lambdas.size()];
        Cell& cell = cells[idx];
        cell.fit = fit_lla(frame, weights, config, lambda, knots);
        cell.qbic = qbic_score(frame, cell.fit, weights);
        cell.nu = effective_nu(cell.fit, config.degree);
        cell.ok = true;
    });

    int best = -1;
    for (int idx = 0; idx < n_cells; ++idx) {
        if (!cells[idx].ok) continue;
        if (best < 0) {
            best = idx;
            continue;
        }
        const Cell& c = cells[idx];
        const Cell& b = cells[best];
        const bool better =
            c.qbic < b.qbic ||
            (c.qbic == b.qbic &&
             (c.nu < b.nu || (c.nu == b.nu && c.fit.selected_lambda < b.fit.selected_lambda)));
        if (better) best = idx;
    }
    if (best < 0) throw std::runtime_error("select_fit: every grid cell failed");

    FitResult fit = std::move(cells[best].fit);
    fit.qbic = cells[best].qbic;
    for (int idx = 0; idx < n_cells; ++idx) {
        ScoreTableRow row;
        row.lambda = lambdas[idx % lambdas.size()];
        row.knots = combos[idx / lambdas.size()];
        if (cells[idx].ok) {
            row.qbic = cells[idx].qbic;
            row.nu = cells[idx].nu;
            row.active_count = static_cast<int>(cells[idx].fit.active_set.size());
            row.converged = cells[idx].fit.lla.converged;
        }
        fit.score_table.push_back(std::move(row));
    }
    return fit;
}

Designation wqbic_designate(const ModelFrame& frame,
                            int covariate_index,
                            double tau,
                            const WeightEstimate& weights,
                            int degree,
                            int max_knots) {
    if (covariate_index < 0 || covariate_index >= frame.n_covariates())
        throw std::invalid_argument("designate: covariate index out of range");
    const int n = frame.n_rows();
    const Eigen::VectorXd v = frame.covariate_raw(covariate_index);

    std::set<double> distinct;
    for (int i = 0; i < n; ++i)
        if (std::isfinite(v[i])) distinct.insert(v[i]);
    if (distinct.size() < 2)
        throw std::invalid_argument("designate: covariate has no spread");
    if (distinct.size() == 2)
        throw std::invalid_argument("designate: binary covariate is linear by construction");

    QrProblem problem;
    problem.response = frame.y;
    problem.tau = tau;
    problem.obs_weights = weights.weights / static_cast<double>(n);
    // drop rows where this covariate is unobserved (its own missingness may
    // not be captured by r when the covariate came from another frame)
    for (int i = 0; i < n; ++i)
        if (!std::isfinite(v[i])) problem.obs_weights[i] = 0.0;

    const double lo = *distinct.begin();
    const double hi = *distinct.rbegin();
    Eigen::VectorXd unit = Eigen::VectorXd::Zero(n);
    std::vector<double> observed;
    for (int i = 0; i < n; ++i) {
        if (!std::isfinite(v[i])) continue;
        unit[i] = (v[i] - lo) / (hi - lo);
        observed.push_back(unit[i]);
    }

    const auto score_model = [&](const Eigen::MatrixXd& design, int n_par) {
        problem.design = design;
        const QrSolution sol = solve(problem);
        double loss = 0.0;
        for (int i = 0; i < n; ++i) {
            const double w = weights.weights[i];
            if (!(w > 0.0) || !std::isfinite(v[i])) continue;
            loss += w * check_loss(frame.y[i] - design.row(i).dot(sol.coef), tau);
        }
        if (!(loss > 0.0)) throw std::runtime_error("designate: weighted loss is zero");
        return std::log(loss) + n_par * std::log(static_cast<double>(n)) / (2.0 * n);
    };

    Designation result;
    // intercept-only
    Eigen::MatrixXd ones = Eigen::MatrixXd::Ones(n, 1);
    result.wqbic.push_back(score_model(ones, 1));
    // linear
    Eigen::MatrixXd lin(n, 2);
    lin.col(0).setOnes();
    lin.col(1) = unit;
    result.wqbic.push_back(score_model(lin, 2));
    // splines with 0..max_knots internal knots
    for (int k = 0; k <= max_knots; ++k) {
        const SplineBasis basis = quantile_knot_basis(observed, k, degree);
        const int w = basis.width();
        Eigen::MatrixXd design = Eigen::MatrixXd::Zero(n, 1 + w);
        design.col(0).setOnes();
        for (int i = 0; i < n; ++i) {
            if (!std::isfinite(v[i])) continue;
            design.block(i, 1, 1, w) =
                basis.evaluate(std::clamp(unit[i], 0.0, 1.0)).transpose();
        }
        result.wqbic.push_back(score_model(design, 1 + w));
    }

    int best = 0;
    for (std::size_t i = 1; i < result.wqbic.size(); ++i)
        if (result.wqbic[i] < result.wqbic[best]) best = static_cast<int>(i);
    if (best == 0) {
        result.cls = Designation::Class::Linear;
        result.weak_signal = true;
    } else if (best == 1) {
        result.cls = Designation::Class::Linear;
    } else {
        result.cls = Designation::Class::Nonlinear;
        result.knots = best - 2;
    }
    return result;
}

WeightEstimate compute_weights(const ModelFrame& frame,
                               const WeightPlan& plan,
                               std::vector<std::string>* warnings) {
    switch (plan.method) {
        case WeightMethod::None:
            return naive_weights(frame);
        case WeightMethod::True:
            if (!plan.pi0) throw std::invalid_argument("weights: true method requires pi0");
            return true_weights(frame, *plan.pi0, plan.cap);
        case WeightMethod::Parametric: {
            ScreenOptions opts;
            opts.alpha = plan.screen_alpha;
            opts.nonparametric = false;
            const auto cols = screen_missing_model(frame, opts, warnings);
            return fit_parametric_weights(frame, cols, plan.cap);
        }
        case WeightMethod::Kernel: {
            ScreenOptions opts;
            opts.alpha = plan.screen_alpha;
            opts.nonparametric = true;
            const auto cols = screen_missing_model(frame, opts, warnings);
            return fit_kernel_weights(frame, cols, plan.bandwidth, plan.cap);
        }
    }
    throw std::invalid_argument("weights: unknown method");
}

namespace {

struct DesignatedModel {
    ModelFrame frame;            // restructured: designated nonlinear moved to z
    std::vector<int> knots;      // per designated-nonlinear variable
    std::vector<std::string> x_names, z_names;
};

DesignatedModel designate_structure(const ModelFrame& train, double tau,
                                    const WeightEstimate& weights, const FitConfig& config) {
    std::vector<int> nonlinear;
    std::vector<int> knots;
    for (int idx = 0; idx < train.n_covariates(); ++idx) {
        try {
            const Designation d = wqbic_designate(train, idx, tau, weights, config.degree, 4);
            if (d.cls == Designation::Class::Nonlinear) {
                nonlinear.push_back(idx);
                knots.push_back(d.knots);
            }
        } catch (const std::invalid_argument&) {
            // binary or degenerate covariates stay linear
        }
    }
    DesignatedModel model{reassign_nonlinear(train, nonlinear), knots, {}, {}};
    model.x_names = model.frame.x_names;
    model.z_names = model.frame.z_names;
    return model;
}

}  // namespace

PredictionIntervalReport prediction_interval(const ModelFrame& train,
                                             const ModelFrame& test,
                                             double lo_tau,
                                             double hi_tau,
                                             const FitConfig& config,
                                             const WeightPlan& plan) {
    if (!(lo_tau < hi_tau))
        throw std::invalid_argument("prediction interval: lo_tau must be below hi_tau");

    const WeightEstimate weights = compute_weights(train, plan);

    const auto fit_at = [&](double tau) {
        DesignatedModel model = designate_structure(train, tau, weights, config);
        FitConfig cfg = config;
        cfg.tau = tau;
        cfg.knot_grid = {model.knots};
        // weight vectors are row-aligned, so they carry over to the
        // restructured frame unchanged
        FitResult fit = cfg.penalty ? select_fit(model.frame, weights, cfg)
                                    : fit_unpenalized(model.frame, weights, cfg);
        return std::make_pair(std::move(model), std::move(fit));
    };

    auto [model_lo, fit_lo] = fit_at(lo_tau);
    auto [model_hi, fit_hi] = fit_at(hi_tau);

    const auto predict_row = [&](const DesignatedModel& model, const FitResult& fit, int row,
                                 double& out) {
        Eigen::VectorXd x_row(model.frame.n_linear());
        for (int j = 0; j < model.frame.n_linear(); ++j) {
            const int src = test.covariate_index(model.x_names[j]);
            if (src < 0) throw std::runtime_error("prediction: column missing from test data");
            const double val = test.covariate_raw(src)[row];
            // only covariates the model actually uses need to be observed
            if (!std::isfinite(val)) {
                if (fit.beta[j] != 0.0) return false;
                x_row[j] = 0.0;
            } else {
                x_row[j] = val;
            }
        }
        Eigen::VectorXd z_row(model.frame.n_nonlinear());
        for (int j = 0; j < model.frame.n_nonlinear(); ++j) {
            const int src = test.covariate_index(model.z_names[j]);
            if (src < 0) throw std::runtime_error("prediction: column missing from test data");
            const double val = test.covariate_raw(src)[row];
            if (!std::isfinite(val)) return false;
            z_row[j] = val;
        }
        out = fit.predict(x_row, z_row);
        return true;
    };

    PredictionIntervalReport report;
    std::vector<double> lengths;
    int captured = 0;
    for (int i = 0; i < test.n_rows(); ++i) {
        double qlo = 0.0, qhi = 0.0;
        if (!predict_row(model_lo, fit_lo, i, qlo) || !predict_row(model_hi, fit_hi, i, qhi)) {
            ++report.skipped_rows;
            continue;
        }
        if (qlo > qhi) {
            ++report.crossings;
            std::swap(qlo, qhi);
        }
        ++report.scored_rows;
        if (test.y[i] >= qlo && test.y[i] <= qhi) ++captured;
        lengths.push_back(qhi - qlo);
    }
    if (report.scored_rows > 0) {
        report.capture_rate = static_cast<double>(captured) / report.scored_rows;
        double mean = 0.0;
        for (double l : lengths) mean += l;
        mean /= lengths.size();
        report.mean_length = mean;
        if (lengths.size() > 1) {
            double ss = 0.0;
            for (double l : lengths) ss += (l - mean) * (l - mean);
            report.sd_length = std::sqrt(ss / (lengths.size() - 1));
        }
    }
    return report;
}

}  // namespace ipwqr
