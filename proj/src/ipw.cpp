#include "ipwqr/ipw.hpp"

#include <boost/math/distributions/chi_squared.hpp>

#include <algorithm>
#include <cmath>
#include <stdexcept>

#include "ipwqr/spline.hpp"

namespace ipwqr {

std::string to_string(WeightMethod method) {
    switch (method) {
        case WeightMethod::None: return "naive";
        case WeightMethod::True: return "true";
        case WeightMethod::Parametric: return "parametric";
        case WeightMethod::Kernel: return "kernel";
    }
    return "?";
}

WeightMethod weight_method_from_string(const std::string& name) {
    if (name == "naive" || name == "none") return WeightMethod::None;
    if (name == "true") return WeightMethod::True;
    if (name == "parametric") return WeightMethod::Parametric;
    if (name == "kernel") return WeightMethod::Kernel;
    throw std::invalid_argument("unknown weight method: " + name);
}

namespace {

double logistic(double v) { return 1.0 / (1.0 + std::exp(-v)); }

struct LogisticFit {
    Eigen::VectorXd eta;
    double deviance = 0.0;
    bool converged = false;
    bool separation = false;
    int iterations = 0;
};

double binomial_deviance(const Eigen::VectorXd& lin, const Eigen::VectorXi& r) {
    double dev = 0.0;
    for (int i = 0; i < lin.size(); ++i) {
        // log(1+e^v) computed stably
        const double v = lin[i];
        const double log1pe = v > 0.0 ? v + std::log1p(std::exp(-v)) : std::log1p(std::exp(v));
        dev += -2.0 * (r[i] * v - log1pe);
    }
    return dev;
}

// Newton iteration with step halving for the binomial log-likelihood.
LogisticFit fit_logistic(const Eigen::MatrixXd& X, const Eigen::VectorXi& r,
                         int max_iter = 100, double grad_tol = 1e-8) {
    const int n = static_cast<int>(X.rows());
    const int m = static_cast<int>(X.cols());
    LogisticFit fit;
    fit.eta = Eigen::VectorXd::Zero(m);
    if (r.sum() == 0 || r.sum() == n) {
        fit.separation = true;
        return fit;
    }

    Eigen::VectorXd lin = Eigen::VectorXd::Zero(n);
    double dev = binomial_deviance(lin, r);
    for (int it = 1; it <= max_iter; ++it) {
        fit.iterations = it;
        Eigen::VectorXd p(n), v(n);
        for (int i = 0; i < n; ++i) {
            p[i] = logistic(lin[i]);
            v[i] = std::max(p[i] * (1.0 - p[i]), 1e-12);
        }
        Eigen::VectorXd grad = X.transpose() * (r.cast<double>() - p);
        if (grad.cwiseAbs().maxCoeff() <= grad_tol) {
            fit.converged = true;
            break;
        }
        Eigen::MatrixXd H = X.transpose() * v.asDiagonal() * X;
        Eigen::LDLT<Eigen::MatrixXd> ldlt(H);
        if (ldlt.info() != Eigen::Success) {
            H.diagonal().array() += 1e-10 * std::max(1.0, H.diagonal().maxCoeff());
            ldlt.compute(H);
        }
        Eigen::VectorXd step = ldlt.solve(grad);
        double scale = 1.0;
        for (int half = 0; half < 30; ++half) {
            const Eigen::VectorXd cand = fit.eta + scale * step;
            const Eigen::VectorXd cand_lin = X * cand;
            const double cand_dev = binomial_deviance(cand_lin, r);
            if (cand_dev <= dev + 1e-12) {
                fit.eta = cand;
                lin = cand_lin;
                dev = cand_dev;
                break;
            }
            scale *= 0.5;
        }
    }
    fit.deviance = dev;
    // Diverging coefficients or boundary-fitted probabilities mean separation.
    if (lin.cwiseAbs().maxCoeff() > 30.0) {
        double pmin = 1.0;
        for (int i = 0; i < n; ++i) {
            const double p = logistic(lin[i]);
            pmin = std::min(pmin, p * (1.0 - p));
        }
        if (pmin < 1e-10) fit.separation = true;
    }
    return fit;
}

Eigen::VectorXd capped_weights(const Eigen::VectorXi& r, const Eigen::VectorXd& pi,
                               double cap, int& capped_count) {
    Eigen::VectorXd w = Eigen::VectorXd::Zero(r.size());
    capped_count = 0;
    for (int i = 0; i < r.size(); ++i) {
        if (!r[i]) continue;
        const double raw = 1.0 / pi[i];
        if (raw > cap) {
            w[i] = cap;
            ++capped_count;
        } else {
            w[i] = raw;
        }
    }
    return w;
}

}  // namespace

std::vector<int> screen_missing_model(const ModelFrame& frame,
                                      const ScreenOptions& options,
                                      std::vector<std::string>* warnings) {
    const Eigen::MatrixXd t = frame.t_block();
    const std::vector<std::string> names = frame.t_names();
    const int n = frame.n_rows();
    const int candidates = static_cast<int>(t.cols());
    if (candidates < 1) throw std::invalid_argument("screen: no always-observed variables");

    // intercept-only deviance
    Eigen::MatrixXd ones = Eigen::MatrixXd::Ones(n, 1);
    const LogisticFit null_fit = fit_logistic(ones, frame.r);
    if (null_fit.separation)
        throw std::runtime_error("screen: degenerate missingness indicator (all equal)");

    std::vector<int> selected;
    for (int c = 0; c < candidates; ++c) {
        Eigen::MatrixXd design;
        int df = 1;
        if (options.nonparametric) {
            // unit-rescale the candidate, then expand by a B-spline
            const Eigen::VectorXd v = t.col(c);
            const double lo = v.minCoeff(), hi = v.maxCoeff();
            if (!(lo < hi)) {
                if (warnings) warnings->push_back("screen: skipped constant variable " + names[c]);
                continue;
            }
            Eigen::VectorXd unit = (v.array() - lo) / (hi - lo);
            std::vector<double> unit_vec(unit.data(), unit.data() + n);
            const SplineBasis basis = quantile_knot_basis(
                unit_vec, options.spline_internal_knots, options.spline_degree, warnings);
            df = basis.width();
            design.resize(n, 1 + df);
            design.col(0).setOnes();
            for (int i = 0; i < n; ++i)
                design.block(i, 1, 1, df) = basis.evaluate(unit[i]).transpose();
        } else {
            design.resize(n, 2);
            design.col(0).setOnes();
            design.col(1) = t.col(c);
        }

        const LogisticFit fit = fit_logistic(design, frame.r);
        if (fit.separation || !fit.converged) {
            if (warnings)
                warnings->push_back("screen: skipped " + names[c] +
                                    (fit.separation ? " (separation)" : " (no convergence)"));
            continue;
        }
        const double lr = null_fit.deviance - fit.deviance;
        const boost::math::chi_squared chi2(df);
        const double cutoff =
            boost::math::quantile(chi2, 1.0 - options.alpha / static_cast<double>(candidates));
        if (lr > cutoff) selected.push_back(c);
    }
    return selected;
}

WeightEstimate fit_parametric_weights(const ModelFrame& frame,
                                      const std::vector<int>& t_columns,
                                      double cap) {
    const int n = frame.n_rows();
    const Eigen::MatrixXd t = frame.t_block();
    for (int c : t_columns)
        if (c < 0 || c >= t.cols())
            throw std::invalid_argument("parametric weights: t-column index out of range");

    Eigen::MatrixXd design(n, 1 + static_cast<int>(t_columns.size()));
    design.col(0).setOnes();
    for (std::size_t k = 0; k < t_columns.size(); ++k)
        design.col(static_cast<int>(k) + 1) = t.col(t_columns[k]);

    const LogisticFit fit = fit_logistic(design, frame.r);
    if (fit.separation)
        throw std::runtime_error("parametric weights: separation in the missingness model");
    if (!fit.converged)
        throw std::runtime_error("parametric weights: no convergence in 100 iterations (|grad| > 1e-8)");

    WeightEstimate est;
    est.method = WeightMethod::Parametric;
    est.cap = cap;
    est.eta_hat = fit.eta;
    est.screen_set = t_columns;
    est.pi.resize(n);
    const Eigen::VectorXd lin = design * fit.eta;
    for (int i = 0; i < n; ++i) est.pi[i] = logistic(lin[i]);
    est.weights = capped_weights(frame.r, est.pi, cap, est.capped_count);
    return est;
}

WeightEstimate fit_kernel_weights(const ModelFrame& frame,
                                  const std::vector<int>& t_columns,
                                  std::optional<double> bandwidth,
                                  double cap) {
    const int n = frame.n_rows();
    const Eigen::MatrixXd t = frame.t_block();
    for (int c : t_columns)
        if (c < 0 || c >= t.cols())
            throw std::invalid_argument("kernel weights: t-column index out of range");
    const int s = static_cast<int>(t_columns.size());

    WeightEstimate est;
    est.method = WeightMethod::Kernel;
    est.cap = cap;
    est.screen_set = t_columns;
    est.pi.resize(n);

    if (s == 0) {
        // no informative variables: the smoother flattens to the mean of R
        est.pi.setConstant(frame.r.cast<double>().mean());
    } else {
        Eigen::MatrixXd ts(n, s);
        for (int k = 0; k < s; ++k) ts.col(k) = t.col(t_columns[k]);

        est.bandwidth.resize(s);
        const double rate = std::pow(static_cast<double>(n), -1.0 / (s + 2.0));
        for (int k = 0; k < s; ++k) {
            if (bandwidth) {
                est.bandwidth[k] = *bandwidth;
            } else {
                const double mean = ts.col(k).mean();
                const double sd = std::sqrt((ts.col(k).array() - mean).square().sum() /
                                            std::max(1, n - 1));
                est.bandwidth[k] = (sd > 0.0 ? sd : 1.0) * rate;
            }
            if (!(est.bandwidth[k] > 0.0))
                throw std::invalid_argument("kernel weights: bandwidth must be positive");
            ts.col(k) /= est.bandwidth[k];
        }

        for (int i = 0; i < n; ++i) {
            double mass = 0.0, hits = 0.0;
            for (int j = 0; j < n; ++j) {
                const double k = std::exp(-0.5 * (ts.row(i) - ts.row(j)).squaredNorm());
                mass += k;
                hits += frame.r[j] * k;
            }
            if (!(mass > 0.0))
                throw std::runtime_error("kernel weights: zero kernel mass at a point");
            est.pi[i] = hits / mass;
        }
    }

    for (int i = 0; i < n; ++i) {
        if (frame.r[i] && !(est.pi[i] > 0.0))
            throw std::runtime_error("kernel weights: zero probability at a complete case");
        est.pi[i] = std::min(est.pi[i], 1.0);
    }
    est.weights = capped_weights(frame.r, est.pi, cap, est.capped_count);
    return est;
}

WeightEstimate true_weights(const ModelFrame& frame, const Eigen::VectorXd& pi0, double cap) {
    if (pi0.size() != frame.n_rows())
        throw std::invalid_argument("true weights: pi0 length mismatch");
    for (int i = 0; i < pi0.size(); ++i)
        if (!(pi0[i] > 0.0 && pi0[i] <= 1.0))
            throw std::invalid_argument("true weights: pi0 must lie in (0,1]");
    WeightEstimate est;
    est.method = WeightMethod::True;
    est.cap = cap;
    est.pi = pi0;
    est.weights = capped_weights(frame.r, est.pi, cap, est.capped_count);
    return est;
}

WeightEstimate naive_weights(const ModelFrame& frame) {
    WeightEstimate est;
    est.method = WeightMethod::None;
    est.cap = 25.0;
    est.pi = Eigen::VectorXd::Ones(frame.n_rows());
    est.weights = frame.r.cast<double>();
    return est;
}

WeightEstimate unit_weights(int n) {
    WeightEstimate est;
    est.method = WeightMethod::None;
    est.cap = 25.0;
    est.pi = Eigen::VectorXd::Ones(n);
    est.weights = Eigen::VectorXd::Ones(n);
    return est;
}

}  // namespace ipwqr
