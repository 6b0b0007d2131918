#pragma once

#include <Eigen/Dense>

#include <optional>
#include <string>
#include <vector>

namespace ipwqr {

// Affine map taking an observed covariate range onto [0,1].
struct UnitRescale {
    double lo = 0.0;
    double hi = 1.0;

    double to_unit(double v) const { return (v - lo) / (hi - lo); }
    double from_unit(double u) const { return lo + u * (hi - lo); }
};

// Covariates are indexed globally: linear columns come first (0..p-1),
// nonlinear columns follow (p..p+d-1).
struct MissingSpec {
    std::vector<int> missing_capable;  // covariate indices that may be missing
    std::vector<int> always_observed;  // the complement

    bool is_missing_capable(int covariate_index) const;
};

// Immutable observed-data container shared by every estimator.
//
// Rows with r=0 keep NaN poison in their missing-capable cells; estimators
// must never read those cells (they drop the row or skip the block), so any
// NaN leaking into a fit is a bug that surfaces immediately.
class ModelFrame {
public:
    Eigen::VectorXd y;      // response, always observed
    Eigen::MatrixXd x;      // n x p linear candidates (NaN where missing)
    Eigen::MatrixXd z;      // n x d nonlinear covariates on [0,1] (NaN where missing)
    Eigen::MatrixXd z_raw;  // nonlinear covariates on the original scale
    Eigen::VectorXi r;      // complete-case indicator

    std::string y_name;
    std::vector<std::string> x_names;
    std::vector<std::string> z_names;
    std::vector<UnitRescale> z_scale;
    MissingSpec missing;

    int n_rows() const { return static_cast<int>(y.size()); }
    int n_linear() const { return static_cast<int>(x.cols()); }
    int n_nonlinear() const { return static_cast<int>(z.cols()); }
    int n_covariates() const { return n_linear() + n_nonlinear(); }

    int complete_case_count() const { return r.sum(); }

    // Name of a global covariate index.
    const std::string& covariate_name(int index) const;
    // Raw values of a global covariate index (x on its own scale, z raw).
    Eigen::VectorXd covariate_raw(int index) const;
    // Global covariate index for a name; -1 if absent.
    int covariate_index(const std::string& name) const;

    // The always-observed block t_i = (Y_i, l_i): y first, then every
    // covariate column outside the missing-capable set (x columns on their
    // raw scale, z columns on the unit scale).
    Eigen::MatrixXd t_block() const;
    std::vector<std::string> t_names() const;
};

// Column roles for ingestion.
enum class ColumnRole { Response, Linear, Nonlinear, Ignore };

struct IngestSpec {
    // Role per CSV column name. Every header must be covered unless
    // default_role is set.
    std::vector<std::pair<std::string, ColumnRole>> roles;
    std::optional<ColumnRole> default_role;
    // Covariate names to treat as missing-capable even if fully observed in
    // this file. Columns with observed missing cells are always included.
    std::vector<std::string> missing_capable;
};

// Parses a CSV with header. Missing cells are the empty field or "NA".
// Throws std::runtime_error with row/column context on malformed input,
// and rejects files where the response is ever missing.
ModelFrame ingest_csv(const std::string& path, const IngestSpec& spec);

// Writes the frame back to CSV on the original scales, preserving observed
// values bit-exactly; missing cells are written as "NA".
void export_csv(const ModelFrame& frame, const std::string& path);

// Builds a frame from in-memory data (simulation lab, bindings). z columns
// are rescaled to [0,1] from their complete-case range. missing_capable uses
// global covariate indices; cells of those columns in rows with any missing
// value must already be NaN.
ModelFrame make_frame(const Eigen::VectorXd& y,
                      const Eigen::MatrixXd& x,
                      const Eigen::MatrixXd& z_raw,
                      const std::vector<int>& missing_capable,
                      std::vector<std::string> x_names = {},
                      std::vector<std::string> z_names = {});

// Rebuilds the frame with the given global covariate indices as the
// nonlinear block (raw values rescaled from their complete-case range) and
// everything else linear. Used after linear-vs-nonlinear designation.
ModelFrame reassign_nonlinear(const ModelFrame& frame,
                              const std::vector<int>& nonlinear_covariates);

}  // namespace ipwqr
