#include "ipwqr/model_frame.hpp"

#include <algorithm>
#include <cctype>
#include <charconv>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <limits>
#include <sstream>
#include <stdexcept>

namespace ipwqr {

namespace {

constexpr double kMissing = std::numeric_limits<double>::quiet_NaN();

std::string trim(const std::string& s) {
    auto b = s.begin(), e = s.end();
    while (b != e && std::isspace(static_cast<unsigned char>(*b))) ++b;
    while (e != b && std::isspace(static_cast<unsigned char>(*(e - 1)))) --e;
    return std::string(b, e);
}

std::vector<std::string> split_csv_line(const std::string& line) {
    std::vector<std::string> out;
    std::string field;
    std::stringstream ss(line);
    while (std::getline(ss, field, ',')) out.push_back(trim(field));
    if (!line.empty() && line.back() == ',') out.push_back("");
    return out;
}

bool is_missing_token(const std::string& s) { return s.empty() || s == "NA" || s == "nan"; }

double parse_cell(const std::string& s, int row, const std::string& column) {
    const char* begin = s.data();
    const char* end = begin + s.size();
    double value = 0.0;
    auto [ptr, ec] = std::from_chars(begin, end, value);
    if (ec != std::errc() || ptr != end)
        throw std::runtime_error("ingest: non-numeric cell '" + s + "' at row " +
                                 std::to_string(row) + ", column " + column);
    return value;
}

}  // namespace

bool MissingSpec::is_missing_capable(int covariate_index) const {
    return std::find(missing_capable.begin(), missing_capable.end(), covariate_index) !=
           missing_capable.end();
}

const std::string& ModelFrame::covariate_name(int index) const {
    if (index < n_linear()) return x_names[index];
    return z_names[index - n_linear()];
}

Eigen::VectorXd ModelFrame::covariate_raw(int index) const {
    if (index < n_linear()) return x.col(index);
    return z_raw.col(index - n_linear());
}

int ModelFrame::covariate_index(const std::string& name) const {
    for (int j = 0; j < n_linear(); ++j)
        if (x_names[j] == name) return j;
    for (int j = 0; j < n_nonlinear(); ++j)
        if (z_names[j] == name) return n_linear() + j;
    return -1;
}

Eigen::MatrixXd ModelFrame::t_block() const {
    const int s = 1 + static_cast<int>(missing.always_observed.size());
    Eigen::MatrixXd t(n_rows(), s);
    t.col(0) = y;
    int col = 1;
    for (int idx : missing.always_observed) {
        if (idx < n_linear())
            t.col(col) = x.col(idx);
        else
            t.col(col) = z.col(idx - n_linear());
        ++col;
    }
    return t;
}

std::vector<std::string> ModelFrame::t_names() const {
    std::vector<std::string> names{y_name};
    for (int idx : missing.always_observed) names.push_back(covariate_name(idx));
    return names;
}

namespace {

// Shared post-processing: derive r, rescale z, build the missing spec.
ModelFrame assemble(Eigen::VectorXd y,
                    Eigen::MatrixXd x,
                    Eigen::MatrixXd z_raw,
                    std::vector<int> declared_missing,
                    std::vector<std::string> x_names,
                    std::vector<std::string> z_names,
                    std::string y_name) {
    const int n = static_cast<int>(y.size());
    const int p = static_cast<int>(x.cols());
    const int d = static_cast<int>(z_raw.cols());

    ModelFrame frame;
    frame.y = std::move(y);
    frame.x = std::move(x);
    frame.z_raw = std::move(z_raw);
    frame.y_name = std::move(y_name);
    frame.x_names = std::move(x_names);
    frame.z_names = std::move(z_names);
    if (frame.x_names.empty())
        for (int j = 0; j < p; ++j) frame.x_names.push_back("x" + std::to_string(j + 1));
    if (frame.z_names.empty())
        for (int j = 0; j < d; ++j) frame.z_names.push_back("z" + std::to_string(j + 1));

    // Missing-capable = declared set plus any covariate with an observed hole.
    std::vector<int> capable = std::move(declared_missing);
    for (int j = 0; j < p; ++j)
        if (frame.x.col(j).hasNaN()) capable.push_back(j);
    for (int j = 0; j < d; ++j)
        if (frame.z_raw.col(j).hasNaN()) capable.push_back(p + j);
    std::sort(capable.begin(), capable.end());
    capable.erase(std::unique(capable.begin(), capable.end()), capable.end());
    for (int idx : capable)
        if (idx < 0 || idx >= p + d)
            throw std::invalid_argument("model frame: missing-capable index out of range");
    frame.missing.missing_capable = capable;
    for (int idx = 0; idx < p + d; ++idx)
        if (!frame.missing.is_missing_capable(idx))
            frame.missing.always_observed.push_back(idx);

    // r_i = 1 iff every missing-capable cell in row i is present.
    frame.r = Eigen::VectorXi::Ones(n);
    for (int idx : capable) {
        for (int i = 0; i < n; ++i) {
            const double v = idx < p ? frame.x(i, idx) : frame.z_raw(i, idx - p);
            if (!std::isfinite(v)) frame.r[i] = 0;
        }
    }
    // Blank every missing-capable cell of an incomplete row so nothing can
    // read a partially observed block.
    for (int idx : capable) {
        for (int i = 0; i < n; ++i) {
            if (frame.r[i]) continue;
            if (idx < p)
                frame.x(i, idx) = kMissing;
            else
                frame.z_raw(i, idx - p) = kMissing;
        }
    }

    // Rescale z columns to [0,1] from the observed range.
    frame.z = frame.z_raw;
    frame.z_scale.resize(d);
    for (int j = 0; j < d; ++j) {
        double lo = std::numeric_limits<double>::infinity();
        double hi = -std::numeric_limits<double>::infinity();
        for (int i = 0; i < n; ++i) {
            const double v = frame.z_raw(i, j);
            if (!std::isfinite(v)) continue;
            lo = std::min(lo, v);
            hi = std::max(hi, v);
        }
        if (!(lo < hi))
            throw std::invalid_argument("model frame: nonlinear column '" + frame.z_names[j] +
                                        "' has no spread among observed values");
        frame.z_scale[j] = UnitRescale{lo, hi};
        for (int i = 0; i < n; ++i) {
            const double v = frame.z_raw(i, j);
            frame.z(i, j) = std::isfinite(v) ? frame.z_scale[j].to_unit(v) : kMissing;
        }
    }
    return frame;
}

}  // namespace

ModelFrame ingest_csv(const std::string& path, const IngestSpec& spec) {
    std::ifstream in(path);
    if (!in) throw std::runtime_error("ingest: cannot open " + path);

    std::string line;
    if (!std::getline(in, line)) throw std::runtime_error("ingest: empty file " + path);
    if (!line.empty() && line.back() == '\r') line.pop_back();
    const std::vector<std::string> header = split_csv_line(line);

    std::vector<ColumnRole> roles(header.size());
    int response_col = -1;
    for (std::size_t c = 0; c < header.size(); ++c) {
        const auto it = std::find_if(spec.roles.begin(), spec.roles.end(),
                                     [&](const auto& kv) { return kv.first == header[c]; });
        if (it != spec.roles.end())
            roles[c] = it->second;
        else if (spec.default_role)
            roles[c] = *spec.default_role;
        else
            throw std::runtime_error("ingest: no role assigned to column '" + header[c] + "'");
        if (roles[c] == ColumnRole::Response) {
            if (response_col >= 0) throw std::runtime_error("ingest: multiple response columns");
            response_col = static_cast<int>(c);
        }
    }
    if (response_col < 0) throw std::runtime_error("ingest: no response column");
    for (const auto& [name, role] : spec.roles)
        if (std::find(header.begin(), header.end(), name) == header.end())
            throw std::runtime_error("ingest: role for unknown column '" + name + "'");

    std::vector<double> y_vals;
    std::vector<std::vector<double>> x_cols, z_cols;
    std::vector<std::string> x_names, z_names;
    std::vector<int> col_slot(header.size(), -1);  // index within its block
    for (std::size_t c = 0; c < header.size(); ++c) {
        if (roles[c] == ColumnRole::Linear) {
            col_slot[c] = static_cast<int>(x_cols.size());
            x_cols.emplace_back();
            x_names.push_back(header[c]);
        } else if (roles[c] == ColumnRole::Nonlinear) {
            col_slot[c] = static_cast<int>(z_cols.size());
            z_cols.emplace_back();
            z_names.push_back(header[c]);
        }
    }

    int row = 0;
    while (std::getline(in, line)) {
        if (!line.empty() && line.back() == '\r') line.pop_back();
        if (trim(line).empty()) continue;
        ++row;
        const std::vector<std::string> fields = split_csv_line(line);
        if (fields.size() != header.size())
            throw std::runtime_error("ingest: row " + std::to_string(row) + " has " +
                                     std::to_string(fields.size()) + " fields, expected " +
                                     std::to_string(header.size()));
        for (std::size_t c = 0; c < fields.size(); ++c) {
            if (roles[c] == ColumnRole::Ignore) continue;
            const bool missing = is_missing_token(fields[c]);
            if (roles[c] == ColumnRole::Response) {
                if (missing)
                    throw std::runtime_error("ingest: response missing at row " +
                                             std::to_string(row));
                y_vals.push_back(parse_cell(fields[c], row, header[c]));
            } else {
                auto& column = roles[c] == ColumnRole::Linear ? x_cols[col_slot[c]]
                                                              : z_cols[col_slot[c]];
                column.push_back(missing ? kMissing : parse_cell(fields[c], row, header[c]));
            }
        }
    }
    if (row == 0) throw std::runtime_error("ingest: no data rows in " + path);

    const int n = row;
    Eigen::VectorXd y = Eigen::Map<Eigen::VectorXd>(y_vals.data(), n);
    Eigen::MatrixXd x(n, static_cast<int>(x_cols.size()));
    for (std::size_t j = 0; j < x_cols.size(); ++j)
        x.col(static_cast<int>(j)) = Eigen::Map<Eigen::VectorXd>(x_cols[j].data(), n);
    Eigen::MatrixXd z(n, static_cast<int>(z_cols.size()));
    for (std::size_t j = 0; j < z_cols.size(); ++j)
        z.col(static_cast<int>(j)) = Eigen::Map<Eigen::VectorXd>(z_cols[j].data(), n);

    std::vector<int> declared;
    for (const auto& name : spec.missing_capable) {
        int idx = -1;
        for (std::size_t j = 0; j < x_names.size(); ++j)
            if (x_names[j] == name) idx = static_cast<int>(j);
        for (std::size_t j = 0; j < z_names.size(); ++j)
            if (z_names[j] == name) idx = static_cast<int>(x_names.size() + j);
        if (idx < 0)
            throw std::runtime_error("ingest: missing-capable column '" + name +
                                     "' is not a covariate");
        declared.push_back(idx);
    }

    std::string y_name = header[response_col];
    return assemble(std::move(y), std::move(x), std::move(z), std::move(declared),
                    std::move(x_names), std::move(z_names), std::move(y_name));
}

void export_csv(const ModelFrame& frame, const std::string& path) {
    std::ofstream out(path);
    if (!out) throw std::runtime_error("export: cannot open " + path);
    out << frame.y_name;
    for (const auto& name : frame.x_names) out << ',' << name;
    for (const auto& name : frame.z_names) out << ',' << name;
    out << '\n';
    char buf[64];
    const auto put = [&](double v) {
        if (!std::isfinite(v)) {
            out << "NA";
        } else {
            std::snprintf(buf, sizeof(buf), "%.17g", v);
            out << buf;
        }
    };
    for (int i = 0; i < frame.n_rows(); ++i) {
        put(frame.y[i]);
        for (int j = 0; j < frame.n_linear(); ++j) {
            out << ',';
            put(frame.x(i, j));
        }
        for (int j = 0; j < frame.n_nonlinear(); ++j) {
            out << ',';
            put(frame.z_raw(i, j));
        }
        out << '\n';
    }
}

ModelFrame make_frame(const Eigen::VectorXd& y,
                      const Eigen::MatrixXd& x,
                      const Eigen::MatrixXd& z_raw,
                      const std::vector<int>& missing_capable,
                      std::vector<std::string> x_names,
                      std::vector<std::string> z_names) {
    if (x.rows() != y.size() || z_raw.rows() != y.size())
        throw std::invalid_argument("model frame: row count mismatch");
    if (!y.allFinite()) throw std::invalid_argument("model frame: response must be observed");
    return assemble(y, x, z_raw, missing_capable, std::move(x_names), std::move(z_names), "y");
}

ModelFrame reassign_nonlinear(const ModelFrame& frame,
                              const std::vector<int>& nonlinear_covariates) {
    const int total = frame.n_covariates();
    std::vector<bool> to_z(total, false);
    for (int idx : nonlinear_covariates) {
        if (idx < 0 || idx >= total)
            throw std::invalid_argument("reassign: covariate index out of range");
        to_z[idx] = true;
    }

    std::vector<int> new_index(total, -1);
    std::vector<std::string> x_names, z_names;
    int p_new = 0;
    for (int idx = 0; idx < total; ++idx)
        if (!to_z[idx]) {
            new_index[idx] = p_new++;
            x_names.push_back(frame.covariate_name(idx));
        }
    int d_new = 0;
    for (int idx : nonlinear_covariates) {
        new_index[idx] = p_new + d_new++;
        z_names.push_back(frame.covariate_name(idx));
    }

    const int n = frame.n_rows();
    Eigen::MatrixXd x(n, p_new), z(n, d_new);
    for (int idx = 0; idx < total; ++idx) {
        const Eigen::VectorXd col = frame.covariate_raw(idx);
        if (to_z[idx])
            z.col(new_index[idx] - p_new) = col;
        else
            x.col(new_index[idx]) = col;
    }
    std::vector<int> capable;
    for (int idx : frame.missing.missing_capable) capable.push_back(new_index[idx]);

    ModelFrame out = assemble(frame.y, std::move(x), std::move(z), std::move(capable),
                              std::move(x_names), std::move(z_names), frame.y_name);
    return out;
}

}  // namespace ipwqr
