#include "speccf/panel.hpp"

#include <algorithm>
#include <cmath>
#include <cstdlib>

#include "speccf/csv.hpp"
#include "speccf/errors.hpp"

namespace speccf {

namespace {

double parse_number(const std::string& s, Errc code, const char* what) {
  if (s.empty()) raise(code, std::string("empty ") + what);
  char* end = nullptr;
  double v = std::strtod(s.c_str(), &end);
  if (end != s.c_str() + s.size() || !std::isfinite(v))
    raise(code, std::string("cannot parse ") + what + " '" + s + "'");
  return v;
}

void check_time_grid(const Eigen::VectorXd& times) {
  int T = static_cast<int>(times.size());
  if (T < 2) raise(Errc::t0_out_of_range, "panel needs at least two time points");
  for (int t = 0; t < T; ++t) {
    if (times[t] != std::floor(times[t]))
      raise(Errc::non_uniform_time_step, "time labels must be integers");
  }
  double step = times[1] - times[0];
  if (step <= 0) raise(Errc::non_uniform_time_step, "times must be strictly increasing");
  for (int t = 2; t < T; ++t) {
    if (times[t] - times[t - 1] != step)
      raise(Errc::non_uniform_time_step, "time step is not constant");
  }
}

}  // namespace

int PanelData::unit_index(const std::string& name) const {
  auto it = std::find(unit_ids.begin(), unit_ids.end(), name);
  return it == unit_ids.end() ? -1 : static_cast<int>(it - unit_ids.begin());
}

double PanelData::time_step() const {
  return n_times() >= 2 ? times[1] - times[0] : 1.0;
}

PanelData make_panel(std::vector<std::string> unit_ids, Eigen::VectorXd times,
                     Eigen::MatrixXd values, int treated_index, int t0_index) {
  int n = static_cast<int>(unit_ids.size());
  int T = static_cast<int>(times.size());
  if (n < 2) raise(Errc::too_few_controls, "panel needs at least one control unit");
  if (values.rows() != n || values.cols() != T)
    raise(Errc::ragged_rows, "values matrix does not match unit/time counts");
  check_time_grid(times);
  if (treated_index < 0 || treated_index >= n)
    raise(Errc::unknown_unit, "treated index out of range");
  if (t0_index < 0 || t0_index >= T - 1)
    raise(Errc::t0_out_of_range,
          "t0 must leave at least one pre- and one post-treatment period");
  if (!values.allFinite()) raise(Errc::missing_cell, "non-finite value in panel");

  PanelData p;
  p.unit_ids = std::move(unit_ids);
  p.times = std::move(times);
  p.values = std::move(values);
  p.treated_index = treated_index;
  p.t0_index = t0_index;
  return p;
}

PanelData load_panel(const std::filesystem::path& path, const std::string& treated,
                     const std::string& t0) {
  auto rows = csv::read_file(path);
  if (rows.size() < 2) raise(Errc::ragged_rows, "panel CSV needs a header and unit rows");
  const auto& header = rows[0];
  if (header.size() < 3) raise(Errc::ragged_rows, "panel CSV needs at least two time columns");

  int T = static_cast<int>(header.size()) - 1;
  Eigen::VectorXd times(T);
  int t0_index = -1;
  for (int t = 0; t < T; ++t) {
    const std::string& label = header[t + 1];
    times[t] = parse_number(label, Errc::non_uniform_time_step, "time label");
    if (label == t0) t0_index = t;
  }
  if (t0_index < 0) {
    double want = parse_number(t0, Errc::t0_out_of_range, "t0 label");
    for (int t = 0; t < T; ++t)
      if (times[t] == want) t0_index = t;
  }
  if (t0_index < 0) raise(Errc::t0_out_of_range, "t0 '" + t0 + "' not found in header");

  int n = static_cast<int>(rows.size()) - 1;
  std::vector<std::string> unit_ids(n);
  Eigen::MatrixXd values(n, T);
  int treated_index = -1;
  for (int i = 0; i < n; ++i) {
    const auto& row = rows[i + 1];
    if (static_cast<int>(row.size()) != T + 1)
      raise(Errc::ragged_rows, "row " + std::to_string(i + 2) + " has " +
                                   std::to_string(row.size()) + " fields, expected " +
                                   std::to_string(T + 1));
    unit_ids[i] = row[0];
    if (row[0] == treated) treated_index = i;
    for (int t = 0; t < T; ++t) {
      if (row[t + 1].empty())
        raise(Errc::missing_cell, "blank cell for unit '" + row[0] + "' at time " +
                                      header[t + 1]);
      values(i, t) = parse_number(row[t + 1], Errc::missing_cell, "cell value");
    }
  }
  if (treated_index < 0) raise(Errc::unknown_unit, "treated unit '" + treated + "' not found");

  return make_panel(std::move(unit_ids), std::move(times), std::move(values),
                    treated_index, t0_index);
}

DemeanedPanel demean(const PanelData& panel, bool include_treated) {
  int n = panel.n_units();
  int T = panel.n_times();
  Eigen::VectorXd mean = Eigen::VectorXd::Zero(T);
  int count = 0;
  for (int i = 0; i < n; ++i) {
    if (!include_treated && i == panel.treated_index) continue;
    mean += panel.values.row(i).transpose();
    ++count;
  }
  mean /= static_cast<double>(count);

  DemeanedPanel d;
  d.base = panel;
  d.mean_series = mean;
  d.residuals = panel.values.rowwise() - mean.transpose();
  d.treated_in_mean = include_treated;
  return d;
}

PanelData select_units(const PanelData& panel, const std::vector<std::string>& keep,
                       const std::string& treated) {
  int T = panel.n_times();
  int m = static_cast<int>(keep.size());
  Eigen::MatrixXd values(m, T);
  int treated_index = -1;
  for (int i = 0; i < m; ++i) {
    int src = panel.unit_index(keep[i]);
    if (src < 0) raise(Errc::unknown_unit, "unit '" + keep[i] + "' not in panel");
    values.row(i) = panel.values.row(src);
    if (keep[i] == treated) treated_index = i;
  }
  if (treated_index < 0) raise(Errc::unknown_unit, "treated unit '" + treated + "' not kept");
  return make_panel(keep, panel.times, std::move(values), treated_index, panel.t0_index);
}

}  // namespace speccf
