#pragma once

#include <Eigen/Dense>
#include <filesystem>
#include <string>
#include <vector>

namespace speccf {

// Balanced panel: one row per unit, one column per time point.
// Time labels are integers on a uniform grid. t0_index marks the last
// pre-treatment period, so times[0..t0_index] are pre and the rest post.
struct PanelData {
  std::vector<std::string> unit_ids;
  Eigen::VectorXd times;
  Eigen::MatrixXd values;  // unit x time
  int treated_index = -1;
  int t0_index = -1;

  int n_units() const { return static_cast<int>(unit_ids.size()); }
  int n_times() const { return static_cast<int>(times.size()); }
  int n_pre() const { return t0_index + 1; }
  int n_post() const { return n_times() - n_pre(); }
  int unit_index(const std::string& name) const;  // -1 if absent
  double time_step() const;
};

// Panel after subtracting the cross-unit mean at each time point.
struct DemeanedPanel {
  PanelData base;
  Eigen::VectorXd mean_series;  // per-time mean that was removed
  Eigen::MatrixXd residuals;    // same shape as base.values
  bool treated_in_mean = false;
};

// Reads a wide-format CSV: header "unit,<t1>,<t2>,..." then one row per
// unit. treated and t0 are labels appearing in the first column / header.
PanelData load_panel(const std::filesystem::path& path, const std::string& treated,
                     const std::string& t0);

// Builds a panel in memory; validates shapes and the time grid.
PanelData make_panel(std::vector<std::string> unit_ids, Eigen::VectorXd times,
                     Eigen::MatrixXd values, int treated_index, int t0_index);

// Removes the per-time cross-unit mean. The treated unit is excluded from
// the mean unless include_treated is set.
DemeanedPanel demean(const PanelData& panel, bool include_treated = false);

// Sub-panel restricted to the named units, keeping this panel's time grid
// and re-resolving treated/t0 against the survivors.
PanelData select_units(const PanelData& panel, const std::vector<std::string>& keep,
                       const std::string& treated);

}  // namespace speccf
