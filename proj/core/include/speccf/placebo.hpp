#pragma once

#include <string>
#include <vector>

#include "speccf/analysis.hpp"

namespace speccf {

struct PlaceboRecord {
  std::string unit;
  bool is_treated = false;
  bool ok = false;
  std::string error;        // error code and message when ok is false
  double chi2 = 0.0;
  double log_upper_ratio = 0.0;
  double upper_ratio = 0.0;
  double log_bayes_factor = 0.0;
  double bayes_factor = 0.0;
  double effect_ref = 0.0;  // counterfactual minus observed at the reference time
};

struct PlaceboReport {
  std::vector<PlaceboRecord> records;  // treated first, then controls in panel order
  double ref_time = 0.0;
  double treated_bayes_factor = 0.0;
  double max_control_bayes_factor = 0.0;
  std::string max_control_unit;
  double ratio_of_max = 0.0;  // treated factor over best control factor
  int n_failed = 0;
};

// Re-runs the full analysis once per control unit cast as pseudo-treated.
// Each run drops the pseudo-treated unit from its own prior pool, and by
// default drops the genuinely treated unit from the panel entirely
// (opts.keep_true_treated retains it as a control). Per-unit failures are
// recorded, never fatal.
PlaceboReport run_placebo(const PanelData& panel, const RunOptions& opts);

}  // namespace speccf
