#include "speccf/placebo.hpp"

#include "speccf/errors.hpp"

namespace speccf {

namespace {

PlaceboRecord record_from_run(const std::string& unit, const RunResult& run) {
  PlaceboRecord rec;
  rec.unit = unit;
  rec.ok = true;
  rec.chi2 = run.hyp.chi2;
  rec.log_upper_ratio = run.hyp.log_upper_ratio;
  rec.upper_ratio = run.hyp.upper_ratio;
  rec.log_bayes_factor = run.hyp.log_bayes_factor;
  rec.bayes_factor = run.hyp.bayes_factor;
  rec.effect_ref = run.effect_ref;
  return rec;
}

PlaceboRecord failure_record(const std::string& unit, const Error& e) {
  PlaceboRecord rec;
  rec.unit = unit;
  rec.ok = false;
  rec.error = e.what();
  return rec;
}

}  // namespace

PlaceboReport run_placebo(const PanelData& panel, const RunOptions& opts) {
  PlaceboReport report;
  const std::string treated = panel.unit_ids[panel.treated_index];

  RunOptions run_opts = opts;
  if (opts.shared_transform && opts.transform_mode == TransformMode::fit) {
    DemeanedPanel demeaned = demean(panel, opts.include_treated_in_mean);
    run_opts.loaded_transform = fit_pipeline(demeaned, true);
    run_opts.transform_mode = TransformMode::load;
  }

  PlaceboRecord treated_rec;
  try {
    RunResult main = run_single(panel, run_opts);
    treated_rec = record_from_run(treated, main);
    report.ref_time = main.panel.times[main.ref_index];
  } catch (const Error& e) {
    treated_rec = failure_record(treated, e);
    report.ref_time = opts.ref_time.value_or(panel.times[panel.n_times() - 1]);
  }
  treated_rec.is_treated = true;
  report.records.push_back(treated_rec);

  for (int u = 0; u < panel.n_units(); ++u) {
    if (u == panel.treated_index) continue;
    const std::string& unit = panel.unit_ids[u];
    try {
      std::vector<std::string> keep;
      for (int i = 0; i < panel.n_units(); ++i) {
        if (i == panel.treated_index && !opts.keep_true_treated) continue;
        keep.push_back(panel.unit_ids[i]);
      }
      PanelData sub = select_units(panel, keep, unit);
      report.records.push_back(record_from_run(unit, run_single(sub, run_opts)));
    } catch (const Error& e) {
      report.records.push_back(failure_record(unit, e));
      ++report.n_failed;
    }
  }

  report.treated_bayes_factor = treated_rec.ok ? treated_rec.bayes_factor : 0.0;
  report.max_control_bayes_factor = 0.0;
  for (const auto& rec : report.records) {
    if (rec.is_treated || !rec.ok) continue;
    if (rec.bayes_factor > report.max_control_bayes_factor) {
      report.max_control_bayes_factor = rec.bayes_factor;
      report.max_control_unit = rec.unit;
    }
  }
  report.ratio_of_max = report.max_control_bayes_factor > 0.0
                            ? report.treated_bayes_factor / report.max_control_bayes_factor
                            : 0.0;
  return report;
}

}  // namespace speccf
