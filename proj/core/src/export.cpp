#include "speccf/export.hpp"

#include <string>

#include "json.hpp"
#include "speccf/csv.hpp"

namespace speccf {

namespace {

using csv::format_double;

std::string bool_field(bool b) { return b ? "1" : "0"; }

nlohmann::json transform_json(const TransformPipeline& p) {
  return nlohmann::json::parse(pipeline_to_json(p));
}

}  // namespace

void write_counterfactual_csv(const std::filesystem::path& path, const RunResult& run) {
  std::string out = "time,d_hat,band_lo,band_hi,observed,national_mean\n";
  const PanelData& panel = run.panel;
  for (int t = 0; t < panel.n_times(); ++t) {
    out += csv::join_row({format_double(panel.times[t]), format_double(run.cf.d_hat[t]),
                          format_double(run.cf.band_lo[t]), format_double(run.cf.band_hi[t]),
                          format_double(panel.values(panel.treated_index, t)),
                          format_double(run.demeaned.mean_series[t])});
    out += '\n';
  }
  csv::atomic_write(path, out);
}

void write_summary_json(const std::filesystem::path& path, const RunResult& run,
                        const RunOptions& opts) {
  const PanelData& panel = run.panel;
  nlohmann::json j;
  j["treated"] = panel.unit_ids[panel.treated_index];
  j["t0"] = panel.times[panel.t0_index];
  j["n_units"] = panel.n_units();
  j["n_times"] = panel.n_times();
  j["epsilon"] = opts.epsilon;
  j["ref_time"] = panel.times[run.ref_index];
  j["effect_ref"] = run.effect_ref;
  j["observed_ref"] = panel.values(panel.treated_index, run.ref_index);
  j["counterfactual_ref"] = run.cf.d_hat[run.ref_index];
  j["band_ref"] = {run.cf.band_lo[run.ref_index], run.cf.band_hi[run.ref_index]};
  j["transform"] = transform_json(run.gauss.pipeline);
  j["transform_warning"] = run.gauss.fit_warning ? nlohmann::json(run.gauss.fit_message)
                                                 : nlohmann::json(nullptr);
  nlohmann::json effects = nlohmann::json::array();
  for (int t = panel.t0_index + 1; t < panel.n_times(); ++t) {
    effects.push_back({{"time", panel.times[t]},
                       {"effect", run.cf.d_hat[t] - panel.values(panel.treated_index, t)},
                       {"band_lo", run.cf.band_lo[t]},
                       {"band_hi", run.cf.band_hi[t]}});
  }
  j["effects"] = std::move(effects);
  csv::atomic_write(path, j.dump(2) + "\n");
}

void write_hypothesis_json(const std::filesystem::path& path, const RunResult& run,
                           const RunOptions& opts) {
  nlohmann::json j;
  j["chi2"] = run.hyp.chi2;
  j["upper_ratio"] = run.hyp.upper_ratio;
  j["log_upper_ratio"] = run.hyp.log_upper_ratio;
  j["log_pA"] = run.hyp.log_pA;
  j["log_pB"] = run.hyp.log_pB;
  j["bayes_factor"] = run.hyp.bayes_factor;
  j["log_bayes_factor"] = run.hyp.log_bayes_factor;
  j["ml_ratio"] = run.hyp.ml_ratio;
  j["log_ml_ratio"] = run.hyp.log_ml_ratio;
  j["ml_alpha"] = run.hyp.ml_point.alpha;
  j["ml_beta"] = run.hyp.ml_point.beta;
  j["log_data_jacobian"] = run.hyp.log_data_jacobian;
  j["poly_order"] = opts.poly_order;
  j["grid"] = opts.grid;
  nlohmann::json box;
  box["alpha"] = {run.box.alpha_lo, run.box.alpha_hi};
  box["beta"] = {run.box.beta_lo, run.box.beta_hi};
  box["require_reduction"] = run.box.require_reduction;
  box["require_nonnegative"] = run.box.require_nonnegative;
  nlohmann::json hull = nlohmann::json::array();
  for (const auto& v : run.box.hull) hull.push_back({v[0], v[1]});
  box["hull"] = std::move(hull);
  j["box"] = std::move(box);
  nlohmann::json fits = nlohmann::json::array();
  for (const auto& f : run.control_fits) fits.push_back({{"alpha", f.alpha}, {"beta", f.beta}});
  j["control_fits"] = std::move(fits);
  csv::atomic_write(path, j.dump(2) + "\n");
}

void write_surface_csv(const std::filesystem::path& path, const RunResult& run) {
  std::string out = "alpha,beta,log_ratio,admissible\n";
  for (const auto& p : run.surface) {
    out += csv::join_row({format_double(p.alpha), format_double(p.beta),
                          format_double(p.log_ratio), bool_field(p.admissible)});
    out += '\n';
  }
  csv::atomic_write(path, out);
}

void write_spectrum_csv(const std::filesystem::path& path, const SpectralPrior& prior) {
  std::string out = "nu,tau\n";
  int last = -1;
  for (size_t r = 0; r < prior.freqs.size(); ++r) {
    if (prior.freqs[r] == last) continue;
    last = prior.freqs[r];
    out += csv::join_row({std::to_string(last), format_double(prior.var[r])});
    out += '\n';
  }
  csv::atomic_write(path, out);
}

void write_block_spectrum_csv(const std::filesystem::path& path,
                              const BlockSpectralPrior& prior) {
  int k = prior.k;
  std::string out = "nu";
  auto name = [](int a, int b) {
    return std::string("tau_") + static_cast<char>('a' + a) + static_cast<char>('a' + b);
  };
  for (int a = 0; a < k; ++a) out += "," + name(a, a);
  for (int a = 0; a < k; ++a)
    for (int b = a + 1; b < k; ++b) out += "," + name(a, b);
  out += '\n';
  for (size_t f = 0; f < prior.freqs.size(); ++f) {
    out += std::to_string(prior.freqs[f]);
    for (int a = 0; a < k; ++a) out += "," + format_double(prior.blocks[f](a, a));
    for (int a = 0; a < k; ++a)
      for (int b = a + 1; b < k; ++b) out += "," + format_double(prior.blocks[f](a, b));
    out += '\n';
  }
  csv::atomic_write(path, out);
}

void write_placebo_csv(const std::filesystem::path& path, const PlaceboReport& report) {
  std::string out = "unit,is_treated,ok,chi2,upper_ratio,bayes_factor,effect_ref,error\n";
  for (const auto& rec : report.records) {
    out += csv::join_row({rec.unit, bool_field(rec.is_treated), bool_field(rec.ok),
                          format_double(rec.chi2), format_double(rec.upper_ratio),
                          format_double(rec.bayes_factor), format_double(rec.effect_ref),
                          rec.error});
    out += '\n';
  }
  csv::atomic_write(path, out);
}

void write_placebo_json(const std::filesystem::path& path, const PlaceboReport& report) {
  nlohmann::json j;
  j["ref_time"] = report.ref_time;
  j["treated_bayes_factor"] = report.treated_bayes_factor;
  j["max_control_bayes_factor"] = report.max_control_bayes_factor;
  j["max_control_unit"] = report.max_control_unit;
  j["ratio_of_max"] = report.ratio_of_max;
  j["n_failed"] = report.n_failed;
  nlohmann::json records = nlohmann::json::array();
  for (const auto& rec : report.records) {
    nlohmann::json r;
    r["unit"] = rec.unit;
    r["is_treated"] = rec.is_treated;
    r["ok"] = rec.ok;
    if (rec.ok) {
      r["chi2"] = rec.chi2;
      r["upper_ratio"] = rec.upper_ratio;
      r["log_upper_ratio"] = rec.log_upper_ratio;
      r["bayes_factor"] = rec.bayes_factor;
      r["log_bayes_factor"] = rec.log_bayes_factor;
      r["effect_ref"] = rec.effect_ref;
    } else {
      r["error"] = rec.error;
    }
    records.push_back(std::move(r));
  }
  j["records"] = std::move(records);
  csv::atomic_write(path, j.dump(2) + "\n");
}

std::string error_json(const std::string& code, const std::string& message) {
  nlohmann::json j;
  j["error"] = {{"code", code}, {"message", message}};
  return j.dump() + "\n";
}

}  // namespace speccf
