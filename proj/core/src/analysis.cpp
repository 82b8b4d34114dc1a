#include "speccf/analysis.hpp"

#include <algorithm>
#include <cmath>
#include <initializer_list>

#include "speccf/csv.hpp"
#include "speccf/errors.hpp"

namespace speccf {

namespace {

TransformPipeline resolve_transform(const DemeanedPanel& demeaned, const RunOptions& opts) {
  switch (opts.transform_mode) {
    case TransformMode::none:
      return TransformPipeline::identity();
    case TransformMode::load:
      return opts.loaded_transform;
    case TransformMode::fit:
    default:
      return fit_pipeline(demeaned, true);
  }
}

// Rows of z belonging to the prior pool: every unit except the listed ones.
Eigen::MatrixXd pool_rows(const Eigen::MatrixXd& z, std::initializer_list<int> skip) {
  std::vector<int> keep;
  for (int i = 0; i < z.rows(); ++i)
    if (std::find(skip.begin(), skip.end(), i) == skip.end()) keep.push_back(i);
  if (keep.size() < 2) raise(Errc::too_few_controls, "prior pool needs >= 2 units");
  Eigen::MatrixXd out(static_cast<int>(keep.size()), z.cols());
  for (size_t r = 0; r < keep.size(); ++r) out.row(static_cast<int>(r)) = z.row(keep[r]);
  return out;
}

// Observation vector on the (possibly padded) solve domain.
Eigen::VectorXd padded_obs(const Eigen::VectorXd& z_row, int T_solve) {
  Eigen::VectorXd z = Eigen::VectorXd::Zero(T_solve);
  z.head(z_row.size()) = z_row;
  return z;
}

// Control series padded with zeros for spectrum estimation; the variance
// dilution of the padding is compensated so per-mode power is preserved.
SpectralPrior padded_prior(const Eigen::MatrixXd& pool, const HarmonicBasis& basis,
                           int T_data) {
  int T_solve = basis.T;
  if (T_solve == T_data) return estimate_prior(pool, basis);
  Eigen::MatrixXd padded = Eigen::MatrixXd::Zero(pool.rows(), T_solve);
  padded.leftCols(T_data) = pool;
  SpectralPrior prior = estimate_prior(padded, basis);
  prior.var *= static_cast<double>(T_solve) / T_data;
  return prior;
}

PostWindow make_window(const PanelData& panel, const DemeanedPanel& demeaned,
                       const GaussianizedPanel& gauss, const CounterfactualResult& cf,
                       const RunOptions& opts) {
  int T = panel.n_times();
  int K = T - panel.n_pre();
  int start = panel.t0_index + 1;

  PostWindow win;
  win.times = panel.times.segment(start, K);
  win.z_obs = gauss.z.row(panel.treated_index).segment(start, K).transpose();
  win.z_cf = cf.z_hat.segment(start, K);
  win.C_post = cf.C_z.block(start, start, K, K);
  if (opts.add_post_noise)
    win.C_post += opts.epsilon * opts.epsilon * Eigen::MatrixXd::Identity(K, K);
  win.d_obs = panel.values.row(panel.treated_index).segment(start, K).transpose();
  win.d_cf = cf.d_hat.segment(start, K);
  win.mean_series = demeaned.mean_series.segment(start, K);
  if (gauss.time_scale.size() > 0) win.time_scale = gauss.time_scale.segment(start, K);
  return win;
}

PriorBox build_box(const std::vector<PolyModel>& fits, const RunOptions& opts) {
  PriorBox box;
  if (opts.box_alpha && opts.box_beta) {
    box.alpha_lo = opts.box_alpha->first;
    box.alpha_hi = opts.box_alpha->second;
    box.beta_lo = opts.box_beta->first;
    box.beta_hi = opts.box_beta->second;
    box.require_reduction = opts.require_reduction;
    box.require_nonnegative = opts.require_nonnegative;
    return box;
  }
  box = fit_prior_box(fits, opts.prior_hull, opts.poly_order, opts.require_reduction,
                      opts.require_nonnegative);
  if (opts.box_alpha) {
    box.alpha_lo = opts.box_alpha->first;
    box.alpha_hi = opts.box_alpha->second;
    box.hull.clear();
  }
  if (opts.box_beta) {
    box.beta_lo = opts.box_beta->first;
    box.beta_hi = opts.box_beta->second;
    box.hull.clear();
  }
  return box;
}

void finish_run(RunResult& run, const RunOptions& opts, const HarmonicBasis& basis) {
  const PanelData& panel = run.panel;
  run.window = make_window(panel, run.demeaned, run.gauss, run.cf, opts);
  run.control_fits = fit_controls(run.demeaned, run.gauss, basis, opts);
  run.box = build_box(run.control_fits, opts);
  run.hyp = bayes_factor(run.window, run.box, opts.grid, run.gauss.pipeline, &run.surface);

  double ref = opts.ref_time.value_or(panel.times[panel.n_times() - 1]);
  run.ref_index = -1;
  for (int t = 0; t < panel.n_times(); ++t)
    if (panel.times[t] == ref) run.ref_index = t;
  if (run.ref_index < 0)
    raise(Errc::t0_out_of_range, "reference time " + csv::format_double(ref) +
                                     " not in panel");
  run.effect_ref = run.cf.d_hat[run.ref_index] - panel.values(panel.treated_index, run.ref_index);
}

}  // namespace

std::vector<PolyModel> fit_controls(const DemeanedPanel& demeaned,
                                    const GaussianizedPanel& gauss,
                                    const HarmonicBasis& basis, const RunOptions& opts) {
  const PanelData& panel = demeaned.base;
  int T = panel.n_times();
  int K = T - panel.n_pre();
  int start = panel.t0_index + 1;
  int T_solve = basis.T;
  NoiseModel noise = NoiseModel::pre_window(T_solve, panel.t0_index, opts.epsilon);

  Eigen::MatrixXd design(K, opts.poly_order);
  for (int j = 0; j < K; ++j) {
    double k = j + 1.0;
    design(j, 0) = k;
    if (opts.poly_order >= 2) design(j, 1) = k * k;
  }

  std::vector<PolyModel> fits;
  for (int u = 0; u < panel.n_units(); ++u) {
    if (u == panel.treated_index) continue;
    SpectralPrior prior =
        padded_prior(pool_rows(gauss.z, {u, panel.treated_index}), basis, T);
    Eigen::VectorXd z_u = padded_obs(gauss.z.row(u).transpose(), T_solve);
    Eigen::VectorXd s = solve_map(prior, basis, z_u, noise);
    Eigen::VectorXd z_hat = synthesize(basis, s).head(T);

    bool scaled = gauss.time_scale.size() > 0;
    Eigen::VectorXd excess(K);
    for (int j = 0; j < K; ++j) {
      int t = start + j;
      double z = scaled ? z_hat[t] * gauss.time_scale[t] : z_hat[t];
      double d_cf = gauss.pipeline.inverse(z) + demeaned.mean_series[t];
      excess[j] = panel.values(u, t) - d_cf;
    }
    Eigen::VectorXd theta = design.colPivHouseholderQr().solve(excess);
    PolyModel fit;
    fit.alpha = theta[0];
    fit.beta = opts.poly_order >= 2 ? theta[1] : 0.0;
    fits.push_back(fit);
  }
  return fits;
}

RunResult run_single(const PanelData& panel, const RunOptions& opts) {
  if (!(opts.epsilon > 0.0)) raise(Errc::bad_config, "epsilon must be positive");
  if (opts.pad < 1) raise(Errc::bad_config, "pad factor must be >= 1");

  RunResult run;
  run.panel = panel;
  run.demeaned = demean(panel, opts.include_treated_in_mean);
  TransformPipeline pipeline = resolve_transform(run.demeaned, opts);
  run.gauss = gaussianize(run.demeaned, pipeline, opts.per_time_scale);

  int T = panel.n_times();
  int T_solve = T * opts.pad;
  HarmonicBasis basis = HarmonicBasis::make(T_solve);
  run.prior = padded_prior(pool_rows(run.gauss.z, {panel.treated_index}), basis, T);

  NoiseModel noise = NoiseModel::pre_window(T_solve, panel.t0_index, opts.epsilon);
  Eigen::VectorXd z_obs =
      padded_obs(run.gauss.z.row(panel.treated_index).transpose(), T_solve);

  run.cf.s_hat = solve_map(run.prior, basis, z_obs, noise);
  auto [C_s, C_z] = posterior_covariance(run.prior, basis, noise);
  run.cf.C_s = std::move(C_s);
  run.cf.z_hat = synthesize(basis, run.cf.s_hat).head(T);
  run.cf.C_z = C_z.topLeftCorner(T, T);
  to_data_space(run.cf, pipeline, run.demeaned.mean_series, run.gauss.time_scale);

  finish_run(run, opts, basis);
  return run;
}

RunResult run_joint(const PanelData& primary, const std::vector<PanelData>& covariates,
                    const RunOptions& opts) {
  if (covariates.empty()) return run_single(primary, opts);
  if (!(opts.epsilon > 0.0)) raise(Errc::bad_config, "epsilon must be positive");
  if (opts.pad != 1)
    raise(Errc::bad_config, "padding is not supported for joint runs");

  for (const auto& cov : covariates) {
    if (cov.n_units() != primary.n_units() || cov.n_times() != primary.n_times() ||
        cov.unit_ids != primary.unit_ids || cov.times != primary.times)
      raise(Errc::panel_mismatch, "covariate panel does not match the primary panel");
  }

  RunResult run;
  run.panel = primary;
  run.demeaned = demean(primary, opts.include_treated_in_mean);
  TransformPipeline pipeline = resolve_transform(run.demeaned, opts);
  run.gauss = gaussianize(run.demeaned, pipeline, opts.per_time_scale);

  int T = primary.n_times();
  int k = 1 + static_cast<int>(covariates.size());
  HarmonicBasis basis = HarmonicBasis::make(T);

  std::vector<DemeanedPanel> dem_cov;
  std::vector<GaussianizedPanel> gauss_cov;
  std::vector<Eigen::MatrixXd> z_pool(k);
  z_pool[0] = pool_rows(run.gauss.z, {primary.treated_index});
  for (int a = 1; a < k; ++a) {
    dem_cov.push_back(demean(covariates[a - 1], opts.include_treated_in_mean));
    TransformPipeline p_cov = resolve_transform(dem_cov.back(), opts);
    gauss_cov.push_back(gaussianize(dem_cov.back(), p_cov, opts.per_time_scale));
    z_pool[a] = pool_rows(gauss_cov.back().z, {primary.treated_index});
  }

  run.block_prior = estimate_block_prior(z_pool, basis);

  // The primary is observed up to the treatment time, covariates always.
  std::vector<NoiseModel> noise;
  noise.push_back(NoiseModel::pre_window(T, primary.t0_index, opts.epsilon));
  for (int a = 1; a < k; ++a) noise.push_back(NoiseModel::full_window(T, opts.epsilon));

  std::vector<Eigen::VectorXd> z_obs;
  z_obs.push_back(run.gauss.z.row(primary.treated_index).transpose());
  for (int a = 1; a < k; ++a)
    z_obs.push_back(gauss_cov[a - 1].z.row(primary.treated_index).transpose());

  std::vector<Eigen::VectorXd> s_all = solve_map_joint(*run.block_prior, basis, z_obs, noise);
  Eigen::MatrixXd C_joint = joint_posterior_cov(*run.block_prior, basis, noise);

  run.cf.s_hat = s_all[0];
  run.cf.z_hat = synthesize(basis, run.cf.s_hat);
  run.cf.C_s = C_joint.topLeftCorner(T, T);
  run.cf.C_z = basis.basis.transpose() * run.cf.C_s * basis.basis;
  run.cf.C_z = 0.5 * (run.cf.C_z + run.cf.C_z.transpose()).eval();
  to_data_space(run.cf, pipeline, run.demeaned.mean_series, run.gauss.time_scale);

  // Single-variable prior over the primary, for reporting and control fits.
  run.prior = estimate_prior(z_pool[0], basis);

  finish_run(run, opts, basis);
  return run;
}

}  // namespace speccf
