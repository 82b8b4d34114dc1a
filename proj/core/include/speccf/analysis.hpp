#pragma once

#include <optional>
#include <string>
#include <vector>

#include "speccf/hypothesis.hpp"
#include "speccf/panel.hpp"
#include "speccf/spectral.hpp"
#include "speccf/transform.hpp"
#include "speccf/wiener.hpp"

namespace speccf {

enum class TransformMode { fit, none, load };

struct RunOptions {
  double epsilon = 1e-3;
  TransformMode transform_mode = TransformMode::fit;
  TransformPipeline loaded_transform;  // used when transform_mode == load
  int poly_order = 2;                  // 1 = linear correction only
  int grid = 201;                      // quadrature resolution per axis
  bool prior_hull = false;             // convex hull instead of bounding box
  bool include_treated_in_mean = false;
  bool per_time_scale = false;
  bool require_reduction = true;       // alternative must undershoot the counterfactual
  bool require_nonnegative = true;     // model must stay >= 0 in data units
  bool add_post_noise = false;         // add epsilon^2 to the window covariance
  int pad = 1;                         // internal series length multiplier
  std::optional<double> ref_time;      // reporting time; default last period
  std::optional<std::pair<double, double>> box_alpha;  // manual box override
  std::optional<std::pair<double, double>> box_beta;

  // placebo sweep only
  bool shared_transform = false;       // reuse one global transform fit
  bool keep_true_treated = false;      // leave the real treated unit in pools
};

// Everything one end-to-end run produces.
struct RunResult {
  PanelData panel;
  DemeanedPanel demeaned;
  GaussianizedPanel gauss;
  SpectralPrior prior;                      // primary-variable prior
  std::optional<BlockSpectralPrior> block_prior;  // set on joint runs
  CounterfactualResult cf;
  PostWindow window;
  std::vector<PolyModel> control_fits;
  PriorBox box;
  HypothesisResult hyp;
  std::vector<SurfacePoint> surface;
  int ref_index = -1;                       // reporting time index
  double effect_ref = 0.0;                  // d_cf - d_obs at the reporting time
};

// Full single-variable pipeline: demean, transform, spectral prior,
// counterfactual solve, prior box from per-control fits, hypothesis tests.
RunResult run_single(const PanelData& panel, const RunOptions& opts);

// Joint run with covariate panels observed through the full window. The
// counterfactual and tests are for the primary panel; covariates inform it
// through per-frequency cross-covariance blocks.
RunResult run_joint(const PanelData& primary, const std::vector<PanelData>& covariates,
                    const RunOptions& opts);

// Leave-self-out linear/quadratic fit of each control's post-window excess
// over its own counterfactual; the raw material for the prior box.
std::vector<PolyModel> fit_controls(const DemeanedPanel& demeaned,
                                    const GaussianizedPanel& gauss,
                                    const HarmonicBasis& basis, const RunOptions& opts);

}  // namespace speccf
