#pragma once

#include <Eigen/Dense>
#include <optional>
#include <vector>

#include "speccf/transform.hpp"

namespace speccf {

// Post-treatment slice of a solved counterfactual, everything the
// hypothesis tests need: observed and predicted series in both spaces,
// the posterior covariance sub-block, and the pieces required to map a
// candidate model from data units into z-space.
struct PostWindow {
  Eigen::VectorXd times;        // time labels, length K
  Eigen::VectorXd z_obs;
  Eigen::VectorXd z_cf;
  Eigen::MatrixXd C_post;       // K x K posterior covariance in z-space
  Eigen::VectorXd d_obs;
  Eigen::VectorXd d_cf;
  Eigen::VectorXd mean_series;  // removed cross-unit mean on the window
  Eigen::VectorXd time_scale;   // per-time z divisor; empty when unused

  int length() const { return static_cast<int>(times.size()); }
};

// Quadratic-then-linear correction added to the counterfactual, measured
// in data units per period; vanishes at the treatment time by design.
struct PolyModel {
  double alpha = 0.0;
  double beta = 0.0;
};

// Flat prior over (alpha, beta): a bounding box (optionally tightened to
// the convex hull of the control fits) plus admissibility predicates that
// zero out grid nodes at quadrature time.
struct PriorBox {
  double alpha_lo = 0.0, alpha_hi = 0.0;
  double beta_lo = 0.0, beta_hi = 0.0;
  std::vector<Eigen::Vector2d> hull;  // empty = plain box
  bool require_reduction = false;     // model strictly below counterfactual
  bool require_nonnegative = true;    // model >= 0 in data units

  bool degenerate_at_null() const {
    return alpha_lo == 0.0 && alpha_hi == 0.0 && beta_lo == 0.0 && beta_hi == 0.0;
  }
};

struct HypothesisResult {
  double chi2 = 0.0;
  double upper_ratio = 1.0;       // exp(chi2/2), clamped at DBL_MAX
  double log_upper_ratio = 0.0;
  double log_pA = 0.0;            // log-likelihood of the null (counterfactual)
  double log_pB = 0.0;            // log marginal likelihood over the prior box
  double bayes_factor = 1.0;
  double log_bayes_factor = 0.0;
  double ml_ratio = 1.0;          // best admissible grid node vs null
  double log_ml_ratio = 0.0;
  PolyModel ml_point;
  double log_data_jacobian = 0.0; // reported separately; cancels in ratios
};

// Rows of the exported likelihood-ratio surface.
struct SurfacePoint {
  double alpha = 0.0;
  double beta = 0.0;
  double log_ratio = 0.0;  // log L(alpha,beta) - log pA
  bool admissible = false;
};

// Gaussian over the window with fixed covariance; mean varies per model.
// Falls back to a 1e-10 diagonal jitter once before giving up.
class WindowGaussian {
 public:
  explicit WindowGaussian(const Eigen::MatrixXd& C_post);
  double chi2(const Eigen::VectorXd& resid) const;
  double log_density(const Eigen::VectorXd& resid) const;
  double log_norm() const { return log_norm_; }

 private:
  Eigen::LDLT<Eigen::MatrixXd> ldlt_;
  double log_norm_ = 0.0;
};

// Straight-line family between counterfactual (alpha=0) and observation
// (alpha=1) in data units.
Eigen::VectorXd interpolated_model(const PostWindow& win, double alpha);

// chi2 distance between observation and counterfactual under the posterior,
// and the induced bound exp(chi2/2) on any likelihood ratio.
struct UpperLimit {
  double chi2 = 0.0;
  double upper_ratio = 1.0;
  double log_upper_ratio = 0.0;
};
UpperLimit upper_limit_ratio(const PostWindow& win);

// Counterfactual plus alpha*k + beta*k^2 at the k-th post-treatment period.
Eigen::VectorXd poly_model(const PostWindow& win, const PolyModel& m);

// Gaussian log-likelihood of the observed window under a candidate model
// series in data units (mapped through the transform into z-space).
double model_log_likelihood(const PostWindow& win, const Eigen::VectorXd& model,
                            const TransformPipeline& pipeline);

// log |dz/dd| summed over the window at the observed data; identical for
// every model, so it cancels in likelihood ratios.
double log_data_jacobian(const PostWindow& win, const TransformPipeline& pipeline);

// Envelope (or convex hull) of per-control polynomial fits.
PriorBox fit_prior_box(const std::vector<PolyModel>& control_fits, bool use_hull,
                       int poly_order, bool require_reduction, bool require_nonnegative);

// Marginal likelihood of the polynomial family over the prior box by
// trapezoid quadrature in log space, plus the point statistics.
HypothesisResult bayes_factor(const PostWindow& win, const PriorBox& box, int resolution,
                              const TransformPipeline& pipeline,
                              std::vector<SurfacePoint>* surface = nullptr);

}  // namespace speccf
