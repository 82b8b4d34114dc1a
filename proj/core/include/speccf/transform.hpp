#pragma once

#include <Eigen/Dense>
#include <filesystem>
#include <string>
#include <vector>

#include "speccf/panel.hpp"

namespace speccf {

// Standard Yeo-Johnson transform, stable over all four branches.
double yeo_johnson(double x, double lambda);
double yeo_johnson_inverse(double y, double lambda);
double yeo_johnson_log_deriv(double x, double lambda);

// Bijective map to approximately standard-normal space:
//   z = (yeo_johnson(a * asinh(x / a), lambda) - loc) / scale
// Large arcsinh_scale makes the first stage an identity in practice.
struct TransformPipeline {
  double arcsinh_scale = 1e12;
  double yj_lambda = 1.0;
  double loc = 0.0;
  double scale = 1.0;

  double forward(double x) const;
  double inverse(double z) const;
  double log_jacobian(double x) const;  // log dz/dx, finite for finite x

  static TransformPipeline identity();
};

struct GaussianizedPanel {
  TransformPipeline pipeline;
  Eigen::MatrixXd z;            // transformed residuals, unit x time
  Eigen::VectorXd time_scale;   // per-time divisor; empty when disabled
  bool fit_warning = false;     // pooled control z far from mean 0 / var 1
  std::string fit_message;
};

// Maximum-likelihood fit of (a, lambda) on pooled control residuals, with
// loc/scale profiled out as the pooled mean/std of the nonlinear output.
// Coarse log-spaced grid in a and linear grid in lambda, then Nelder-Mead
// refinement in (log a, lambda).
TransformPipeline fit_pipeline(const DemeanedPanel& demeaned, bool controls_only = true);

// Applies the pipeline elementwise; flags (but does not reject) pooled
// control output whose mean strays past 0.05 or variance past 0.1 from 1.
GaussianizedPanel gaussianize(const DemeanedPanel& demeaned, const TransformPipeline& p,
                              bool per_time_scale = false);

// Negative log-likelihood of samples under a standard normal in z-space,
// including the transform Jacobian. Used to compare candidate pipelines.
double pipeline_nll(const TransformPipeline& p, const Eigen::VectorXd& x);

// JSON round trip for reproducing a fitted transform across runs.
std::string pipeline_to_json(const TransformPipeline& p);
TransformPipeline pipeline_from_json(const std::string& text);
TransformPipeline load_pipeline(const std::filesystem::path& path);
void save_pipeline(const TransformPipeline& p, const std::filesystem::path& path);

}  // namespace speccf
