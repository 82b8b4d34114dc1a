#include "speccf/hypothesis.hpp"

#include <algorithm>
#include <cfloat>
#include <cmath>
#include <limits>

#include "speccf/errors.hpp"

namespace speccf {

namespace {

constexpr double kNegInf = -std::numeric_limits<double>::infinity();

double clamp_exp(double log_value) {
  double v = std::exp(log_value);
  return std::isinf(v) ? DBL_MAX : v;
}

double log_sum_exp(const std::vector<double>& xs) {
  double m = kNegInf;
  for (double x : xs) m = std::max(m, x);
  if (m == kNegInf) return kNegInf;
  double s = 0.0;
  for (double x : xs) s += std::exp(x - m);
  return m + std::log(s);
}

// z-space image of a data-space model series on the window.
Eigen::VectorXd model_to_z(const PostWindow& win, const Eigen::VectorXd& model,
                           const TransformPipeline& pipeline) {
  int K = win.length();
  if (model.size() != K) raise(Errc::length_mismatch, "model length != window length");
  bool scaled = win.time_scale.size() > 0;
  Eigen::VectorXd z(K);
  for (int j = 0; j < K; ++j) {
    if (!std::isfinite(model[j])) raise(Errc::non_finite_model, "model value not finite");
    double v = pipeline.forward(model[j] - win.mean_series[j]);
    if (scaled) v /= win.time_scale[j];
    if (!std::isfinite(v)) raise(Errc::non_finite_model, "transformed model overflowed");
    z[j] = v;
  }
  return z;
}

std::vector<Eigen::Vector2d> convex_hull(std::vector<Eigen::Vector2d> pts) {
  std::sort(pts.begin(), pts.end(), [](const auto& a, const auto& b) {
    return a[0] < b[0] || (a[0] == b[0] && a[1] < b[1]);
  });
  pts.erase(std::unique(pts.begin(), pts.end(),
                        [](const auto& a, const auto& b) { return a == b; }),
            pts.end());
  int n = static_cast<int>(pts.size());
  if (n < 3) return {};
  auto cross = [](const Eigen::Vector2d& o, const Eigen::Vector2d& a,
                  const Eigen::Vector2d& b) {
    return (a[0] - o[0]) * (b[1] - o[1]) - (a[1] - o[1]) * (b[0] - o[0]);
  };
  std::vector<Eigen::Vector2d> hull(2 * n);
  int k = 0;
  for (int i = 0; i < n; ++i) {
    while (k >= 2 && cross(hull[k - 2], hull[k - 1], pts[i]) <= 0) --k;
    hull[k++] = pts[i];
  }
  int lower = k + 1;
  for (int i = n - 2; i >= 0; --i) {
    while (k >= lower && cross(hull[k - 2], hull[k - 1], pts[i]) <= 0) --k;
    hull[k++] = pts[i];
  }
  hull.resize(k - 1);
  return hull.size() >= 3 ? hull : std::vector<Eigen::Vector2d>{};
}

bool inside_hull(const std::vector<Eigen::Vector2d>& hull, double x, double y) {
  int n = static_cast<int>(hull.size());
  for (int i = 0; i < n; ++i) {
    const auto& a = hull[i];
    const auto& b = hull[(i + 1) % n];
    double cross = (b[0] - a[0]) * (y - a[1]) - (b[1] - a[1]) * (x - a[0]);
    if (cross < -1e-12) return false;
  }
  return true;
}

}  // namespace

WindowGaussian::WindowGaussian(const Eigen::MatrixXd& C_post) {
  int K = static_cast<int>(C_post.rows());
  if (C_post.cols() != K) raise(Errc::length_mismatch, "covariance not square");

  auto try_factor = [&](const Eigen::MatrixXd& C) {
    ldlt_.compute(C);
    if (ldlt_.info() != Eigen::Success) return false;
    Eigen::VectorXd d = ldlt_.vectorD();
    return bool(d.minCoeff() > 0.0 && d.allFinite());
  };

  if (!try_factor(C_post)) {
    Eigen::MatrixXd jittered =
        C_post + 1e-10 * Eigen::MatrixXd::Identity(K, K);
    if (!try_factor(jittered))
      raise(Errc::singular_covariance, "window covariance not positive definite");
  }
  double log_det = ldlt_.vectorD().array().log().sum();
  log_norm_ = -0.5 * (K * std::log(2.0 * 3.14159265358979323846) + log_det);
}

double WindowGaussian::chi2(const Eigen::VectorXd& resid) const {
  return resid.dot(ldlt_.solve(resid));
}

double WindowGaussian::log_density(const Eigen::VectorXd& resid) const {
  return log_norm_ - 0.5 * chi2(resid);
}

Eigen::VectorXd interpolated_model(const PostWindow& win, double alpha) {
  return alpha * (win.d_obs - win.d_cf) + win.d_cf;
}

UpperLimit upper_limit_ratio(const PostWindow& win) {
  WindowGaussian g(win.C_post);
  UpperLimit u;
  u.chi2 = g.chi2(win.z_cf - win.z_obs);
  u.log_upper_ratio = 0.5 * u.chi2;
  u.upper_ratio = clamp_exp(u.log_upper_ratio);
  return u;
}

Eigen::VectorXd poly_model(const PostWindow& win, const PolyModel& m) {
  int K = win.length();
  Eigen::VectorXd out(K);
  for (int j = 0; j < K; ++j) {
    double k = j + 1.0;
    out[j] = win.d_cf[j] + m.alpha * k + m.beta * k * k;
  }
  return out;
}

double model_log_likelihood(const PostWindow& win, const Eigen::VectorXd& model,
                            const TransformPipeline& pipeline) {
  WindowGaussian g(win.C_post);
  return g.log_density(win.z_obs - model_to_z(win, model, pipeline));
}

double log_data_jacobian(const PostWindow& win, const TransformPipeline& pipeline) {
  bool scaled = win.time_scale.size() > 0;
  double sum = 0.0;
  for (int j = 0; j < win.length(); ++j) {
    sum += pipeline.log_jacobian(win.d_obs[j] - win.mean_series[j]);
    if (scaled) sum -= std::log(win.time_scale[j]);
  }
  return sum;
}

PriorBox fit_prior_box(const std::vector<PolyModel>& control_fits, bool use_hull,
                       int poly_order, bool require_reduction, bool require_nonnegative) {
  if (control_fits.size() < 2)
    raise(Errc::too_few_controls, "prior box needs at least two control fits");
  PriorBox box;
  box.alpha_lo = box.alpha_hi = control_fits[0].alpha;
  box.beta_lo = box.beta_hi = control_fits[0].beta;
  for (const auto& f : control_fits) {
    box.alpha_lo = std::min(box.alpha_lo, f.alpha);
    box.alpha_hi = std::max(box.alpha_hi, f.alpha);
    box.beta_lo = std::min(box.beta_lo, f.beta);
    box.beta_hi = std::max(box.beta_hi, f.beta);
  }
  if (poly_order < 2) box.beta_lo = box.beta_hi = 0.0;
  if (use_hull && poly_order >= 2) {
    std::vector<Eigen::Vector2d> pts;
    pts.reserve(control_fits.size());
    for (const auto& f : control_fits) pts.emplace_back(f.alpha, f.beta);
    box.hull = convex_hull(std::move(pts));  // empty when degenerate
  }
  box.require_reduction = require_reduction;
  box.require_nonnegative = require_nonnegative;
  return box;
}

HypothesisResult bayes_factor(const PostWindow& win, const PriorBox& box, int resolution,
                              const TransformPipeline& pipeline,
                              std::vector<SurfacePoint>* surface) {
  if (resolution < 2) raise(Errc::bad_config, "quadrature resolution must be >= 2");
  WindowGaussian g(win.C_post);

  HypothesisResult res;
  res.log_pA = g.log_density(win.z_obs - model_to_z(win, win.d_cf, pipeline));
  UpperLimit u = upper_limit_ratio(win);
  res.chi2 = u.chi2;
  res.upper_ratio = u.upper_ratio;
  res.log_upper_ratio = u.log_upper_ratio;
  res.log_data_jacobian = log_data_jacobian(win, pipeline);

  if (box.degenerate_at_null()) {
    res.log_pB = res.log_pA;
    res.bayes_factor = 1.0;
    res.log_bayes_factor = 0.0;
    res.ml_ratio = 1.0;
    res.log_ml_ratio = 0.0;
    res.ml_point = PolyModel{0.0, 0.0};
    if (surface) surface->push_back({0.0, 0.0, 0.0, true});
    return res;
  }

  int na = box.alpha_lo == box.alpha_hi ? 1 : resolution;
  int nb = box.beta_lo == box.beta_hi ? 1 : resolution;
  auto node = [](double lo, double hi, int n, int i) {
    return n == 1 ? lo : lo + (hi - lo) * i / (n - 1);
  };
  auto trap = [](int n, int i) { return n == 1 ? 1.0 : (i == 0 || i == n - 1 ? 0.5 : 1.0); };

  std::vector<double> log_weighted, log_weights, logliks;
  double best = kNegInf;
  PolyModel best_point;
  bool any_admissible = false;

  for (int ia = 0; ia < na; ++ia) {
    double alpha = node(box.alpha_lo, box.alpha_hi, na, ia);
    for (int ib = 0; ib < nb; ++ib) {
      double beta = node(box.beta_lo, box.beta_hi, nb, ib);
      PolyModel pm{alpha, beta};
      Eigen::VectorXd model = poly_model(win, pm);

      bool admissible = true;
      if (!box.hull.empty() && !inside_hull(box.hull, alpha, beta)) admissible = false;
      if (admissible && box.require_reduction)
        for (int j = 0; j < win.length() && admissible; ++j)
          if (!(model[j] < win.d_cf[j])) admissible = false;
      if (admissible && box.require_nonnegative)
        for (int j = 0; j < win.length() && admissible; ++j)
          if (model[j] < 0.0) admissible = false;

      double loglik = g.log_density(win.z_obs - model_to_z(win, model, pipeline));
      if (surface) surface->push_back({alpha, beta, loglik - res.log_pA, admissible});
      if (!admissible) continue;

      any_admissible = true;
      double lw = std::log(trap(na, ia) * trap(nb, ib));
      log_weights.push_back(lw);
      log_weighted.push_back(lw + loglik);
      logliks.push_back(loglik);
      if (loglik > best) {
        best = loglik;
        best_point = pm;
      }
    }
  }

  if (!any_admissible)
    raise(Errc::empty_prior, "no quadrature node satisfies the prior constraints");
  if (best == kNegInf)
    raise(Errc::quadrature_underflow, "likelihood vanished at every admissible node");

  res.log_pB = log_sum_exp(log_weighted) - log_sum_exp(log_weights);
  res.log_bayes_factor = res.log_pB - res.log_pA;
  res.bayes_factor = clamp_exp(res.log_bayes_factor);
  res.log_ml_ratio = best - res.log_pA;
  res.ml_ratio = clamp_exp(res.log_ml_ratio);
  res.ml_point = best_point;
  return res;
}

}  // namespace speccf
