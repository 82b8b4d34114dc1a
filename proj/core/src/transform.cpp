#include "speccf/transform.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <fstream>
#include <functional>
#include <limits>
#include <sstream>

#include "json.hpp"
#include "speccf/csv.hpp"
#include "speccf/errors.hpp"

namespace speccf {

double yeo_johnson(double x, double lambda) {
  if (x >= 0.0) {
    if (lambda == 0.0) return std::log1p(x);
    return std::expm1(lambda * std::log1p(x)) / lambda;
  }
  double two_ml = 2.0 - lambda;
  if (two_ml == 0.0) return -std::log1p(-x);
  return -std::expm1(two_ml * std::log1p(-x)) / two_ml;
}

double yeo_johnson_inverse(double y, double lambda) {
  if (y >= 0.0) {
    if (lambda == 0.0) return std::expm1(y);
    return std::expm1(std::log1p(lambda * y) / lambda);
  }
  double two_ml = 2.0 - lambda;
  if (two_ml == 0.0) return -std::expm1(-y);
  return -std::expm1(std::log1p(-two_ml * y) / two_ml);
}

double yeo_johnson_log_deriv(double x, double lambda) {
  if (x >= 0.0) return (lambda - 1.0) * std::log1p(x);
  return (1.0 - lambda) * std::log1p(-x);
}

double TransformPipeline::forward(double x) const {
  double u = arcsinh_scale * std::asinh(x / arcsinh_scale);
  return (yeo_johnson(u, yj_lambda) - loc) / scale;
}

double TransformPipeline::inverse(double z) const {
  double u = yeo_johnson_inverse(z * scale + loc, yj_lambda);
  return arcsinh_scale * std::sinh(u / arcsinh_scale);
}

double TransformPipeline::log_jacobian(double x) const {
  double r = x / arcsinh_scale;
  double u = arcsinh_scale * std::asinh(r);
  return -0.5 * std::log1p(r * r) + yeo_johnson_log_deriv(u, yj_lambda) - std::log(scale);
}

TransformPipeline TransformPipeline::identity() { return TransformPipeline{}; }

namespace {

// Joint negative log-likelihood with loc/scale at their closed-form optimum
// for the given nonlinear stages; constant terms dropped.
double profile_objective(double a, double lambda, const Eigen::VectorXd& x) {
  int n = static_cast<int>(x.size());
  double sum = 0.0, sum2 = 0.0, logjac = 0.0;
  for (int i = 0; i < n; ++i) {
    double r = x[i] / a;
    double u = a * std::asinh(r);
    double y = yeo_johnson(u, lambda);
    if (!std::isfinite(y)) return std::numeric_limits<double>::infinity();
    sum += y;
    sum2 += y * y;
    logjac += -0.5 * std::log1p(r * r) + yeo_johnson_log_deriv(u, lambda);
  }
  double mean = sum / n;
  double var = sum2 / n - mean * mean;
  if (!(var > 0.0) || !std::isfinite(var)) return std::numeric_limits<double>::infinity();
  return 0.5 * n * std::log(var) - logjac;
}

struct Simplex2 {
  using Fn = std::function<double(double, double)>;

  // Nelder-Mead in two dimensions; returns the best vertex.
  static std::pair<Eigen::Vector2d, double> minimize(const Fn& f, Eigen::Vector2d start,
                                                     double tol, int max_iter) {
    std::array<Eigen::Vector2d, 3> v{start, start + Eigen::Vector2d(0.1, 0.0),
                                     start + Eigen::Vector2d(0.0, 0.1)};
    std::array<double, 3> fv;
    for (int i = 0; i < 3; ++i) fv[i] = f(v[i][0], v[i][1]);

    auto order = [&] {
      std::array<int, 3> idx{0, 1, 2};
      std::sort(idx.begin(), idx.end(), [&](int a, int b) { return fv[a] < fv[b]; });
      std::array<Eigen::Vector2d, 3> nv{v[idx[0]], v[idx[1]], v[idx[2]]};
      std::array<double, 3> nf{fv[idx[0]], fv[idx[1]], fv[idx[2]]};
      v = nv;
      fv = nf;
    };

    for (int iter = 0; iter < max_iter; ++iter) {
      order();
      if (std::abs(fv[2] - fv[0]) <= tol * (std::abs(fv[0]) + tol)) break;
      Eigen::Vector2d centroid = 0.5 * (v[0] + v[1]);
      Eigen::Vector2d refl = centroid + (centroid - v[2]);
      double fr = f(refl[0], refl[1]);
      if (fr < fv[0]) {
        Eigen::Vector2d exp_pt = centroid + 2.0 * (centroid - v[2]);
        double fe = f(exp_pt[0], exp_pt[1]);
        if (fe < fr) { v[2] = exp_pt; fv[2] = fe; }
        else { v[2] = refl; fv[2] = fr; }
      } else if (fr < fv[1]) {
        v[2] = refl;
        fv[2] = fr;
      } else {
        Eigen::Vector2d contr = centroid + 0.5 * (v[2] - centroid);
        double fc = f(contr[0], contr[1]);
        if (fc < fv[2]) { v[2] = contr; fv[2] = fc; }
        else {
          for (int i = 1; i < 3; ++i) {
            v[i] = v[0] + 0.5 * (v[i] - v[0]);
            fv[i] = f(v[i][0], v[i][1]);
          }
        }
      }
    }
    order();
    return {v[0], fv[0]};
  }
};

Eigen::VectorXd pooled_controls(const DemeanedPanel& demeaned, bool controls_only) {
  int n = demeaned.base.n_units();
  int T = demeaned.base.n_times();
  std::vector<double> xs;
  xs.reserve(static_cast<size_t>(n) * T);
  for (int i = 0; i < n; ++i) {
    if (controls_only && i == demeaned.base.treated_index) continue;
    for (int t = 0; t < T; ++t) xs.push_back(demeaned.residuals(i, t));
  }
  return Eigen::Map<Eigen::VectorXd>(xs.data(), static_cast<Eigen::Index>(xs.size()));
}

}  // namespace

TransformPipeline fit_pipeline(const DemeanedPanel& demeaned, bool controls_only) {
  Eigen::VectorXd x = pooled_controls(demeaned, controls_only);
  int n = static_cast<int>(x.size());
  double mean_x = x.mean();
  double var_x = (x.array() - mean_x).square().sum() / n;
  if (!(var_x > 0.0)) raise(Errc::degenerate_data, "pooled residuals have zero variance");
  double sd_x = std::sqrt(var_x);

  std::vector<double> a_grid;
  const int na = 25;
  for (int i = 0; i < na; ++i) {
    double f = static_cast<double>(i) / (na - 1);
    a_grid.push_back(0.1 * sd_x * std::pow(100.0, f));
  }
  a_grid.push_back(1e12 * std::max(1.0, sd_x));  // near-identity candidate

  double best = std::numeric_limits<double>::infinity();
  double best_a = a_grid.back(), best_l = 1.0;
  const int nl = 51;
  for (double a : a_grid) {
    for (int j = 0; j < nl; ++j) {
      double lambda = -2.0 + 5.0 * j / (nl - 1);
      double obj = profile_objective(a, lambda, x);
      if (obj < best) { best = obj; best_a = a; best_l = lambda; }
    }
  }

  auto f = [&](double log_a, double lambda) {
    return profile_objective(std::exp(log_a), lambda, x);
  };
  auto [opt, fopt] = Simplex2::minimize(f, {std::log(best_a), best_l}, 1e-6, 300);
  double a = std::exp(opt[0]), lambda = opt[1];
  if (!(fopt < best)) { a = best_a; lambda = best_l; }

  Eigen::VectorXd y(n);
  for (int i = 0; i < n; ++i) y[i] = yeo_johnson(a * std::asinh(x[i] / a), lambda);
  double loc = y.mean();
  double var_y = (y.array() - loc).square().sum() / n;

  TransformPipeline p;
  p.arcsinh_scale = a;
  p.yj_lambda = lambda;
  p.loc = loc;
  p.scale = std::sqrt(std::max(var_y, 1e-300));
  return p;
}

GaussianizedPanel gaussianize(const DemeanedPanel& demeaned, const TransformPipeline& p,
                              bool per_time_scale) {
  int n = demeaned.base.n_units();
  int T = demeaned.base.n_times();
  GaussianizedPanel g;
  g.pipeline = p;
  g.z.resize(n, T);
  for (int i = 0; i < n; ++i)
    for (int t = 0; t < T; ++t) g.z(i, t) = p.forward(demeaned.residuals(i, t));

  if (per_time_scale) {
    g.time_scale.resize(T);
    for (int t = 0; t < T; ++t) {
      double sum2 = 0.0;
      int count = 0;
      for (int i = 0; i < n; ++i) {
        if (i == demeaned.base.treated_index) continue;
        sum2 += g.z(i, t) * g.z(i, t);
        ++count;
      }
      double sd = std::sqrt(sum2 / std::max(count, 1));
      g.time_scale[t] = sd > 0.0 ? sd : 1.0;
    }
    for (int t = 0; t < T; ++t) g.z.col(t) /= g.time_scale[t];
  }

  double sum = 0.0, sum2 = 0.0;
  int count = 0;
  for (int i = 0; i < n; ++i) {
    if (i == demeaned.base.treated_index) continue;
    for (int t = 0; t < T; ++t) {
      sum += g.z(i, t);
      sum2 += g.z(i, t) * g.z(i, t);
      ++count;
    }
  }
  double mean = sum / count;
  double var = sum2 / count - mean * mean;
  if (std::abs(mean) > 0.05 || std::abs(var - 1.0) > 0.1) {
    g.fit_warning = true;
    g.fit_message = "pooled control output has mean " + csv::format_double(mean) +
                    " and variance " + csv::format_double(var) +
                    "; expected mean 0, variance 1";
  }
  return g;
}

double pipeline_nll(const TransformPipeline& p, const Eigen::VectorXd& x) {
  const double half_log_2pi = 0.9189385332046727;
  double nll = 0.0;
  for (int i = 0; i < x.size(); ++i) {
    double z = p.forward(x[i]);
    nll += 0.5 * z * z + half_log_2pi - p.log_jacobian(x[i]);
  }
  return nll;
}

std::string pipeline_to_json(const TransformPipeline& p) {
  nlohmann::json j;
  j["kind"] = "gaussianize_pipeline";
  j["stages"] = nlohmann::json::array({
      {{"type", "arcsinh"}, {"scale", p.arcsinh_scale}},
      {{"type", "yeo_johnson"}, {"lambda", p.yj_lambda}},
      {{"type", "affine"}, {"loc", p.loc}, {"scale", p.scale}},
  });
  return j.dump(2) + "\n";
}

TransformPipeline pipeline_from_json(const std::string& text) {
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(text);
  } catch (const nlohmann::json::exception& e) {
    raise(Errc::bad_config, std::string("transform JSON: ") + e.what());
  }
  if (j.value("kind", "") != "gaussianize_pipeline" || !j.contains("stages"))
    raise(Errc::bad_config, "transform JSON: expected kind 'gaussianize_pipeline'");
  TransformPipeline p;
  bool saw_arcsinh = false, saw_yj = false, saw_affine = false;
  for (const auto& stage : j["stages"]) {
    std::string type = stage.value("type", "");
    if (type == "arcsinh") {
      p.arcsinh_scale = stage.at("scale").get<double>();
      saw_arcsinh = true;
    } else if (type == "yeo_johnson") {
      p.yj_lambda = stage.at("lambda").get<double>();
      saw_yj = true;
    } else if (type == "affine") {
      p.loc = stage.at("loc").get<double>();
      p.scale = stage.at("scale").get<double>();
      saw_affine = true;
    } else {
      raise(Errc::bad_config, "transform JSON: unknown stage '" + type + "'");
    }
  }
  if (!saw_arcsinh || !saw_yj || !saw_affine)
    raise(Errc::bad_config, "transform JSON: missing stage");
  if (!(p.arcsinh_scale > 0.0) || !(p.scale > 0.0))
    raise(Errc::bad_config, "transform JSON: scales must be positive");
  return p;
}

TransformPipeline load_pipeline(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) raise(Errc::file_not_found, "cannot open " + path.string());
  std::ostringstream buf;
  buf << in.rdbuf();
  return pipeline_from_json(buf.str());
}

void save_pipeline(const TransformPipeline& p, const std::filesystem::path& path) {
  csv::atomic_write(path, pipeline_to_json(p));
}

}  // namespace speccf
