#include "speccf/wiener.hpp"

#include <cmath>

#include "speccf/errors.hpp"

namespace speccf {

namespace {

void check_solution(const Eigen::MatrixXd& H, const Eigen::VectorXd& s,
                    const Eigen::VectorXd& b) {
  double resid = (H * s - b).norm();
  double bound = 1e-10 * (H.norm() * s.norm() + b.norm());
  if (!(resid <= bound) && resid > 1e-300)
    raise(Errc::singular_system, "linear solve residual " + std::to_string(resid) +
                                     " exceeds tolerance");
}

void check_noise(const NoiseModel& noise, int T) {
  if (static_cast<int>(noise.observed.size()) != T || noise.sigma.size() != T)
    raise(Errc::length_mismatch, "noise model length != basis size");
  for (int t = 0; t < T; ++t)
    if (noise.observed[t] && !(noise.sigma[t] > 0.0))
      raise(Errc::bad_config, "observed time needs positive noise std");
}

}  // namespace

NoiseModel NoiseModel::pre_window(int T, int t0_index, double epsilon) {
  NoiseModel n;
  n.sigma = Eigen::VectorXd::Constant(T, epsilon);
  n.observed.assign(T, false);
  for (int t = 0; t <= t0_index && t < T; ++t) n.observed[t] = true;
  return n;
}

NoiseModel NoiseModel::full_window(int T, double epsilon) {
  NoiseModel n;
  n.sigma = Eigen::VectorXd::Constant(T, epsilon);
  n.observed.assign(T, true);
  return n;
}

int NoiseModel::n_observed() const {
  int count = 0;
  for (bool b : observed) count += b ? 1 : 0;
  return count;
}

Eigen::VectorXd solve_map(const SpectralPrior& prior, const HarmonicBasis& basis,
                          const Eigen::VectorXd& z_obs, const NoiseModel& noise) {
  int T = basis.T;
  if (z_obs.size() != T) raise(Errc::length_mismatch, "observation length != basis size");
  check_noise(noise, T);

  Eigen::VectorXd tau = prior.floored();
  if (tau.size() != T) raise(Errc::length_mismatch, "prior length != basis size");

  Eigen::MatrixXd H = tau.cwiseInverse().asDiagonal();
  Eigen::VectorXd b = Eigen::VectorXd::Zero(T);
  for (int t = 0; t < T; ++t) {
    if (!noise.observed[t]) continue;
    double w = 1.0 / (noise.sigma[t] * noise.sigma[t]);
    H.noalias() += w * basis.basis.col(t) * basis.basis.col(t).transpose();
    b.noalias() += w * z_obs[t] * basis.basis.col(t);
  }

  Eigen::LDLT<Eigen::MatrixXd> ldlt(H);
  if (ldlt.info() != Eigen::Success)
    raise(Errc::singular_system, "posterior Hessian factorization failed");
  Eigen::VectorXd s = ldlt.solve(b);
  check_solution(H, s, b);
  return s;
}

std::pair<Eigen::MatrixXd, Eigen::MatrixXd> posterior_covariance(
    const SpectralPrior& prior, const HarmonicBasis& basis, const NoiseModel& noise) {
  int T = basis.T;
  check_noise(noise, T);
  if (prior.var.size() != T) raise(Errc::length_mismatch, "prior length != basis size");

  Eigen::MatrixXd C_s;
  if (noise.n_observed() == 0) {
    C_s = prior.var.asDiagonal();
  } else {
    Eigen::VectorXd tau = prior.floored();
    Eigen::MatrixXd H = tau.cwiseInverse().asDiagonal();
    for (int t = 0; t < T; ++t) {
      if (!noise.observed[t]) continue;
      double w = 1.0 / (noise.sigma[t] * noise.sigma[t]);
      H.noalias() += w * basis.basis.col(t) * basis.basis.col(t).transpose();
    }
    Eigen::LDLT<Eigen::MatrixXd> ldlt(H);
    if (ldlt.info() != Eigen::Success)
      raise(Errc::singular_system, "posterior Hessian factorization failed");
    C_s = ldlt.solve(Eigen::MatrixXd::Identity(T, T));
    C_s = 0.5 * (C_s + C_s.transpose()).eval();
  }

  Eigen::MatrixXd C_z = basis.basis.transpose() * C_s * basis.basis;
  C_z = 0.5 * (C_z + C_z.transpose()).eval();
  return {C_s, C_z};
}

namespace {

// Inverse of the stacked block-diagonal prior: per frequency the k x k
// block is inverted with an eigenvalue floor, then scattered onto the
// same-frequency coefficient rows of every variable pair.
Eigen::MatrixXd stacked_prior_inverse(const BlockSpectralPrior& prior,
                                      const HarmonicBasis& basis) {
  int T = basis.T;
  int k = prior.k;

  double top = 0.0;
  for (const auto& block : prior.blocks) {
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(block);
    top = std::max(top, eig.eigenvalues().maxCoeff());
  }
  double floor = top > 0.0 ? 1e-12 * top : 1e-12;

  std::vector<Eigen::MatrixXd> inv(prior.blocks.size());
  for (size_t f = 0; f < prior.blocks.size(); ++f) {
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(prior.blocks[f]);
    Eigen::VectorXd vals = eig.eigenvalues().cwiseMax(floor);
    inv[f] = eig.eigenvectors() * vals.cwiseInverse().asDiagonal() *
             eig.eigenvectors().transpose();
  }

  Eigen::MatrixXd Pinv = Eigen::MatrixXd::Zero(k * T, k * T);
  for (int r = 0; r < T; ++r) {
    const Eigen::MatrixXd& m = inv[basis.freq_of_row[r]];
    for (int a = 0; a < k; ++a)
      for (int b = 0; b < k; ++b) Pinv(a * T + r, b * T + r) = m(a, b);
  }
  return Pinv;
}

Eigen::MatrixXd joint_hessian(const BlockSpectralPrior& prior, const HarmonicBasis& basis,
                              const std::vector<NoiseModel>& noise) {
  int T = basis.T;
  int k = prior.k;
  if (static_cast<int>(noise.size()) != k)
    raise(Errc::panel_mismatch, "noise model count != variable count");
  for (const auto& nm : noise) check_noise(nm, T);

  Eigen::MatrixXd H = stacked_prior_inverse(prior, basis);
  for (int a = 0; a < k; ++a) {
    for (int t = 0; t < T; ++t) {
      if (!noise[a].observed[t]) continue;
      double w = 1.0 / (noise[a].sigma[t] * noise[a].sigma[t]);
      H.block(a * T, a * T, T, T).noalias() +=
          w * basis.basis.col(t) * basis.basis.col(t).transpose();
    }
  }
  return H;
}

}  // namespace

std::vector<Eigen::VectorXd> solve_map_joint(const BlockSpectralPrior& prior,
                                             const HarmonicBasis& basis,
                                             const std::vector<Eigen::VectorXd>& z_obs,
                                             const std::vector<NoiseModel>& noise) {
  int T = basis.T;
  int k = prior.k;
  if (static_cast<int>(z_obs.size()) != k)
    raise(Errc::panel_mismatch, "observation count != variable count");
  for (const auto& z : z_obs)
    if (z.size() != T) raise(Errc::length_mismatch, "observation length != basis size");

  Eigen::MatrixXd H = joint_hessian(prior, basis, noise);
  Eigen::VectorXd b = Eigen::VectorXd::Zero(k * T);
  for (int a = 0; a < k; ++a) {
    for (int t = 0; t < T; ++t) {
      if (!noise[a].observed[t]) continue;
      double w = 1.0 / (noise[a].sigma[t] * noise[a].sigma[t]);
      b.segment(a * T, T).noalias() += w * z_obs[a][t] * basis.basis.col(t);
    }
  }

  Eigen::LDLT<Eigen::MatrixXd> ldlt(H);
  if (ldlt.info() != Eigen::Success)
    raise(Errc::singular_system, "joint Hessian factorization failed");
  Eigen::VectorXd s = ldlt.solve(b);
  check_solution(H, s, b);

  std::vector<Eigen::VectorXd> out(k);
  for (int a = 0; a < k; ++a) out[a] = s.segment(a * T, T);
  return out;
}

Eigen::MatrixXd joint_posterior_cov(const BlockSpectralPrior& prior,
                                    const HarmonicBasis& basis,
                                    const std::vector<NoiseModel>& noise) {
  int kT = prior.k * basis.T;
  Eigen::MatrixXd H = joint_hessian(prior, basis, noise);
  Eigen::LDLT<Eigen::MatrixXd> ldlt(H);
  if (ldlt.info() != Eigen::Success)
    raise(Errc::singular_system, "joint Hessian factorization failed");
  Eigen::MatrixXd C = ldlt.solve(Eigen::MatrixXd::Identity(kT, kT));
  return 0.5 * (C + C.transpose());
}

void to_data_space(CounterfactualResult& result, const TransformPipeline& pipeline,
                   const Eigen::VectorXd& mean_series, const Eigen::VectorXd& time_scale) {
  int T = static_cast<int>(result.z_hat.size());
  if (mean_series.size() != T) raise(Errc::length_mismatch, "mean series length mismatch");
  bool scaled = time_scale.size() > 0;
  if (scaled && time_scale.size() != T)
    raise(Errc::length_mismatch, "time scale length mismatch");

  result.d_hat.resize(T);
  result.band_lo.resize(T);
  result.band_hi.resize(T);
  for (int t = 0; t < T; ++t) {
    double sd = std::sqrt(std::max(result.C_z(t, t), 0.0));
    double ts = scaled ? time_scale[t] : 1.0;
    result.d_hat[t] = pipeline.inverse(result.z_hat[t] * ts) + mean_series[t];
    result.band_lo[t] = pipeline.inverse((result.z_hat[t] - sd) * ts) + mean_series[t];
    result.band_hi[t] = pipeline.inverse((result.z_hat[t] + sd) * ts) + mean_series[t];
  }
}

}  // namespace speccf
