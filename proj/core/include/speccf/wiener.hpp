#pragma once

#include <Eigen/Dense>
#include <utility>
#include <vector>

#include "speccf/spectral.hpp"
#include "speccf/transform.hpp"

namespace speccf {

// Per-time observation noise (std, z-space units). Times with mask false
// contribute nothing to the likelihood.
struct NoiseModel {
  Eigen::VectorXd sigma;
  std::vector<bool> observed;

  static NoiseModel pre_window(int T, int t0_index, double epsilon);
  static NoiseModel full_window(int T, double epsilon);
  int n_observed() const;
};

// MAP harmonic coefficients given a diagonal prior and noisy observations
// on the masked times. Solved as a symmetric positive-definite system with
// a backward-error check.
Eigen::VectorXd solve_map(const SpectralPrior& prior, const HarmonicBasis& basis,
                          const Eigen::VectorXd& z_obs, const NoiseModel& noise);

// Posterior covariance in coefficient space and its time-space image.
// With no observed times the coefficient covariance is exactly the prior
// diagonal (no floor applied).
std::pair<Eigen::MatrixXd, Eigen::MatrixXd> posterior_covariance(
    const SpectralPrior& prior, const HarmonicBasis& basis, const NoiseModel& noise);

// Joint MAP over k variables sharing one harmonic basis, coupled through
// per-frequency covariance blocks. Returns one coefficient vector per
// variable. Each variable carries its own noise mask.
std::vector<Eigen::VectorXd> solve_map_joint(const BlockSpectralPrior& prior,
                                             const HarmonicBasis& basis,
                                             const std::vector<Eigen::VectorXd>& z_obs,
                                             const std::vector<NoiseModel>& noise);

// Stacked (k*T) x (k*T) posterior coefficient covariance for the joint
// problem; variable-major ordering.
Eigen::MatrixXd joint_posterior_cov(const BlockSpectralPrior& prior,
                                    const HarmonicBasis& basis,
                                    const std::vector<NoiseModel>& noise);

struct CounterfactualResult {
  Eigen::VectorXd s_hat;    // MAP coefficients
  Eigen::VectorXd z_hat;    // time-space prediction, transformed units
  Eigen::MatrixXd C_s;      // coefficient-space posterior covariance
  Eigen::MatrixXd C_z;      // time-space posterior covariance
  Eigen::VectorXd d_hat;    // data-space prediction
  Eigen::VectorXd band_lo;  // data-space 1-sigma band
  Eigen::VectorXd band_hi;
};

// Maps the z-space solution to data units: inverse transform plus the
// removed mean series. Bands are transformed quantiles of z_hat +- 1 sigma.
// time_scale (empty = none) undoes a per-time rescaling before inverting.
void to_data_space(CounterfactualResult& result, const TransformPipeline& pipeline,
                   const Eigen::VectorXd& mean_series,
                   const Eigen::VectorXd& time_scale = Eigen::VectorXd());

}  // namespace speccf
