#pragma once

#include <Eigen/Dense>
#include <vector>

namespace speccf {

// Orthonormal real harmonic basis of length T. Row 0 is the constant
// vector; rows 2v-1 and 2v are the cosine/sine pair at frequency v for
// v = 1..floor((T-1)/2); for even T the last row is the alternating-sign
// vector at the Nyquist frequency.
struct HarmonicBasis {
  int T = 0;
  Eigen::MatrixXd basis;          // rows = basis functions over time
  std::vector<int> freq_of_row;   // frequency index v per row

  static HarmonicBasis make(int T);
  int n_freqs() const { return freq_of_row.empty() ? 0 : freq_of_row.back() + 1; }
};

Eigen::VectorXd analyze(const HarmonicBasis& basis, const Eigen::VectorXd& series);
Eigen::VectorXd synthesize(const HarmonicBasis& basis, const Eigen::VectorXd& coeffs);

// Diagonal Gaussian prior on harmonic coefficients. var is per coefficient
// row; a cosine/sine pair at the same frequency shares one value.
struct SpectralPrior {
  std::vector<int> freqs;   // frequency index per coefficient row
  Eigen::VectorXd var;      // tau >= 0 per coefficient row
  int n_controls = 0;

  // Positive variances for inversion: zeros lifted to 1e-12 * max(var),
  // or 1e-12 outright when the whole spectrum is zero.
  Eigen::VectorXd floored() const;
};

// Cross-unit mean squared coefficient per frequency, cosine/sine tied.
// Rows of z are units; the skip_unit row (if >= 0) is left out.
SpectralPrior estimate_prior(const Eigen::MatrixXd& z, const HarmonicBasis& basis,
                             int skip_unit = -1);

// Joint prior over k variables: one symmetric PSD k x k covariance block
// per frequency, shared by the cosine and sine coefficients at that
// frequency. Off-diagonal entries are cross-spectra.
struct BlockSpectralPrior {
  int k = 0;
  std::vector<int> freqs;                 // unique frequency indices
  std::vector<Eigen::MatrixXd> blocks;    // k x k per frequency
  int n_controls = 0;

  const Eigen::MatrixXd& block_for(int freq) const;
};

// Cross-unit mean of same-frequency coefficient products between variables.
// Each entry of z_list is a unit x time matrix for one variable; shapes
// must agree. Blocks are eigenvalue-clipped at zero to restore PSD.
BlockSpectralPrior estimate_block_prior(const std::vector<Eigen::MatrixXd>& z_list,
                                        const HarmonicBasis& basis, int skip_unit = -1);

}  // namespace speccf
