#include "speccf/spectral.hpp"

#include <cmath>

#include "speccf/errors.hpp"

namespace speccf {

HarmonicBasis HarmonicBasis::make(int T) {
  if (T < 2) raise(Errc::length_mismatch, "basis needs T >= 2");
  HarmonicBasis h;
  h.T = T;
  h.basis.resize(T, T);
  h.freq_of_row.resize(T);

  const double pi = 3.14159265358979323846;
  double inv_sqrt_T = 1.0 / std::sqrt(static_cast<double>(T));
  double amp = std::sqrt(2.0 / T);

  for (int t = 0; t < T; ++t) h.basis(0, t) = inv_sqrt_T;
  h.freq_of_row[0] = 0;

  int half = (T - 1) / 2;
  for (int v = 1; v <= half; ++v) {
    for (int t = 0; t < T; ++t) {
      double phase = 2.0 * pi * v * t / T;
      h.basis(2 * v - 1, t) = amp * std::cos(phase);
      h.basis(2 * v, t) = amp * std::sin(phase);
    }
    h.freq_of_row[2 * v - 1] = v;
    h.freq_of_row[2 * v] = v;
  }
  if (T % 2 == 0) {
    for (int t = 0; t < T; ++t) h.basis(T - 1, t) = (t % 2 == 0 ? 1.0 : -1.0) * inv_sqrt_T;
    h.freq_of_row[T - 1] = T / 2;
  }
  return h;
}

Eigen::VectorXd analyze(const HarmonicBasis& basis, const Eigen::VectorXd& series) {
  if (series.size() != basis.T)
    raise(Errc::length_mismatch, "series length " + std::to_string(series.size()) +
                                     " != basis size " + std::to_string(basis.T));
  return basis.basis * series;
}

Eigen::VectorXd synthesize(const HarmonicBasis& basis, const Eigen::VectorXd& coeffs) {
  if (coeffs.size() != basis.T)
    raise(Errc::length_mismatch, "coefficient length " + std::to_string(coeffs.size()) +
                                     " != basis size " + std::to_string(basis.T));
  return basis.basis.transpose() * coeffs;
}

Eigen::VectorXd SpectralPrior::floored() const {
  double top = var.size() ? var.maxCoeff() : 0.0;
  double floor = top > 0.0 ? 1e-12 * top : 1e-12;
  return var.cwiseMax(floor);
}

SpectralPrior estimate_prior(const Eigen::MatrixXd& z, const HarmonicBasis& basis,
                             int skip_unit) {
  int n = static_cast<int>(z.rows());
  int T = basis.T;
  if (z.cols() != T) raise(Errc::length_mismatch, "panel time dimension != basis size");
  int n_used = n - (skip_unit >= 0 && skip_unit < n ? 1 : 0);
  if (n_used < 2) raise(Errc::too_few_controls, "spectrum estimation needs >= 2 controls");

  Eigen::VectorXd power = Eigen::VectorXd::Zero(T);
  for (int i = 0; i < n; ++i) {
    if (i == skip_unit) continue;
    Eigen::VectorXd c = basis.basis * z.row(i).transpose();
    power += c.cwiseProduct(c);
  }
  power /= static_cast<double>(n_used);

  SpectralPrior prior;
  prior.freqs = basis.freq_of_row;
  prior.n_controls = n_used;
  prior.var.resize(T);
  prior.var[0] = power[0];
  int half = (T - 1) / 2;
  for (int v = 1; v <= half; ++v) {
    double tau = 0.5 * (power[2 * v - 1] + power[2 * v]);
    prior.var[2 * v - 1] = tau;
    prior.var[2 * v] = tau;
  }
  if (T % 2 == 0) prior.var[T - 1] = power[T - 1];
  return prior;
}

const Eigen::MatrixXd& BlockSpectralPrior::block_for(int freq) const {
  for (size_t i = 0; i < freqs.size(); ++i)
    if (freqs[i] == freq) return blocks[i];
  raise(Errc::internal, "no block for frequency " + std::to_string(freq));
}

BlockSpectralPrior estimate_block_prior(const std::vector<Eigen::MatrixXd>& z_list,
                                        const HarmonicBasis& basis, int skip_unit) {
  int k = static_cast<int>(z_list.size());
  if (k < 1) raise(Errc::panel_mismatch, "no variables given");
  int n = static_cast<int>(z_list[0].rows());
  int T = basis.T;
  for (const auto& z : z_list)
    if (z.rows() != n || z.cols() != T)
      raise(Errc::panel_mismatch, "variables disagree on unit/time dimensions");
  int n_used = n - (skip_unit >= 0 && skip_unit < n ? 1 : 0);
  if (n_used < 2) raise(Errc::too_few_controls, "spectrum estimation needs >= 2 controls");

  // Coefficients per variable, control units only.
  std::vector<Eigen::MatrixXd> coeffs(k);
  for (int a = 0; a < k; ++a) {
    coeffs[a].resize(n, T);
    for (int i = 0; i < n; ++i) {
      if (i == skip_unit) continue;
      coeffs[a].row(i) = (basis.basis * z_list[a].row(i).transpose()).transpose();
    }
  }

  int n_freqs = basis.n_freqs();
  BlockSpectralPrior prior;
  prior.k = k;
  prior.n_controls = n_used;
  prior.freqs.resize(n_freqs);
  prior.blocks.assign(n_freqs, Eigen::MatrixXd::Zero(k, k));

  std::vector<int> rows_per_freq(n_freqs, 0);
  for (int r = 0; r < T; ++r) ++rows_per_freq[basis.freq_of_row[r]];

  for (int f = 0; f < n_freqs; ++f) prior.freqs[f] = f;
  for (int r = 0; r < T; ++r) {
    int f = basis.freq_of_row[r];
    for (int a = 0; a < k; ++a)
      for (int b = 0; b < k; ++b) {
        double acc = 0.0;
        for (int i = 0; i < n; ++i) {
          if (i == skip_unit) continue;
          acc += coeffs[a](i, r) * coeffs[b](i, r);
        }
        prior.blocks[f](a, b) += acc / (n_used * rows_per_freq[f]);
      }
  }

  for (auto& block : prior.blocks) {
    block = 0.5 * (block + block.transpose());
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(block);
    if (eig.eigenvalues().minCoeff() < 0.0) {
      Eigen::VectorXd clipped = eig.eigenvalues().cwiseMax(0.0);
      block = eig.eigenvectors() * clipped.asDiagonal() * eig.eigenvectors().transpose();
    }
  }
  return prior;
}

}  // namespace speccf
