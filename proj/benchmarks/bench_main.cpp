// Micro benchmarks for the pipeline hot paths. Data is synthetic and
// seeded, sized like realistic panels (tens of units, decades to a few
// hundred periods) plus larger grids to expose scaling.

#include <benchmark/benchmark.h>

#include <random>

#include <Eigen/Dense>

#include "speccf/analysis.hpp"
#include "speccf/hypothesis.hpp"
#include "speccf/panel.hpp"
#include "speccf/spectral.hpp"
#include "speccf/transform.hpp"
#include "speccf/wiener.hpp"

namespace {

Eigen::VectorXd power_tau(const speccf::HarmonicBasis& basis, double p) {
  Eigen::VectorXd tau(basis.T);
  for (int k = 0; k < basis.T; ++k)
    tau[k] = std::pow(1.0 + basis.freq_of_row[k], -p);
  tau *= basis.T / tau.sum();
  return tau;
}

Eigen::MatrixXd sample_panel(const Eigen::VectorXd& tau,
                             const speccf::HarmonicBasis& basis, int n,
                             std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> normal(0.0, 1.0);
  Eigen::MatrixXd m(n, basis.T);
  Eigen::VectorXd s(basis.T);
  for (int i = 0; i < n; ++i) {
    for (int k = 0; k < basis.T; ++k) s[k] = std::sqrt(tau[k]) * normal(rng);
    m.row(i) = speccf::synthesize(basis, s).transpose();
  }
  return m;
}

speccf::SpectralPrior wrap_prior(const speccf::HarmonicBasis& basis,
                                 Eigen::VectorXd tau) {
  speccf::SpectralPrior prior;
  prior.freqs = basis.freq_of_row;
  prior.var = std::move(tau);
  prior.n_controls = 2;
  return prior;
}

void bm_solve_map(benchmark::State& state) {
  int T = static_cast<int>(state.range(0));
  auto basis = speccf::HarmonicBasis::make(T);
  auto prior = wrap_prior(basis, power_tau(basis, 2.0));
  auto panel = sample_panel(prior.var, basis, 1, 11);
  Eigen::VectorXd z = panel.row(0).transpose();
  auto noise = speccf::NoiseModel::pre_window(T, (3 * T) / 4, 1e-3);
  for (auto _ : state) {
    Eigen::VectorXd s = speccf::solve_map(prior, basis, z, noise);
    benchmark::DoNotOptimize(s);
  }
}
BENCHMARK(bm_solve_map)->Arg(64)->Arg(128)->Arg(256)->Arg(512);

void bm_posterior_covariance(benchmark::State& state) {
  int T = static_cast<int>(state.range(0));
  auto basis = speccf::HarmonicBasis::make(T);
  auto prior = wrap_prior(basis, power_tau(basis, 2.0));
  auto noise = speccf::NoiseModel::pre_window(T, (3 * T) / 4, 1e-3);
  for (auto _ : state) {
    auto cov = speccf::posterior_covariance(prior, basis, noise);
    benchmark::DoNotOptimize(cov);
  }
}
BENCHMARK(bm_posterior_covariance)->Arg(64)->Arg(128)->Arg(256);

void bm_analyze_synthesize(benchmark::State& state) {
  int T = static_cast<int>(state.range(0));
  auto basis = speccf::HarmonicBasis::make(T);
  auto panel = sample_panel(power_tau(basis, 2.0), basis, 1, 13);
  Eigen::VectorXd series = panel.row(0).transpose();
  for (auto _ : state) {
    Eigen::VectorXd round = speccf::synthesize(basis, speccf::analyze(basis, series));
    benchmark::DoNotOptimize(round);
  }
}
BENCHMARK(bm_analyze_synthesize)->Arg(64)->Arg(256)->Arg(1024);

void bm_estimate_prior(benchmark::State& state) {
  int T = static_cast<int>(state.range(0));
  auto basis = speccf::HarmonicBasis::make(T);
  auto panel = sample_panel(power_tau(basis, 2.0), basis, 40, 17);
  for (auto _ : state) {
    auto prior = speccf::estimate_prior(panel, basis, 0);
    benchmark::DoNotOptimize(prior);
  }
}
BENCHMARK(bm_estimate_prior)->Arg(64)->Arg(256);

speccf::PanelData synthetic_panel(int n, int T, std::uint64_t seed) {
  auto basis = speccf::HarmonicBasis::make(T);
  Eigen::MatrixXd values = sample_panel(power_tau(basis, 2.0), basis, n, seed);
  values.array() += 50.0;
  std::vector<std::string> names(n);
  for (int i = 0; i < n; ++i) names[i] = "U" + std::to_string(i);
  Eigen::VectorXd times(T);
  for (int t = 0; t < T; ++t) times[t] = 1970 + t;
  return speccf::make_panel(names, times, std::move(values), 0, (3 * T) / 4);
}

void bm_fit_pipeline(benchmark::State& state) {
  auto panel = synthetic_panel(static_cast<int>(state.range(0)), 48, 19);
  auto demeaned = speccf::demean(panel);
  for (auto _ : state) {
    auto pipeline = speccf::fit_pipeline(demeaned);
    benchmark::DoNotOptimize(pipeline);
  }
}
BENCHMARK(bm_fit_pipeline)->Arg(10)->Arg(40);

void bm_bayes_factor(benchmark::State& state) {
  int K = 10;
  speccf::PostWindow win;
  win.times = Eigen::VectorXd::LinSpaced(K, 1996, 2005);
  win.d_cf = Eigen::VectorXd::LinSpaced(K, 60.0, 50.0);
  win.d_obs = win.d_cf;
  std::mt19937_64 rng(23);
  std::normal_distribution<double> normal(0.0, 0.5);
  for (int j = 0; j < K; ++j) win.d_obs[j] += -1.0 * (j + 1) + normal(rng);
  win.z_obs = win.d_obs;
  win.z_cf = win.d_cf;
  win.mean_series = Eigen::VectorXd::Zero(K);
  win.C_post = Eigen::MatrixXd::Identity(K, K);
  speccf::PriorBox box;
  box.alpha_lo = -3.0;
  box.alpha_hi = 1.0;
  box.beta_lo = -0.5;
  box.beta_hi = 0.5;
  auto pipeline = speccf::TransformPipeline::identity();
  int grid = static_cast<int>(state.range(0));
  for (auto _ : state) {
    auto res = speccf::bayes_factor(win, box, grid, pipeline);
    benchmark::DoNotOptimize(res);
  }
}
BENCHMARK(bm_bayes_factor)->Arg(51)->Arg(201)->Arg(401);

void bm_run_single(benchmark::State& state) {
  auto panel = synthetic_panel(20, 48, 29);
  speccf::RunOptions opts;
  for (auto _ : state) {
    auto run = speccf::run_single(panel, opts);
    benchmark::DoNotOptimize(run);
  }
}
BENCHMARK(bm_run_single);

}  // namespace

BENCHMARK_MAIN();
