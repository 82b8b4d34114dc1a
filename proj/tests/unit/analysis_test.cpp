#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <speccf/analysis.hpp>
#include <speccf/errors.hpp>
#include <speccf/export.hpp>
#include <speccf/placebo.hpp>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>

#include "generators.hpp"
#include "schema_lite.hpp"

namespace fs = std::filesystem;
using namespace speccf;

namespace {

// Smooth correlated panel around a positive working level, with an optional
// quadratic effect injected into the treated unit after t0.
PanelData effect_panel(int n, int T, int t0, std::uint64_t seed, double alpha,
                       double beta, double offset = 100.0) {
  auto basis = HarmonicBasis::make(T);
  Eigen::VectorXd tau = testsupport::power_law_tau(basis, 2.0, 4.0);
  Eigen::MatrixXd values = testsupport::sample_from_spectrum(tau, basis, n, seed);
  values.array() += offset;
  for (int t = t0 + 1; t < T; ++t) {
    double k = t - t0;
    values(0, t) += alpha * k + beta * k * k;
  }
  return testsupport::wrap_panel(values, 0, t0);
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

size_t line_count(const std::string& s) {
  size_t n = 0;
  for (char c : s)
    if (c == '\n') ++n;
  return n;
}

nlohmann::json schema(const char* name) {
  const char* dir = std::getenv("SPECCF_SCHEMAS");
  REQUIRE(dir != nullptr);
  return nlohmann::json::parse(slurp(fs::path(dir) / name));
}

fs::path out_dir(const char* leaf) {
  auto d = fs::temp_directory_path() / "speccf_analysis_test" / leaf;
  fs::create_directories(d);
  return d;
}

}  // namespace

TEST_CASE("a full single run produces coherent pieces") {
  auto panel = effect_panel(16, 40, 29, 12345, -2.0, -0.05);
  RunOptions opts;
  auto run = run_single(panel, opts);

  CHECK(run.window.length() == panel.n_post());
  CHECK(static_cast<int>(run.control_fits.size()) == panel.n_units() - 1);
  CHECK(run.ref_index == panel.n_times() - 1);
  CHECK(run.cf.d_hat.size() == panel.n_times());
  CHECK(run.prior.var.size() == panel.n_times());
  CHECK_FALSE(run.block_prior.has_value());

  for (const auto& f : run.control_fits) {
    CHECK(f.alpha >= run.box.alpha_lo - 1e-12);
    CHECK(f.alpha <= run.box.alpha_hi + 1e-12);
    CHECK(f.beta >= run.box.beta_lo - 1e-12);
    CHECK(f.beta <= run.box.beta_hi + 1e-12);
  }

  // the injected effect lowers the observation below its counterfactual
  CHECK(run.effect_ref > 0.0);
  CHECK(run.hyp.upper_ratio >= run.hyp.bayes_factor);

  // balance on the pre-window, in transformed units
  for (int t = 0; t <= panel.t0_index; ++t)
    CHECK(std::abs(run.cf.z_hat[t] - run.gauss.z(panel.treated_index, t)) <=
          10.0 * opts.epsilon);

  REQUIRE(!run.surface.empty());
  CHECK(run.surface.size() == static_cast<size_t>(opts.grid) * opts.grid);
}

TEST_CASE("manual box overrides replace the control envelope") {
  auto panel = effect_panel(10, 32, 23, 99, -1.0, 0.0);
  RunOptions opts;
  opts.box_alpha = std::make_pair(-3.0, -0.5);
  opts.box_beta = std::make_pair(-0.1, 0.1);
  auto run = run_single(panel, opts);
  CHECK(run.box.alpha_lo == -3.0);
  CHECK(run.box.alpha_hi == -0.5);
  CHECK(run.box.beta_lo == -0.1);
  CHECK(run.box.beta_hi == 0.1);
  CHECK(run.box.hull.empty());
}

TEST_CASE("a box pinned to the null yields bayes factor one") {
  auto panel = effect_panel(10, 32, 23, 7, -1.0, 0.0);
  RunOptions opts;
  opts.box_alpha = std::make_pair(0.0, 0.0);
  opts.box_beta = std::make_pair(0.0, 0.0);
  auto run = run_single(panel, opts);
  CHECK(run.hyp.bayes_factor == 1.0);
  CHECK(run.hyp.log_bayes_factor == 0.0);
}

TEST_CASE("transform modes select, skip or replay the fit") {
  auto panel = effect_panel(12, 36, 27, 31, -1.5, 0.0);

  RunOptions none;
  none.transform_mode = TransformMode::none;
  auto run_none = run_single(panel, none);
  CHECK(run_none.gauss.pipeline.yj_lambda == 1.0);
  CHECK(run_none.gauss.pipeline.loc == 0.0);
  CHECK(run_none.gauss.pipeline.scale == 1.0);

  RunOptions fit;
  auto run_fit = run_single(panel, fit);

  RunOptions load;
  load.transform_mode = TransformMode::load;
  load.loaded_transform = run_fit.gauss.pipeline;
  auto run_load = run_single(panel, load);
  CHECK(run_load.gauss.pipeline.yj_lambda == run_fit.gauss.pipeline.yj_lambda);
  CHECK(run_load.cf.d_hat.isApprox(run_fit.cf.d_hat, 1e-12));
}

TEST_CASE("the reporting time defaults to the last period and can move") {
  auto panel = effect_panel(10, 30, 24, 55, -1.0, 0.0);
  RunOptions opts;
  auto run = run_single(panel, opts);
  CHECK(run.panel.times[run.ref_index] == panel.times[panel.n_times() - 1]);

  opts.ref_time = 1970.0 + 27;
  auto moved = run_single(panel, opts);
  CHECK(moved.panel.times[moved.ref_index] == 1997.0);
  CHECK(moved.effect_ref ==
        doctest::Approx(moved.cf.d_hat[moved.ref_index] -
                        panel.values(0, moved.ref_index)).epsilon(1e-12));

  opts.ref_time = 2222.0;
  CHECK_THROWS_AS(run_single(panel, opts), Error);
}

TEST_CASE("internal padding changes nothing visible in shape") {
  auto panel = effect_panel(10, 24, 17, 61, -1.0, 0.0);
  RunOptions opts;
  opts.pad = 2;
  auto run = run_single(panel, opts);
  CHECK(run.cf.d_hat.size() == panel.n_times());
  CHECK(run.cf.z_hat.size() == panel.n_times());
  CHECK(run.cf.C_z.rows() == panel.n_times());
  CHECK(run.window.length() == panel.n_post());
}

TEST_CASE("joint runs accept aligned covariates and reject ragged ones") {
  auto primary = effect_panel(12, 32, 25, 81, -2.0, 0.0);
  auto covariate = effect_panel(12, 32, 25, 82, 0.0, 0.0);

  RunOptions opts;
  auto run = run_joint(primary, {covariate}, opts);
  REQUIRE(run.block_prior.has_value());
  CHECK(run.block_prior->k == 2);
  CHECK(run.window.length() == primary.n_post());
  CHECK(run.cf.d_hat.size() == primary.n_times());

  auto short_panel = effect_panel(12, 30, 25, 83, 0.0, 0.0);
  CHECK_THROWS_AS(run_joint(primary, {short_panel}, opts), Error);

  RunOptions padded;
  padded.pad = 2;
  CHECK_THROWS_AS(run_joint(primary, {covariate}, padded), Error);
}

TEST_CASE("a duplicated covariate pins the counterfactual to the data") {
  auto primary = effect_panel(14, 32, 25, 91, -2.0, -0.03);
  RunOptions opts;
  opts.transform_mode = TransformMode::none;
  auto run = run_joint(primary, {primary}, opts);
  for (int t = primary.t0_index + 1; t < primary.n_times(); ++t)
    CHECK(std::abs(run.cf.z_hat[t] - run.gauss.z(primary.treated_index, t)) <=
          10.0 * opts.epsilon);
}

TEST_CASE("placebo sweeps cover every unit and stay deterministic") {
  auto panel = effect_panel(8, 36, 27, 111, -2.5, -0.05);
  RunOptions opts;
  opts.grid = 101;
  auto report = run_placebo(panel, opts);

  REQUIRE(report.records.size() == 8);
  CHECK(report.records[0].is_treated);
  CHECK(report.records[0].unit == panel.unit_ids[0]);
  for (size_t i = 1; i < report.records.size(); ++i) CHECK_FALSE(report.records[i].is_treated);
  CHECK(report.n_failed == 0);

  double max_bf = 0.0;
  std::string max_unit;
  for (size_t i = 1; i < report.records.size(); ++i)
    if (report.records[i].bayes_factor > max_bf) {
      max_bf = report.records[i].bayes_factor;
      max_unit = report.records[i].unit;
    }
  CHECK(report.max_control_bayes_factor == max_bf);
  CHECK(report.max_control_unit == max_unit);
  CHECK(report.treated_bayes_factor == report.records[0].bayes_factor);
  if (max_bf > 0.0)
    CHECK(report.ratio_of_max ==
          doctest::Approx(report.treated_bayes_factor / max_bf).epsilon(1e-12));

  auto d1 = out_dir("placebo1");
  auto d2 = out_dir("placebo2");
  write_placebo_json(d1 / "placebo.json", report);
  write_placebo_csv(d1 / "placebo.csv", report);
  auto report2 = run_placebo(panel, opts);
  write_placebo_json(d2 / "placebo.json", report2);
  write_placebo_csv(d2 / "placebo.csv", report2);
  CHECK(slurp(d1 / "placebo.json") == slurp(d2 / "placebo.json"));
  CHECK(slurp(d1 / "placebo.csv") == slurp(d2 / "placebo.csv"));

  std::string err;
  auto parsed = nlohmann::json::parse(slurp(d1 / "placebo.json"));
  CHECK_MESSAGE(testsupport::validate_schema(schema("placebo.schema.json"), parsed, &err), err);
}

TEST_CASE("a shared transform reuses one fit across the sweep") {
  auto panel = effect_panel(7, 32, 25, 121, -1.0, 0.0);
  RunOptions opts;
  opts.shared_transform = true;
  opts.grid = 51;
  auto report = run_placebo(panel, opts);
  CHECK(report.n_failed == 0);
  REQUIRE(report.records.size() == 7);
}

TEST_CASE("per-unit failures are recorded without aborting the sweep") {
  // with four units each sub-run is left with too few controls to fit a
  // prior box, so every pseudo-treated run fails while the real one works
  auto panel = effect_panel(4, 24, 17, 131, 0.0, 0.0);
  RunOptions opts;
  opts.grid = 21;
  auto report = run_placebo(panel, opts);
  REQUIRE(report.records.size() == 4);
  CHECK(report.records[0].ok);
  CHECK_FALSE(report.records[1].ok);
  CHECK_FALSE(report.records[2].ok);
  CHECK_FALSE(report.records[3].ok);
  CHECK(report.n_failed == 3);
  CHECK(report.records[1].error.find("TooFewControls") != std::string::npos);

  auto d = out_dir("placebo_fail");
  write_placebo_json(d / "placebo.json", report);
  std::string err;
  auto parsed = nlohmann::json::parse(slurp(d / "placebo.json"));
  CHECK_MESSAGE(testsupport::validate_schema(schema("placebo.schema.json"), parsed, &err), err);
}

TEST_CASE("exported files match their schemas and shapes") {
  auto panel = effect_panel(12, 36, 27, 141, -2.0, -0.04);
  RunOptions opts;
  opts.grid = 41;
  auto run = run_single(panel, opts);
  auto d = out_dir("export");

  write_counterfactual_csv(d / "counterfactual.csv", run);
  write_summary_json(d / "summary.json", run, opts);
  write_hypothesis_json(d / "hypothesis.json", run, opts);
  write_surface_csv(d / "surface.csv", run);
  write_spectrum_csv(d / "spectrum.csv", run.prior);

  auto cf = slurp(d / "counterfactual.csv");
  CHECK(line_count(cf) == static_cast<size_t>(panel.n_times()) + 1);
  CHECK(cf.rfind("time,d_hat,band_lo,band_hi,observed,national_mean\n", 0) == 0);

  auto surface = slurp(d / "surface.csv");
  CHECK(line_count(surface) == run.surface.size() + 1);

  auto basis_freqs = HarmonicBasis::make(panel.n_times()).n_freqs();
  CHECK(line_count(slurp(d / "spectrum.csv")) == static_cast<size_t>(basis_freqs) + 1);

  std::string err;
  auto summary = nlohmann::json::parse(slurp(d / "summary.json"));
  CHECK_MESSAGE(testsupport::validate_schema(schema("summary.schema.json"), summary, &err), err);
  CHECK(summary["effects"].size() == static_cast<size_t>(panel.n_post()));

  auto hyp = nlohmann::json::parse(slurp(d / "hypothesis.json"));
  CHECK_MESSAGE(testsupport::validate_schema(schema("hypothesis.schema.json"), hyp, &err), err);
  CHECK(hyp["control_fits"].size() == run.control_fits.size());

  auto joint = run_joint(panel, {effect_panel(12, 36, 27, 142, 0.0, 0.0)}, opts);
  REQUIRE(joint.block_prior.has_value());
  write_block_spectrum_csv(d / "spectrum_blocks.csv", *joint.block_prior);
  auto blocks = slurp(d / "spectrum_blocks.csv");
  CHECK(line_count(blocks) == joint.block_prior->freqs.size() + 1);
  CHECK(blocks.rfind("nu,tau_aa,tau_bb,tau_ab\n", 0) == 0);
}

TEST_CASE("error payloads are valid json with the agreed shape") {
  auto text = error_json("FileNotFound", "no such file: x.csv");
  auto parsed = nlohmann::json::parse(text);
  std::string err;
  CHECK_MESSAGE(testsupport::validate_schema(schema("error.schema.json"), parsed, &err), err);
  CHECK(parsed["error"]["code"] == "FileNotFound");
}
