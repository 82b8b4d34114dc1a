// Command line front end for the spectral counterfactual engine.
//
// Subcommands mirror the pipeline stages so intermediate artifacts can be
// inspected and reused:
//   fit-transform   fit the Gaussianizing transform, write transform.json
//   spectrum        estimate the prior (cross-)spectra, write spectrum CSV
//   counterfactual  solve the treated unit's counterfactual with bands
//   hypothesis      likelihood-ratio and Bayes-factor tests
//   placebo         re-run the analysis with every control as pseudo-treated
//
// Any pipeline failure exits 1 after printing a one-line machine-readable
// JSON error object on stdout.

#include <algorithm>
#include <cstdio>
#include <exception>
#include <filesystem>
#include <fstream>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "speccf/analysis.hpp"
#include "speccf/errors.hpp"
#include "speccf/export.hpp"
#include "speccf/placebo.hpp"

namespace {

struct CliConfig {
  std::string data;
  std::vector<std::string> covariates;
  std::string treated;
  std::string t0;
  double epsilon = 1e-3;
  std::string transform = "fit";
  int poly_order = 2;
  int grid = 201;
  std::string out_dir = ".";
  std::string prior_box = "bbox";
  unsigned long seed = 0;
  bool include_treated_in_mean = false;
  bool per_time_scale = false;
  bool post_noise = false;
  bool shared_transform = false;
  bool keep_true_treated = false;
  bool allow_increase = false;
  bool allow_negative = false;
  int pad = 1;
  double ref_year = 0.0;
  bool has_ref_year = false;
  std::vector<double> box_alpha;
  std::vector<double> box_beta;
  std::string config_file;
};

// Splices the contents of a `--config FILE` sidecar into the argument list
// before CLI11 sees it. Keys are the long option names without the dashes,
// one `key=value` pair per line (bare keys act as flags, `#` starts a
// comment, values with spaces feed multi-value options). Options given
// explicitly on the command line win over the file.
std::vector<std::string> expand_config(std::vector<std::string> args) {
  std::string path;
  std::size_t at = args.size();
  for (std::size_t i = 0; i < args.size(); ++i) {
    if (args[i] == "--config" && i + 1 < args.size()) {
      path = args[i + 1];
      at = i + 2;
      break;
    }
    if (args[i].rfind("--config=", 0) == 0) {
      path = args[i].substr(9);
      at = i + 1;
      break;
    }
  }
  if (path.empty()) return args;

  std::set<std::string> given;
  for (const auto& a : args)
    if (a.rfind("--", 0) == 0) given.insert(a.substr(0, a.find('=')));

  std::ifstream in(path);
  if (!in) speccf::raise(speccf::Errc::file_not_found, "cannot open config file '" + path + "'");

  auto trim = [](std::string s) {
    auto from = s.find_first_not_of(" \t\r");
    auto to = s.find_last_not_of(" \t\r");
    return from == std::string::npos ? std::string() : s.substr(from, to - from + 1);
  };

  std::vector<std::string> extra;
  std::string line;
  while (std::getline(in, line)) {
    if (auto hash = line.find('#'); hash != std::string::npos) line.erase(hash);
    line = trim(line);
    if (line.empty()) continue;
    auto eq = line.find('=');
    std::string key = trim(line.substr(0, eq));
    if (given.count("--" + key)) continue;
    if (eq == std::string::npos) {
      extra.push_back("--" + key);
      continue;
    }
    std::string value = trim(line.substr(eq + 1));
    if (value.find_first_of(" \t") == std::string::npos) {
      extra.push_back("--" + key + "=" + value);
    } else {
      extra.push_back("--" + key);
      std::istringstream parts(value);
      std::string part;
      while (parts >> part) extra.push_back(part);
    }
  }
  args.insert(args.begin() + static_cast<std::ptrdiff_t>(at), extra.begin(), extra.end());
  return args;
}

void add_common(CLI::App* cmd, CliConfig& cfg, bool needs_panel) {
  auto* data = cmd->add_option("--data", cfg.data, "panel CSV (unit,<t1>,<t2>,... header)");
  auto* treated = cmd->add_option("--treated", cfg.treated, "treated unit label");
  auto* t0 = cmd->add_option("--t0", cfg.t0, "last pre-treatment time label");
  if (needs_panel) {
    data->required();
    treated->required();
    t0->required();
  }
  cmd->add_option("--covariate", cfg.covariates,
                  "covariate panel CSV, same units and times (repeatable)");
  cmd->add_option("--epsilon", cfg.epsilon, "pre-treatment noise std in z units")
      ->check(CLI::PositiveNumber)
      ->capture_default_str();
  cmd->add_option("--transform", cfg.transform, "fit | none | load:PATH")
      ->capture_default_str();
  cmd->add_option("--out", cfg.out_dir, "output directory")->capture_default_str();
  cmd->add_option("--seed", cfg.seed, "seed for randomized cross-checks (unused by the core)");
  cmd->add_flag("--include-treated-in-mean", cfg.include_treated_in_mean,
                "include the treated unit in the cross-unit mean");
  cmd->add_flag("--per-time-scale", cfg.per_time_scale,
                "experimental per-time variance normalization");
  cmd->add_option("--pad", cfg.pad, "experimental zero-padding factor for the solve domain")
      ->check(CLI::Range(1, 16))
      ->capture_default_str();
  cmd->add_option("--config", cfg.config_file,
                  "key/value run-config file (keys are long option names)");
}

void add_hypothesis_options(CLI::App* cmd, CliConfig& cfg) {
  cmd->add_option("--poly-order", cfg.poly_order, "polynomial correction order")
      ->check(CLI::Range(1, 2))
      ->capture_default_str();
  cmd->add_option("--grid", cfg.grid, "quadrature nodes per axis")
      ->check(CLI::Range(2, 4001))
      ->capture_default_str();
  cmd->add_option("--prior-box", cfg.prior_box, "bbox | hull")
      ->check(CLI::IsMember({"bbox", "hull"}))
      ->capture_default_str();
  cmd->add_option("--box-alpha", cfg.box_alpha, "override prior alpha range (lo hi)")
      ->expected(2);
  cmd->add_option("--box-beta", cfg.box_beta, "override prior beta range (lo hi)")
      ->expected(2);
  cmd->add_flag("--post-noise", cfg.post_noise,
                "add epsilon^2 to the post-window covariance diagonal");
  cmd->add_flag("--allow-increase", cfg.allow_increase,
                "drop the model-below-counterfactual constraint");
  cmd->add_flag("--allow-negative", cfg.allow_negative,
                "drop the non-negative-data constraint");
}

void add_ref_year(CLI::App* cmd, CliConfig& cfg) {
  cmd->add_option("--ref-year", cfg.ref_year, "reporting time (default: last period)")
      ->trigger_on_parse()
      ->each([&cfg](const std::string&) { cfg.has_ref_year = true; });
}

speccf::RunOptions to_options(const CliConfig& cfg) {
  speccf::RunOptions opts;
  opts.epsilon = cfg.epsilon;
  if (cfg.transform == "fit") {
    opts.transform_mode = speccf::TransformMode::fit;
  } else if (cfg.transform == "none") {
    opts.transform_mode = speccf::TransformMode::none;
  } else if (cfg.transform.rfind("load:", 0) == 0) {
    opts.transform_mode = speccf::TransformMode::load;
    opts.loaded_transform = speccf::load_pipeline(cfg.transform.substr(5));
  } else {
    speccf::raise(speccf::Errc::bad_config,
                  "--transform must be fit, none, or load:PATH, got '" + cfg.transform + "'");
  }
  opts.poly_order = cfg.poly_order;
  opts.grid = cfg.grid;
  opts.prior_hull = cfg.prior_box == "hull";
  opts.include_treated_in_mean = cfg.include_treated_in_mean;
  opts.per_time_scale = cfg.per_time_scale;
  opts.require_reduction = !cfg.allow_increase;
  opts.require_nonnegative = !cfg.allow_negative;
  opts.add_post_noise = cfg.post_noise;
  opts.pad = cfg.pad;
  opts.shared_transform = cfg.shared_transform;
  opts.keep_true_treated = cfg.keep_true_treated;
  if (cfg.has_ref_year) opts.ref_time = cfg.ref_year;
  if (!cfg.box_alpha.empty()) opts.box_alpha = {cfg.box_alpha[0], cfg.box_alpha[1]};
  if (!cfg.box_beta.empty()) opts.box_beta = {cfg.box_beta[0], cfg.box_beta[1]};
  return opts;
}

speccf::PanelData load_primary(const CliConfig& cfg) {
  return speccf::load_panel(cfg.data, cfg.treated, cfg.t0);
}

std::vector<speccf::PanelData> load_covariates(const CliConfig& cfg) {
  std::vector<speccf::PanelData> panels;
  for (const auto& path : cfg.covariates)
    panels.push_back(speccf::load_panel(path, cfg.treated, cfg.t0));
  return panels;
}

speccf::RunResult run_pipeline(const CliConfig& cfg) {
  speccf::PanelData panel = load_primary(cfg);
  std::vector<speccf::PanelData> covs = load_covariates(cfg);
  speccf::RunOptions opts = to_options(cfg);
  return covs.empty() ? speccf::run_single(panel, opts)
                      : speccf::run_joint(panel, covs, opts);
}

int cmd_counterfactual(const CliConfig& cfg) {
  namespace fs = std::filesystem;
  speccf::RunResult run = run_pipeline(cfg);
  fs::path out(cfg.out_dir);
  speccf::write_counterfactual_csv(out / "counterfactual.csv", run);
  speccf::write_summary_json(out / "summary.json", run, to_options(cfg));
  speccf::save_pipeline(run.gauss.pipeline, out / "transform.json");
  speccf::write_spectrum_csv(out / "spectrum.csv", run.prior);
  if (run.block_prior)
    speccf::write_block_spectrum_csv(out / "spectrum_blocks.csv", *run.block_prior);
  std::printf("counterfactual written to %s\n", out.string().c_str());
  return 0;
}

int cmd_hypothesis(const CliConfig& cfg) {
  namespace fs = std::filesystem;
  speccf::RunResult run = run_pipeline(cfg);
  fs::path out(cfg.out_dir);
  speccf::write_hypothesis_json(out / "hypothesis.json", run, to_options(cfg));
  speccf::write_surface_csv(out / "surface.csv", run);
  std::printf("hypothesis results written to %s\n", out.string().c_str());
  return 0;
}

int cmd_placebo(const CliConfig& cfg) {
  namespace fs = std::filesystem;
  speccf::PanelData panel = load_primary(cfg);
  speccf::PlaceboReport report = speccf::run_placebo(panel, to_options(cfg));
  fs::path out(cfg.out_dir);
  speccf::write_placebo_csv(out / "placebo.csv", report);
  speccf::write_placebo_json(out / "placebo.json", report);
  std::printf("placebo report written to %s (%d failed)\n", out.string().c_str(),
              report.n_failed);
  return 0;
}

int cmd_spectrum(const CliConfig& cfg) {
  namespace fs = std::filesystem;
  speccf::PanelData panel = load_primary(cfg);
  std::vector<speccf::PanelData> covs = load_covariates(cfg);
  speccf::RunOptions opts = to_options(cfg);

  speccf::DemeanedPanel demeaned = speccf::demean(panel, opts.include_treated_in_mean);
  speccf::TransformPipeline pipeline;
  switch (opts.transform_mode) {
    case speccf::TransformMode::none: pipeline = speccf::TransformPipeline::identity(); break;
    case speccf::TransformMode::load: pipeline = opts.loaded_transform; break;
    default: pipeline = speccf::fit_pipeline(demeaned, true); break;
  }
  speccf::GaussianizedPanel gauss =
      speccf::gaussianize(demeaned, pipeline, opts.per_time_scale);
  speccf::HarmonicBasis basis = speccf::HarmonicBasis::make(panel.n_times());

  fs::path out(cfg.out_dir);
  if (covs.empty()) {
    speccf::SpectralPrior prior =
        speccf::estimate_prior(gauss.z, basis, panel.treated_index);
    speccf::write_spectrum_csv(out / "spectrum.csv", prior);
  } else {
    std::vector<Eigen::MatrixXd> z_list;
    z_list.push_back(gauss.z);
    for (const auto& cov : covs) {
      if (cov.unit_ids != panel.unit_ids || cov.times != panel.times)
        speccf::raise(speccf::Errc::panel_mismatch,
                      "covariate panel does not match the primary panel");
      speccf::DemeanedPanel dc = speccf::demean(cov, opts.include_treated_in_mean);
      speccf::TransformPipeline pc = opts.transform_mode == speccf::TransformMode::fit
                                         ? speccf::fit_pipeline(dc, true)
                                         : pipeline;
      z_list.push_back(speccf::gaussianize(dc, pc, opts.per_time_scale).z);
    }
    speccf::BlockSpectralPrior prior =
        speccf::estimate_block_prior(z_list, basis, panel.treated_index);
    speccf::write_block_spectrum_csv(out / "spectrum.csv", prior);
  }
  std::printf("spectrum written to %s\n", out.string().c_str());
  return 0;
}

int cmd_fit_transform(const CliConfig& cfg) {
  namespace fs = std::filesystem;
  speccf::PanelData panel = load_primary(cfg);
  speccf::RunOptions opts = to_options(cfg);
  speccf::DemeanedPanel demeaned = speccf::demean(panel, opts.include_treated_in_mean);
  speccf::TransformPipeline pipeline = speccf::fit_pipeline(demeaned, true);
  fs::path out(cfg.out_dir);
  speccf::save_pipeline(pipeline, out / "transform.json");
  std::printf("transform written to %s\n", (out / "transform.json").string().c_str());
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Spectral counterfactual engine for panel data"};
  app.require_subcommand(1);

  CliConfig cfg;

  auto* cf = app.add_subcommand("counterfactual",
                                "solve the treated unit's counterfactual with error bands");
  add_common(cf, cfg, true);
  add_ref_year(cf, cfg);

  auto* hyp = app.add_subcommand("hypothesis",
                                 "likelihood-ratio upper limit and Bayes factor");
  add_common(hyp, cfg, true);
  add_hypothesis_options(hyp, cfg);
  add_ref_year(hyp, cfg);

  auto* plc = app.add_subcommand("placebo", "re-run with each control as pseudo-treated");
  add_common(plc, cfg, true);
  add_hypothesis_options(plc, cfg);
  add_ref_year(plc, cfg);
  plc->add_flag("--shared-transform", cfg.shared_transform,
                "fit the transform once and reuse it for every placebo run");
  plc->add_flag("--keep-true-treated", cfg.keep_true_treated,
                "leave the genuinely treated unit in placebo control pools");

  auto* spec = app.add_subcommand("spectrum", "estimate and export the prior spectra");
  add_common(spec, cfg, true);

  auto* fit = app.add_subcommand("fit-transform", "fit and export the Gaussianizing transform");
  add_common(fit, cfg, true);

  try {
    std::vector<std::string> args(argv + 1, argv + argc);
    args = expand_config(std::move(args));
    std::reverse(args.begin(), args.end());
    app.parse(std::move(args));
  } catch (const CLI::ParseError& e) {
    if (e.get_exit_code() == 0) return app.exit(e);
    std::fputs(speccf::error_json("BadConfig", e.what()).c_str(), stdout);
    return 1;
  } catch (const speccf::Error& e) {
    std::fputs(speccf::error_json(speccf::to_string(e.code()), e.message()).c_str(), stdout);
    return 1;
  }

  try {
    if (app.got_subcommand(cf)) return cmd_counterfactual(cfg);
    if (app.got_subcommand(hyp)) return cmd_hypothesis(cfg);
    if (app.got_subcommand(plc)) return cmd_placebo(cfg);
    if (app.got_subcommand(spec)) return cmd_spectrum(cfg);
    if (app.got_subcommand(fit)) return cmd_fit_transform(cfg);
  } catch (const speccf::Error& e) {
    std::fputs(speccf::error_json(speccf::to_string(e.code()), e.message()).c_str(), stdout);
    return 1;
  } catch (const std::exception& e) {
    std::fputs(speccf::error_json("Internal", e.what()).c_str(), stdout);
    return 1;
  }
  return 0;
}
