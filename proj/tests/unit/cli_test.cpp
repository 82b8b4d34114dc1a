#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <sys/wait.h>

#include <algorithm>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>

#include <Eigen/Dense>
#include <speccf/spectral.hpp>

#include "generators.hpp"
#include "json.hpp"
#include "schema_lite.hpp"

namespace fs = std::filesystem;

namespace {

struct CommandResult {
  int exit_code = -1;
  std::string out;
};

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

fs::path work_dir() {
  auto d = fs::temp_directory_path() / "speccf_cli_test";
  fs::create_directories(d);
  return d;
}

CommandResult run_cli(const std::string& args) {
  const char* bin = std::getenv("SPECCF_BIN");
  REQUIRE_MESSAGE(bin != nullptr, "SPECCF_BIN must point at the executable");
  auto capture = work_dir() / "stdout.txt";
  std::string cmd = std::string(bin) + " " + args + " > " + capture.string() + " 2>&1";
  int status = std::system(cmd.c_str());
  CommandResult r;
  r.exit_code = WIFEXITED(status) ? WEXITSTATUS(status) : -1;
  r.out = slurp(capture);
  return r;
}

nlohmann::json schema(const char* name) {
  const char* dir = std::getenv("SPECCF_SCHEMAS");
  REQUIRE(dir != nullptr);
  return nlohmann::json::parse(slurp(fs::path(dir) / name));
}

// One deterministic panel CSV reused by all the cases below.
fs::path panel_csv() {
  static fs::path path = [] {
    int n = 12, T = 36, t0 = 27;
    auto basis = speccf::HarmonicBasis::make(T);
    Eigen::VectorXd tau = testsupport::power_law_tau(basis, 2.0, 4.0);
    Eigen::MatrixXd values = testsupport::sample_from_spectrum(tau, basis, n, 2026);
    values.array() += 100.0;
    for (int t = t0 + 1; t < T; ++t) {
      double k = t - t0;
      values(0, t) += -2.0 * k - 0.04 * k * k;
    }
    auto names = testsupport::unit_names(n);
    std::string text = "unit";
    for (int t = 0; t < T; ++t) text += "," + std::to_string(1970 + t);
    text += "\n";
    char buf[32];
    for (int u = 0; u < n; ++u) {
      text += names[u];
      for (int t = 0; t < T; ++t) {
        std::snprintf(buf, sizeof(buf), ",%.12g", values(u, t));
        text += buf;
      }
      text += "\n";
    }
    auto p = work_dir() / "panel.csv";
    std::ofstream(p, std::ios::binary) << text;
    return p;
  }();
  return path;
}

std::string base_args(const fs::path& out) {
  return "--data " + panel_csv().string() + " --treated U00 --t0 1997 --out " + out.string();
}

}  // namespace

TEST_CASE("counterfactual subcommand writes its artifact set") {
  auto out = work_dir() / "cf";
  fs::create_directories(out);
  auto r = run_cli("counterfactual " + base_args(out));
  CHECK_MESSAGE(r.exit_code == 0, r.out);
  CHECK(fs::exists(out / "counterfactual.csv"));
  CHECK(fs::exists(out / "summary.json"));
  CHECK(fs::exists(out / "transform.json"));
  CHECK(fs::exists(out / "spectrum.csv"));

  std::string err;
  auto summary = nlohmann::json::parse(slurp(out / "summary.json"));
  CHECK_MESSAGE(testsupport::validate_schema(schema("summary.schema.json"), summary, &err), err);
  CHECK(summary["treated"] == "U00");
  CHECK(summary["t0"] == 1997.0);
  CHECK(summary["n_units"] == 12);

  auto transform = nlohmann::json::parse(slurp(out / "transform.json"));
  CHECK_MESSAGE(testsupport::validate_schema(schema("transform.schema.json"), transform, &err),
                err);

  // header plus one row per period
  auto cf_csv = slurp(out / "counterfactual.csv");
  CHECK(std::count(cf_csv.begin(), cf_csv.end(), '\n') == 37);
}

TEST_CASE("repeat runs are byte identical") {
  auto out1 = work_dir() / "det1";
  auto out2 = work_dir() / "det2";
  fs::create_directories(out1);
  fs::create_directories(out2);
  REQUIRE(run_cli("counterfactual " + base_args(out1)).exit_code == 0);
  REQUIRE(run_cli("counterfactual " + base_args(out2)).exit_code == 0);
  CHECK(slurp(out1 / "summary.json") == slurp(out2 / "summary.json"));
  CHECK(slurp(out1 / "counterfactual.csv") == slurp(out2 / "counterfactual.csv"));
  CHECK(slurp(out1 / "spectrum.csv") == slurp(out2 / "spectrum.csv"));
  CHECK(slurp(out1 / "transform.json") == slurp(out2 / "transform.json"));
}

TEST_CASE("hypothesis subcommand writes the report and surface") {
  auto out = work_dir() / "hyp";
  fs::create_directories(out);
  auto r = run_cli("hypothesis " + base_args(out) + " --grid 61");
  CHECK_MESSAGE(r.exit_code == 0, r.out);

  std::string err;
  auto hyp = nlohmann::json::parse(slurp(out / "hypothesis.json"));
  CHECK_MESSAGE(testsupport::validate_schema(schema("hypothesis.schema.json"), hyp, &err), err);
  CHECK(hyp["grid"] == 61);
  CHECK(hyp["upper_ratio"].get<double>() >= hyp["bayes_factor"].get<double>());

  auto surface = slurp(out / "surface.csv");
  CHECK(std::count(surface.begin(), surface.end(), '\n') == 61 * 61 + 1);
  CHECK(surface.rfind("alpha,beta,log_ratio,admissible\n", 0) == 0);
}

TEST_CASE("a box pinned at zero forces bayes factor one through the cli") {
  auto out = work_dir() / "null_box";
  fs::create_directories(out);
  auto r = run_cli("hypothesis " + base_args(out) +
                   " --grid 21 --box-alpha 0 0 --box-beta 0 0");
  CHECK_MESSAGE(r.exit_code == 0, r.out);
  auto hyp = nlohmann::json::parse(slurp(out / "hypothesis.json"));
  CHECK(hyp["bayes_factor"] == 1.0);
}

TEST_CASE("placebo subcommand records every unit") {
  auto out = work_dir() / "plc";
  fs::create_directories(out);
  auto r = run_cli("placebo " + base_args(out) + " --grid 41");
  CHECK_MESSAGE(r.exit_code == 0, r.out);

  std::string err;
  auto rep = nlohmann::json::parse(slurp(out / "placebo.json"));
  CHECK_MESSAGE(testsupport::validate_schema(schema("placebo.schema.json"), rep, &err), err);
  CHECK(rep["records"].size() == 12);
  CHECK(rep["records"][0]["is_treated"] == true);

  auto csv = slurp(out / "placebo.csv");
  CHECK(std::count(csv.begin(), csv.end(), '\n') == 13);
}

TEST_CASE("spectrum subcommand writes one row per frequency") {
  auto out = work_dir() / "spec";
  fs::create_directories(out);
  auto r = run_cli("spectrum " + base_args(out));
  CHECK_MESSAGE(r.exit_code == 0, r.out);
  auto csv = slurp(out / "spectrum.csv");
  // T=36: frequencies 0..18
  CHECK(std::count(csv.begin(), csv.end(), '\n') == 20);
  CHECK(csv.rfind("nu,tau\n", 0) == 0);
}

TEST_CASE("fit-transform then load produces identical analyses") {
  auto out = work_dir() / "fit_then_load";
  fs::create_directories(out);
  REQUIRE(run_cli("fit-transform " + base_args(out)).exit_code == 0);
  REQUIRE(fs::exists(out / "transform.json"));

  auto out_fit = work_dir() / "via_fit";
  auto out_load = work_dir() / "via_load";
  fs::create_directories(out_fit);
  fs::create_directories(out_load);
  REQUIRE(run_cli("counterfactual " + base_args(out_fit)).exit_code == 0);
  REQUIRE(run_cli("counterfactual " + base_args(out_load) + " --transform load:" +
                  (out / "transform.json").string())
              .exit_code == 0);
  CHECK(slurp(out_fit / "counterfactual.csv") == slurp(out_load / "counterfactual.csv"));
}

TEST_CASE("missing panel files exit 1 with a machine-readable error") {
  auto r = run_cli("counterfactual --data /no/such/panel.csv --treated A --t0 1990");
  CHECK(r.exit_code == 1);
  auto parsed = nlohmann::json::parse(r.out);
  std::string err;
  CHECK_MESSAGE(testsupport::validate_schema(schema("error.schema.json"), parsed, &err), err);
  CHECK(parsed["error"]["code"] == "FileNotFound");
}

TEST_CASE("unknown units and bad flags map to typed errors") {
  auto out = work_dir() / "errs";
  fs::create_directories(out);

  auto r1 = run_cli("counterfactual --data " + panel_csv().string() +
                    " --treated NOPE --t0 1997 --out " + out.string());
  CHECK(r1.exit_code == 1);
  CHECK(nlohmann::json::parse(r1.out)["error"]["code"] == "UnknownUnit");

  auto r2 = run_cli("counterfactual " + base_args(out) + " --epsilon -1");
  CHECK(r2.exit_code == 1);
  CHECK(nlohmann::json::parse(r2.out)["error"]["code"] == "BadConfig");

  auto r3 = run_cli("hypothesis " + base_args(out) + " --transform bogus");
  CHECK(r3.exit_code == 1);
  CHECK(nlohmann::json::parse(r3.out)["error"]["code"] == "BadConfig");

  auto r4 = run_cli("counterfactual " + base_args(out) + " --ref-year 1900");
  CHECK(r4.exit_code == 1);
  CHECK(nlohmann::json::parse(r4.out)["error"]["code"] == "T0OutOfRange");
}

TEST_CASE("missing required options are a usage error") {
  auto r = run_cli("counterfactual --data " + panel_csv().string());
  CHECK(r.exit_code == 1);
  CHECK(nlohmann::json::parse(r.out)["error"]["code"] == "BadConfig");
}

TEST_CASE("help exits zero without touching the pipeline") {
  CHECK(run_cli("--help").exit_code == 0);
  CHECK(run_cli("counterfactual --help").exit_code == 0);
}

TEST_CASE("options can come from a config file") {
  auto out = work_dir() / "cfg_out";
  fs::create_directories(out);
  auto cfg = work_dir() / "run.cfg";
  std::ofstream(cfg) << "data=" << panel_csv().string() << "\n"
                     << "treated=U00\n"
                     << "t0=1997\n"
                     << "out=" << out.string() << "\n"
                     << "grid=31\n";
  auto r = run_cli("hypothesis --config " + cfg.string());
  CHECK_MESSAGE(r.exit_code == 0, r.out);
  auto hyp = nlohmann::json::parse(slurp(out / "hypothesis.json"));
  CHECK(hyp["grid"] == 31);
}

TEST_CASE("joint covariate runs emit the block spectrum") {
  // second panel: same units and times, independent values
  auto cov_path = work_dir() / "covariate.csv";
  {
    int n = 12, T = 36;
    auto basis = speccf::HarmonicBasis::make(T);
    Eigen::VectorXd tau = testsupport::power_law_tau(basis, 2.0, 4.0);
    Eigen::MatrixXd values = testsupport::sample_from_spectrum(tau, basis, n, 515);
    values.array() += 80.0;
    auto names = testsupport::unit_names(n);
    std::string text = "unit";
    for (int t = 0; t < T; ++t) text += "," + std::to_string(1970 + t);
    text += "\n";
    char buf[32];
    for (int u = 0; u < n; ++u) {
      text += names[u];
      for (int t = 0; t < T; ++t) {
        std::snprintf(buf, sizeof(buf), ",%.12g", values(u, t));
        text += buf;
      }
      text += "\n";
    }
    std::ofstream(cov_path, std::ios::binary) << text;
  }

  auto out = work_dir() / "joint";
  fs::create_directories(out);
  auto r = run_cli("counterfactual " + base_args(out) + " --covariate " + cov_path.string());
  CHECK_MESSAGE(r.exit_code == 0, r.out);
  CHECK(fs::exists(out / "spectrum_blocks.csv"));
  auto blocks = slurp(out / "spectrum_blocks.csv");
  CHECK(blocks.rfind("nu,tau_aa,tau_bb,tau_ab\n", 0) == 0);
}
