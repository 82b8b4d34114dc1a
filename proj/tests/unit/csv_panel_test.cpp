#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <speccf/csv.hpp>
#include <speccf/errors.hpp>
#include <speccf/panel.hpp>

#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>
#include <vector>

namespace fs = std::filesystem;
using namespace speccf;

namespace {

fs::path temp_dir() {
  auto d = fs::temp_directory_path() / "speccf_csv_test";
  fs::create_directories(d);
  return d;
}

fs::path write_text(const std::string& name, const std::string& body) {
  auto p = temp_dir() / name;
  std::ofstream out(p, std::ios::binary);
  out << body;
  return p;
}

std::vector<csv::Row> parse_text(const std::string& body) {
  return csv::read_file(write_text("scratch.csv", body));
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

const std::string kSmallPanel =
    "unit,1990,1991,1992,1993,1994\n"
    "A,1,2,3,4,5\n"
    "B,2,2,2,2,2\n"
    "C,0,4,1,3,2\n";

}  // namespace

TEST_CASE("csv reader handles quotes, embedded separators and CRLF") {
  auto rows = parse_text("a,\"b,c\",d\r\n\"x\"\"y\",2,\"line\nbreak\"\n");
  REQUIRE(rows.size() == 2);
  CHECK(rows[0].size() == 3);
  CHECK(rows[0][1] == "b,c");
  CHECK(rows[1][0] == "x\"y");
  CHECK(rows[1][2] == "line\nbreak");
}

TEST_CASE("csv reader keeps empty fields and trailing columns") {
  auto rows = parse_text("a,,c\n,,\n");
  REQUIRE(rows.size() == 2);
  CHECK(rows[0][1] == "");
  CHECK(rows[1].size() == 3);
}

TEST_CASE("csv escape round-trips through the reader") {
  std::vector<std::string> fields = {"plain", "with,comma", "with\"quote", "multi\nline", ""};
  auto rows = parse_text(csv::join_row(fields) + "\n");
  REQUIRE(rows.size() == 1);
  CHECK((rows[0] == fields));
}

TEST_CASE("format_double is stable and round-trippable") {
  CHECK(csv::format_double(0.1) == "0.1");
  CHECK(csv::format_double(-3.0) == "-3");
  CHECK(csv::format_double(std::nan("")) == "nan");
  double v = 1.2345678901234e-7;
  CHECK(std::stod(csv::format_double(v)) == doctest::Approx(v).epsilon(1e-11));
}

TEST_CASE("atomic_write creates parent directories and replaces content") {
  auto p = temp_dir() / "nested" / "deep" / "out.txt";
  fs::remove_all(temp_dir() / "nested");
  csv::atomic_write(p, "first");
  csv::atomic_write(p, "second");
  CHECK(slurp(p) == "second");
  CHECK_FALSE(fs::exists(p.string() + ".tmp"));
}

TEST_CASE("reading a missing file reports FileNotFound") {
  CHECK_THROWS_AS(csv::read_file("/nonexistent/speccf/x.csv"), Error);
  try {
    csv::read_file("/nonexistent/speccf/x.csv");
  } catch (const Error& e) {
    CHECK(e.code() == Errc::file_not_found);
  }
}

TEST_CASE("load_panel maps units and periods onto the matrix") {
  auto p = write_text("small.csv", kSmallPanel);
  auto panel = load_panel(p.string(), "A", "1992");

  CHECK(panel.n_units() == 3);
  CHECK(panel.n_times() == 5);
  CHECK(panel.treated_index == 0);
  CHECK(panel.t0_index == 2);
  CHECK(panel.n_pre() == 3);
  CHECK(panel.n_post() == 2);
  CHECK(panel.times(0) == 1990.0);
  CHECK(panel.values(0, 3) == 4.0);
  CHECK(panel.values(2, 1) == 4.0);
  CHECK(panel.unit_index("C") == 2);
  CHECK(panel.time_step() == 1.0);
}

TEST_CASE("t0 accepts a numeric label spelled differently") {
  auto p = write_text("small2.csv", kSmallPanel);
  auto panel = load_panel(p.string(), "B", "1992.0");
  CHECK(panel.t0_index == 2);
  CHECK(panel.treated_index == 1);
}

TEST_CASE("load_panel rejects malformed inputs with typed errors") {
  auto check_code = [](const std::string& body, const std::string& treated,
                       const std::string& t0, Errc want) {
    auto p = write_text("bad.csv", body);
    try {
      load_panel(p.string(), treated, t0);
      FAIL_CHECK("expected error");
    } catch (const Error& e) {
      CHECK(e.code() == want);
    }
  };

  SUBCASE("blank cell") {
    check_code("unit,1,2\nA,1,\nB,1,2\n", "A", "1", Errc::missing_cell);
  }
  SUBCASE("non-numeric cell") {
    check_code("unit,1,2\nA,1,x\nB,1,2\n", "A", "1", Errc::missing_cell);
  }
  SUBCASE("ragged row") {
    check_code("unit,1,2,3\nA,1,2,3\nB,1,2\n", "A", "1", Errc::ragged_rows);
  }
  SUBCASE("unknown treated unit") {
    check_code(kSmallPanel, "Z", "1992", Errc::unknown_unit);
  }
  SUBCASE("unknown treatment period") {
    check_code(kSmallPanel, "A", "2005", Errc::t0_out_of_range);
  }
  SUBCASE("treatment in the last period leaves no post window") {
    check_code(kSmallPanel, "A", "1994", Errc::t0_out_of_range);
  }
  SUBCASE("non-uniform period spacing") {
    check_code("unit,1990,1991,1993\nA,1,2,3\nB,1,2,3\n", "A", "1991",
               Errc::non_uniform_time_step);
  }
  SUBCASE("non-integer period labels") {
    check_code("unit,1990.5,1991.25,1992\nA,1,2,3\nB,1,2,3\n", "A", "1990.5",
               Errc::non_uniform_time_step);
  }
  SUBCASE("single unit") {
    check_code("unit,1,2\nA,1,2\n", "A", "1", Errc::too_few_controls);
  }
}

TEST_CASE("demean removes the control mean at every period") {
  auto p = write_text("small3.csv", kSmallPanel);
  auto panel = load_panel(p.string(), "A", "1992");
  auto dm = demean(panel);

  CHECK_FALSE(dm.treated_in_mean);
  for (int t = 0; t < panel.n_times(); ++t) {
    double m = 0.0;
    int n = 0;
    for (int u = 0; u < panel.n_units(); ++u) {
      if (u == panel.treated_index) continue;
      m += dm.residuals(u, t);
      ++n;
    }
    CHECK(std::abs(m / n) < 1e-12);
  }
}

TEST_CASE("two controls at 1 and 3 demean to -1 and +1") {
  auto p = write_text("pair.csv", "unit,1,2\nT,5,5\nB,1,1\nC,3,3\n");
  auto panel = load_panel(p.string(), "T", "1");
  auto dm = demean(panel);
  CHECK(dm.mean_series(0) == doctest::Approx(2.0));
  CHECK(dm.residuals(1, 0) == doctest::Approx(-1.0));
  CHECK(dm.residuals(2, 0) == doctest::Approx(1.0));
  CHECK(dm.residuals(0, 0) == doctest::Approx(3.0));
}

TEST_CASE("residuals plus mean reconstruct the panel exactly") {
  auto p = write_text("small4.csv", kSmallPanel);
  auto panel = load_panel(p.string(), "C", "1991");
  auto dm = demean(panel);
  for (int u = 0; u < panel.n_units(); ++u)
    for (int t = 0; t < panel.n_times(); ++t)
      CHECK(dm.residuals(u, t) + dm.mean_series(t) ==
            doctest::Approx(panel.values(u, t)).epsilon(1e-12));
}

TEST_CASE("identical units leave zero residuals") {
  auto p = write_text("flat.csv", "unit,1,2,3\nA,4,5,6\nB,4,5,6\nC,4,5,6\n");
  auto panel = load_panel(p.string(), "A", "2");
  auto dm = demean(panel, true);
  CHECK(dm.treated_in_mean);
  CHECK(dm.residuals.cwiseAbs().maxCoeff() < 1e-12);
}

TEST_CASE("including the treated unit shifts the mean") {
  auto p = write_text("small5.csv", kSmallPanel);
  auto panel = load_panel(p.string(), "A", "1992");
  auto with = demean(panel, true);
  auto without = demean(panel, false);
  CHECK(with.mean_series(0) == doctest::Approx(1.0));
  CHECK(without.mean_series(0) == doctest::Approx(1.0));
  CHECK(with.mean_series(1) == doctest::Approx((2.0 + 2.0 + 4.0) / 3));
  CHECK(without.mean_series(1) == doctest::Approx(3.0));
}

TEST_CASE("select_units keeps order and re-resolves the treated unit") {
  auto p = write_text("small6.csv", kSmallPanel);
  auto panel = load_panel(p.string(), "A", "1992");
  auto sub = select_units(panel, {"C", "A"}, "A");
  CHECK(sub.n_units() == 2);
  CHECK(sub.unit_ids[0] == "C");
  CHECK(sub.treated_index == 1);
  CHECK(sub.values(0, 2) == panel.values(2, 2));
  CHECK(sub.t0_index == panel.t0_index);

  CHECK_THROWS_AS(select_units(panel, {"A", "Q"}, "A"), Error);
}
