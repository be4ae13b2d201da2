#include <sys/wait.h>

#include <cmath>
#include <cstdlib>
#include <cstring>
#include <fstream>
#include <sstream>
#include <string>

#include "casimir/cli.hpp"
#include "doctest.h"

using namespace casimir;
using namespace casimir::cli;

namespace {

const char* plates_text = R"(
# minimal plates run
[mirror1]
model = perfect
[mirror2]
model = perfect
[geometry]
T = 0K
[sweep]
variable = L
from = 0.1um
to = 10um
points = 5
scale = log
)";

std::string config_error_key(const std::string& text, Geometry g, const std::vector<std::string>& sets = {}) {
  try {
    parse_config(text, g, sets);
  } catch (const ConfigError& e) {
    return e.key();
  }
  return "<none>";
}

std::string config_error_message(const std::string& text, Geometry g, const std::vector<std::string>& sets = {}) {
  try {
    parse_config(text, g, sets);
  } catch (const ConfigError& e) {
    return e.what();
  }
  return "";
}

std::string data_lines(const std::string& csv) {
  std::istringstream in(csv);
  std::string line, out;
  while (std::getline(in, line))
    if (line.rfind('#', 0) != 0) out += line + '\n';
  return out;
}

int run_binary(const std::string& args) {
  const std::string cmd = std::string(CASIMIR_CLI_PATH) + " " + args + " >/dev/null 2>&1";
  const int status = std::system(cmd.c_str());
  return WIFEXITED(status) ? WEXITSTATUS(status) : -1;
}

}  // namespace

TEST_CASE("minimal plates config") {
  const auto c = parse_config(plates_text, Geometry::Plates);
  CHECK(c.geometry == Geometry::Plates);
  CHECK(c.mirror1.model.is_perfect());
  CHECK(c.mirror2.model.is_perfect());
  CHECK(c.T == 0.0);
  CHECK(c.A == 1.0);
  CHECK(c.sweep.variable == "L");
  REQUIRE(c.sweep.values.size() == 5);
  CHECK(c.sweep.values.front() == 1e-7);
  CHECK(c.sweep.values.back() == 1e-5);
  CHECK(c.sweep.values[2] == doctest::Approx(1e-6).epsilon(1e-14));
  CHECK(c.format == Format::Csv);
}

TEST_CASE("negative separation names the key") {
  const std::string text = "[mirror1]\nmodel = perfect\n[geometry]\nL = -1um\n";
  CHECK(config_error_key(text, Geometry::Plates) == "geometry.L");
  CHECK(config_error_message(text, Geometry::Plates).find("must be positive") != std::string::npos);
}

TEST_CASE("plasma wavelength is converted to a plasma frequency") {
  const auto c = parse_config("[mirror1]\nmodel = plasma\nlambda_p = 137nm\n[geometry]\nL = 1um\n", Geometry::Plates);
  const double omega = c.mirror1.model.conduction().omega_p;
  CHECK(omega == doctest::Approx(2.0 * pi * PhysicalConstants::c / 137e-9).epsilon(1e-15));
  CHECK(omega == doctest::Approx(1.375e16).epsilon(1e-3));
  CHECK(c.mirror2.model == c.mirror1.model);
  CHECK(c.mirror1.lambda_p() == doctest::Approx(137e-9).epsilon(1e-14));
}

TEST_CASE("unit suffixes") {
  const auto c = parse_config(
      "[mirror1]\nmodel = drude\nomega_p = 9eV\ngamma = 1eV\n[geometry]\nL = 1um\n",
      Geometry::Plates, {"mirror1.gamma=5.3e13rad/s"});
  CHECK(c.mirror1.model.conduction().omega_p ==
        doctest::Approx(9.0 * PhysicalConstants::eV / PhysicalConstants::hbar).epsilon(1e-15));
  CHECK(c.mirror1.model.conduction().gamma == 5.3e13);
  const auto s = parse_config("[mirror1]\nmodel = perfect\n[geometry]\nL = 250nm\nR = 0.5 um\nT = 4K\n",
                              Geometry::Sphere);
  CHECK(s.L == 250e-9);
  CHECK(s.R == 0.5e-6);
  CHECK(s.T == 4.0);
  const auto a = parse_config("[mirror1]\nmodel = perfect\n[geometry]\nL = 1mm\nA = 1um2\n", Geometry::Plates);
  CHECK(a.L == 1e-3);
  CHECK(a.A == 1e-12);
}

TEST_CASE("structured errors name the offending key") {
  const std::string base = "[mirror1]\nmodel = perfect\n[geometry]\nL = 1um\n";
  CHECK(config_error_key(base + "colour = red\n", Geometry::Plates) == "geometry.colour");
  CHECK(config_error_key("[geometry]\nL = 1um\n", Geometry::Plates) == "mirror1.model");
  CHECK(config_error_key("[mirror1]\nmodel = perfect\n", Geometry::Plates) == "geometry.L");
  CHECK(config_error_key(base, Geometry::Plates, {"geometry.T=300 kelvin"}) == "geometry.T");
  CHECK(config_error_key(base, Geometry::Plates, {"geometry.L=1 parsec"}) == "geometry.L");
  CHECK(config_error_key(base, Geometry::Plates, {"geometry.R=1um"}) == "geometry.R");
  CHECK(config_error_key(base, Geometry::Sphere) == "geometry.R");
  CHECK(config_error_key("[mirror1]\nmodel = plasma\n[geometry]\nL = 1um\n", Geometry::Plates) == "mirror1.lambda_p");
  CHECK(config_error_key("[mirror1]\nmodel = drude\nlambda_p = 1um\n[geometry]\nL = 1um\n", Geometry::Plates) ==
        "mirror1.gamma");
  CHECK(config_error_key("[mirror1]\nmodel = perfect\ngamma = 1\n[geometry]\nL = 1um\n", Geometry::Plates) ==
        "mirror1.gamma");
  CHECK(config_error_key("[mirror1]\nmodel = constant\nr = 1\n[geometry]\nL = 1um\n", Geometry::Plates) ==
        "mirror1.model");
  CHECK(config_error_key("[mirror1]\nmodel = constant\nr = 1.5\n[geometry]\nL = 1um\n", Geometry::OneDim) ==
        "mirror1.r");
  CHECK(config_error_key("[mirror1]\nmodel = unobtainium\n[geometry]\nL = 1um\n", Geometry::Plates) ==
        "mirror1.model");
  CHECK(config_error_key(base + "L = 2um\n", Geometry::Plates) == "geometry.L");
  CHECK(config_error_key(base + "[extras]\nx = 1\n", Geometry::Plates) == "extras");
  CHECK(config_error_key(base + "[numerics]\nrel_tol = 0.5\n", Geometry::Plates) == "numerics.rel_tol");
  CHECK(config_error_key(base + "[numerics]\nell_max = 10\n", Geometry::Plates) == "numerics.ell_max");
  CHECK(config_error_key(base + "[output]\nformat = xml\n", Geometry::Plates) == "output.format");
  CHECK(config_error_key(base, Geometry::Plates, {"noseparator"}) == "noseparator");
  CHECK(config_error_key("[mirror1]\nmodel = perfect\n[geometry]\nL = 1um\nlambda_C = 1um\nT = 300K\n",
                         Geometry::Corrugation) == "geometry.T");
}

TEST_CASE("missing table files are I/O errors") {
  CHECK_THROWS_AS(parse_config("[mirror1]\nmodel = tabulated\ntable = /nonexistent.tab\n[geometry]\nL = 1um\n",
                               Geometry::Plates),
                  IoError);
}

TEST_CASE("sweep grids") {
  const std::string base = "[mirror1]\nmodel = perfect\n[geometry]\nT = 0K\n[sweep]\nvariable = L\n";
  const auto lin = parse_config(base + "from = 1um\nto = 2um\npoints = 5\n", Geometry::Plates);
  REQUIRE(lin.sweep.values.size() == 5);
  CHECK(lin.sweep.values[1] == doctest::Approx(1.25e-6).epsilon(1e-15));
  const auto one = parse_config(base + "from = 1um\nto = 2um\npoints = 1\n", Geometry::Plates);
  CHECK(one.sweep.values == std::vector<double>{1e-6});
  const auto list = parse_config(base + "values = 3um, 2um, 1um\n", Geometry::Plates);
  CHECK(list.sweep.values == std::vector<double>{3e-6, 2e-6, 1e-6});
  CHECK(config_error_key(base + "values = 1um, 1um\n", Geometry::Plates) == "sweep.values");
  CHECK(config_error_key(base + "values = 1um, 3um, 2um\n", Geometry::Plates) == "sweep.values");
  CHECK(config_error_key(base + "from = 1um\nto = 1um\npoints = 3\n", Geometry::Plates) == "sweep.from");
  CHECK(config_error_key(base + "from = 1um\nto = 2um\npoints = 0\n", Geometry::Plates) == "sweep.points");
  CHECK(config_error_key(base + "from = 1um\nto = 2um\n", Geometry::Plates) == "sweep.points");
  CHECK(config_error_key(base + "from = 1um\nto = 2um\npoints = 3\nscale = cubic\n", Geometry::Plates) ==
        "sweep.scale");
  CHECK(config_error_key(base, Geometry::Plates, {"sweep.variable=R", "sweep.values=1um"}) == "sweep.variable");
  const auto x = parse_config("[mirror1]\nmodel = perfect\n[geometry]\nR = 2um\n[sweep]\nvariable = x\nvalues = 0.5\n",
                              Geometry::Sphere);
  CHECK(cli::detail::point_inputs(x, 0.5).L == 1e-6);
  const auto k = parse_config(
      "[mirror1]\nmodel = perfect\n[geometry]\nL = 100nm\n[sweep]\nvariable = kCL\nvalues = 1\n", Geometry::Corrugation);
  CHECK(cli::detail::point_inputs(k, 1.0).lambda_C == doctest::Approx(2.0 * pi * 100e-9).epsilon(1e-15));
}

TEST_CASE("overrides replace configured values") {
  const auto c = parse_config(plates_text, Geometry::Plates, {"geometry.T=300K", "sweep.points=2", "output.format=json"});
  CHECK(c.T == 300.0);
  CHECK(c.sweep.values.size() == 2);
  CHECK(c.format == Format::Json);
}

TEST_CASE("plates sweep reproduces the ideal pressure law") {
  const auto res = run(parse_config(plates_text, Geometry::Plates));
  CHECK(res.exit_code() == kSuccess);
  REQUIRE(res.records.size() == 5);
  for (const auto& r : res.records) {
    CHECK(r.status == "ok");
    const double L = r.values[0];
    CHECK(r.values[5] == doctest::Approx(-ideal_casimir(L, 1.0).force).epsilon(1e-6));
    CHECK(r.values[3] == doctest::Approx(ideal_casimir(L, 1.0).energy).epsilon(1e-6));
    CHECK(r.values[7] == 0.0);
  }
}

TEST_CASE("sphere sweep: rho_G decreasing below 1") {
  const auto c = parse_config(
      "[mirror1]\nmodel = perfect\n[geometry]\nR = 1um\n[sweep]\nvariable = x\nvalues = 0.3, 0.4, 0.5\n"
      "[numerics]\nthreads = 3\n",
      Geometry::Sphere);
  const auto res = run(c);
  REQUIRE(res.exit_code() == kSuccess);
  for (std::size_t i = 0; i < res.records.size(); ++i) {
    const auto& v = res.records[i].values;
    CHECK(v[10] < 1.0);
    CHECK(v[9] < 1.0);
    CHECK(v[11] >= 14.0);
    if (i > 0) CHECK(v[10] < res.records[i - 1].values[10]);
  }
}

TEST_CASE("corrugation sweep: r_C from 1 toward 0") {
  const auto c = parse_config(
      "[mirror1]\nmodel = perfect\n[geometry]\nL = 100nm\na1 = 2nm\na2 = 2nm\n[sweep]\nvariable = kCL\n"
      "values = 0.01, 1, 10\n[numerics]\nthreads = 3\n",
      Geometry::Corrugation);
  const auto res = run(c);
  REQUIRE(res.exit_code() == kSuccess);
  const auto& r = res.records;
  CHECK(r[0].values[6] == doctest::Approx(1.0).epsilon(1e-2));
  CHECK(r[1].values[6] < r[0].values[6]);
  CHECK(r[2].values[6] < 0.02);
  CHECK(r[2].values[6] > 0.0);
  for (const auto& rec : r) CHECK(rec.values[9] == 1.0);
}

TEST_CASE("onedim: high-temperature limit of two constant mirrors") {
  const auto c = parse_config(
      "[mirror1]\nmodel = constant\nr = 1\n[mirror2]\nmodel = constant\nr = 0.9\n[geometry]\nL = 100um\nT = 300K\n",
      Geometry::OneDim);
  const auto res = run(c);
  const double kT = PhysicalConstants::k_B * 300.0;
  CHECK(res.records[0].values[2] == doctest::Approx(0.5 * kT * std::log(0.1)).epsilon(1e-9));
  const auto m = parse_config("[mirror1]\nmodel = plasma\nlambda_p = 137nm\n[geometry]\nL = 1um\n", Geometry::OneDim);
  CHECK(run(m).records[0].values[2] < 0.0);
}

TEST_CASE("JSON round trip reproduces every numeric field exactly") {
  auto c = parse_config(plates_text, Geometry::Plates, {"geometry.T=300K", "mirror1.model=plasma",
                                                         "mirror1.lambda_p=137nm"});
  const auto res = run(c);
  std::ostringstream os;
  write_json(os, res, describe(c));
  const auto j = nlohmann::json::parse(os.str());
  REQUIRE(j["records"].size() == res.records.size());
  for (std::size_t i = 0; i < res.records.size(); ++i) {
    for (std::size_t k = 0; k < res.columns.size(); ++k) {
      const auto& field = j["records"][i][res.columns[k]];
      const double v = res.records[i].values[k];
      if (std::isnan(v)) CHECK(field.is_null());
      else CHECK(std::memcmp(&v, &field.get_ref<const double&>(), sizeof v) == 0);
    }
    CHECK(j["records"][i]["status"] == res.records[i].status);
  }
  CHECK(j["metadata"]["geometry"] == "plates");
}

TEST_CASE("CSV numbers parse back to the same doubles") {
  for (double v : {1.0 / 3.0, -4.333752574827449e-07, 1e-300, 6.02214076e23, 0.1 + 0.2}) {
    const auto s = format_number(v);
    CHECK(std::strtod(s.c_str(), nullptr) == v);
  }
  CHECK(format_number(std::nan("")) == "");
}

TEST_CASE("CSV schema and byte-identical reruns") {
  const auto c = parse_config(plates_text, Geometry::Plates);
  std::ostringstream a, b, t;
  write_csv(a, run(c), describe(c));
  write_csv(b, run(c), describe(c));
  CHECK(a.str() == b.str());
  const auto threaded = parse_config(plates_text, Geometry::Plates, {"numerics.threads=4"});
  write_csv(t, run(threaded), describe(threaded));
  CHECK(data_lines(t.str()) == data_lines(a.str()));

  std::istringstream in(a.str());
  std::string line;
  int header = 0, rows = 0;
  bool preamble = true;
  const auto columns = columns_for(Geometry::Plates).size() + 3;
  while (std::getline(in, line)) {
    if (line.rfind('#', 0) == 0) {
      CHECK(preamble);
      continue;
    }
    preamble = false;
    CHECK(static_cast<std::size_t>(std::count(line.begin(), line.end(), ',')) == columns - 1);
    if (header == 0) {
      CHECK(line.rfind("L_m,T_K,", 0) == 0);
      ++header;
    } else {
      ++rows;
    }
  }
  CHECK(rows == 5);
}

TEST_CASE("failed points keep their inputs and cause") {
  const auto c = parse_config(plates_text, Geometry::Plates, {"geometry.T=300K", "numerics.max_subdivisions=1"});
  const auto res = run(c);
  CHECK(res.exit_code() == kPointFailure);
  REQUIRE(res.records.size() == 5);
  for (const auto& r : res.records) {
    CHECK(r.status == "convergence_failure");
    CHECK(!r.error.empty());
    CHECK(r.values[0] > 0.0);
    CHECK(r.values[1] == 300.0);
    CHECK(std::isnan(r.values[5]));
  }
  std::ostringstream os;
  write_csv(os, res, describe(c));
  CHECK(os.str().find("convergence_failure") != std::string::npos);
}

TEST_CASE("command-line exit codes") {
  const std::string cfg = std::string(CASIMIR_CONFIG_DIR) + "/plates_perfect.conf";
  CHECK(run_binary("plates --config " + cfg) == 0);
  CHECK(run_binary("plates --config " + cfg + " --set geometry.A=-1m2") == 2);
  CHECK(run_binary("plates --config " + cfg + " --format xml") == 2);
  CHECK(run_binary("plates --config " + cfg + " --set geometry.T=300K --set numerics.max_subdivisions=1") == 3);
  CHECK(run_binary("plates --config /nonexistent/none.conf") == 4);
  CHECK(run_binary("plates --config " + cfg + " --output /nonexistent/dir/out.csv") == 4);
  CHECK(run_binary("onedim --config " + std::string(CASIMIR_CONFIG_DIR) + "/onedim.conf --format json") == 0);
}
