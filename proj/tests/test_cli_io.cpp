#include <gtest/gtest.h>

#include <sys/wait.h>

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>
#include <vector>

#include "vortexloc/io.hpp"

using namespace vortexloc;
namespace fs = std::filesystem;

namespace {

struct Outcome {
  int status = -1;
  std::string out;
};

// runs the CLI with stderr discarded unless the caller redirects it
Outcome run_cli(const std::string& args, const std::string& redirect = "2>/dev/null") {
  const std::string cmd = std::string(VORTEX_LOCALIZE_BIN) + " " + args + " " + redirect;
  Outcome o;
  FILE* pipe = popen(cmd.c_str(), "r");
  if (!pipe) return o;
  char buf[4096];
  while (std::fgets(buf, sizeof buf, pipe)) o.out += buf;
  const int raw = pclose(pipe);
  o.status = WIFEXITED(raw) ? WEXITSTATUS(raw) : -1;
  return o;
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

double value_after(const std::string& text, const std::string& key) {
  const auto pos = text.find(key);
  if (pos == std::string::npos) return std::nan("");
  return std::stod(text.substr(pos + key.size()));
}

// data rows only (no '#' lines), split on commas
std::vector<std::vector<std::string>> rows_of(const std::string& csv) {
  std::vector<std::vector<std::string>> rows;
  std::istringstream in(csv);
  std::string line;
  while (std::getline(in, line)) {
    if (line.empty() || line[0] == '#') continue;
    std::vector<std::string> cells;
    std::istringstream ls(line);
    std::string cell;
    while (std::getline(ls, cell, ',')) cells.push_back(cell);
    rows.push_back(cells);
  }
  return rows;
}

std::string header_of(const std::string& csv) {
  std::istringstream in(csv);
  std::string line;
  std::getline(in, line);  // manifest
  std::getline(in, line);
  return line;
}

class CliTest : public ::testing::Test {
 protected:
  void SetUp() override {
    dir_ = fs::temp_directory_path() /
           ("vortexloc-cli-" + std::string(::testing::UnitTest::GetInstance()->current_test_info()->name()));
    fs::remove_all(dir_);
    fs::create_directories(dir_);
  }
  void TearDown() override { fs::remove_all(dir_); }

  std::string path(const std::string& name) const { return (dir_ / name).string(); }

  std::string write(const std::string& name, const std::string& content) const {
    std::ofstream(dir_ / name) << content;
    return path(name);
  }

  fs::path dir_;
};

}  // namespace

TEST(ConfigParsing, EmptyConfigGivesDefaults) {
  for (const char* text : {"", "{}", "// nothing set\n{}\n"}) {
    io::RunSpec spec;
    io::apply_config_text(text, spec);
    const SystemConfig c = spec.config();
    EXPECT_DOUBLE_EQ(c.beam.omega_c0.mhz(), 80.0);
    EXPECT_EQ(c.beam.waist_w0, 1.0);
    EXPECT_EQ(c.beam.wavelength_c, 0.48);
    EXPECT_DOUBLE_EQ(c.medium.gamma_e.mhz(), 6.05);
    EXPECT_EQ(c.medium.density_rho, 0.6);
    EXPECT_DOUBLE_EQ(c.medium.c6 / kTwoPi, 1.4e5);
    EXPECT_DOUBLE_EQ(c.detuning.delta_c0.mhz(), 30.0);
    EXPECT_EQ(c.detuning.mode, DetuningMode::StandingWave);
    EXPECT_TRUE(spec.delta_auto);
  }
}

TEST(ConfigParsing, UnknownKeyIsNamed) {
  io::RunSpec spec;
  try {
    io::apply_config_text(R"({"beam": {"waste": 2.0}})", spec);
    FAIL() << "unknown key accepted";
  } catch (const ConfigError& e) {
    EXPECT_NE(std::string(e.what()).find("waste"), std::string::npos);
  }
  EXPECT_THROW(io::apply_config_text(R"({"colour": 1})", spec), ConfigError);
}

TEST(ConfigParsing, KappaShorthandSetsProbe) {
  io::RunSpec spec;
  io::apply_config_text(R"({"kappa": 500})", spec);
  EXPECT_NEAR(spec.config().probe.omega_p0.mhz(), 0.16, 1e-12);
}

TEST(ConfigParsing, ParseErrorReportsLine) {
  io::RunSpec spec;
  try {
    io::apply_config_text("{\n  \"kappa\": 10,\n  \"beam\": {\"waist_um\" 2}\n}", spec);
    FAIL() << "malformed document accepted";
  } catch (const ConfigError& e) {
    EXPECT_NE(std::string(e.what()).find("line 3"), std::string::npos) << e.what();
  }
}

TEST(ConfigParsing, SectionsAndInvariants) {
  io::RunSpec spec;
  io::apply_config_text(R"({
    // comments are allowed
    "beam": {"waist_um": 5.0, "winding_l": 2},
    "detuning": {"delta_mhz": 31.0},
    "quadrature": {"spacing_lambda": 0.02},
    "noise": {"kind": "frequency", "std": 0.5, "seed": 9}
  })",
                        spec);
  const SystemConfig c = spec.config();
  EXPECT_EQ(c.beam.waist_w0, 5.0);
  EXPECT_EQ(c.beam.winding_l, 2);
  EXPECT_FALSE(spec.delta_auto);
  EXPECT_DOUBLE_EQ(c.detuning.delta_shift.mhz(), 31.0);
  EXPECT_NEAR(spec.quadrature().spacing_r, 0.0096, 1e-15);
  EXPECT_NEAR(spec.noise_spec().std_dev, kTwoPi * 0.5, 1e-15);
  EXPECT_EQ(spec.noise_spec().seed, 9u);

  io::RunSpec bad;
  io::apply_config_text(R"({"beam": {"waist_um": -1}})", bad);
  EXPECT_THROW(bad.config(), ConfigError);
}

TEST(Output, CsvCarriesManifestAndUnits) {
  io::Table t;
  t.add("x", "um").values = {0.1, 0.2};
  t.add("sigma_rr", "1").values = {1.0, 0.5};
  std::ostringstream os;
  io::write_csv(os, io::Json{{"tool", "vortex-localize"}}, t);
  EXPECT_EQ(os.str(), "# manifest: {\"tool\":\"vortex-localize\"}\n# x [um],sigma_rr [1]\n0.10000000000000001,1\n"
                      "0.20000000000000001,0.5\n");
}

TEST_F(CliTest, TransverseScanPrintsFourNanometres) {
  const Outcome o = run_cli("scan-r --kappa 500");
  ASSERT_EQ(o.status, 0);
  EXPECT_NEAR(value_after(o.out, "fwhm="), 4.0, 1.0);
}

TEST_F(CliTest, CalibrateDelta) {
  const Outcome o = run_cli("calibrate-delta --kappa 100 --grid-spacing 0.02");
  ASSERT_EQ(o.status, 0);
  const double delta = value_after(o.out, "delta/2pi=");
  EXPECT_NEAR(delta - 30.0, 1.15, 0.02 * 1.15);
}

TEST_F(CliTest, ZeroNoiseMatchesTransverseScan) {
  ASSERT_EQ(run_cli("scan-r --kappa 180 --out " + path("r.csv")).status, 0);
  ASSERT_EQ(run_cli("noise --kappa 180 --kind intensity --std 0 --seed 7 --out " + path("n.csv")).status, 0);
  const auto a = rows_of(slurp(path("r.csv")));
  const auto b = rows_of(slurp(path("n.csv")));
  ASSERT_EQ(a.size(), b.size());
  ASSERT_FALSE(a.empty());
  for (std::size_t i = 0; i < a.size(); ++i) EXPECT_EQ(a[i][2], b[i][2]) << "row " << i;
}

TEST_F(CliTest, ThreadCountDoesNotChangeBytes) {
  const std::string args = "scan-r --kappa 100 --mode partial --samples 51 --grid-spacing 0.05 --out ";
  ASSERT_EQ(run_cli(args + path("t1.csv") + " --threads 1").status, 0);
  ASSERT_EQ(run_cli(args + path("t4.csv") + " --threads 4").status, 0);
  EXPECT_EQ(slurp(path("t1.csv")), slurp(path("t4.csv")));
}

TEST_F(CliTest, RerunsAreByteIdentical) {
  const std::string args = "noise --kappa 180 --kind frequency --std 0.5 --seed 3 --out ";
  ASSERT_EQ(run_cli(args + path("a.csv")).status, 0);
  ASSERT_EQ(run_cli(args + path("b.csv")).status, 0);
  EXPECT_EQ(slurp(path("a.csv")), slurp(path("b.csv")));
  ASSERT_EQ(run_cli("noise --kappa 180 --kind frequency --std 0.5 --seed 4 --out " + path("c.csv")).status, 0);
  EXPECT_NE(slurp(path("a.csv")), slurp(path("c.csv")));
  const io::Json run = io::Json::parse(slurp(path("a.csv.run.json")));
  EXPECT_TRUE(run.contains("wall_clock_s"));
}

TEST_F(CliTest, FlagsOverrideConfigFile) {
  const std::string cfg = write("k.json", R"({"kappa": 10})");
  const Outcome file_only = run_cli("scan-r --config " + cfg);
  ASSERT_EQ(file_only.status, 0);
  EXPECT_NEAR(value_after(file_only.out, "fwhm="), 202.05, 0.1);
  const Outcome both = run_cli("scan-r --config " + cfg + " --kappa 500");
  ASSERT_EQ(both.status, 0);
  EXPECT_NEAR(value_after(both.out, "fwhm="), 4.0, 0.01);
}

TEST_F(CliTest, UnitHeadersOnEveryColumn) {
  ASSERT_EQ(run_cli("scan-r --kappa 500 --samples 11 --out " + path("u.csv")).status, 0);
  const std::string csv = slurp(path("u.csv"));
  EXPECT_EQ(csv.rfind("# manifest: {", 0), 0u);
  EXPECT_EQ(header_of(csv), "# x [um],x [lambda_c],sigma_rr [1]");
  EXPECT_EQ(rows_of(csv).size(), 11u);
}

TEST_F(CliTest, JsonFormatHoldsSameData) {
  ASSERT_EQ(run_cli("scan-r --kappa 500 --samples 11 --out " + path("d.csv")).status, 0);
  ASSERT_EQ(run_cli("scan-r --kappa 500 --samples 11 --format json --out " + path("d.json")).status, 0);
  const io::Json doc = io::Json::parse(slurp(path("d.json")));
  EXPECT_EQ(doc["manifest"]["subcommand"], "scan-r");
  ASSERT_EQ(doc["columns"].size(), 3u);
  EXPECT_EQ(doc["columns"][2]["unit"], "1");
  const auto rows = rows_of(slurp(path("d.csv")));
  for (std::size_t i = 0; i < rows.size(); ++i) {
    EXPECT_EQ(doc["columns"][2]["values"][i].get<double>(), std::stod(rows[i][2]));
  }
}

TEST_F(CliTest, Map3DWritesSidecars) {
  const Outcome o = run_cli("map3d --kappa 500 --map-points 21 --grid-spacing 0.05 --out " + path("m.csv"));
  ASSERT_EQ(o.status, 0);
  EXPECT_TRUE(fs::exists(path("m.csv.iso.csv")));
  const io::Json summary = io::Json::parse(slurp(path("m.csv.summary.json")));
  EXPECT_TRUE(summary["closed"].get<bool>());
  EXPECT_GT(summary["iso_points"].get<int>(), 0);
  EXPECT_EQ(rows_of(slurp(path("m.csv"))).size(), 21u * 21u * 21u);
}

TEST_F(CliTest, OtherSubcommandsRun) {
  EXPECT_EQ(run_cli("steady --kappa 100 --grid-spacing 0.05 --r 0.02").status, 0);
  EXPECT_EQ(run_cli("scan-l --kappa 10 --l-values 1,2").status, 0);
  EXPECT_EQ(run_cli("scan-z --kappa 100 --grid-spacing 0.05 --samples 401").status, 0);
  EXPECT_EQ(run_cli("shift --kappa 100 --grid-spacing 0.05 --range-samples 3").status, 0);
  EXPECT_EQ(run_cli("blockade --kappa 100").status, 0);
  const Outcome ts = run_cli("steady-time --kappa 10");
  ASSERT_EQ(ts.status, 0);
  EXPECT_NEAR(value_after(ts.out, "T_s="), 0.466, 0.01);
}

TEST_F(CliTest, ErrorsExitNonZeroWithDiagnostics) {
  const std::string cfg = write("bad.json", R"({"beam": {"waste": 1}})");
  const Outcome bad = run_cli("scan-r --config " + cfg, "2>&1");
  EXPECT_EQ(bad.status, 2);
  EXPECT_NE(bad.out.find("beam.waste"), std::string::npos) << bad.out;

  const Outcome domain = run_cli("scan-r --waist -1", "2>&1");
  EXPECT_EQ(domain.status, 2);
  EXPECT_NE(domain.out.find("beam.waist"), std::string::npos) << domain.out;

  const Outcome guard = run_cli("calibrate-delta --grid-spacing 0.02 --grid-extent 0.01", "2>&1");
  EXPECT_NE(guard.status, 0);

  EXPECT_NE(run_cli("no-such-command").status, 0);
}

TEST(Output, ColumnReferencesSurviveLaterColumns) {
  io::Table t;
  auto& a = t.add("a", "1");
  auto& b = t.add("b", "1");
  for (int i = 0; i < 20; ++i) t.add("pad" + std::to_string(i), "1");
  a.values.push_back(1.0);
  b.values.push_back(2.0);
  EXPECT_EQ(t.columns[0].values, std::vector<double>{1.0});
  EXPECT_EQ(t.columns[1].values, std::vector<double>{2.0});
}
