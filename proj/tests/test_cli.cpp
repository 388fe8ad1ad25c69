// End-to-end checks of the command-line tool: catalog listing, experiment
// runs with deterministic artifacts, single-line error reporting, curve
// fitting, the refocusing-delay scan, and parallel fan-out over specs.

#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <sys/wait.h>

#include <cmath>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>
#include <vector>

#include "spincool/text.hpp"

namespace fs = std::filesystem;

namespace {

struct CmdResult {
  int exit_code = -1;
  std::string out;
  std::string err;
};

std::string read_all(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  REQUIRE(in.good());
  return std::string(std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>());
}

void write_all(const fs::path& path, const std::string& content) {
  std::ofstream out(path, std::ios::binary);
  REQUIRE(out.good());
  out << content;
}

fs::path scratch_root() {
  static const fs::path root = [] {
    fs::path dir = fs::temp_directory_path() / "spincool_cli_tests";
    fs::remove_all(dir);
    fs::create_directories(dir);
    return dir;
  }();
  return root;
}

fs::path fresh_dir(const std::string& name) {
  fs::path dir = scratch_root() / name;
  fs::remove_all(dir);
  fs::create_directories(dir);
  return dir;
}

CmdResult run_cli(const std::string& args) {
  static int counter = 0;
  const fs::path out = scratch_root() / ("stdout_" + std::to_string(counter));
  const fs::path err = scratch_root() / ("stderr_" + std::to_string(counter));
  ++counter;
  const std::string cmd = std::string("\"") + SPINCOOL_BIN + "\" " + args + " > \"" +
                          out.string() + "\" 2> \"" + err.string() + "\"";
  const int status = std::system(cmd.c_str());
  CmdResult result;
  result.exit_code = WIFEXITED(status) ? WEXITSTATUS(status) : -1;
  result.out = read_all(out);
  result.err = read_all(err);
  return result;
}

std::string data_file(const std::string& rel) { return std::string(SPINCOOL_DATA_DIR) + "/" + rel; }

// The value after `key ` on the first stdout line that starts with it.
std::string field(const std::string& text, const std::string& key) {
  std::istringstream in(text);
  std::string line;
  while (std::getline(in, line)) {
    if (line.rfind(key + " ", 0) == 0) return line.substr(key.size() + 1);
  }
  return {};
}

int count_lines(const std::string& text) {
  return static_cast<int>(std::count(text.begin(), text.end(), '\n'));
}

}  // namespace

TEST_CASE("list prints the builtin catalog") {
  CmdResult r = run_cli("list");
  CHECK(r.exit_code == 0);
  CHECK(r.err.empty());

  // Exactly four molecules between the two section headers.
  std::istringstream in(r.out);
  std::string line;
  int molecule_rows = 0;
  bool in_molecules = false;
  while (std::getline(in, line)) {
    if (line == "molecules:") {
      in_molecules = true;
    } else if (line == "sequences:") {
      in_molecules = false;
    } else if (in_molecules && !line.empty()) {
      ++molecule_rows;
    }
  }
  CHECK(molecule_rows == 4);
  CHECK(r.out.find("glycine") != std::string::npos);
  CHECK(r.out.find("glutamate_gd_310") != std::string::npos);
  CHECK(r.out.find("310.15 K") != std::string::npos);
  CHECK(r.out.find("potent_plus") != std::string::npos);
  CHECK(r.out.find("inversion_recovery") != std::string::npos);
}

TEST_CASE("run executes the shipped relay-and-wait experiment reproducibly") {
  const fs::path dir_a = fresh_dir("wait_a");
  CmdResult first =
      run_cli("run \"" + data_file("experiments/glycine_hcc_wait.exp") + "\" --out \"" +
              dir_a.string() + "\"");
  REQUIRE(first.exit_code == 0);
  CHECK(first.err.empty());

  // The storage carbon keeps a solid enhancement through the wait.
  double c1 = 0.0;
  REQUIRE(spincool::text::parse_double(field(first.out, "factor C1"), c1));
  CHECK(c1 > 2.0);
  CHECK(c1 < 2.75);
  CHECK(field(first.out, "bypassed_shannon") == "true");  // the bath repolarized the protons

  // All requested artifacts exist and carry the advertised hash.
  const std::string hash = field(first.out, "spec-hash");
  REQUIRE(hash.size() == 16);
  for (const char* name : {"report.csv", "report.txt", "spectrum_C13.csv", "spectrum_H1.csv",
                           "trajectory.csv"}) {
    const fs::path artifact = dir_a / name;
    REQUIRE(fs::exists(artifact));
    CHECK(read_all(artifact).find("# spec-hash " + hash) != std::string::npos);
  }

  // report.csv rows are spin,factor,temperature_K.
  const std::string report = read_all(dir_a / "report.csv");
  CHECK(report.find("spin,factor,temperature_K") != std::string::npos);
  CHECK(report.find("C1,") != std::string::npos);

  // A second run writes the same bytes.
  const fs::path dir_b = fresh_dir("wait_b");
  CmdResult second =
      run_cli("run \"" + data_file("experiments/glycine_hcc_wait.exp") + "\" --out \"" +
              dir_b.string() + "\"");
  REQUIRE(second.exit_code == 0);
  for (const char* name : {"report.csv", "report.txt", "spectrum_C13.csv", "spectrum_H1.csv",
                           "trajectory.csv"}) {
    CHECK(read_all(dir_a / name) == read_all(dir_b / name));
  }
}

TEST_CASE("failures exit nonzero with a single error line") {
  CmdResult missing = run_cli("run definitely_absent.exp");
  CHECK(missing.exit_code == 1);
  CHECK(missing.out.empty());
  CHECK(missing.err.rfind("error: ", 0) == 0);
  CHECK(missing.err.find("definitely_absent.exp") != std::string::npos);
  CHECK(count_lines(missing.err) == 1);

  // An experiment that references a molecule file that is not there.
  const fs::path dir = fresh_dir("bad_specs");
  write_all(dir / "dangling.exp",
            "experiment dangling {\n  molecule ./missing.mol\n  sequence hcc\n}\n");
  CmdResult dangling = run_cli("run \"" + (dir / "dangling.exp").string() + "\"");
  CHECK(dangling.exit_code == 1);
  CHECK(dangling.err.find("missing.mol") != std::string::npos);
  CHECK(count_lines(dangling.err) == 1);

  // A malformed experiment reports the offending position.
  write_all(dir / "typo.exp",
            "experiment typo {\n  molecule glycine\n  sequence hcc\n  turbo 9\n}\n");
  CmdResult typo = run_cli("run \"" + (dir / "typo.exp").string() + "\"");
  CHECK(typo.exit_code == 1);
  CHECK(typo.err.find("turbo") != std::string::npos);
  CHECK(typo.err.find("line 4") != std::string::npos);
  CHECK(count_lines(typo.err) == 1);

  // Missing subcommand is a usage error.
  CHECK(run_cli("").exit_code != 0);
}

TEST_CASE("fit recovers a lifetime from a curve file") {
  const fs::path dir = fresh_dir("fit");
  std::string csv = "tau_s,polarization\n";
  for (int i = 0; i < 17; ++i) {
    const double tau = 0.9 * std::pow(190.0 / 0.9, i / 16.0);
    csv += spincool::text::format_double(tau) + "," +
           spincool::text::format_double(1.0 - 2.0 * std::exp(-tau / 31.6)) + "\n";
  }
  write_all(dir / "curve.csv", csv);

  CmdResult r = run_cli("fit \"" + (dir / "curve.csv").string() + "\"");
  REQUIRE(r.exit_code == 0);
  CHECK(field(r.out, "points") == "17");
  CHECK(field(r.out, "converged") == "true");
  double t1 = 0.0;
  REQUIRE(spincool::text::parse_double(field(r.out, "t1_s"), t1));
  CHECK(t1 == doctest::Approx(31.6).epsilon(1e-3));

  CmdResult bad = run_cli("fit \"" + (dir / "nothing.csv").string() + "\"");
  CHECK(bad.exit_code == 1);
  CHECK(bad.err.rfind("error: ", 0) == 0);
}

TEST_CASE("scan-d7 sweeps the carbon-carbon refocusing delay") {
  const fs::path dir = fresh_dir("scan");
  CmdResult r = run_cli("scan-d7 \"" + data_file("experiments/glutamate_hcc.exp") +
                        "\" --halfwidth-hz 1 --grid-hz 0.5 --out \"" + dir.string() + "\"");
  REQUIRE(r.exit_code == 0);
  const std::string scan = read_all(dir / "scan.csv");
  CHECK(scan.find("j_hz,d7_s,c1_polarization") != std::string::npos);
  CHECK(count_lines(scan) == 8);  // stamp (2) + header + five candidates
  double best_j = 0.0;
  REQUIRE(spincool::text::parse_double(field(r.out, "best_j_hz"), best_j));
  CHECK(best_j >= 52.41);
  CHECK(best_j <= 54.41);
  CHECK(field(r.out, "candidates") == "5");
}

TEST_CASE("run fans out over several specs, in parallel when asked") {
  const std::string spec_a = data_file("experiments/glutamate_hcc.exp");
  const std::string spec_b = data_file("experiments/glutamate_c1_recovery.exp");

  const fs::path serial = fresh_dir("multi_serial");
  CmdResult one =
      run_cli("run \"" + spec_a + "\" \"" + spec_b + "\" --out \"" + serial.string() + "\"");
  REQUIRE(one.exit_code == 0);
  // Each spec lands in a subdirectory named after its file.
  REQUIRE(fs::exists(serial / "glutamate_hcc" / "report.csv"));
  REQUIRE(fs::exists(serial / "glutamate_c1_recovery" / "curve.csv"));

  const fs::path parallel = fresh_dir("multi_jobs");
  CmdResult two = run_cli("run \"" + spec_a + "\" \"" + spec_b + "\" --jobs 2 --out \"" +
                          parallel.string() + "\"");
  REQUIRE(two.exit_code == 0);
  // Worker threads may finish in any order, but stdout follows the argument order.
  CHECK(two.out.find("glutamate_hcc") < two.out.find("glutamate_c1_recovery"));
  for (const char* rel : {"glutamate_hcc/report.csv", "glutamate_hcc/report.txt",
                          "glutamate_c1_recovery/curve.csv",
                          "glutamate_c1_recovery/report.txt"}) {
    CHECK(read_all(serial / rel) == read_all(parallel / rel));
  }

  // One bad spec in a batch fails the batch but still reports it by name.
  CmdResult mixed = run_cli("run \"" + spec_a + "\" ghost.exp --out \"" +
                            fresh_dir("multi_bad").string() + "\"");
  CHECK(mixed.exit_code == 1);
  CHECK(mixed.err.find("ghost.exp") != std::string::npos);
}

TEST_CASE("the seed flag selects the noise realization for recovery runs") {
  const fs::path dir = fresh_dir("seeded");
  write_all(dir / "noisy.exp",
            "experiment noisy {\n  molecule glutamate\n"
            "  sequence inversion_recovery {\n    spin C2\n  }\n"
            "  outputs report\n  noise_pct 1\n}\n");
  const std::string spec = (dir / "noisy.exp").string();

  const fs::path s3a = fresh_dir("seed3a");
  const fs::path s3b = fresh_dir("seed3b");
  const fs::path s4 = fresh_dir("seed4");
  REQUIRE(run_cli("run \"" + spec + "\" --seed 3 --out \"" + s3a.string() + "\"").exit_code == 0);
  REQUIRE(run_cli("run \"" + spec + "\" --seed 3 --out \"" + s3b.string() + "\"").exit_code == 0);
  REQUIRE(run_cli("run \"" + spec + "\" --seed 4 --out \"" + s4.string() + "\"").exit_code == 0);
  CHECK(read_all(s3a / "curve.csv") == read_all(s3b / "curve.csv"));
  CHECK(read_all(s3a / "curve.csv") != read_all(s4 / "curve.csv"));
}
