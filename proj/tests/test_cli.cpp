#include "doctest.h"

#include <cmath>
#include <filesystem>
#include <fstream>
#include <map>
#include <sstream>

#include "cli.hpp"
#include "interlace/green.hpp"

namespace fs = std::filesystem;
using namespace interlace;

namespace {

struct Result {
  int status;
  std::string out, err;
};

Result run(std::vector<std::string> args) {
  args.insert(args.begin(), "interlace");
  std::vector<const char*> argv;
  for (const auto& a : args) argv.push_back(a.c_str());
  std::ostringstream out, err;
  const int status = cli::run(int(argv.size()), argv.data(), out, err);
  return {status, out.str(), err.str()};
}

fs::path scratch(const std::string& name) {
  const auto p = fs::temp_directory_path() / ("interlace_cli_test_" + name);
  fs::remove_all(p);
  return p;
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p);
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

// CSV with a header row, as a list of column -> value maps.
std::vector<std::map<std::string, std::string>> read_csv(const fs::path& p) {
  std::ifstream in(p);
  std::string line;
  std::getline(in, line);
  std::vector<std::string> head;
  {
    std::stringstream ss(line);
    for (std::string c; std::getline(ss, c, ',');) head.push_back(c);
  }
  std::vector<std::map<std::string, std::string>> rows;
  while (std::getline(in, line)) {
    std::stringstream ss(line);
    std::map<std::string, std::string> row;
    std::size_t i = 0;
    for (std::string c; std::getline(ss, c, ',') && i < head.size(); ++i) row[head[i]] = c;
    rows.push_back(row);
  }
  return rows;
}

}  // namespace

TEST_CASE("cli: invalid configuration exits 2 and names the field") {
  auto r = run({"sample", "--u", "-1"});
  CHECK(r.status == cli::kExitInvalidConfig);
  CHECK(r.err.find("--u") != std::string::npos);

  r = run({"sample", "--set", "ball:x", "--out", ""});
  CHECK(r.status == cli::kExitInvalidConfig);
  CHECK(r.err.find("set") != std::string::npos);

  const auto dir = scratch("badini");
  fs::create_directories(dir);
  std::ofstream(dir / "bad.ini") << "[sample]\nno_such_key=1\n";
  r = run({"sample", "--config", (dir / "bad.ini").string()});
  CHECK(r.status == cli::kExitInvalidConfig);
  CHECK(r.err.find("no_such_key") != std::string::npos);

  r = run({"checks", "--override", "graph.bogus=1", "--out", ""});
  CHECK(r.status == cli::kExitInvalidConfig);
  CHECK(r.err.find("graph.bogus") != std::string::npos);

  r = run({"sweep", "--over", "sample", "--grid", "colour=1,2", "--out", ""});
  CHECK(r.status == cli::kExitInvalidConfig);
  CHECK(r.err.find("colour") != std::string::npos);
}

TEST_CASE("cli: a failing check exits 3 with its id") {
  const auto r = run({"checks", "--only", "inequalities", "--override", "inequalities.slack=-1000", "--out", ""});
  CHECK(r.status == cli::kExitNumerical);
  CHECK(r.err.find("inequality.kolmogorov_euclidean") != std::string::npos);
}

TEST_CASE("cli: capacity of the origin by both methods") {
  const auto dir = scratch("capacity");
  const auto r = run({"capacity", "--set", "origin", "--out", dir.string()});
  REQUIRE(r.status == cli::kExitOk);
  const double exact = 1 / GreenTable::shared(5).g0();
  const auto rows = read_csv(dir / "capacity.csv");
  REQUIRE(rows.size() == 2);
  for (const auto& row : rows) {
    const double c = std::stod(row.at("capacity")), se = std::stod(row.at("stderr"));
    const double bias = std::stod(row.at("bias_bound"));
    MESSAGE(row.at("method") << " " << c << " +- " << se);
    CHECK(std::abs(c - exact) <= 3 * se + bias + 1e-9);
  }
}

TEST_CASE("cli: output directory contents and exact replay") {
  const auto dir = scratch("replay"), again = scratch("replay2");
  auto r = run({"checks", "--only", "graph,inequalities", "--seed", "31", "--jobs", "2", "--out", dir.string()});
  REQUIRE(r.status == cli::kExitOk);
  for (const char* f : {"config.ini", "seed.txt", "version.txt", "reports.csv", "reports.txt", "summary.csv"})
    CHECK(fs::exists(dir / f));
  CHECK(slurp(dir / "seed.txt") == "31\n");
  CHECK(slurp(dir / "version.txt") == std::string(INTERLACE_VERSION) + "\n");
  r = run({"checks", "--config", (dir / "config.ini").string(), "--jobs", "1", "--out", again.string()});
  REQUIRE(r.status == cli::kExitOk);
  CHECK(slurp(dir / "reports.csv") == slurp(again / "reports.csv"));
  CHECK(fs::exists(again / "config.source.ini"));
}

TEST_CASE("cli: command line overrides the config file") {
  const auto dir = scratch("override");
  fs::create_directories(dir);
  std::ofstream(dir / "c.ini") << "seed=5\nu=0.25\n\n[sample]\nwrite-samples=0\n";
  const auto r = run({"sample", "--config", (dir / "c.ini").string(), "--u", "0.5", "--replicas", "10", "--out",
                      (dir / "o").string()});
  REQUIRE(r.status == cli::kExitOk);
  const auto row = read_csv(dir / "o" / "summary.csv").at(0);
  CHECK(std::stod(row.at("u")) == 0.5);
  CHECK(slurp(dir / "o" / "seed.txt") == "5\n");
  CHECK_FALSE(fs::exists(dir / "o" / "samples.txt"));
}

TEST_CASE("cli: sweep over u scales the mean count linearly") {
  const auto dir = scratch("sweep");
  const auto r = run({"sweep", "--over", "sample", "--grid", "u=0.5,1.0", "--replicas", "4000", "--set", "ball:1",
                      "--write-samples", "0", "--out", dir.string()});
  REQUIRE(r.status == cli::kExitOk);
  const auto rows = read_csv(dir / "sweep.csv");
  REQUIRE(rows.size() == 2);
  const double m1 = std::stod(rows[0].at("mean_N")), s1 = std::stod(rows[0].at("se_N"));
  const double m2 = std::stod(rows[1].at("mean_N")), s2 = std::stod(rows[1].at("se_N"));
  // Cells share random numbers; the independent-error bound is conservative.
  CHECK(std::abs(m2 - 2 * m1) <= 3 * std::sqrt(s2 * s2 + 4 * s1 * s1));
  for (const auto& row : rows) CHECK(row.at("status") == "ok");
}

TEST_CASE("cli: green, graph and layers write their tables") {
  const auto dir = scratch("misc");
  REQUIRE(run({"green", "--dim", "4", "--max-radius", "10", "--out", (dir / "g").string()}).status == 0);
  CHECK(read_csv(dir / "g" / "green_axis.csv").size() == 11);
  REQUIRE(run({"graph", "--set", "ball:1", "--window", "3", "--u", "0.5", "--replicas", "4", "--out",
               (dir / "q").string()})
              .status == 0);
  CHECK(fs::exists(dir / "q" / "distance_histogram.csv"));
  CHECK(fs::exists(dir / "q" / "edges_replica0.csv"));
  REQUIRE(run({"layers", "--radii", "4,6", "--u", "1", "--replicas", "2", "--out", (dir / "l").string()}).status ==
          0);
  CHECK(read_csv(dir / "l" / "layers.csv").size() == 2 * 2 * 2);
  CHECK(read_csv(dir / "l" / "layers_summary.csv").size() == 4);
}
