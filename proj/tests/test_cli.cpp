#include <gtest/gtest.h>

#include <sys/wait.h>
#include <unistd.h>

#include <algorithm>
#include <cmath>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>
#include <vector>

#include <json.hpp>

namespace fs = std::filesystem;
using json = nlohmann::json;

namespace {

const std::string kCli = RESONET_CLI;
const std::string kModel = std::string(RESONET_MODELS_DIR) + "/three_mode.model";

const fs::path kRoot = fs::temp_directory_path() / ("resonet_cli_test_" + std::to_string(::getpid()));

struct Cleanup {
  ~Cleanup() { fs::remove_all(kRoot); }
} cleanup;

fs::path scratch(const std::string& name) {
  fs::path p = kRoot / name;
  fs::remove_all(p);
  return p;
}

struct CliRun {
  int code;
  std::string err;
};

CliRun run(const std::string& args) {
  const fs::path err = scratch("stderr.txt");
  fs::create_directories(err.parent_path());
  const std::string cmd = kCli + " " + args + " > /dev/null 2> " + err.string();
  const int st = std::system(cmd.c_str());
  std::ifstream f(err);
  std::stringstream ss;
  ss << f.rdbuf();
  return {WIFEXITED(st) ? WEXITSTATUS(st) : -1, ss.str()};
}

std::string slurp(const fs::path& p) {
  std::ifstream f(p, std::ios::binary);
  std::stringstream ss;
  ss << f.rdbuf();
  return ss.str();
}

// data lines of a CSV (after the '#' header block and the column line)
std::vector<std::string> data_lines(const fs::path& p, std::string* columns = nullptr) {
  std::istringstream in(slurp(p));
  std::string line;
  std::vector<std::string> out;
  bool seen_cols = false;
  while (std::getline(in, line)) {
    if (line.rfind("#", 0) == 0) continue;
    if (!seen_cols) {
      seen_cols = true;
      if (columns) *columns = line;
      continue;
    }
    out.push_back(line);
  }
  return out;
}

std::vector<double> split_numbers(const std::string& line) {
  std::vector<double> v;
  std::stringstream ss(line);
  std::string cell;
  while (std::getline(ss, cell, ',')) v.push_back(std::stod(cell));
  return v;
}

}  // namespace

TEST(Cli, WebListsTheSevenResonances) {
  const fs::path out = scratch("web");
  ASSERT_EQ(run("web --model " + kModel + " --order 2 --out " + out.string()).code, 0);
  auto rows = data_lines(out / "web.csv");
  ASSERT_EQ(rows.size(), 7u);
  const std::vector<std::string> expect{
      "1,1,-1,1,1,\"I1 + I2 - 1 = 0\"",   "1,0,0,1,1,\"I1 = 0\"",
      "0,1,0,1,1,\"I2 = 0\"",             "2,1,-1,2,1,\"2*I1 + I2 - 1 = 0\"",
      "1,2,-1,2,1,\"I1 + 2*I2 - 1 = 0\"", "1,0,-1,2,1,\"I1 - 1 = 0\"",
      "0,1,-1,2,1,\"I2 - 1 = 0\""};
  for (const auto& e : expect) EXPECT_NE(std::find(rows.begin(), rows.end(), e), rows.end()) << e;
  json b = json::parse(slurp(out / "web_bset.json"));
  EXPECT_FALSE(b["components"].empty());
}

TEST(Cli, EmptyPerturbationGivesAnEmptyWeb) {
  const fs::path out = scratch("web_empty");
  ASSERT_EQ(run("web --model " + std::string(RESONET_MODELS_DIR) + "/uncoupled.model --out " + out.string()).code, 0);
  EXPECT_TRUE(data_lines(out / "web.csv").empty());
  EXPECT_TRUE(json::parse(slurp(out / "web_bset.json"))["components"].empty());
}

TEST(Cli, BoxAwayFromEveryResonanceGivesHeadersOnly) {
  // every line of the web has I1 + I2 <= 2 or a coordinate fixed at 0 or 1
  const fs::path out = scratch("web_box");
  ASSERT_EQ(run("web --model " + kModel + " --box 3:4,3:4 --out " + out.string()).code, 0);
  std::string cols;
  EXPECT_TRUE(data_lines(out / "web.csv", &cols).empty());
  EXPECT_EQ(cols, "k1,k2,l,order,affine,equation");
  EXPECT_TRUE(json::parse(slurp(out / "web_bset.json"))["components"].empty());
}

TEST(Cli, VerifyPassesOnTheFixture) {
  const fs::path out = scratch("verify");
  ASSERT_EQ(run("verify --model " + kModel + " --grid 0:2:5 --angle-grid 16 --out " + out.string()).code, 0);
  json r = json::parse(slurp(out / "hypotheses.json"));
  EXPECT_TRUE(r["passed"].get<bool>());
  for (const auto& c : r["checks"]) EXPECT_EQ(c["status"], "pass") << c["name"];
}

TEST(Cli, VerifyNamesTheCoupledResonanceWhenQuasiConvexityFails) {
  const fs::path out = scratch("verify_h5");
  CliRun r = run("verify --model " + kModel + " --param Omega2=-1 --grid 5 --angle-grid 16 --out " + out.string());
  EXPECT_EQ(r.code, 2);
  json rep = json::parse(slurp(out / "hypotheses.json"));
  bool found = false;
  for (const auto& c : rep["checks"])
    if (c["name"] == "H5") {
      EXPECT_EQ(c["status"], "fail");
      ASSERT_FALSE(c["witnesses"].empty());
      EXPECT_NE(c["witnesses"][0]["note"].get<std::string>().find("(1,1,-1)"), std::string::npos);
      found = true;
    }
  EXPECT_TRUE(found);
}

TEST(Cli, MissingModelExitsOneWithoutOutput) {
  const fs::path out = scratch("missing");
  CliRun r = run("verify --model /nonexistent/model.file --out " + out.string());
  EXPECT_EQ(r.code, 1);
  EXPECT_FALSE(fs::exists(out));
  EXPECT_NE(r.err.find("not found"), std::string::npos);
}

TEST(Cli, BadOptionIsAValidationFailure) {
  EXPECT_EQ(run("sim --model " + kModel + " --scheme euler --out " + scratch("bad").string()).code, 2);
  EXPECT_EQ(run("sim --model " + kModel + " --bogus").code, 2);
  EXPECT_FALSE(fs::exists(scratch("bad")));
}

TEST(Cli, MelnikovOracleWritesBothColumns) {
  const fs::path out = scratch("mel");
  ASSERT_EQ(run("melnikov --model " + kModel + " --oracle --samples 50 --out " + out.string()).code, 0);
  std::string cols;
  auto rows = data_lines(out / "melnikov.csv", &cols);
  EXPECT_EQ(rows.size(), 50u);
  EXPECT_NE(cols.find("L_quadrature,L_residue,abs_diff"), std::string::npos);
  for (const auto& r : rows) {
    auto v = split_numbers(r);
    EXPECT_NEAR(v[v.size() - 3], v[v.size() - 2], 1e-8 * (1 + std::abs(v[v.size() - 2])));
  }
  json s = json::parse(slurp(out / "melnikov_summary.json"));
  EXPECT_LE(s["max_rel_diff"].get<double>(), 1e-8);
  EXPECT_TRUE(fs::exists(out / "melnikov.gp"));
}

TEST(Cli, ChainThroughAForbiddenBallExitsThreeWithWitness) {
  const fs::path dir = scratch("chain_bad");
  fs::create_directories(dir);
  std::ofstream(dir / "path.csv") << "# through the origin\n-0.5,-0.5\n0.5,0.5\n";
  CliRun r = run("chain --model " + kModel + " --path " + (dir / "path.csv").string() + " --out " +
              (dir / "out").string());
  EXPECT_EQ(r.code, 3);
  EXPECT_FALSE(fs::exists(dir / "out"));
  json j = json::parse(r.err);
  EXPECT_EQ(j["error"], "clearance");
  ASSERT_EQ(j["witness"].size(), 2u);
  EXPECT_NEAR(j["witness"][0].get<double>(), 0.0, 1e-12);
  EXPECT_NEAR(j["witness"][1].get<double>(), 0.0, 1e-12);
}

TEST(Cli, ChainAcrossTheCoupledResonance) {
  const fs::path dir = scratch("chain_ok");
  fs::create_directories(dir);
  std::ofstream(dir / "path.csv") << "0.3 0.45\n0.55 0.7\n";
  ASSERT_EQ(run("chain --model " + kModel + " --path " + (dir / "path.csv").string() + " --eps 1e-3 --out " +
                (dir / "out").string())
                .code,
            0);
  json c = json::parse(slurp(dir / "out" / "chain.json"));
  EXPECT_TRUE(c["chain"]["valid"].get<bool>());
  EXPECT_LE(c["chain"]["max_residual"].get<double>(), 1e-8);
  EXPECT_LE(c["drift"]["max_distance"].get<double>(), 0.05);
  EXPECT_EQ(data_lines(dir / "out" / "chain_levels.csv").size(), c["chain"]["levels"].size());
}

TEST(Cli, SimAtZeroEpsilonKeepsTheActions) {
  const fs::path out = scratch("sim0");
  ASSERT_EQ(run("sim --model " + kModel + " --eps 0 --T 50 --I 0.6,1.4 --phi 0.1,0.2 --out " + out.string()).code, 0);
  std::string cols;
  auto rows = data_lines(out / "trajectory.csv", &cols);
  EXPECT_EQ(cols, "t,I1,I2,phi1,phi2,p1,q1,s,E,F1,F2");
  ASSERT_EQ(rows.size(), 1001u);
  for (const auto& r : rows) {
    auto v = split_numbers(r);
    EXPECT_EQ(v[1], 0.6);
    EXPECT_EQ(v[2], 1.4);
  }
}

TEST(Cli, OutputsAreDeterministicAndCarryHeaders) {
  const std::string args = " --model " + kModel + " --seed 7 --out ";
  const fs::path a = scratch("det_a"), b = scratch("det_b");
  for (const fs::path& o : {a, b}) {
    ASSERT_EQ(run("sim" + args + o.string() + "/sim --eps 1e-2 --T 20 --sample 0.5").code, 0);
    ASSERT_EQ(run("melnikov" + args + o.string() + "/mel --samples 20").code, 0);
    ASSERT_EQ(run("scatter" + args + o.string() + "/sc --points 2 --eps 1e-2,1e-3").code, 0);
  }
  int compared = 0;
  for (const auto& e : fs::recursive_directory_iterator(a)) {
    if (!e.is_regular_file()) continue;
    const std::string name = e.path().filename().string();
    if (name.find(".meta.json") != std::string::npos) continue;
    const fs::path twin = b / fs::relative(e.path(), a);
    EXPECT_EQ(slurp(e.path()), slurp(twin)) << name;
    const std::string text = slurp(e.path());
    if (e.path().extension() == ".csv") {
      EXPECT_EQ(text.rfind("# resonet ", 0), 0u) << name;
      EXPECT_NE(text.find("# config_hash "), std::string::npos);
      EXPECT_NE(text.find("# seed 7\n"), std::string::npos);
    } else if (e.path().extension() == ".json") {
      json j = json::parse(text);
      EXPECT_EQ(j["header"]["seed"], 7);
      EXPECT_EQ(j["header"]["config_hash"].get<std::string>().size(), 16u);
    }
    ++compared;
  }
  EXPECT_GE(compared, 6);
  EXPECT_TRUE(fs::exists(a / "sim" / "sim.meta.json"));
  for (const auto& e : fs::recursive_directory_iterator(a)) EXPECT_NE(e.path().extension(), ".tmp");
}

TEST(Cli, ConfigHashFollowsTheConfiguration) {
  auto hash_of = [](const std::string& extra, const std::string& tag) {
    const fs::path o = scratch(tag);
    EXPECT_EQ(run("melnikov --model " + kModel + " --samples 5 --out " + o.string() + extra).code, 0);
    return json::parse(slurp(o / "melnikov_summary.json"))["header"]["config_hash"].get<std::string>();
  };
  const std::string h0 = hash_of("", "h0");
  EXPECT_EQ(h0, hash_of("", "h1"));
  EXPECT_NE(h0, hash_of(" --param a1=2", "h2"));
  EXPECT_NE(h0, hash_of(" --tau-range 2", "h3"));
}
