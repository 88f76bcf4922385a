#include "asfem/cli.hpp"
#include "asfem/mesh.hpp"

#include <gtest/gtest.h>

#include <cmath>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>
#include <vector>

namespace fs = std::filesystem;
using namespace asfem;
using namespace asfem::cli;

namespace {

fs::path scratch(const std::string& name) {
  const fs::path dir = fs::path(ASFEM_TEST_TMP) / name;
  fs::remove_all(dir);
  fs::create_directories(dir);
  return dir;
}

fs::path write_config(const fs::path& dir, const std::string& text) {
  const fs::path path = dir / "config.json";
  std::ofstream(path) << text;
  return path;
}

struct Outcome {
  int code = 0;
  std::string out, err;
};

Outcome invoke(std::vector<std::string> args) {
  args.insert(args.begin(), "asfem");
  std::vector<char*> argv;
  for (auto& a : args) argv.push_back(a.data());
  std::ostringstream out, err;
  Outcome o;
  o.code = main_entry(static_cast<int>(argv.size()), argv.data(), out, err);
  o.out = out.str();
  o.err = err.str();
  return o;
}

std::vector<std::vector<std::string>> read_csv(const fs::path& path) {
  std::ifstream in(path);
  std::vector<std::vector<std::string>> rows;
  std::string line;
  while (std::getline(in, line)) {
    std::vector<std::string> cells;
    std::stringstream ss(line);
    std::string cell;
    while (std::getline(ss, cell, ',')) cells.push_back(cell);
    rows.push_back(cells);
  }
  return rows;
}

} // namespace

TEST(Cli, MinimalConfigRuns) {
  const fs::path dir = scratch("minimal");
  const fs::path cfg = write_config(dir, R"({"problem": "unit_square_manufactured", "p": 1,
    "estimator": "explicit_zeta", "theta": 0.5, "max_dof": 5000})");
  const Outcome o = invoke({"run", "--config", cfg.string(), "--output", dir.string()});
  ASSERT_EQ(o.code, 0) << o.err;
  const auto rows = read_csv(dir / "trace.csv");
  ASSERT_GE(rows.size(), 6u);
  EXPECT_EQ(rows[0], (std::vector<std::string>{"level", "ndof", "energy_error", "eta_tilde_total", "zeta_total",
                                               "smoother_estimate", "osc", "pcg_iters", "lambda_min", "lambda_max",
                                               "marked_count"}));
  EXPECT_TRUE(fs::exists(dir / "estimator.csv"));
  EXPECT_FALSE(fs::exists(dir / "verification.csv"));
}

TEST(Cli, ThetaOutOfRange) {
  const fs::path dir = scratch("theta");
  const fs::path cfg = write_config(dir, R"({"problem": "unit_square_manufactured", "theta": 1.5})");
  const Outcome o = invoke({"run", "--config", cfg.string(), "--output", dir.string()});
  EXPECT_EQ(o.code, 2);
  EXPECT_NE(o.err.find("theta"), std::string::npos) << o.err;
}

TEST(Cli, RangeChecksNameTheField) {
  const std::vector<std::pair<std::string, std::string>> cases = {
      {R"({"p": 3})", "p"},           {R"({"q": 0})", "q"},
      {R"({"rel_tol": 1.0})", "rel_tol"}, {R"({"estimator": "magic"})", "estimator"},
      {R"({"colour": "red"})", "colour"}, {R"({"max_dof": "many"})", "max_dof"},
  };
  for (const auto& [text, field] : cases) {
    try {
      parse_config(nlohmann::json::parse(text));
      ADD_FAILURE() << text;
    } catch (const ConfigError& e) {
      EXPECT_NE(std::string(e.what()).find(field), std::string::npos) << e.what();
    }
  }
}

TEST(Cli, UnreadableConfig) {
  const fs::path dir = scratch("unreadable");
  EXPECT_EQ(invoke({"run", "--config", (dir / "missing.json").string()}).code, 2);
  const fs::path cfg = write_config(dir, "{ not json");
  EXPECT_EQ(invoke({"run", "--config", cfg.string()}).code, 2);
  EXPECT_EQ(invoke({"run"}).code, 2);
  EXPECT_EQ(invoke({"explode", "--config", cfg.string()}).code, 2);
}

TEST(Cli, VerificationCsvIdentity) {
  const fs::path dir = scratch("identity");
  const fs::path cfg = write_config(dir, R"({"problem": "unit_square_manufactured", "max_dof": 40,
    "verify_spectral": true, "verify_identity": true})");
  const Outcome o = invoke({"run", "--config", cfg.string(), "--output", dir.string()});
  ASSERT_EQ(o.code, 0) << o.err;
  const auto rows = read_csv(dir / "verification.csv");
  ASSERT_GE(rows.size(), 2u);
  EXPECT_EQ(rows[0], (std::vector<std::string>{"level", "ndof", "lambda_min", "lambda_max", "cond", "identity_err"}));
  int checked = 0;
  for (std::size_t i = 1; i < rows.size(); ++i) {
    if (std::stoi(rows[i][1]) > 200) continue;
    EXPECT_LE(std::stod(rows[i][5]), 1e-8);
    ++checked;
  }
  EXPECT_GT(checked, 0);
}

TEST(Cli, CorruptedMeshIsInvariantViolation) {
  const fs::path dir = scratch("corrupt");
  std::vector<Point> v = {{0, 0}, {1, 0}, {1, 1}, {0, 1}, {0.5, 0.5}};
  write_mesh_file((dir / "bad.mesh").string(), TriangleMesh(v, {{0, 1, 2}, {0, 4, 3}, {4, 2, 3}}, {0, 0, 0}));
  const fs::path cfg = write_config(dir, "{\"problem\": \"l_shape_constant\", \"mesh_file\": \"" +
                                             (dir / "bad.mesh").generic_string() + "\"}");
  for (const char* cmd : {"verify", "run", "mesh-info"}) {
    const Outcome o = invoke({cmd, "--config", cfg.string(), "--output", dir.string()});
    EXPECT_EQ(o.code, 3) << cmd;
    EXPECT_NE(o.err.find("conformity"), std::string::npos) << o.err;
  }
}

TEST(Cli, ZeroSourceVerifySkipsSandwich) {
  const fs::path dir = scratch("zero");
  const fs::path cfg = write_config(dir, R"({"problem": "zero_source"})");
  const Outcome o = invoke({"verify", "--config", cfg.string(), "--output", dir.string()});
  EXPECT_EQ(o.code, 0) << o.err;
  std::istringstream table(o.out);
  std::string line;
  bool sandwich_skipped = false;
  while (std::getline(table, line))
    if (line.rfind("sandwich", 0) == 0) sandwich_skipped = line.find("skipped") != std::string::npos;
  EXPECT_TRUE(sandwich_skipped) << o.out;
  EXPECT_EQ(o.out.find("fail"), std::string::npos);
}

TEST(Cli, DefaultVerificationPasses) {
  const fs::path dir = scratch("verify");
  const fs::path cfg = write_config(dir, R"({"problem": "unit_square_manufactured", "max_dof": 2000})");
  const Outcome o = invoke({"verify", "--config", cfg.string(), "--output", dir.string()});
  EXPECT_EQ(o.code, 0) << o.out << o.err;
  for (const char* check : {"sandwich", "identity", "effectivity", "rate"})
    EXPECT_NE(o.out.find(check), std::string::npos);
  EXPECT_TRUE(fs::exists(dir / "verification.csv"));
}

TEST(Cli, LevelsCapFlag) {
  const fs::path dir = scratch("cap");
  const fs::path cfg = write_config(dir, R"({"problem": "l_shape_constant"})");
  ASSERT_EQ(invoke({"run", "--config", cfg.string(), "--output", dir.string(), "--levels-cap", "3"}).code, 0);
  EXPECT_EQ(read_csv(dir / "trace.csv").size(), 4u);
  EXPECT_EQ(invoke({"run", "--config", cfg.string(), "--levels-cap", "0"}).code, 2);
}

TEST(Cli, MeshInfo) {
  const fs::path dir = scratch("info");
  const fs::path cfg = write_config(dir, R"({"problem": "checkerboard_constant", "n0": 2})");
  const Outcome o = invoke({"mesh-info", "--config", cfg.string()});
  ASSERT_EQ(o.code, 0) << o.err;
  EXPECT_NE(o.out.find("conformity      ok"), std::string::npos);
  EXPECT_NE(o.out.find("regions         4"), std::string::npos) << o.out;
}

TEST(Cli, ConfigRoundTrip) {
  RunConfig c;
  c.problem = "checkerboard_constant";
  c.p = 2;
  c.estimator = "smoother";
  c.theta = 0.3;
  c.max_dof = 1234;
  c.q = 3;
  c.solver = "sparse_direct";
  c.rel_tol = 1e-9;
  c.refinement = "uniform";
  c.verify_spectral = true;
  c.max_levels = 7;
  const nlohmann::json j = to_json(c);
  const RunConfig back = parse_config(j);
  EXPECT_EQ(to_json(back), j);
  EXPECT_EQ(parse_config(nlohmann::json::parse(j.dump())).theta, 0.3);
  EXPECT_EQ(to_json(parse_config(nlohmann::json::object())), to_json(RunConfig{}));
}
