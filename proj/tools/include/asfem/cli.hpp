#pragma once

#include <iosfwd>
#include <stdexcept>
#include <string>

#include "json.hpp"

namespace asfem::cli {

enum ExitCode : int {
  kOk = 0,
  kFailure = 1,
  kParseError = 2,
  kInvariantViolation = 3,
  kSolverFailure = 4,
};

/// Bad config file or command line.
class ConfigError : public std::runtime_error {
public:
  using std::runtime_error::runtime_error;
};

struct RunConfig {
  std::string problem = "unit_square_manufactured";
  int p = 1;
  std::string estimator = "explicit_zeta";
  double theta = 0.5;
  int max_dof = 5000;
  int q = 2;
  std::string solver = "pcg";
  double rel_tol = 1e-10;
  std::string output = ".";
  std::string refinement = "adaptive";
  bool verify_spectral = false;
  bool verify_identity = false;
  std::string mesh_file;
  int n0 = 0; // 0: the problem's default
  int max_levels = 50;
  int quadrature_order = 12;
};

/// Missing keys keep their defaults; unknown keys and out-of-range values throw
/// ConfigError naming the field.
RunConfig parse_config(const nlohmann::json& j);
RunConfig load_config(const std::string& path);
nlohmann::json to_json(const RunConfig& config);

int run_command(const RunConfig& config, std::ostream& out, std::ostream& err);
int verify_command(const RunConfig& config, std::ostream& out, std::ostream& err);
int mesh_info_command(const RunConfig& config, std::ostream& out, std::ostream& err);

/// Full command line: run | verify | mesh-info with --config, --output, --levels-cap.
int main_entry(int argc, char** argv, std::ostream& out, std::ostream& err);

} // namespace asfem::cli
