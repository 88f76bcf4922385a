#include "asfem/cli.hpp"

#include "asfem/adapt.hpp"
#include "asfem/error.hpp"
#include "asfem/mesh.hpp"

#include "CLI11.hpp"

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <functional>
#include <iostream>
#include <optional>
#include <set>
#include <vector>

#include <fmt/format.h>

namespace asfem::cli {

namespace {

const std::set<std::string> kKeys = {"problem", "p",      "estimator",       "theta",           "max_dof",
                                     "q",       "solver", "rel_tol",         "output",          "refinement",
                                     "verify_spectral",   "verify_identity", "mesh_file",       "n0",
                                     "max_levels",        "quadrature_order"};

template <class T> void read_field(const nlohmann::json& j, const char* key, T& target) {
  if (!j.contains(key)) return;
  try {
    target = j.at(key).get<T>();
  } catch (const nlohmann::json::exception&) {
    throw ConfigError(fmt::format("invalid config: field '{}' has the wrong type", key));
  }
}

template <class T> void require(bool ok, const char* key, const T& value, const char* range) {
  if (!ok) throw ConfigError(fmt::format("invalid config: field '{}' = {} must be {}", key, value, range));
}

void require_choice(const std::string& value, const char* key, const std::vector<std::string>& choices) {
  if (std::find(choices.begin(), choices.end(), value) == choices.end())
    throw ConfigError(fmt::format("invalid config: field '{}' = '{}' must be one of {}", key, value,
                                  fmt::join(choices, ", ")));
}

int guarded(std::ostream& err, const std::function<int()>& body) {
  try {
    return body();
  } catch (const ConfigError& e) {
    err << "error: " << e.what() << "\n";
    return kParseError;
  } catch (const nlohmann::json::exception& e) {
    err << "error: config parse failed: " << e.what() << "\n";
    return kParseError;
  } catch (const InvariantViolation& e) {
    err << "invariant violation: " << e.what() << "\n";
    return kInvariantViolation;
  } catch (const SolverError& e) {
    err << "solver failure: " << e.what() << "\n";
    return kSolverFailure;
  } catch (const InvalidArgument& e) {
    err << "error: " << e.what() << "\n";
    return kParseError;
  } catch (const std::exception& e) {
    err << "error: " << e.what() << "\n";
    return kFailure;
  }
}

ProblemSpec problem_of(const RunConfig& config) {
  ProblemSpec problem = builtin_problem(config.problem);
  if (config.n0 > 0) problem.n0 = config.n0;
  return problem;
}

std::shared_ptr<const TriangleMesh> mesh_of(const RunConfig& config, const ProblemSpec& problem) {
  auto mesh = config.mesh_file.empty()
                  ? std::make_shared<const TriangleMesh>(builtin_mesh(problem.domain, problem.n0))
                  : std::make_shared<const TriangleMesh>(read_mesh_file(config.mesh_file));
  mesh->validate();
  return mesh;
}

AdaptOptions options_of(const RunConfig& config, const ProblemSpec& problem) {
  AdaptOptions o;
  o.estimator = parse_estimator(config.estimator);
  o.refinement = parse_refinement(config.refinement);
  o.theta = config.theta;
  o.max_dof = config.max_dof;
  o.max_levels = config.max_levels;
  o.p = config.p;
  o.q = config.q;
  o.solver = parse_solver(config.solver);
  o.rel_tol = config.rel_tol;
  o.quadrature_order = config.quadrature_order;
  o.verify_spectral = config.verify_spectral;
  o.verify_identity = config.verify_identity;
  o.initial_mesh = mesh_of(config, problem);
  return o;
}

std::ofstream open_output(const std::filesystem::path& path) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error(fmt::format("cannot write '{}'", path.string()));
  return out;
}

void write_outputs(const RunConfig& config, const AdaptTrace& trace, std::ostream& out) {
  const std::filesystem::path dir(config.output);
  std::filesystem::create_directories(dir);
  {
    auto f = open_output(dir / "trace.csv");
    write_trace_csv(f, trace);
  }
  {
    auto f = open_output(dir / "estimator.csv");
    write_estimator_csv(f, trace.final_report);
  }
  if (!trace.verification.empty()) {
    auto f = open_output(dir / "verification.csv");
    write_verification_csv(f, trace.verification);
  }
  out << fmt::format("{}: {} levels, final ndof {}, output in {}\n", trace.problem, trace.levels.size(),
                     trace.levels.back().ndof, dir.string());
}

enum class Status { pass, fail, skipped };

struct Check {
  std::string name;
  Status status = Status::skipped;
  std::string detail;
};

const char* label(Status s) {
  switch (s) {
  case Status::pass: return "pass";
  case Status::fail: return "FAIL";
  case Status::skipped: return "skipped";
  }
  return "?";
}

Check sandwich_check(const AdaptTrace& trace) {
  Check c{"sandwich", Status::skipped, "no level with a nonzero error"};
  double worst = 0.0;
  int tested = 0;
  for (const auto& r : trace.levels) {
    if (!(r.energy_error > 0.0) || !std::isfinite(r.lambda_min)) continue;
    const double ratio = r.smoother_estimate / (r.energy_error * r.energy_error);
    const double gap = std::max(r.lambda_min - 1e-9 - ratio, ratio - r.lambda_max - 1e-9);
    worst = tested == 0 ? gap : std::max(worst, gap);
    ++tested;
  }
  if (tested == 0) return c;
  c.status = worst <= 0.0 ? Status::pass : Status::fail;
  c.detail = fmt::format("{} levels, worst excess {:.3g}", tested, worst);
  return c;
}

Check identity_check(const AdaptTrace& trace) {
  Check c{"identity", Status::skipped, "no level within the dense cap"};
  double worst = -1.0;
  for (const auto& v : trace.verification)
    if (std::isfinite(v.identity_err)) worst = std::max(worst, v.identity_err);
  if (worst < 0.0) return c;
  c.status = worst <= 1e-8 ? Status::pass : Status::fail;
  c.detail = fmt::format("max relative error {:.3g}", worst);
  return c;
}

Check chain_check(const AdaptTrace& trace) {
  Check c{"chain", Status::skipped, "estimators not computed"};
  double worst = -std::numeric_limits<double>::infinity();
  int tested = 0;
  for (const auto& r : trace.levels) {
    if (!std::isfinite(r.eta_tilde_total) || !std::isfinite(r.eta_enriched_total)) continue;
    worst = std::max(worst, r.eta_tilde_total * r.eta_tilde_total - r.eta_enriched_total * r.eta_enriched_total);
    ++tested;
  }
  if (tested == 0) return c;
  c.status = worst <= 1e-10 ? Status::pass : Status::fail;
  c.detail = fmt::format("{} levels, max(eta_tilde^2 - eta^2) {:.3g}", tested, worst);
  return c;
}

Check effectivity_check(const AdaptTrace& trace) {
  Check c{"effectivity", Status::skipped, "fewer than 2 levels with a nonzero error"};
  std::vector<double> zeta;
  std::vector<double> eta;
  for (const auto& r : trace.levels) {
    if (!(r.energy_error > 0.0)) continue;
    zeta.push_back(r.zeta_total / r.energy_error);
    eta.push_back(r.eta_tilde_total / r.energy_error);
  }
  if (zeta.size() < 2) return c;
  auto spread = [](const std::vector<double>& v) {
    const auto [lo, hi] = std::minmax_element(v.begin(), v.end());
    return *hi / *lo;
  };
  const double sz = spread(zeta);
  const double se = spread(eta);
  c.status = sz <= 10.0 && se <= 10.0 ? Status::pass : Status::fail;
  c.detail = fmt::format("zeta spread {:.3g}, eta_tilde spread {:.3g}", sz, se);
  return c;
}

Check rate_check(const AdaptTrace& trace) {
  Check c{"rate", Status::skipped, "fewer than 3 levels"};
  try {
    const double error_slope = fit_rate(trace, "energy_error").slope;
    const double zeta_slope = fit_rate(trace, "zeta_total").slope;
    c.status = std::abs(error_slope - zeta_slope) <= 0.1 ? Status::pass : Status::fail;
    c.detail = fmt::format("error slope {:.3f}, zeta slope {:.3f}", error_slope, zeta_slope);
  } catch (const InvalidArgument&) {
  }
  return c;
}

} // namespace

RunConfig parse_config(const nlohmann::json& j) {
  if (!j.is_object()) throw ConfigError("invalid config: expected a JSON object");
  for (const auto& item : j.items())
    if (!kKeys.count(item.key())) throw ConfigError(fmt::format("invalid config: unknown field '{}'", item.key()));
  RunConfig c;
  read_field(j, "problem", c.problem);
  read_field(j, "p", c.p);
  read_field(j, "estimator", c.estimator);
  read_field(j, "theta", c.theta);
  read_field(j, "max_dof", c.max_dof);
  read_field(j, "q", c.q);
  read_field(j, "solver", c.solver);
  read_field(j, "rel_tol", c.rel_tol);
  read_field(j, "output", c.output);
  read_field(j, "refinement", c.refinement);
  read_field(j, "verify_spectral", c.verify_spectral);
  read_field(j, "verify_identity", c.verify_identity);
  read_field(j, "mesh_file", c.mesh_file);
  read_field(j, "n0", c.n0);
  read_field(j, "max_levels", c.max_levels);
  read_field(j, "quadrature_order", c.quadrature_order);

  require_choice(c.problem, "problem", builtin_problem_names());
  require(c.p == 1 || c.p == 2, "p", c.p, "1 or 2");
  require_choice(c.estimator, "estimator", {"explicit_zeta", "bubble_eta", "smoother"});
  require(c.theta > 0.0 && c.theta <= 1.0, "theta", c.theta, "in (0, 1]");
  require(c.max_dof >= 1, "max_dof", c.max_dof, ">= 1");
  require(c.q >= 1 && c.q <= 4, "q", c.q, "in [1, 4]");
  require_choice(c.solver, "solver", {"direct_dense", "sparse_direct", "pcg"});
  require(c.rel_tol >= 1e-14 && c.rel_tol <= 1e-2, "rel_tol", c.rel_tol, "in [1e-14, 1e-2]");
  require_choice(c.refinement, "refinement", {"adaptive", "uniform"});
  require(c.n0 >= 0, "n0", c.n0, ">= 1 (or 0 for the problem default)");
  require(c.max_levels >= 1, "max_levels", c.max_levels, ">= 1");
  require(c.quadrature_order >= 2 && c.quadrature_order <= 40, "quadrature_order", c.quadrature_order, "in [2, 40]");
  return c;
}

RunConfig load_config(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError(fmt::format("cannot open config '{}'", path));
  nlohmann::json j;
  try {
    in >> j;
  } catch (const nlohmann::json::parse_error& e) {
    throw ConfigError(fmt::format("cannot parse config '{}': {}", path, e.what()));
  }
  return parse_config(j);
}

nlohmann::json to_json(const RunConfig& c) {
  return nlohmann::json{{"problem", c.problem},
                        {"p", c.p},
                        {"estimator", c.estimator},
                        {"theta", c.theta},
                        {"max_dof", c.max_dof},
                        {"q", c.q},
                        {"solver", c.solver},
                        {"rel_tol", c.rel_tol},
                        {"output", c.output},
                        {"refinement", c.refinement},
                        {"verify_spectral", c.verify_spectral},
                        {"verify_identity", c.verify_identity},
                        {"mesh_file", c.mesh_file},
                        {"n0", c.n0},
                        {"max_levels", c.max_levels},
                        {"quadrature_order", c.quadrature_order}};
}

int run_command(const RunConfig& config, std::ostream& out, std::ostream& err) {
  return guarded(err, [&] {
    const ProblemSpec problem = problem_of(config);
    const AdaptTrace trace = adapt_loop(problem, options_of(config, problem));
    write_outputs(config, trace, out);
    return static_cast<int>(kOk);
  });
}

int verify_command(const RunConfig& config, std::ostream& out, std::ostream& err) {
  return guarded(err, [&] {
    const ProblemSpec problem = problem_of(config);
    AdaptOptions options = options_of(config, problem);
    options.verify_spectral = true;
    options.verify_identity = true;
    const AdaptTrace trace = adapt_loop(problem, options);
    write_outputs(config, trace, out);

    const std::vector<Check> checks = {sandwich_check(trace), identity_check(trace), chain_check(trace),
                                       effectivity_check(trace), rate_check(trace)};
    bool failed = false;
    out << fmt::format("{:<12} {:<8} {}\n", "check", "status", "detail");
    for (const auto& c : checks) {
      out << fmt::format("{:<12} {:<8} {}\n", c.name, label(c.status), c.detail);
      failed = failed || c.status == Status::fail;
    }
    if (failed) {
      for (const auto& c : checks)
        if (c.status == Status::fail) err << "invariant violation: " << c.name << ": " << c.detail << "\n";
      return static_cast<int>(kInvariantViolation);
    }
    return static_cast<int>(kOk);
  });
}

int mesh_info_command(const RunConfig& config, std::ostream& out, std::ostream& err) {
  return guarded(err, [&] {
    const ProblemSpec problem = problem_of(config);
    const auto mesh = mesh_of(config, problem);
    const MeshStats stats = mesh_stats(*mesh);
    int boundary_edges = 0;
    for (const auto& e : mesh->edges()) boundary_edges += e.is_boundary() ? 1 : 0;
    int regions = 0;
    for (int r : mesh->regions()) regions = std::max(regions, r + 1);
    out << fmt::format("vertices        {}\n", mesh->num_vertices());
    out << fmt::format("triangles       {}\n", mesh->num_triangles());
    out << fmt::format("edges           {}\n", mesh->num_edges());
    out << fmt::format("boundary edges  {}\n", boundary_edges);
    out << fmt::format("regions         {}\n", regions);
    out << fmt::format("min angle       {:.6g}\n", stats.min_angle);
    out << fmt::format("max angle       {:.6g}\n", stats.max_angle);
    out << fmt::format("max overlap M   {}\n", stats.max_overlap);
    out << fmt::format("h_max           {:.6g}\n", stats.h_max);
    out << fmt::format("h_min           {:.6g}\n", stats.h_min);
    out << "conformity      ok\n";
    return static_cast<int>(kOk);
  });
}

int main_entry(int argc, char** argv, std::ostream& out, std::ostream& err) {
  CLI::App app{"Adaptive finite elements with additive Schwarz estimators", "asfem"};
  app.require_subcommand(1);
  std::string config_path;
  std::optional<std::string> output;
  std::optional<int> levels_cap;
  std::vector<CLI::App*> subs;
  for (const char* name : {"run", "verify", "mesh-info"}) {
    const char* about = std::string_view(name) == "run"      ? "solve-estimate-mark-refine, write CSV traces"
                        : std::string_view(name) == "verify" ? "run the verification suite and print a table"
                                                             : "print mesh statistics";
    CLI::App* sub = app.add_subcommand(name, about);
    sub->add_option("--config", config_path, "JSON config file")->required();
    sub->add_option("--output", output, "output directory");
    sub->add_option("--levels-cap", levels_cap, "maximum number of levels")->check(CLI::PositiveNumber);
    subs.push_back(sub);
  }
  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp&) {
    out << app.help();
    return kOk;
  } catch (const CLI::ParseError& e) {
    err << "error: " << e.what() << "\n";
    return kParseError;
  }

  RunConfig config;
  try {
    config = load_config(config_path);
  } catch (const ConfigError& e) {
    err << "error: " << e.what() << "\n";
    return kParseError;
  }
  if (output) config.output = *output;
  if (levels_cap) config.max_levels = *levels_cap;

  if (subs[0]->parsed()) return run_command(config, out, err);
  if (subs[1]->parsed()) return verify_command(config, out, err);
  return mesh_info_command(config, out, err);
}

} // namespace asfem::cli
