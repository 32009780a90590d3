// graphflow command-line front end. Talks to the library only through the C
// interface in graphflow/graphflow.h.

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <memory>
#include <sstream>
#include <string>

#include <unistd.h>

#include <CLI11.hpp>

#include "graphflow/graphflow.h"

namespace fs = std::filesystem;

namespace {

constexpr int kExitOk = 0;
constexpr int kExitValidation = 1;
constexpr int kExitNumerical = 2;
constexpr int kExitUsage = 64;

struct CliFailure {
  int exit_code;
  std::string message;
};

int exit_code_for(gf_status status) {
  if (status == GF_OK) return kExitOk;
  return gf_status_is_numerical(status) ? kExitNumerical : kExitValidation;
}

void check(gf_status status) {
  if (status != GF_OK) {
    // The library message already starts with the error name.
    throw CliFailure{exit_code_for(status), gf_last_error()};
  }
}

struct StringDeleter {
  void operator()(char* s) const { gf_string_free(s); }
};
using OwnedString = std::unique_ptr<char, StringDeleter>;

struct ModelDeleter {
  void operator()(gf_model* m) const { gf_model_free(m); }
};
struct TrajectoryDeleter {
  void operator()(gf_trajectory* t) const { gf_trajectory_free(t); }
};
struct TransportDeleter {
  void operator()(gf_transport* t) const { gf_transport_free(t); }
};
using Model = std::unique_ptr<gf_model, ModelDeleter>;
using TrajectoryHandle = std::unique_ptr<gf_trajectory, TrajectoryDeleter>;
using TransportHandle = std::unique_ptr<gf_transport, TransportDeleter>;

std::string read_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw CliFailure{kExitValidation, "IoError: cannot read " + path};
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

// Write-temp-then-rename so readers never observe a partial file.
void write_atomic(const fs::path& path, const std::string& content) {
  std::error_code ec;
  if (path.has_parent_path()) fs::create_directories(path.parent_path(), ec);
  const fs::path tmp = path.parent_path() / ("." + path.filename().string() + ".tmp" + std::to_string(::getpid()));
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    out << content;
    out.flush();
    if (!out) throw CliFailure{kExitValidation, "IoError: cannot write " + tmp.string()};
  }
  fs::rename(tmp, path, ec);
  if (ec) {
    fs::remove(tmp, ec);
    throw CliFailure{kExitValidation, "IoError: cannot rename onto " + path.string()};
  }
}

OwnedString take(char* s) { return OwnedString(s); }

Model load_model(const std::string& config_path) {
  const std::string text = read_file(config_path);
  gf_model* raw = nullptr;
  check(gf_model_from_json(text.c_str(), &raw));
  return Model(raw);
}

fs::path output_dir(const gf_model* model, const std::string& override_dir) {
  if (!override_dir.empty()) return override_dir;
  char* dir = nullptr;
  check(gf_model_output_dir(model, &dir));
  return take(dir).get();
}

int run_simulate(const std::string& config, const std::string& out_dir) {
  Model model = load_model(config);
  gf_trajectory* raw = nullptr;
  check(gf_simulate(model.get(), &raw));
  TrajectoryHandle traj(raw);
  const fs::path dir = output_dir(model.get(), out_dir);

  char* s = nullptr;
  check(gf_trajectory_csv(traj.get(), &s));
  write_atomic(dir / "trajectory.csv", take(s).get());
  check(gf_trajectory_json(model.get(), traj.get(), &s));
  write_atomic(dir / "trajectory.json", take(s).get());
  check(gf_trajectory_summary_json(model.get(), traj.get(), &s));
  OwnedString summary = take(s);
  write_atomic(dir / "summary.json", summary.get());
  std::cout << summary.get() << "\n";
  return kExitOk;
}

int run_metric(const std::string& config, const std::string& from, const std::string& to, std::size_t steps) {
  Model model = load_model(config);
  const std::string a = read_file(from);
  const std::string b = read_file(to);
  gf_transport* raw = nullptr;
  const gf_status status = gf_transport_cost(model.get(), a.c_str(), b.c_str(), steps, &raw);
  if (status != GF_OK && status != GF_NOT_CONVERGED) check(status);
  const std::string message = status == GF_OK ? "" : gf_last_error();
  TransportHandle result(raw);
  const fs::path dir = output_dir(model.get(), "");

  char* s = nullptr;
  check(gf_transport_json(result.get(), &s));
  OwnedString report = take(s);
  write_atomic(dir / "metric.json", report.get());
  check(gf_transport_path_json(model.get(), result.get(), &s));
  write_atomic(dir / "path.json", take(s).get());
  check(gf_transport_path_csv(result.get(), &s));
  write_atomic(dir / "path.csv", take(s).get());
  std::cout << report.get() << "\n";
  if (status == GF_NOT_CONVERGED) {
    std::cerr << message << "\n";
    return kExitNumerical;
  }
  return kExitOk;
}

int run_profile(const std::string& path) {
  const std::string text = read_file(path);
  char* s = nullptr;
  check(gf_geodesic_profile_json(text.c_str(), &s));
  std::cout << take(s).get() << "\n";
  return kExitOk;
}

int run_diagnose(const std::string& trajectory, const std::string& config) {
  Model model = load_model(config);
  const std::string text = read_file(trajectory);
  gf_trajectory* raw = nullptr;
  check(gf_trajectory_load(model.get(), text.c_str(), &raw));
  TrajectoryHandle traj(raw);
  const fs::path dir = output_dir(model.get(), "");

  char* s = nullptr;
  check(gf_diagnose_json(model.get(), traj.get(), &s));
  OwnedString report = take(s);
  write_atomic(dir / "diagnosis.json", report.get());
  check(gf_diagnose_csv(model.get(), traj.get(), &s));
  write_atomic(dir / "diagnosis.csv", take(s).get());
  std::cout << report.get() << "\n";
  return kExitOk;
}

int run_refine(const std::string& plan, const std::string& config) {
  Model model = load_model(config);
  const std::string text = read_file(plan);
  char* s = nullptr;
  int all_ok = 0;
  check(gf_refinement_study_json(model.get(), text.c_str(), &s, &all_ok));
  OwnedString report = take(s);
  write_atomic(output_dir(model.get(), "") / "study.json", report.get());
  std::cout << report.get() << "\n";
  return all_ok ? kExitOk : kExitNumerical;
}

int run_validate(const std::string& config) {
  Model model = load_model(config);
  char* s = nullptr;
  int ok = 0;
  check(gf_model_validation_json(model.get(), &s, &ok));
  std::cout << take(s).get() << "\n";
  return ok ? kExitOk : kExitValidation;
}

int run_properties(const std::string& suite, std::uint64_t seed, std::size_t samples) {
  char* s = nullptr;
  int passed = 0;
  const gf_status status = gf_property_suite_json(suite.c_str(), seed, samples, &s, &passed);
  OwnedString report = take(s);
  if (report) std::cout << report.get() << "\n";
  if (status == GF_INVALID_ARGUMENT) {
    std::cerr << gf_last_error() << "\n";  // unknown suite name
    return kExitUsage;
  }
  check(status);
  return passed ? kExitOk : kExitValidation;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"graphflow: two-species interaction flows and upwind transport on weighted graphs"};
  app.set_version_flag("--version", std::string(gf_version()));
  app.require_subcommand(1);

  std::string config, out_dir, from, to, path, trajectory, plan, suite;
  std::size_t steps = 0, samples = 0;
  std::uint64_t seed = 0;

  auto* simulate = app.add_subcommand("simulate", "integrate the configured flow and write CSV/JSON outputs");
  simulate->add_option("--config", config, "config file")->required();
  simulate->add_option("--out", out_dir, "output directory (defaults to the config's output.dir)");

  auto* metric = app.add_subcommand("metric", "transport cost between two states");
  metric->add_option("--config", config, "config file")->required();
  metric->add_option("--from", from, "start state JSON")->required();
  metric->add_option("--to", to, "end state JSON")->required();
  metric->add_option("--steps", steps, "time steps K (at least 8)");

  auto* profile = app.add_subcommand("geodesic-profile", "per-interval action of a stored path");
  profile->add_option("--path", path, "path JSON written by metric")->required();

  auto* diagnose = app.add_subcommand("diagnose", "De Giorgi, chain-rule and conservation diagnostics");
  diagnose->add_option("--trajectory", trajectory, "trajectory JSON or CSV")->required();
  diagnose->add_option("--config", config, "config file")->required();

  auto* refine = app.add_subcommand("refine", "graph refinement study");
  refine->add_option("--plan", plan, "refinement plan JSON")->required();
  refine->add_option("--config", config, "config file")->required();

  auto* validate = app.add_subcommand("validate-graph", "check graph, mobility and kernel assumptions");
  validate->add_option("--config", config, "config file")->required();

  auto* properties = app.add_subcommand("properties", "randomized property suites");
  properties->add_option("--suite", suite, "suite name")->required();
  properties->add_option("--seed", seed, "master seed")->required();
  properties->add_option("--samples", samples, "number of samples")->required();

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForAllHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForVersion& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    std::cerr << app.help();
    return kExitUsage;
  }

  try {
    if (*simulate) return run_simulate(config, out_dir);
    if (*metric) {
      if (metric->count("--steps") && steps < 8) {
        std::cerr << "--steps must be at least 8\n";
        return kExitUsage;
      }
      return run_metric(config, from, to, steps);
    }
    if (*profile) return run_profile(path);
    if (*diagnose) return run_diagnose(trajectory, config);
    if (*refine) return run_refine(plan, config);
    if (*validate) return run_validate(config);
    if (*properties) return run_properties(suite, seed, samples);
  } catch (const CliFailure& f) {
    std::cerr << f.message << "\n";
    return f.exit_code;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitValidation;
  }
  std::cerr << app.help();
  return kExitUsage;
}
