#include <cstdio>
#include <filesystem>
#include <fstream>
#include <functional>
#include <iostream>
#include <map>
#include <string>

#include <CLI11.hpp>

#include "commands.hpp"
#include "rdelab/errors.hpp"
#include "rdelab/version.hpp"

namespace {

enum Exit { kOk = 0, kFailure = 1, kInvalid = 2, kResource = 3 };

namespace fs = std::filesystem;
using rdelab::cli::CommandOutput;
using rdelab::cli::RunConfig;

void write_file(const fs::path& path, const std::string& contents) {
  std::ofstream out(path, std::ios::binary);
  out << contents;
  if (!out) throw rdelab::ValidationError("cannot write '" + path.string() + "'");
}

void emit(const std::string& command, const CommandOutput& out, const std::string& out_dir) {
  const std::string report = out.report.dump(2) + "\n";
  if (out_dir.empty()) {
    // Without --out the table is the useful product of transform.
    if (command == "transform" && !out.files.empty())
      std::cout << out.files.front().second;
    else
      std::cout << report;
    return;
  }
  std::error_code ec;
  fs::create_directories(out_dir, ec);
  if (ec) throw rdelab::ValidationError("cannot create output directory '" + out_dir + "'");
  write_file(fs::path(out_dir) / (command + ".json"), report);
  for (const auto& [name, contents] : out.files) write_file(fs::path(out_dir) / name, contents);
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Analysis and simulation of X = 1 - prod X_i on Galton-Watson trees", "rdelab"};
  app.set_version_flag("--version", std::string(rdelab::kVersion));
  app.require_subcommand(1);
  app.fallthrough();

  std::string config_path;
  std::string out_dir;
  std::uint64_t seed = 0;
  double tol = 0.0;
  auto* seed_opt = app.add_option("--seed", seed, "RNG seed (overrides config 'seed')");
  auto* tol_opt = app.add_option("--tol", tol, "Tolerance (overrides config 'tol')");
  app.add_option("--config", config_path, "JSON config file")->required();
  app.add_option("--out", out_dir, "Directory for the JSON report and CSV outputs");

  using Fn = std::function<CommandOutput(const RunConfig&)>;
  const std::map<std::string, std::pair<Fn, const char*>> commands = {
      {"analyze", {rdelab::cli::cmd_analyze, "Fixed points, endogeny, moment sequences, cycles"}},
      {"simulate", {rdelab::cli::cmd_simulate, "Monte Carlo moments and endogeny diagnostic"}},
      {"iterate", {rdelab::cli::cmd_iterate, "Iterate the distributional map; basin verdicts"}},
      {"transform", {rdelab::cli::cmd_transform, "Tabulate a thinned generating function"}},
      {"cycles", {rdelab::cli::cmd_cycles, "Two-cycles of the mean map and their stability"}},
  };
  for (const auto& [name, entry] : commands) app.add_subcommand(name, entry.second);

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? kOk : kInvalid;
  }

  const std::string command = app.get_subcommands().front()->get_name();
  try {
    RunConfig rc;
    rc.config = rdelab::cli::load_config(config_path);
    if (!rc.config.is_object()) throw rdelab::ValidationError("config must be a JSON object");
    if (*seed_opt) rc.seed = seed;
    if (*tol_opt) rc.tol = tol;
    rc.has_out_dir = !out_dir.empty();
    const auto out = commands.at(command).first(rc);
    emit(command, out, out_dir);
    return kOk;
  } catch (const rdelab::ResourceError& e) {
    std::cerr << "rdelab " << command << ": resource limit: " << e.what() << "\n";
    return kResource;
  } catch (const rdelab::Error& e) {
    std::cerr << "rdelab " << command << ": invalid configuration: " << e.what() << "\n";
    return kInvalid;
  } catch (const nlohmann::json::exception& e) {
    std::cerr << "rdelab " << command << ": invalid configuration: " << e.what() << "\n";
    return kInvalid;
  } catch (const std::bad_alloc&) {
    std::cerr << "rdelab " << command << ": resource limit: out of memory\n";
    return kResource;
  } catch (const std::exception& e) {
    std::cerr << "rdelab " << command << ": " << e.what() << "\n";
    return kFailure;
  }
}
