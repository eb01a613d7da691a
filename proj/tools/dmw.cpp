#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <sstream>

#include <CLI11.hpp>

#include "dmw/harness.hpp"

using namespace dmw;
using namespace dmw::harness;

namespace {

std::string read_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ValidationError("cannot read " + path);
  std::ostringstream s;
  s << in.rdbuf();
  return s.str();
}

json read_json(const std::string& path) {
  try {
    return json::parse(read_file(path));
  } catch (const json::exception& e) {
    throw ValidationError(path + ": " + e.what());
  }
}

// flag > environment > config > fallback
int resolve_threads(int flag, int from_config) {
  if (flag > 0) return flag;
  if (const char* env = std::getenv("DMW_THREADS")) {
    try {
      const int t = std::stoi(env);
      if (t > 0) return t;
    } catch (const std::exception&) {
    }
    throw ValidationError(std::string("DMW_THREADS must be a positive integer, got '") + env + "'");
  }
  return from_config > 0 ? from_config : 1;
}

std::string resolve_out(const std::string& flag, const std::string& from_config, const std::string& fallback) {
  if (!flag.empty()) return flag;
  if (const char* env = std::getenv("DMW_OUT"); env && *env) return env;
  return from_config.empty() ? fallback : from_config;
}

int finish(const RunResult& r, const std::string& out) {
  if (r.code == kValidation) {
    std::cerr << "dmw: invalid configuration: " << r.message << "\n";
    return r.code;
  }
  write_outputs(r, out);
  if (r.code != kOk) std::cerr << "dmw: " << r.message << "\n";
  std::cout << "wrote " << r.files.size() + 1 << " files to " << out << " (exit " << r.code << ")\n";
  return r.code;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"dyadic matrix-weight experiments"};
  app.require_subcommand(1);

  std::string config_path, out, manifest_path;
  std::uint64_t seed = 0;
  int threads = 0;
  bool fit = false;
  std::vector<std::string> curves;

  std::vector<CLI::App*> tasks;
  for (const auto& name : task_names()) {
    auto* sub = app.add_subcommand(name, "run the " + name + " task");
    sub->add_option("--config", config_path, "JSON config")->required();
    sub->add_option("--seed", seed, "root seed (overrides the config)");
    sub->add_option("--out", out, "output directory");
    sub->add_option("--threads", threads, "worker threads");
    sub->add_flag("--fit", fit, "emit log-log fit rows");
    tasks.push_back(sub);
  }
  auto* report = app.add_subcommand("report", "fit exponents across curve CSVs");
  report->add_option("--curves", curves, "curve CSV files")->required();
  report->add_option("--out", out, "output directory");
  auto* rep = app.add_subcommand("replay", "re-run from a manifest and compare outputs");
  rep->add_option("--manifest", manifest_path, "manifest.json")->required();
  rep->add_option("--out", out, "output directory");
  rep->add_option("--threads", threads, "worker threads");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : kValidation;
  }

  try {
    if (report->parsed()) {
      std::vector<std::string> texts;
      for (const auto& c : curves) texts.push_back(read_file(c));
      const auto rows = report_bounds(texts);
      const std::string csv = bounds_csv(rows);
      const std::string dir = resolve_out(out, "", "dmw_report");
      std::filesystem::create_directories(dir);
      std::ofstream(std::filesystem::path(dir) / "bounds.csv", std::ios::binary) << csv;
      std::cout << csv;
      return kOk;
    }
    if (rep->parsed()) {
      const json m = read_json(manifest_path);
      const std::string fallback = (std::filesystem::path(manifest_path).parent_path() / "replay").string();
      const RunResult r = replay(m, resolve_threads(threads, 0));
      return finish(r, resolve_out(out, "", fallback));
    }
    for (auto* sub : tasks) {
      if (!sub->parsed()) continue;
      const json cfg = read_json(config_path);
      const auto c = parse_config(sub->get_name(), cfg,
                                  sub->count("--seed") ? std::optional<std::uint64_t>(seed) : std::nullopt);
      const std::string dir = resolve_out(out, c.output, "dmw_out");
      return finish(run(c, resolve_threads(threads, c.threads), fit), dir);
    }
  } catch (const ValidationError& e) {
    std::cerr << "dmw: invalid configuration: " << e.what() << "\n";
    return kValidation;
  } catch (const UsageError& e) {
    std::cerr << "dmw: invalid configuration: " << e.what() << "\n";
    return kValidation;
  } catch (const NumericalError& e) {
    std::cerr << "dmw: numerical failure: " << e.what() << "\n";
    return kNumerical;
  } catch (const std::exception& e) {
    std::cerr << "dmw: " << e.what() << "\n";
    return 1;
  }
  return kValidation;
}
