#pragma once

#include <map>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "dmw/cz.hpp"
#include "dmw/normlab.hpp"
#include "dmw/representation.hpp"

namespace dmw::harness {

using json = nlohmann::json;

inline constexpr const char* kVersion = "0.1.0";

enum ExitCode : int { kOk = 0, kValidation = 2, kNumerical = 3, kAssertion = 4 };

inline const std::vector<std::string>& task_names() {
  static const std::vector<std::string> names{"a2",     "bmo",        "normest", "decompose", "expansion",
                                              "slice-check", "sweep", "verify"};
  return names;
}

struct WeightConfig {
  int d = 2;
  WeightGenerator generator;
  std::optional<double> target;  // squared dyadic A2; strength is calibrated
  std::string file;
  std::vector<Mat> blocks;  // loaded from `file`
};

struct OperatorConfig {
  std::string type = "martingale";  // kernel | shift | paraproduct | martingale
  std::string kernel = "torus_hilbert";
  std::map<std::string, double> params;
  std::string diagonal = "zero";  // zero | pv
  int m = 0, n = 0;
  bool saturated = true;
  double symbol_scale = 1.0;
};

struct SweepConfig {
  std::string study = "n_hat";  // n_hat | complexity | ratios
  std::vector<double> X{2.0, 4.0, 8.0};
  std::vector<int> k{1, 2, 3, 4};
  std::size_t sigma_samples = 8;
  std::size_t trials = 10;
  int ainf_directions = 64;
  bool fit = false;
};

struct ExperimentConfig {
  std::string task;
  std::uint64_t seed = 1;
  GridSpec grid;
  bool shifted = false;  // grid translated by a seeded random shift
  WeightConfig weight;
  OperatorConfig op;
  SweepConfig sweep;
  NormOptions norm;
  double identity_tol = 1e-9;
  double rank_one_tol = 1e-10;
  GoodnessParams goodness{4, 1.0};
  std::size_t grids = 64;
  std::size_t instances = 10;
  std::string output;
  int threads = 0;
  json normalized;  // the config as read, with the effective seed
};

/// Strict parse: unknown keys, wrong types and out-of-range values raise ValidationError.
ExperimentConfig parse_config(const std::string& task, const json& config, std::optional<std::uint64_t> seed = {});

struct RunResult {
  int code = kOk;
  std::string message;
  std::map<std::string, std::string> files;  // written in name order
  json manifest;
};

/// Runs the task without touching the filesystem.
RunResult run(const ExperimentConfig& cfg, int threads = 1, bool fit = false);
/// Writes every output plus manifest.json into `dir`.
void write_outputs(const RunResult& r, const std::string& dir);

/// Re-runs the recorded config and compares output hashes; code kAssertion on mismatch.
RunResult replay(const json& manifest, int threads = 1);

struct BoundRow {
  std::string op;
  std::string variable;  // X or k
  LinearFit fit;
  double target_low = 0.0, target_high = 0.0;
  std::string note;
};

/// Merges curve CSVs (header X,Xinf,norm,operator,k,seed,converged) and fits log norm per operator.
std::vector<BoundRow> report_bounds(const std::vector<std::string>& csv_texts);
std::string bounds_csv(const std::vector<BoundRow>& rows);

std::string curve_csv(const std::vector<CurveRow>& rows);
std::string fit_csv(const std::vector<std::pair<std::string, LinearFit>>& fits);
std::string hash_hex(const std::string& bytes);
std::string format_double(double v);

}  // namespace dmw::harness
