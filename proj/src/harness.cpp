#include "dmw/harness.hpp"

#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <memory>
#include <set>
#include <sstream>

#include "dmw/parallel.hpp"

namespace dmw::harness {

namespace {

// ---- strict schema helpers

void check_keys(const json& j, const std::string& path, const std::set<std::string>& allowed) {
  if (!j.is_object()) throw ValidationError(path + " must be an object");
  for (auto it = j.begin(); it != j.end(); ++it)
    if (!allowed.count(it.key())) throw ValidationError("unknown key '" + path + "." + it.key() + "'");
}

template <class T>
T value_at(const json& j, const std::string& key, const std::string& path, T fallback) {
  if (!j.contains(key)) return fallback;
  try {
    return j.at(key).get<T>();
  } catch (const json::exception&) {
    throw ValidationError("wrong type for '" + path + "." + key + "'");
  }
}

// Integers must be written as integers; json silently truncates 2.5 otherwise.
int int_at(const json& j, const std::string& key, const std::string& path, int fallback) {
  if (!j.contains(key)) return fallback;
  if (!j.at(key).is_number_integer()) throw ValidationError("'" + path + "." + key + "' must be an integer");
  return j.at(key).get<int>();
}

std::uint64_t u64_at(const json& j, const std::string& key, const std::string& path, std::uint64_t fallback) {
  if (!j.contains(key)) return fallback;
  const json& v = j.at(key);
  if (!v.is_number_unsigned() && !(v.is_number_integer() && v.get<std::int64_t>() >= 0))
    throw ValidationError("'" + path + "." + key + "' must be a non-negative integer");
  return v.get<std::uint64_t>();
}

void require(bool ok, const std::string& what) {
  if (!ok) throw ValidationError(what);
}

const json& section(const json& j, const std::string& key) {
  static const json empty = json::object();
  return j.contains(key) ? j.at(key) : empty;
}

std::vector<Mat> load_weight_file(const std::string& file, int d) {
  std::ifstream in(file);
  if (!in) throw ValidationError("cannot read weight file '" + file + "'");
  json w;
  try {
    w = json::parse(in);
  } catch (const json::exception& e) {
    throw ValidationError("weight file '" + file + "' is not valid JSON");
  }
  check_keys(w, "weight_file", {"d", "blocks", "imag"});
  require(int_at(w, "d", "weight_file", d) == d, "weight file dimension differs from weight.d");
  require(w.contains("blocks") && w.at("blocks").is_array(), "weight file needs a 'blocks' array");
  const json& re = w.at("blocks");
  const json* im = w.contains("imag") ? &w.at("imag") : nullptr;
  if (im) require(im->is_array() && im->size() == re.size(), "weight file 'imag' must match 'blocks'");
  std::vector<Mat> out;
  try {
    for (std::size_t c = 0; c < re.size(); ++c) {
      Mat b(d, d);
      for (int r = 0; r < d; ++r)
        for (int s = 0; s < d; ++s)
          b(r, s) = Complex(re[c].at(r).at(s).get<double>(), im ? (*im)[c].at(r).at(s).get<double>() : 0.0);
      out.push_back(b);
    }
  } catch (const json::exception&) {
    throw ValidationError("weight file blocks must be d x d numeric arrays");
  }
  return out;
}

// ---- construction of the experiment objects

DyadicSystem make_system(const ExperimentConfig& c) {
  if (c.shifted) return build_grid(c.grid, RandomShift::sample(c.grid.p, c.grid.N, derive_seed(c.seed, "grid")));
  return build_grid(c.grid);
}

struct BuiltWeight {
  MatrixWeight w;
  bool reached = true;
  double achieved = 0.0;
};

BuiltWeight make_weight(const ExperimentConfig& c, const DyadicSystem& sys) {
  if (!c.weight.file.empty()) {
    if (c.weight.blocks.size() != sys.cell_count())
      throw ValidationError("weight file has " + std::to_string(c.weight.blocks.size()) + " blocks, grid has " +
                            std::to_string(sys.cell_count()) + " cells");
    return {MatrixWeight(c.weight.d, c.weight.blocks), true, 0.0};
  }
  if (c.weight.target) {
    auto cw = calibrate_weight(sys, c.weight.d, c.weight.generator, *c.weight.target, true);
    return {std::move(cw.weight), cw.reached, cw.achieved};
  }
  return {generate_weight(sys, c.weight.d, c.weight.generator), true, 0.0};
}

VectorField random_field(const DyadicSystem& sys, int d, Rng& rng) {
  return {d, random_gaussian(static_cast<int>(sys.cell_count()) * d, 1, rng)};
}

MatrixHaar random_symbol(const DyadicSystem& sys, int d, double scale, Rng& rng) {
  MatrixHaar b;
  b.d = d;
  const std::size_t slots = 1 + sys.level_offset(sys.N()) * static_cast<std::size_t>(signature_count(sys.p()));
  b.blocks.assign(slots, Mat::Zero(d, d));
  for (std::size_t s = 1; s < slots; ++s) {
    const int level = sys.level_of(haar_label(sys, s).cube);
    b.blocks[s] = random_gaussian(d, d, rng) * (scale * std::sqrt(sys.volume(level)));
  }
  return b;
}

KernelSpec make_configured_kernel(const ExperimentConfig& c) {
  return make_kernel(c.op.kernel, c.grid.p, c.weight.d, c.op.params);
}

DiscreteOperator sample_configured_kernel(const ExperimentConfig& c, const DyadicSystem& sys) {
  DiagonalRule rule;
  if (c.op.diagonal == "pv") rule.kind = DiagonalRule::Kind::SymmetricPV;
  return sample_kernel(make_configured_kernel(c), sys, rule);
}

// Owns whatever the configured operator needs to stay alive.
struct BuiltOperator {
  std::unique_ptr<LinearOperator> op;
  std::optional<HaarShift> shift;
};

BuiltOperator make_operator(const ExperimentConfig& c, const DyadicSystem& sys, const WeightCache& cache) {
  Rng rng = make_rng(c.seed, "operator");
  BuiltOperator b;
  const std::string& t = c.op.type;
  if (t == "kernel") {
    b.op = std::make_unique<DiscreteOperator>(sample_configured_kernel(c, sys));
  } else if (t == "shift") {
    b.shift.emplace(random_shift(cache, c.op.m, c.op.n, rng, c.op.saturated));
    b.op = std::make_unique<HaarOperator>(shift_operator(*b.shift));
  } else if (t == "paraproduct") {
    b.op = std::make_unique<ParaproductOperator>(sys, random_symbol(sys, c.weight.d, c.op.symbol_scale, rng));
  } else {
    b.op = std::make_unique<HaarOperator>(martingale_operator(sys, random_sigma(cache, rng)));
  }
  return b;
}

// ---- formatting

json cplx(Complex z) { return json::array({z.real(), z.imag()}); }

std::string dump(const json& j) { return j.dump(2) + "\n"; }

struct Csv {
  std::ostringstream s;
  explicit Csv(const std::string& header) { s << header << "\n"; }
  template <class... T>
  void row(const T&... cols) {
    bool first = true;
    ((s << (first ? "" : ",") << cell(cols), first = false), ...);
    s << "\n";
  }
  static std::string cell(double v) { return format_double(v); }
  static std::string cell(int v) { return std::to_string(v); }
  static std::string cell(std::size_t v) { return std::to_string(v); }
  static std::string cell(bool v) { return v ? "1" : "0"; }
  static std::string cell(const std::string& v) { return v; }
  static std::string cell(const char* v) { return v; }
  std::string str() const { return s.str(); }
};

// ---- tasks

void task_a2(const ExperimentConfig& c, RunResult& r, int threads) {
  const auto sys = make_system(c);
  const auto bw = make_weight(c, sys);
  const WeightCache cache(sys, bw.w, threads);
  const auto ch = a2_characteristic({&cache});
  json rep{{"task", "a2"},
           {"a2", ch.a2},
           {"a2_squared", ch.squared()},
           {"argmax", ch.argmax_label},
           {"ainf", ainf_characteristic(cache, 64)},
           {"target_reached", bw.reached}};
  r.files["report.json"] = dump(rep);
}

void task_bmo(const ExperimentConfig& c, RunResult& r, int threads) {
  const auto sys = make_system(c);
  const auto bw = make_weight(c, sys);
  const WeightCache cache(sys, bw.w, threads);
  Rng rng = make_rng(c.seed, "operator");
  const auto sym = BmoSymbol::from_haar(sys, random_symbol(sys, c.weight.d, c.op.symbol_scale, rng));
  const auto n = bmo_w_norm(sym, cache);
  json rep{{"task", "bmo"},
           {"carleson", n.carleson},
           {"oscillation", n.oscillation},
           {"ratio", n.ratio()},
           {"carleson_argmax", sys.cube_label(n.carleson_argmax)},
           {"oscillation_argmax", sys.cube_label(n.oscillation_argmax)}};
  r.files["report.json"] = dump(rep);
}

void task_normest(const ExperimentConfig& c, RunResult& r, int threads) {
  const auto sys = make_system(c);
  const auto bw = make_weight(c, sys);
  const WeightCache cache(sys, bw.w, threads);
  const auto op = make_operator(c, sys, cache);
  NormOptions no = c.norm;
  no.seed = derive_seed(c.seed, "power");
  const auto e = weighted_operator_norm(*op.op, bw.w, no);
  json rep{{"task", "normest"},   {"operator", c.op.type},       {"norm", e.value},
           {"converged", e.converged}, {"iterations", e.iterations}, {"residual", e.residual}};
  r.files["report.json"] = dump(rep);
  if (!e.converged) {
    r.code = kNumerical;
    r.message = "power iteration did not converge in " + std::to_string(no.max_iter) + " iterations";
  }
}

void task_decompose(const ExperimentConfig& c, RunResult& r, int threads) {
  const auto sys = make_system(c);
  const auto bw = make_weight(c, sys);
  const WeightCache cache(sys, bw.w, threads);
  const auto k = make_configured_kernel(c);
  const auto t = sample_configured_kernel(c, sys);
  const auto tilde = form_tilde(t, sys);
  ExtractOptions eo;
  eo.goodness = c.goodness;
  eo.filter_good = false;
  eo.delta = k.delta;
  const auto bundles = extract_shifts(tilde, cache, eo);
  const auto env = verify_lemma_envelope(bundles, sys, k.delta);
  Csv shifts("m,n,count,tau,decay_fit,in,equal,out,near");
  for (const auto& b : bundles)
    shifts.row(b.m, b.n, b.coeffs.size(), b.tau, b.decay_fit, b.case_histogram[0], b.case_histogram[1],
               b.case_histogram[2], b.case_histogram[3]);
  Csv envelope("case,N,count,max_first,max_second");
  for (const auto& row : env.rows)
    envelope.row(std::string(to_string(row.gamma_case)), row.N, row.count, row.max_first, row.max_second);
  const auto cond = verify_kernel_conditions(k, cache, 512, derive_seed(c.seed, "kernel"));
  const auto wbp = weak_boundedness_check(t, cache);
  json rep{{"task", "decompose"},
           {"kernel", k.kind},
           {"delta", k.delta},
           {"mean_defect", tilde_mean_defect(tilde, sys)},
           {"wbp_max_ratio", wbp.max_ratio},
           {"decay_max", cond.decay_max},
           {"decay_dual_max", cond.decay_dual_max},
           {"smooth_max", cond.smooth_max},
           {"claimed_C0", cond.claimed_C0},
           {"claimed_Cdelta", cond.claimed_Cdelta},
           {"conditions_pass", cond.pass()}};
  r.files["shifts.csv"] = shifts.str();
  r.files["envelope.csv"] = envelope.str();
  r.files["report.json"] = dump(rep);
}

void task_expansion(const ExperimentConfig& c, RunResult& r, int threads) {
  const auto sys = build_grid(c.grid);
  const auto t = sample_configured_kernel(c, sys);
  Rng rng = make_rng(c.seed, "fields");
  const auto f = random_field(sys, c.weight.d, rng);
  const auto g = random_field(sys, c.weight.d, rng);
  const auto e = randomized_expansion(t, f, g, c.grid, c.grids, derive_seed(c.seed, "mc"), c.goodness, threads);
  Csv samples("grid,re,im");
  for (std::size_t i = 0; i < e.samples.size(); ++i) samples.row(i, e.samples[i].real(), e.samples[i].imag());
  json rep{{"task", "expansion"}, {"estimate", cplx(e.estimate)}, {"exact", cplx(e.exact)},
           {"ci_re", e.ci_re},     {"ci_im", e.ci_im},            {"grids", e.grids},
           {"covers_exact", e.covers_exact()}, {"pi_good", e.pi_good}};
  r.files["samples.csv"] = samples.str();
  r.files["report.json"] = dump(rep);
}

void task_slice_check(const ExperimentConfig& c, RunResult& r, int threads) {
  const auto sys = make_system(c);
  const auto bw = make_weight(c, sys);
  const WeightCache cache(sys, bw.w, threads);
  Csv out("instance,t,lhs_re,lhs_im,rhs_re,rhs_im,gap,rank_one,slice_sum_gap");
  double worst = 0.0, worst_rank = 0.0, worst_sum = 0.0;
  for (std::size_t i = 0; i < c.instances; ++i) {
    Rng rng = make_rng(c.seed, "operator", i);
    const auto s = random_shift(cache, c.op.m, c.op.n, rng, c.op.saturated);
    const auto f = random_field(sys, c.weight.d, rng);
    const auto g = random_field(sys, c.weight.d, rng);
    const VectorField whole = apply_shift(s, f);
    Vec sum = Vec::Zero(whole.values.size());
    for (int t = 0; t < s.complexity(); ++t) sum += apply_shift(slice(s, t), f).values;
    const double sum_gap = (sum - whole.values).norm() / std::max(1.0, whole.values.norm());
    worst_sum = std::max(worst_sum, sum_gap);
    for (int t = 0; t < s.complexity(); ++t) {
      const auto id = slice_identity_check(s, cache, f, g, t);
      const double rel = id.gap / std::max(1.0, std::abs(id.lhs));
      worst = std::max(worst, rel);
      worst_rank = std::max(worst_rank, id.rank_one_deviation);
      out.row(i, t, id.lhs.real(), id.lhs.imag(), id.rhs.real(), id.rhs.imag(), id.gap, id.rank_one_deviation,
              sum_gap);
    }
  }
  const bool pass = worst < c.identity_tol && worst_rank < c.rank_one_tol && worst_sum < c.identity_tol;
  json rep{{"task", "slice-check"}, {"instances", c.instances}, {"max_gap", worst},
           {"max_rank_one_deviation", worst_rank}, {"max_slice_sum_gap", worst_sum}, {"pass", pass}};
  r.files["slices.csv"] = out.str();
  r.files["report.json"] = dump(rep);
  if (!pass) {
    r.code = kAssertion;
    r.message = "slice identity violated (max gap " + format_double(worst) + ")";
  }
}

void task_sweep(const ExperimentConfig& c, RunResult& r, int threads, bool fit) {
  const auto sys = make_system(c);
  const SweepConfig& sc = c.sweep;
  SweepOptions so;
  so.d = c.weight.d;
  so.generator = c.weight.generator;
  so.sigma_samples = sc.sigma_samples;
  so.seed = derive_seed(c.seed, "sigma");
  so.threads = threads;
  so.ainf_directions = sc.ainf_directions;
  so.norm = c.norm;
  json rep{{"task", "sweep"}, {"study", sc.study}};
  if (sc.study == "ratios") {
    const auto rows = ratio_curves(sys, sc.X, so);
    Csv out("X,Xinf,square,maximal,reference,reached");
    std::vector<double> ref, sq, mx;
    for (const auto& row : rows) {
      out.row(row.X, row.Xinf, row.square, row.maximal, row.reference, row.reached);
      ref.push_back(row.reference);
      sq.push_back(row.square);
      mx.push_back(row.maximal);
    }
    r.files["ratios.csv"] = out.str();
    const auto fs = loglog_fit(ref, sq), fm = loglog_fit(ref, mx);
    if (fit) r.files["fit.csv"] = fit_csv({{"square", fs}, {"maximal", fm}});
    rep["square_slope"] = fs.slope;
    rep["maximal_slope"] = fm.slope;
    r.files["report.json"] = dump(rep);
    return;
  }
  SweepCurve curve;
  if (sc.study == "n_hat") {
    curve = sweep_N_hat(sys, sc.X, so);
  } else {
    const auto bw = make_weight(c, sys);
    const WeightCache cache(sys, bw.w, threads);
    curve = shift_complexity_scaling(cache, sc.k, sc.trials, derive_seed(c.seed, "shift"), c.norm, threads);
  }
  r.files["curve.csv"] = curve_csv(curve.rows);
  if (fit) r.files["fit.csv"] = fit_csv({{curve.rows.empty() ? "" : curve.rows[0].op, curve.fit}});
  bool converged = true, reached = true;
  for (const auto& row : curve.rows) {
    converged = converged && row.converged;
    reached = reached && row.reached;
  }
  rep["slope"] = curve.fit.slope;
  rep["slope_se"] = curve.fit.slope_se;
  rep["insufficient"] = curve.fit.insufficient;
  rep["all_converged"] = converged;
  rep["all_reached"] = reached;
  r.files["report.json"] = dump(rep);
  if (!converged) {
    r.code = kNumerical;
    r.message = "some power iterations did not converge";
  }
}

struct Check {
  std::string name;
  double value;
  double tol;
};

void task_verify(const ExperimentConfig& c, RunResult& r, int threads) {
  const auto sys = make_system(c);
  const int d = c.weight.d;
  const auto bw = make_weight(c, sys);
  const WeightCache cache(sys, bw.w, threads);
  Rng rng = make_rng(c.seed, "verify");
  std::vector<Check> checks;
  const double tol = c.identity_tol;

  {  // Haar round trip and Plancherel
    const auto f = random_field(sys, d, rng);
    const auto h = analyze(sys, f);
    const double rt = (synthesize(sys, h).values - f.values).norm() / f.values.norm();
    const double pl = std::abs(h.values.squaredNorm() - norm_sq(sys, f)) / norm_sq(sys, f);
    checks.push_back({"haar_round_trip", rt, tol});
    checks.push_back({"haar_plancherel", pl, tol});
  }
  {  // slices
    double sum_gap = 0.0, gap = 0.0, rank = 0.0;
    for (int k = 1; k <= std::min(3, sys.N()); ++k) {
      const auto s = random_shift(cache, k - 1, (k - 1) / 2, rng, false);
      const auto f = random_field(sys, d, rng), g = random_field(sys, d, rng);
      const auto whole = apply_shift(s, f);
      Vec sum = Vec::Zero(whole.values.size());
      for (int t = 0; t < k; ++t) {
        sum += apply_shift(slice(s, t), f).values;
        const auto id = slice_identity_check(s, cache, f, g, t);
        gap = std::max(gap, id.gap / std::max(1.0, std::abs(id.lhs)));
        rank = std::max(rank, id.rank_one_deviation);
      }
      sum_gap = std::max(sum_gap, (sum - whole.values).norm() / std::max(1.0, whole.values.norm()));
    }
    checks.push_back({"slice_sum", sum_gap, tol});
    checks.push_back({"slice_identity", gap, tol});
    checks.push_back({"rank_one_norm", rank, c.rank_one_tol});
  }
  {  // representation on a sampled kernel
    auto kc = c;
    if (kc.op.type != "kernel") kc.op.kernel = "torus_hilbert";
    const auto t = sample_configured_kernel(kc, sys);
    const auto tilde = form_tilde(t, sys);
    checks.push_back({"tilde_mean_zero", tilde_mean_defect(tilde, sys), tol});
    const auto f = random_field(sys, d, rng), g = random_field(sys, d, rng);
    const Complex exact = inner(sys, t(f), g);
    const Complex reassembled = expansion_pairing(sys, t, f, g, c.goodness, {});
    checks.push_back({"haar_reassembly", std::abs(exact - reassembled) / std::max(1.0, std::abs(exact)), 1e-10});
    ExtractOptions eo;
    eo.goodness = c.goodness;
    eo.filter_good = false;
    const auto bundles = extract_shifts(tilde, cache, eo);
    std::size_t total = 0;
    for (const auto& b : bundles)
      for (auto h : b.case_histogram) total += h;
    const double slots = static_cast<double>(sys.level_offset(sys.N()) * signature_count(sys.p()));
    checks.push_back({"gamma_partition", std::abs(static_cast<double>(total) - slots * slots), 0.5});
    const Complex bp = bundles_pairing(bundles, f, g);
    const Complex tp = inner(sys, tilde(f), g);
    checks.push_back({"bundle_pairing", std::abs(bp - tp) / std::max(1.0, std::abs(tp)), tol});
  }
  {  // scalar martingale oracle: W = 1, T_sigma diagonal in the Haar basis
    const WeightCache one(sys, MatrixWeight::identity(sys.cell_count(), 1));
    SigmaSequence sigma = SigmaSequence::constant(sys, Mat::Identity(1, 1));
    std::uniform_real_distribution<double> u(-1.0, 1.0);
    double peak = 0.0;
    for (std::size_t I = 0; I < sys.level_offset(sys.N()); ++I) {
      sigma.entries[I](0, 0) = Complex(u(rng), u(rng));
      peak = std::max(peak, std::abs(sigma.entries[I](0, 0)));
    }
    NormOptions no = c.norm;
    no.tol = std::min(no.tol, 1e-13);
    no.max_iter = std::max(no.max_iter, 20000);
    const auto e = operator_norm(martingale_operator(sys, sigma), no);
    checks.push_back({"scalar_martingale_norm", std::abs(e.value - peak), 1e-6});
  }
  Csv out("check,value,tolerance,pass");
  bool pass = true;
  std::string failed;
  for (const auto& ch : checks) {
    const bool ok = std::isfinite(ch.value) && ch.value <= ch.tol;
    pass = pass && ok;
    if (!ok) failed += (failed.empty() ? "" : ", ") + ch.name;
    out.row(ch.name, ch.value, ch.tol, ok);
  }
  r.files["verify.csv"] = out.str();
  r.files["report.json"] = dump(json{{"task", "verify"}, {"checks", checks.size()}, {"pass", pass}});
  if (!pass) {
    r.code = kAssertion;
    r.message = "failed checks: " + failed;
  }
}

std::set<std::string> keys(std::initializer_list<const char*> k) { return {k.begin(), k.end()}; }

}  // namespace

std::string format_double(double v) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

std::string hash_hex(const std::string& bytes) {
  char buf[20];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(fnv1a(bytes)));
  return buf;
}

std::string curve_csv(const std::vector<CurveRow>& rows) {
  Csv out("X,Xinf,norm,operator,k,seed,converged");
  for (const auto& r : rows) out.row(r.X, r.Xinf, r.norm, r.op, r.k, r.seed, r.converged);
  return out.str();
}

std::string fit_csv(const std::vector<std::pair<std::string, LinearFit>>& fits) {
  Csv out("operator,slope,slope_se,ci_low,ci_high,intercept,n,insufficient");
  for (const auto& [op, fit] : fits)
    out.row(op, fit.slope, fit.slope_se, fit.ci_low(), fit.ci_high(), fit.intercept, fit.n, fit.insufficient);
  return out.str();
}

ExperimentConfig parse_config(const std::string& task, const json& config, std::optional<std::uint64_t> seed) {
  ExperimentConfig c;
  if (std::find(task_names().begin(), task_names().end(), task) == task_names().end())
    throw ValidationError("unknown task '" + task + "'");
  c.task = task;
  check_keys(config, "config",
             keys({"task", "seed", "grid", "weight", "operator", "tolerances", "sweep", "goodness", "expansion",
                   "slice", "output", "threads"}));
  if (config.contains("task")) require(config.at("task") == task, "config task differs from the requested task");
  c.seed = seed ? *seed : u64_at(config, "seed", "config", 1);
  c.output = value_at<std::string>(config, "output", "config", "");
  c.threads = int_at(config, "threads", "config", 0);
  require(c.threads >= 0, "config.threads must be >= 0");

  const json& g = section(config, "grid");
  check_keys(g, "grid", keys({"p", "N", "topology", "shifted"}));
  c.grid.p = int_at(g, "p", "grid", 1);
  c.grid.N = int_at(g, "N", "grid", 4);
  try {
    c.grid.topology = topology_from_string(value_at<std::string>(g, "topology", "grid", "torus"));
  } catch (const Error& e) {
    throw ValidationError(std::string("grid.topology: ") + e.what());
  }
  c.shifted = value_at<bool>(g, "shifted", "grid", false);
  try {
    c.grid.validate();
  } catch (const CapacityError& e) {
    throw ValidationError(e.what());
  }
  require(!c.shifted || c.grid.topology == Topology::Torus, "grid.shifted requires the torus topology");

  const json& w = section(config, "weight");
  check_keys(w, "weight", keys({"d", "kind", "strength", "twist", "center", "modes", "seed", "target", "file"}));
  c.weight.d = int_at(w, "d", "weight", 2);
  require(c.weight.d >= 1 && c.weight.d <= 4, "weight.d must be in [1,4]");
  auto& gen = c.weight.generator;
  gen.kind = value_at<std::string>(w, "kind", "weight", "identity");
  require(keys({"identity", "constant", "power", "rotating", "loghermitian"}).count(gen.kind),
          "unknown weight.kind '" + gen.kind + "'");
  gen.strength = value_at<double>(w, "strength", "weight", 0.0);
  gen.twist = value_at<double>(w, "twist", "weight", 1.0);
  if (w.contains("center")) {
    const auto v = value_at<std::vector<double>>(w, "center", "weight", {});
    require(v.size() == 3, "weight.center must have 3 entries");
    gen.center = {v[0], v[1], v[2]};
  }
  gen.modes = int_at(w, "modes", "weight", 3);
  gen.seed = u64_at(w, "seed", "weight", derive_seed(c.seed, "weight"));
  if (w.contains("target")) {
    c.weight.target = value_at<double>(w, "target", "weight", 1.0);
    require(*c.weight.target >= 1.0, "weight.target must be >= 1");
  }
  c.weight.file = value_at<std::string>(w, "file", "weight", "");
  require(c.weight.file.empty() || !c.weight.target, "weight.file and weight.target are exclusive");
  if (!c.weight.file.empty()) {
    c.weight.blocks = load_weight_file(c.weight.file, c.weight.d);
    require(c.weight.blocks.size() == c.grid.cells(), "weight file has " + std::to_string(c.weight.blocks.size()) +
                                                          " blocks, grid has " + std::to_string(c.grid.cells()) +
                                                          " cells");
  }

  const json& o = section(config, "operator");
  check_keys(o, "operator", keys({"type", "kernel", "params", "diagonal", "m", "n", "saturated", "symbol_scale"}));
  c.op.type = value_at<std::string>(o, "type", "operator", "martingale");
  require(keys({"kernel", "shift", "paraproduct", "martingale"}).count(c.op.type),
          "unknown operator.type '" + c.op.type + "'");
  c.op.kernel = value_at<std::string>(o, "kernel", "operator", "torus_hilbert");
  if (o.contains("params")) {
    require(o.at("params").is_object(), "operator.params must be an object");
    for (auto it = o.at("params").begin(); it != o.at("params").end(); ++it) {
      require(it->is_number(), "operator.params." + it.key() + " must be a number");
      c.op.params[it.key()] = it->get<double>();
    }
  }
  c.op.diagonal = value_at<std::string>(o, "diagonal", "operator", "zero");
  require(c.op.diagonal == "zero" || c.op.diagonal == "pv", "operator.diagonal must be 'zero' or 'pv'");
  c.op.m = int_at(o, "m", "operator", 0);
  c.op.n = int_at(o, "n", "operator", 0);
  require(c.op.m >= 0 && c.op.n >= 0 && std::max(c.op.m, c.op.n) < c.grid.N, "operator.m and n must lie in [0, N)");
  c.op.saturated = value_at<bool>(o, "saturated", "operator", true);
  c.op.symbol_scale = value_at<double>(o, "symbol_scale", "operator", 1.0);
  if (c.op.type == "kernel" || task == "decompose" || task == "expansion") {
    try {
      const auto k = make_configured_kernel(c);
      for (const auto& [key, v] : c.op.params) {
        (void)v;
        static const std::set<std::string> known{"C0", "Cdelta", "twist", "delta", "axis"};
        require(known.count(key), "unknown operator.params key '" + key + "'");
      }
      (void)k;
    } catch (const UsageError& e) {
      throw ValidationError(std::string("operator.kernel: ") + e.what());
    }
  }
  if (task == "decompose" || task == "expansion")
    require(c.op.type == "kernel", "task " + task + " needs operator.type = kernel");

  const json& t = section(config, "tolerances");
  check_keys(t, "tolerances", keys({"power_tol", "max_iter", "restarts", "identity", "rank_one"}));
  c.norm.tol = value_at<double>(t, "power_tol", "tolerances", 1e-10);
  c.norm.max_iter = int_at(t, "max_iter", "tolerances", 2000);
  c.norm.restarts = int_at(t, "restarts", "tolerances", 3);
  c.identity_tol = value_at<double>(t, "identity", "tolerances", 1e-9);
  c.rank_one_tol = value_at<double>(t, "rank_one", "tolerances", 1e-10);
  require(c.norm.tol > 0 && c.norm.max_iter > 0 && c.norm.restarts > 0, "tolerances must be positive");

  const json& gd = section(config, "goodness");
  check_keys(gd, "goodness", keys({"r", "delta"}));
  c.goodness.r = int_at(gd, "r", "goodness", 4);
  c.goodness.delta = value_at<double>(gd, "delta", "goodness", 1.0);
  c.goodness.validate();

  const json& e = section(config, "expansion");
  check_keys(e, "expansion", keys({"grids"}));
  c.grids = static_cast<std::size_t>(u64_at(e, "grids", "expansion", 64));
  if (task == "expansion") {
    require(c.grid.topology == Topology::Torus, "expansion needs the torus topology");
    require(c.grids >= 2, "expansion.grids must be >= 2");
    truncated_pi_good(c.grid, c.goodness);  // throws when some level has no good cubes
  }

  const json& s = section(config, "slice");
  check_keys(s, "slice", keys({"instances"}));
  c.instances = static_cast<std::size_t>(u64_at(s, "instances", "slice", 10));

  const json& sw = section(config, "sweep");
  check_keys(sw, "sweep", keys({"study", "X", "k", "sigma_samples", "trials", "ainf_directions", "fit"}));
  auto& sc = c.sweep;
  sc.study = value_at<std::string>(sw, "study", "sweep", sc.study);
  require(sc.study == "n_hat" || sc.study == "complexity" || sc.study == "ratios",
          "unknown sweep.study '" + sc.study + "'");
  sc.X = value_at<std::vector<double>>(sw, "X", "sweep", sc.X);
  for (double x : sc.X) require(x >= 1.0, "sweep.X entries must be >= 1");
  sc.k = value_at<std::vector<int>>(sw, "k", "sweep", sc.k);
  for (int k : sc.k) require(k >= 1 && k <= c.grid.N, "sweep.k entries must lie in [1, N]");
  sc.ainf_directions = int_at(sw, "ainf_directions", "sweep", sc.ainf_directions);
  require(sc.ainf_directions >= 1, "sweep.ainf_directions must be >= 1");
  sc.sigma_samples = static_cast<std::size_t>(u64_at(sw, "sigma_samples", "sweep", sc.sigma_samples));
  sc.trials = static_cast<std::size_t>(u64_at(sw, "trials", "sweep", sc.trials));
  require(sc.sigma_samples >= 1 && sc.trials >= 1, "sweep.sigma_samples and sweep.trials must be >= 1");
  sc.fit = value_at<bool>(sw, "fit", "sweep", false);

  c.normalized = config;
  c.normalized["seed"] = c.seed;
  c.normalized["task"] = task;
  return c;
}

RunResult run(const ExperimentConfig& c, int threads, bool fit) {
  const auto start = std::chrono::steady_clock::now();
  RunResult r;
  fit = fit || c.sweep.fit;
  try {
    if (c.task == "a2") task_a2(c, r, threads);
    else if (c.task == "bmo") task_bmo(c, r, threads);
    else if (c.task == "normest") task_normest(c, r, threads);
    else if (c.task == "decompose") task_decompose(c, r, threads);
    else if (c.task == "expansion") task_expansion(c, r, threads);
    else if (c.task == "slice-check") task_slice_check(c, r, threads);
    else if (c.task == "sweep") task_sweep(c, r, threads, fit);
    else task_verify(c, r, threads);
  } catch (const ValidationError& e) {
    r = {kValidation, e.what(), {}, {}};
  } catch (const UsageError& e) {
    r = {kValidation, e.what(), {}, {}};
  } catch (const CapacityError& e) {
    r = {kValidation, e.what(), {}, {}};
  } catch (const NumericalError& e) {
    r.code = kNumerical;
    r.message = e.what();
  }
  if (r.code == kValidation) return r;
  const double wall = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
  json outputs = json::object();
  for (const auto& [name, bytes] : r.files) outputs[name] = hash_hex(bytes);
  const std::string canonical = c.normalized.dump();
  r.manifest = {{"tool", "dmw"},
                {"version", kVersion},
                {"task", c.task},
                {"config", c.normalized},
                {"config_hash", hash_hex(canonical)},
                {"seeds",
                 {{"root", c.seed},
                  {"grid", derive_seed(c.seed, "grid")},
                  {"weight", c.weight.generator.seed},
                  {"operator", derive_seed(c.seed, "operator")},
                  {"sigma", derive_seed(c.seed, "sigma")},
                  {"fields", derive_seed(c.seed, "fields")},
                  {"mc", derive_seed(c.seed, "mc")}}},
                {"fit", fit},
                {"threads", threads},
                {"wall_time_s", wall},
                {"exit_code", r.code},
                {"message", r.message},
                {"outputs", outputs}};
  return r;
}

void write_outputs(const RunResult& r, const std::string& dir) {
  std::filesystem::create_directories(dir);
  for (const auto& [name, bytes] : r.files) {
    std::ofstream out(std::filesystem::path(dir) / name, std::ios::binary);
    out << bytes;
    if (!out) throw Error("cannot write " + name + " in " + dir);
  }
  std::ofstream m(std::filesystem::path(dir) / "manifest.json", std::ios::binary);
  m << r.manifest.dump(2) << "\n";
}

RunResult replay(const json& manifest, int threads) {
  if (!manifest.is_object() || !manifest.contains("task") || !manifest.contains("config") ||
      !manifest.contains("outputs"))
    throw ValidationError("manifest needs task, config and outputs");
  const auto c = parse_config(manifest.at("task").get<std::string>(), manifest.at("config"));
  RunResult r = run(c, threads, manifest.value("fit", false));
  if (r.code == kValidation) return r;
  std::string diff;
  const json& want = manifest.at("outputs");
  for (auto it = want.begin(); it != want.end(); ++it) {
    const auto f = r.files.find(it.key());
    if (f == r.files.end()) diff += " missing:" + it.key();
    else if (hash_hex(f->second) != it->get<std::string>()) diff += " changed:" + it.key();
  }
  for (const auto& [name, bytes] : r.files)
    if (!want.contains(name)) diff += " extra:" + name;
  if (!diff.empty()) {
    r.code = kAssertion;
    r.message = "replay differs:" + diff;
  }
  return r;
}

std::vector<BoundRow> report_bounds(const std::vector<std::string>& texts) {
  const std::string header = "X,Xinf,norm,operator,k,seed,converged";
  struct Series {
    std::vector<double> x, k, y;
  };
  std::map<std::string, Series> series;
  for (std::size_t f = 0; f < texts.size(); ++f) {
    std::istringstream in(texts[f]);
    std::string line;
    if (!std::getline(in, line)) throw ValidationError("curve " + std::to_string(f) + " is empty");
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line != header) throw ValidationError("curve " + std::to_string(f) + " has header '" + line + "'");
    std::size_t lineno = 1;
    while (std::getline(in, line)) {
      ++lineno;
      if (line.empty()) continue;
      std::vector<std::string> cols;
      std::stringstream ls(line);
      std::string col;
      while (std::getline(ls, col, ',')) cols.push_back(col);
      if (cols.size() != 7)
        throw ValidationError("curve " + std::to_string(f) + " line " + std::to_string(lineno) + " has " +
                              std::to_string(cols.size()) + " columns");
      try {
        auto& s = series[cols[3]];
        s.x.push_back(std::stod(cols[0]));
        s.y.push_back(std::stod(cols[2]));
        s.k.push_back(std::stod(cols[4]));
      } catch (const std::exception&) {
        throw ValidationError("curve " + std::to_string(f) + " line " + std::to_string(lineno) + " is not numeric");
      }
    }
  }
  std::vector<BoundRow> out;
  for (const auto& [op, s] : series) {
    BoundRow b;
    b.op = op;
    if (op == "shift") {
      b.variable = "k";
      b.fit = loglog_fit(s.k, s.y);
      b.target_low = 0.0;
      b.target_high = 1.0;
      b.note = "linear in k";
    } else {
      b.variable = "X";
      b.fit = loglog_fit(s.x, s.y);
      b.target_low = 1.0;
      b.target_high = 1.5;
      b.note = "conjectured X; proved X^{3/2} log X";
    }
    out.push_back(b);
  }
  return out;
}

std::string bounds_csv(const std::vector<BoundRow>& rows) {
  Csv out("operator,variable,n,slope,slope_se,ci_low,ci_high,insufficient,target_low,target_high,within,note");
  for (const auto& b : rows) {
    const bool within = !b.fit.insufficient && b.fit.slope <= b.target_high + 1e-12 &&
                        (b.variable == "k" || b.fit.slope >= b.target_low - 1e-12);
    out.row(b.op, b.variable, b.fit.n, b.fit.slope, b.fit.slope_se, b.fit.ci_low(), b.fit.ci_high(),
            b.fit.insufficient, b.target_low, b.target_high, within, "\"" + b.note + "\"");
  }
  return out.str();
}

}  // namespace dmw::harness
