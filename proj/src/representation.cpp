#include "dmw/representation.hpp"

#include <cmath>

#include "dmw/linalg.hpp"
#include "dmw/parallel.hpp"

namespace dmw {

namespace {

std::size_t cancellative_top(const DyadicSystem& sys) { return sys.level_offset(sys.N()); }

std::vector<char> goodness_table(const DyadicSystem& sys, const GoodnessParams& params) {
  std::vector<char> good(cancellative_top(sys));
  for (std::size_t c = 0; c < good.size(); ++c) good[c] = sys.is_good(c, params);
  return good;
}

Point center_of(const DyadicSystem& sys, std::size_t cube) {
  Point c{0.0, 0.0, 0.0};
  const double half = 0.5 * sys.side(sys.level_of(cube));
  for (int a = 0; a < sys.p(); ++a) {
    c[a] = static_cast<double>(sys.corner(cube)[a]) * sys.side(sys.N()) + half;
    if (sys.topology() == Topology::Torus) c[a] -= std::floor(c[a]);
  }
  return c;
}

}  // namespace

const char* to_string(GammaCase c) {
  switch (c) {
    case GammaCase::In: return "in";
    case GammaCase::Equal: return "equal";
    case GammaCase::Out: return "out";
    case GammaCase::Near: return "near";
  }
  return "?";
}

DiscreteOperator form_tilde(const DiscreteOperator& t, const DyadicSystem& sys) {
  if (t.cells() != sys.cell_count()) throw UsageError("operator does not match the system");
  const T1Coefficients c = t1_coefficients(t, sys);
  const DiscreteOperator pi = assemble_dense(ParaproductOperator(sys, c.t1_haar));
  const DiscreteOperator pistar = assemble_dense(ParaproductOperator(sys, c.tstar1_haar, true));
  return DiscreteOperator(t.cells(), t.d(), t.matrix() - pi.matrix() - pistar.matrix(), Provenance::Assembled);
}

double tilde_mean_defect(const DiscreteOperator& t, const DyadicSystem& sys) {
  const int d = t.d();
  const std::size_t n = sys.cell_count();
  // Row sums over x of T(x, y): s(y) is d x d.
  std::vector<Mat> s(n, Mat::Zero(d, d));
  for (std::size_t x = 0; x < n; ++x)
    for (std::size_t y = 0; y < n; ++y) s[y] += t.block(x, y);
  double worst = 0.0;
  const double vol = sys.cell_volume();
  for (std::size_t cube = 0; cube < cancellative_top(sys); ++cube)
    for (Signature e = 1; e <= static_cast<Signature>(signature_count(sys.p())); ++e) {
      const auto h = haar_function(sys, cube, e);
      Mat acc = Mat::Zero(d, d);
      for (auto y : sys.cells_of(cube)) acc += s[y] * h[y];
      worst = std::max(worst, acc.cwiseAbs().maxCoeff() * vol);
    }
  return worst;
}

GammaCase classify_gamma(const DyadicSystem& sys, std::size_t small, std::size_t large, double gamma) {
  if (small == large) return GammaCase::Equal;
  if (sys.contains(large, small)) return GammaCase::In;
  const double ls = sys.side(sys.level_of(small)), lb = sys.side(sys.level_of(large));
  const double dist = sys.distance(small, large);
  if (dist > std::pow(ls, gamma) * std::pow(lb, 1.0 - gamma)) return GammaCase::Out;
  return GammaCase::Near;
}

std::vector<ShiftBundle> extract_shifts(const DiscreteOperator& tilde, const WeightCache& cache,
                                        const ExtractOptions& opts) {
  const DyadicSystem& sys = cache.system();
  const int d = tilde.d(), p = sys.p(), N = sys.N();
  const int nsig = signature_count(p);
  const double gamma = opts.goodness.gamma(p);
  const Mat hat = haar_matrix(sys, tilde);
  const auto good = goodness_table(sys, opts.goodness);
  std::vector<ShiftBundle> bundles(static_cast<std::size_t>(N * N));
  for (int m = 0; m < N; ++m)
    for (int n = 0; n < N; ++n) {
      auto& b = bundles[static_cast<std::size_t>(m * N + n)];
      b.m = m;
      b.n = n;
    }
  const std::size_t top = cancellative_top(sys);
  for (std::size_t I = 0; I < top; ++I)
    for (std::size_t J = 0; J < top; ++J) {
      const int kI = sys.level_of(I), kJ = sys.level_of(J);
      const bool i_smaller = kI >= kJ;
      const std::size_t small = i_smaller ? I : J, large = i_smaller ? J : I;
      if (opts.filter_good && !good[small]) continue;
      const auto L = sys.minimal_common_ancestor(I, J);
      if (!L) continue;
      const int kL = sys.level_of(*L);
      const int m = kI - kL, n = kJ - kL;
      const GammaCase gc = classify_gamma(sys, small, large, gamma);
      const CubeStats& st = cache[*L];
      const double scale = sys.volume(kL) / std::sqrt(sys.volume(kI) * sys.volume(kJ));
      auto& b = bundles[static_cast<std::size_t>(m * N + n)];
      for (Signature e = 1; e <= static_cast<Signature>(nsig); ++e)
        for (Signature eo = 1; eo <= static_cast<Signature>(nsig); ++eo) {
          TildeCoefficient c;
          c.I = I;
          c.J = J;
          c.L = *L;
          c.m = m;
          c.n = n;
          c.eps = e;
          c.eps_out = eo;
          c.raw = haar_block(hat, d, haar_index(sys, J, eo), haar_index(sys, I, e));
          c.conjugated = st.avg_sqrt * c.raw * st.avg_inv_sqrt;
          c.gamma_case = gc;
          c.smaller = i_smaller ? Smaller::I : Smaller::J;
          b.tau = std::max(b.tau, op_norm(c.conjugated) * scale);
          ++b.case_histogram[static_cast<std::size_t>(gc)];
          b.coeffs.push_back(std::move(c));
        }
    }
  std::vector<ShiftBundle> out;
  for (auto& b : bundles) {
    if (b.coeffs.empty()) continue;
    b.decay_fit = b.tau * std::pow(2.0, (b.m + b.n) * opts.delta / 4.0);
    const double div = b.tau > 0.0 ? b.tau : 1.0;
    std::vector<ShiftCoefficient> sc;
    sc.reserve(b.coeffs.size());
    for (const auto& c : b.coeffs) sc.push_back({c.L, c.I, c.J, c.eps, c.eps_out, c.raw / div});
    b.shift.emplace(sys, b.m, b.n, d, std::move(sc), &cache);
    out.push_back(std::move(b));
  }
  return out;
}

Complex bundles_pairing(const std::vector<ShiftBundle>& bundles, const VectorField& f, const VectorField& g) {
  Complex total = 0.0;
  for (const auto& b : bundles) {
    if (!b.shift) continue;
    const double s = b.tau > 0.0 ? b.tau : 1.0;
    total += s * inner(b.shift->system(), apply_shift(*b.shift, f), g);
  }
  return total;
}

CaseReport verify_lemma_envelope(const std::vector<ShiftBundle>& bundles, const DyadicSystem& sys, double delta) {
  CaseReport rep;
  rep.N = sys.N();
  const int p = sys.p();
  for (std::size_t i = 0; i < 4; ++i) {
    rep.rows[i].gamma_case = static_cast<GammaCase>(i);
    rep.rows[i].N = rep.N;
  }
  for (const auto& b : bundles)
    for (const auto& c : b.coeffs) {
      const int kI = sys.level_of(c.I), kJ = sys.level_of(c.J), kL = sys.level_of(c.L);
      const double norm = op_norm(c.conjugated);
      const double lI = sys.side(kI), lJ = sys.side(kJ);
      const double D = sys.long_distance(c.I, c.J);
      const double first = norm * std::pow(D, p + delta) / std::pow(lI * lJ, (p + delta) / 2.0);
      const double second = norm * sys.volume(kL) / std::sqrt(sys.volume(kI) * sys.volume(kJ)) *
                            std::pow(2.0, (c.m + c.n) * delta / 4.0);
      auto& row = rep.rows[static_cast<std::size_t>(c.gamma_case)];
      ++row.count;
      row.max_first = std::max(row.max_first, first);
      row.max_second = std::max(row.max_second, second);
    }
  return rep;
}

bool envelope_trend_ok(const CaseReport& coarse, const CaseReport& fine, double tol) {
  for (std::size_t i = 0; i < 4; ++i) {
    if (coarse.rows[i].count == 0 || fine.rows[i].count == 0) continue;
    if (fine.rows[i].max_first > coarse.rows[i].max_first * (1.0 + tol)) return false;
    if (fine.rows[i].max_second > coarse.rows[i].max_second * (1.0 + tol)) return false;
  }
  return true;
}

double gamma_out_chain(const KernelSpec& k, const WeightCache& cache, std::size_t I, std::size_t J, std::size_t L) {
  const DyadicSystem& sys = cache.system();
  const CubeStats& st = cache[L];
  const Point cI = center_of(sys, I);
  const double vol = sys.cell_volume();
  const double hI = 1.0 / std::sqrt(sys.volume(sys.level_of(I)));
  const double hJ = 1.0 / std::sqrt(sys.volume(sys.level_of(J)));
  double acc = 0.0;
  for (auto x : sys.cells_of(J)) {
    const Point px = sys.cell_center(x);
    const Mat kc = k(px, cI);
    for (auto y : sys.cells_of(I))
      acc += op_norm(st.avg_sqrt * (k(px, sys.cell_center(y)) - kc) * st.avg_inv_sqrt);
  }
  return acc * hI * hJ * vol * vol;
}

std::vector<double> truncated_pi_good(const GridSpec& spec, const GoodnessParams& params) {
  auto pi = level_good_fraction(spec, params);
  for (int k = 0; k < spec.N; ++k)
    if (pi[static_cast<std::size_t>(k)] <= 0.0)
      throw ValidationError("no good cubes at level " + std::to_string(k) + "; r is too small for N = " +
                            std::to_string(spec.N));
  return pi;
}

Complex expansion_pairing(const DyadicSystem& sys, const DiscreteOperator& t, const VectorField& f,
                          const VectorField& g, const GoodnessParams& params, const std::vector<double>& pi) {
  const int d = t.d(), N = sys.N();
  const HaarCoefficients fh = analyze(sys, f), gh = analyze(sys, g);
  const std::size_t slots = fh.size();
  const bool filter = !pi.empty();
  const auto good = filter ? goodness_table(sys, params) : std::vector<char>{};
  // Level-k Haar components, plain and weighted by 1/pi(k) on good cubes (0 on bad ones).
  // The mean slot sits at level 0 with weight 1.
  const Eigen::Index rows = static_cast<Eigen::Index>(slots) * d;
  Mat fc = Mat::Zero(rows, N), fw = Mat::Zero(rows, N), gc = Mat::Zero(rows, N), gw = Mat::Zero(rows, N);
  for (std::size_t s = 0; s < slots; ++s) {
    int k = 0;
    double w = 1.0;
    if (s > 0) {
      const HaarLabel lab = haar_label(sys, s);
      k = sys.level_of(lab.cube);
      if (filter) w = good[lab.cube] ? 1.0 / pi[static_cast<std::size_t>(k)] : 0.0;
    }
    const auto seg = static_cast<Eigen::Index>(s) * d;
    fc.block(seg, k, d, 1) = fh.slot(s);
    gc.block(seg, k, d, 1) = gh.slot(s);
    fw.block(seg, k, d, 1) = w * fh.slot(s);
    gw.block(seg, k, d, 1) = w * gh.slot(s);
  }
  auto synth = [&](const Mat& c) {
    Mat out(static_cast<Eigen::Index>(sys.cell_count()) * d, N);
    for (int k = 0; k < N; ++k) out.col(k) = synthesize_raw(sys, c.col(k), d);
    return out;
  };
  const Mat F = synth(fc), Fw = synth(fw), G = synth(gc), Gw = synth(gw);
  const Mat TF = t.matrix() * F;              // T f_j
  const Mat TsG = t.matrix().adjoint() * G;   // T^* g_j
  // Pairs with level(I) >= level(J) keep the weight of I, the rest keep that of J.
  Complex total = 0.0;
  Vec acc_g = Vec::Zero(F.rows()), acc_f = Vec::Zero(F.rows());
  for (int k = 0; k < N; ++k) {
    acc_g += TsG.col(k);
    total += acc_g.dot(Fw.col(k));
    total += Gw.col(k).dot(acc_f);
    acc_f += TF.col(k);
  }
  return total * sys.cell_volume();
}

ExpansionResult randomized_expansion(const DiscreteOperator& t, const VectorField& f, const VectorField& g,
                                     const GridSpec& spec, std::size_t grids, std::uint64_t seed,
                                     const GoodnessParams& params, int threads) {
  if (spec.topology != Topology::Torus) throw UsageError("the randomized expansion needs the torus");
  if (grids < 2) throw UsageError("at least two grids are needed for an interval");
  ExpansionResult res;
  res.grids = grids;
  res.pi_good = truncated_pi_good(spec, params);
  const DyadicSystem base(spec);
  res.exact = inner(base, t(f), g);
  res.samples.assign(grids, Complex(0.0));
  parallel_for(grids, threads, [&](std::size_t s) {
    const DyadicSystem sys(spec, RandomShift::sample(spec.p, spec.N, derive_seed(seed, "grid", s)));
    res.samples[s] = expansion_pairing(sys, t, f, g, params, res.pi_good);
  });
  Complex mean = 0.0;
  for (auto v : res.samples) mean += v;
  mean /= static_cast<double>(grids);
  double vr = 0.0, vi = 0.0;
  for (auto v : res.samples) {
    vr += std::norm(v.real() - mean.real());
    vi += std::norm(v.imag() - mean.imag());
  }
  const double n = static_cast<double>(grids);
  res.estimate = mean;
  res.ci_re = 1.959963984540054 * std::sqrt(vr / (n - 1.0) / n);
  res.ci_im = 1.959963984540054 * std::sqrt(vi / (n - 1.0) / n);
  return res;
}

BmoExtraction extract_bmo_from_T(const DiscreteOperator& t, const WeightCache& cache,
                                 const WeightCache& inverse_cache) {
  const T1Coefficients c = t1_coefficients(t, cache.system());
  BmoExtraction out;
  out.t1 = bmo_oscillation(c.t1, cache, &out.t1_argmax);
  out.tstar1 = bmo_oscillation(c.tstar1, inverse_cache, &out.tstar1_argmax);
  return out;
}

HaarOperator ptilde_operator(const DyadicSystem& sys, int d, std::size_t cube, Signature eps) {
  const int lvl = sys.level_of(cube);
  if (lvl >= sys.N()) throw ResolutionError("finest cubes carry no Haar function");
  const std::size_t slots = 1 + cancellative_top(sys) * static_cast<std::size_t>(signature_count(sys.p()));
  const double amp = 1.0 / std::sqrt(sys.volume(lvl));
  std::vector<Eigen::Triplet<Complex>> trip;
  auto put = [&](std::size_t slot, double v) {
    for (int a = 0; a < d; ++a) {
      const auto i = static_cast<Eigen::Index>(slot) * d + a;
      trip.emplace_back(i, i, v);
    }
  };
  put(haar_index(sys, cube, eps), 1.0);
  for (int g = 1; lvl + g < sys.N(); ++g)
    for (auto J : sys.descendants(cube, g)) {
      const std::size_t child = sys.ancestor(J, lvl + 1);
      const double avg = haar_sign(eps, sys.child_position(child)) * amp;
      for (Signature e = 1; e <= static_cast<Signature>(signature_count(sys.p())); ++e) put(haar_index(sys, J, e), avg);
    }
  SparseMat s(static_cast<Eigen::Index>(slots) * d, static_cast<Eigen::Index>(slots) * d);
  s.setFromTriplets(trip.begin(), trip.end());
  return HaarOperator(sys, d, std::move(s));
}

}  // namespace dmw
