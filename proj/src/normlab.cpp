#include "dmw/normlab.hpp"

#include <cmath>

#include "dmw/linalg.hpp"
#include "dmw/parallel.hpp"
#include "dmw/rng.hpp"

namespace dmw {

namespace {

NormEstimate power_once(const LinearOperator& a, const NormOptions& opts, int restart) {
  Rng rng = make_rng(opts.seed, "power", static_cast<std::uint64_t>(restart));
  Vec x = random_gaussian(static_cast<int>(a.dim()), 1, rng);
  x.normalize();
  NormEstimate est;
  double lambda = -1.0;
  for (int it = 1; it <= opts.max_iter; ++it) {
    const Vec y = a.apply(x);
    const double next = y.squaredNorm();
    const Vec z = a.apply_adjoint(y);
    const double zn = z.norm();
    est.iterations = it;
    if (zn == 0.0) {
      est.value = 0.0;
      est.residual = 0.0;
      est.converged = true;
      est.witness = x;
      return est;
    }
    est.residual = lambda < 0.0 ? 1.0 : std::abs(next - lambda) / next;
    lambda = next;
    if (est.residual < opts.tol) {
      est.converged = true;
      break;
    }
    x = z / zn;
  }
  est.witness = x;
  est.value = a.apply(x).norm();
  return est;
}

std::vector<Mat> sqrt_blocks(const MatrixWeight& w, bool inverse) {
  std::vector<Mat> out(w.cells());
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = inverse ? w.inv_sqrt(i) : w.sqrt(i);
  return out;
}

Vec cell_average(const DyadicSystem& sys, const VectorField& f, std::size_t cube) { return average(sys, f, cube); }

}  // namespace

NormEstimate operator_norm(const LinearOperator& a, const NormOptions& opts) {
  NormEstimate best;
  best.value = -1.0;
  for (int r = 0; r < std::max(1, opts.restarts); ++r) {
    NormEstimate e = power_once(a, opts, r);
    if (e.value > best.value) best = std::move(e);
  }
  return best;
}

NormEstimate weighted_operator_norm(const LinearOperator& t, const MatrixWeight& w, const NormOptions& opts) {
  if (w.cells() != t.cells() || w.d() != t.d()) throw UsageError("weight does not match the operator");
  const ConjugatedOperator a(t, sqrt_blocks(w, false), sqrt_blocks(w, true));
  return operator_norm(a, opts);
}

LinearFit linear_fit(const std::vector<double>& x, const std::vector<double>& y) {
  LinearFit f;
  f.n = std::min(x.size(), y.size());
  if (f.n < 2) return f;
  const double n = static_cast<double>(f.n);
  double mx = 0.0, my = 0.0;
  for (std::size_t i = 0; i < f.n; ++i) {
    mx += x[i];
    my += y[i];
  }
  mx /= n;
  my /= n;
  double sxx = 0.0, sxy = 0.0;
  for (std::size_t i = 0; i < f.n; ++i) {
    sxx += (x[i] - mx) * (x[i] - mx);
    sxy += (x[i] - mx) * (y[i] - my);
  }
  if (sxx <= 0.0) return f;
  f.slope = sxy / sxx;
  f.intercept = my - f.slope * mx;
  if (f.n < 3) return f;
  double sse = 0.0;
  for (std::size_t i = 0; i < f.n; ++i) {
    const double r = y[i] - f.intercept - f.slope * x[i];
    sse += r * r;
  }
  f.slope_se = std::sqrt(sse / (n - 2.0) / sxx);
  f.insufficient = false;
  return f;
}

LinearFit loglog_fit(const std::vector<double>& x, const std::vector<double>& y) {
  std::vector<double> lx, ly;
  for (std::size_t i = 0; i < std::min(x.size(), y.size()); ++i)
    if (x[i] > 0.0 && y[i] > 0.0) {
      lx.push_back(std::log(x[i]));
      ly.push_back(std::log(y[i]));
    }
  return linear_fit(lx, ly);
}

SweepCurve sweep_N_hat(const DyadicSystem& sys, const std::vector<double>& X_targets, const SweepOptions& opts) {
  SweepCurve curve;
  for (std::size_t ti = 0; ti < X_targets.size(); ++ti) {
    const CalibratedWeight cw = calibrate_weight(sys, opts.d, opts.generator, X_targets[ti], true);
    const WeightCache cache(sys, cw.weight, opts.threads);
    std::vector<NormEstimate> est(opts.sigma_samples);
    parallel_for(opts.sigma_samples, opts.threads, [&](std::size_t s) {
      const std::uint64_t idx = ti * opts.sigma_samples + s;
      Rng rng = make_rng(opts.seed, "sigma", idx);
      const HaarOperator t = martingale_operator(sys, random_sigma(cache, rng));
      NormOptions no = opts.norm;
      no.seed = derive_seed(opts.seed, "power", idx);
      est[s] = weighted_operator_norm(t, cw.weight, no);
    });
    CurveRow row;
    row.X = cw.achieved;
    row.Xinf = ainf_characteristic(cache, std::max(opts.ainf_directions, opts.d));
    row.op = "martingale";
    row.k = 1;
    row.seed = opts.seed;
    row.reached = cw.reached;
    for (const auto& e : est) {
      row.norm = std::max(row.norm, e.value);
      row.converged = row.converged && e.converged;
    }
    curve.rows.push_back(row);
  }
  std::vector<double> xs, ys;
  for (const auto& r : curve.rows) {
    xs.push_back(r.X);
    ys.push_back(r.norm);
  }
  curve.fit = loglog_fit(xs, ys);
  return curve;
}

SweepCurve shift_complexity_scaling(const WeightCache& cache, const std::vector<int>& k_values, std::size_t trials,
                                    std::uint64_t seed, const NormOptions& norm, int threads) {
  const DyadicSystem& sys = cache.system();
  const double X = std::pow(a2_characteristic({&cache}).a2_dyadic, 2);
  const double Xinf = ainf_characteristic(cache, 64);
  SweepCurve curve;
  for (int k : k_values) {
    if (k < 1 || k > sys.N()) throw UsageError("complexity k must lie in [1, N]");
    std::vector<NormEstimate> est(trials);
    parallel_for(trials, threads, [&](std::size_t s) {
      const std::uint64_t idx = static_cast<std::uint64_t>(k) * 1000003u + s;
      Rng rng = make_rng(seed, "shift", idx);
      int m = k - 1;
      int n = static_cast<int>(rng() % static_cast<std::uint64_t>(k));
      if (rng() & 1u) std::swap(m, n);
      const HaarShift sh = random_shift(cache, m, n, rng, true);
      NormOptions no = norm;
      no.seed = derive_seed(seed, "power", idx);
      est[s] = weighted_operator_norm(shift_operator(sh), cache.weight(), no);
    });
    CurveRow row;
    row.X = X;
    row.Xinf = Xinf;
    row.op = "shift";
    row.k = k;
    row.seed = seed;
    for (const auto& e : est) {
      row.norm = std::max(row.norm, e.value);
      row.converged = row.converged && e.converged;
    }
    curve.rows.push_back(row);
  }
  std::vector<double> ks, ys;
  for (const auto& r : curve.rows) {
    ks.push_back(r.k);
    ys.push_back(r.norm);
  }
  curve.fit = loglog_fit(ks, ys);
  return curve;
}

double SliceTriangle::slice_sum() const {
  double s = 0.0;
  for (double v : slices) s += v;
  return s;
}

SliceTriangle slice_triangle(const HaarShift& s, const MatrixWeight& w, const NormOptions& norm) {
  SliceTriangle out;
  out.whole = weighted_operator_norm(shift_operator(s), w, norm).value;
  for (int t = 0; t < s.complexity(); ++t)
    out.slices.push_back(weighted_operator_norm(shift_operator(slice(s, t)), w, norm).value);
  return out;
}

SliceIdentity slice_identity_check(const HaarShift& s, const WeightCache& cache, const VectorField& f,
                                   const VectorField& g, int t) {
  const DyadicSystem& sys = s.system();
  const HaarShift st = slice(s, t);
  SliceIdentity out;
  out.lhs = inner(sys, apply_shift(st, f), g);
  const HaarCoefficients fh = analyze(sys, f), gh = analyze(sys, g);
  const int d = s.d();
  Complex rhs = 0.0;
  for (const auto& c : st.coeffs()) {
    const CubeStats& L = cache[c.L];
    const Mat at = L.avg_sqrt * c.A * L.avg_inv_sqrt;
    const Vec fI = fh.slot(haar_index(sys, c.I, c.eps));
    const Vec gJ = gh.slot(haar_index(sys, c.J, c.eps_out));
    for (int i = 0; i < d; ++i) {
      const Vec ei = L.eig.vectors.col(i);
      const Vec v = std::sqrt(L.eig.values(i)) * ei * ei.dot(fI);
      const Vec av = at * v;
      for (int j = 0; j < d; ++j) {
        const Vec ej = L.eig.vectors.col(j);
        const Vec u = ej * (ej.dot(gJ) / std::sqrt(L.eig.values(j)));
        rhs += u.dot(av);  // <A~, u (x) v>_{S2}
      }
    }
  }
  out.rhs = rhs;
  out.gap = std::abs(out.lhs - out.rhs);
  for (std::size_t Lc = 0; Lc < sys.level_offset(sys.N()); ++Lc) {
    const CubeStats& L = cache[Lc];
    for (int i = 0; i < d; ++i)
      for (int j = 0; j < d; ++j) {
        const Mat r = (L.eig.vectors.col(j) / std::sqrt(L.eig.values(j))) *
                      (L.eig.vectors.col(i) * std::sqrt(L.eig.values(i))).adjoint();
        out.rank_one_deviation =
            std::max(out.rank_one_deviation, std::abs(op_norm(L.avg_sqrt * r * L.avg_inv_sqrt) - 1.0));
      }
  }
  return out;
}

LambdaTable lambda_kl_table(const WeightCache& cache, std::size_t I0, int k, const VectorField& f,
                            const VectorField& g, const Mat& sigma) {
  const DyadicSystem& sys = cache.system();
  if (sys.p() != 1) throw UsageError("lambda_kl_table is defined on the line (p = 1)");
  const int l0 = sys.level_of(I0);
  if (k < 1 || l0 + k > sys.N()) throw UsageError("k out of range for the cube");
  const CubeStats& s0 = cache[I0];
  const double sn = op_norm(s0.avg_sqrt * sigma * s0.avg_inv_sqrt);
  if (sn > 1.0 + 1e-9)
    throw ValidationError("sigma violates ||<W>^{1/2} sigma <W>^{-1/2}|| <= 1 on " + sys.cube_label(I0) + " (" +
                          std::to_string(sn) + ")");
  const MatrixWeight& w = cache.weight();
  const int d = f.d;
  LambdaTable out;
  out.k = k;
  const double scale = std::ldexp(1.0, -k);
  const Vec f0 = cell_average(sys, f, I0), g0 = cell_average(sys, g, I0);
  const auto leaves = sys.descendants(I0, k);
  out.lambda = Mat::Zero(static_cast<Eigen::Index>(leaves.size()), static_cast<Eigen::Index>(leaves.size()));
  std::vector<Vec> fk, gl;
  for (auto q : leaves) {
    fk.push_back((cell_average(sys, f, q) - f0) * scale);
    gl.push_back((cell_average(sys, g, q) - g0) * scale);
  }
  for (std::size_t a = 0; a < leaves.size(); ++a)
    for (std::size_t b = 0; b < leaves.size(); ++b) {
      const Complex v = gl[b].dot(sigma * fk[a]);
      out.lambda(static_cast<Eigen::Index>(a), static_cast<Eigen::Index>(b)) = v;
      out.sum_abs += std::abs(v);
    }
  out.lhs12 = sys.volume(l0) * out.sum_abs;

  // Martingale dynamics of the points A_I = (f, F, U, g, G, V) and the telescoped sums.
  struct Point6 {
    Vec f, g;
    double F = 0.0, G = 0.0;
    Mat U, V;
  };
  auto point = [&](std::size_t q) {
    Point6 p;
    p.f = cell_average(sys, f, q);
    p.g = cell_average(sys, g, q);
    const auto cells = sys.cells_of(q);
    for (auto x : cells) {
      p.F += (w.sqrt(x) * f.cell(x)).squaredNorm();
      p.G += (w.inv_sqrt(x) * g.cell(x)).squaredNorm();
    }
    p.F /= static_cast<double>(cells.size());
    p.G /= static_cast<double>(cells.size());
    p.U = cache[q].avg;
    p.V = cache[q].inv_avg;
    return p;
  };
  const HaarCoefficients fh = analyze(sys, f), gh = analyze(sys, g);
  for (int gen = 0; gen < k; ++gen) {
    const auto level = gen == 0 ? std::vector<std::size_t>{I0} : sys.descendants(I0, gen);
    for (auto q : level) {
      const std::size_t plus = sys.child(q, 0), minus = sys.child(q, 1);
      const Point6 P = point(q), A = point(plus), B = point(minus);
      double dev = ((A.f + B.f) / 2 - P.f).cwiseAbs().maxCoeff();
      dev = std::max(dev, ((A.g + B.g) / 2 - P.g).cwiseAbs().maxCoeff());
      dev = std::max(dev, std::abs((A.F + B.F) / 2 - P.F));
      dev = std::max(dev, std::abs((A.G + B.G) / 2 - P.G));
      dev = std::max(dev, ((A.U + B.U) / 2 - P.U).cwiseAbs().maxCoeff());
      dev = std::max(dev, ((A.V + B.V) / 2 - P.V).cwiseAbs().maxCoeff());
      out.dynamics_defect = std::max(out.dynamics_defect, dev);
      const Vec df = A.f - B.f, dg = A.g - B.g;
      out.lhs13 += std::abs(dg.dot(sigma * df)) * sys.volume(sys.level_of(q));
      const std::size_t slot = haar_index(sys, q, 1);
      const Vec fi = fh.slot(slot), gi = gh.slot(slot);
      out.rhs13 += 4.0 * std::abs(gi.dot(sigma * fi));
    }
  }
  (void)d;
  return out;
}

NormEstimate square_function_norm(const WeightCache& cache, const NormOptions& opts) {
  const DyadicSystem& sys = cache.system();
  const int d = cache.weight().d();
  const int nsig = signature_count(sys.p());
  const std::size_t slots = 1 + sys.level_offset(sys.N()) * static_cast<std::size_t>(nsig);
  std::vector<Eigen::Triplet<Complex>> trip;
  for (std::size_t s = 1; s < slots; ++s) {
    const Mat& b = cache[haar_label(sys, s).cube].avg_sqrt;
    for (int r = 0; r < d; ++r)
      for (int c = 0; c < d; ++c)
        trip.emplace_back(static_cast<Eigen::Index>(s) * d + r, static_cast<Eigen::Index>(s) * d + c, b(r, c));
  }
  SparseMat m(static_cast<Eigen::Index>(slots) * d, static_cast<Eigen::Index>(slots) * d);
  m.setFromTriplets(trip.begin(), trip.end());
  const HaarOperator h(sys, d, std::move(m));
  const ConjugatedOperator a(h, {}, sqrt_blocks(cache.weight(), true));
  return operator_norm(a, opts);
}

double maximal_function_ratio(const WeightCache& cache, std::size_t random_trials, std::uint64_t seed) {
  const DyadicSystem& sys = cache.system();
  const MatrixWeight& w = cache.weight();
  const int d = w.d();
  const double vol = sys.cell_volume();
  auto ratio = [&](const VectorField& f) {
    const double den = weighted_norm(sys, f, w);
    if (den == 0.0) return 0.0;
    double num = 0.0;
    for (double v : maximal_function(f, {&cache})) num += v * v * vol;
    return std::sqrt(num) / den;
  };
  double best = 0.0;
  for (std::size_t I = 0; I < sys.cube_count(); ++I) {
    const Eigensystem es = hermitian_eigensystem(cache[I].inv_avg);
    for (int j = 0; j < d; ++j) {
      VectorField f = VectorField::zeros(sys.cell_count(), d);
      for (auto x : sys.cells_of(I)) f.cell(x) = w.inverse(x) * es.vectors.col(j);
      best = std::max(best, ratio(f));
    }
  }
  Rng rng = make_rng(seed, "maximal");
  for (std::size_t t = 0; t < random_trials; ++t)
    best = std::max(best, ratio({d, random_gaussian(static_cast<int>(sys.cell_count()) * d, 1, rng)}));
  return best;
}

std::vector<RatioRow> ratio_curves(const DyadicSystem& sys, const std::vector<double>& X_targets,
                                   const SweepOptions& opts) {
  std::vector<RatioRow> rows(X_targets.size());
  for (std::size_t i = 0; i < X_targets.size(); ++i) {
    const CalibratedWeight cw = calibrate_weight(sys, opts.d, opts.generator, X_targets[i], true);
    const WeightCache cache(sys, cw.weight, opts.threads);
    RatioRow& r = rows[i];
    r.X = cw.achieved;
    r.reached = cw.reached;
    r.Xinf = ainf_characteristic(cache, std::max(opts.ainf_directions, opts.d));
    NormOptions no = opts.norm;
    no.seed = derive_seed(opts.seed, "square", i);
    r.square = square_function_norm(cache, no).value;
    r.maximal = maximal_function_ratio(cache, 4, derive_seed(opts.seed, "maximal", i));
    r.reference = std::sqrt(r.X * r.Xinf);
  }
  return rows;
}

}  // namespace dmw
