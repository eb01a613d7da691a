#include "dmw/weights.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>

#include "dmw/parallel.hpp"

namespace dmw {

namespace {

MatrixField as_field(const std::vector<Mat>& blocks, int d) {
  MatrixField f;
  f.d = d;
  f.blocks = blocks;
  return f;
}

}  // namespace

MatrixWeight::MatrixWeight(int d, std::vector<Mat> blocks) : d_(d), blocks_(std::move(blocks)) {
  if (d < 1) throw ValidationError("weight dimension must be >= 1");
  const std::size_t n = blocks_.size();
  inverse_.resize(n);
  sqrt_.resize(n);
  inv_sqrt_.resize(n);
  for (std::size_t i = 0; i < n; ++i) {
    Mat& b = blocks_[i];
    if (b.rows() != d || b.cols() != d) throw ValidationError("weight block has the wrong shape");
    try {
      validate_spd(b, "weight block");
    } catch (const ValidationError& e) {
      throw ValidationError(std::string(e.what()) + " at cell " + std::to_string(i));
    }
    b = hermitian_part(b);
    Eigen::SelfAdjointEigenSolver<Mat> es(b);
    const Mat& V = es.eigenvectors();
    const Eigen::VectorXd& l = es.eigenvalues();
    inverse_[i] = V * l.cwiseInverse().asDiagonal() * V.adjoint();
    sqrt_[i] = V * l.cwiseSqrt().asDiagonal() * V.adjoint();
    inv_sqrt_[i] = V * l.cwiseSqrt().cwiseInverse().asDiagonal() * V.adjoint();
  }
}

MatrixWeight MatrixWeight::identity(std::size_t cells, int d) {
  return MatrixWeight(d, std::vector<Mat>(cells, Mat::Identity(d, d)));
}

MatrixWeight MatrixWeight::scalar(const std::vector<double>& w) {
  std::vector<Mat> b;
  b.reserve(w.size());
  for (double v : w) b.push_back(Mat::Constant(1, 1, Complex(v, 0.0)));
  return MatrixWeight(1, std::move(b));
}

MatrixWeight MatrixWeight::inverse_weight() const { return MatrixWeight(d_, inverse_); }

MatrixWeight MatrixWeight::scaled(double c) const {
  std::vector<Mat> b = blocks_;
  for (auto& m : b) m *= c;
  return MatrixWeight(d_, std::move(b));
}

WeightCache::WeightCache(const DyadicSystem& sys, const MatrixWeight& w, int threads) : sys_(&sys), w_(w) {
  if (w.cells() != sys.cell_count()) throw UsageError("weight does not match the dyadic system");
  const auto avg = matrix_cube_averages(sys, as_field(w.blocks(), w.d()));
  std::vector<Mat> inv_blocks(w.cells());
  for (std::size_t i = 0; i < w.cells(); ++i) inv_blocks[i] = w.inverse(i);
  const auto inv_avg = matrix_cube_averages(sys, as_field(inv_blocks, w.d()));
  stats_.resize(sys.cube_count());
  parallel_for(sys.cube_count(), threads, [&](std::size_t I) {
    CubeStats& s = stats_[I];
    s.avg = hermitian_part(avg[I]);
    s.inv_avg = hermitian_part(inv_avg[I]);
    s.eig = hermitian_eigensystem(s.avg);
    const Mat& V = s.eig.vectors;
    const Eigen::VectorXd r = s.eig.values.cwiseSqrt();
    s.avg_sqrt = V * r.asDiagonal() * V.adjoint();
    s.avg_inv_sqrt = V * r.cwiseInverse().asDiagonal() * V.adjoint();
    Eigen::SelfAdjointEigenSolver<Mat> ei(s.inv_avg);
    const Eigen::VectorXd ri = ei.eigenvalues().cwiseSqrt();
    s.inv_avg_sqrt = ei.eigenvectors() * ri.asDiagonal() * ei.eigenvectors().adjoint();
    s.inv_avg_inv_sqrt = ei.eigenvectors() * ri.cwiseInverse().asDiagonal() * ei.eigenvectors().adjoint();
    s.a2 = op_norm(s.avg_sqrt * s.inv_avg_sqrt);
  });
}

WeightCharacteristics a2_characteristic(const std::vector<const WeightCache*>& caches) {
  if (caches.empty()) throw UsageError("a2_characteristic needs at least one system");
  WeightCharacteristics out;
  out.a2 = 0.0;
  out.a2_dyadic = 0.0;
  for (std::size_t k = 0; k < caches.size(); ++k) {
    const WeightCache& c = *caches[k];
    for (std::size_t I = 0; I < c.size(); ++I) {
      const double v = c[I].a2;
      if (k == 0) out.a2_dyadic = std::max(out.a2_dyadic, v);
      if (v > out.a2) {
        out.a2 = v;
        out.argmax_system = k;
        out.argmax_cube = I;
      }
    }
  }
  out.argmax_label = caches[out.argmax_system]->system().cube_label(out.argmax_cube);
  return out;
}

WeightCharacteristics a2_characteristic(const MatrixWeight& w, const std::vector<const DyadicSystem*>& systems) {
  std::vector<WeightCache> caches;
  caches.reserve(systems.size());
  for (const auto* s : systems) caches.emplace_back(*s, w);
  std::vector<const WeightCache*> ptrs;
  for (const auto& c : caches) ptrs.push_back(&c);
  return a2_characteristic(ptrs);
}

std::vector<Vec> sphere_directions(int d, int count) {
  std::vector<Vec> out;
  out.reserve(static_cast<std::size_t>(std::max(count, 0)));
  if (d == 1) {
    for (int n = 0; n < count; ++n) out.push_back(Vec::Ones(1));
    return out;
  }
  auto radical_inverse = [](int n, int base) {
    double inv = 1.0 / base, f = inv, r = 0.0;
    while (n > 0) {
      r += f * (n % base);
      n /= base;
      f *= inv;
    }
    return r;
  };
  Rng rng(0x5eedD1A5ULL);
  std::normal_distribution<double> g;
  const double golden = (std::sqrt(5.0) - 1.0) / 2.0;
  for (int n = 0; n < count; ++n) {
    Vec v = Vec::Zero(d);
    if (d == 2) {
      const double t = std::numbers::pi * std::fmod(n * golden, 1.0);
      v << std::cos(t), std::sin(t);
    } else if (d == 3) {
      const double z = 1.0 - 2.0 * radical_inverse(n + 1, 2);
      const double phi = 2.0 * std::numbers::pi * radical_inverse(n + 1, 3);
      const double s = std::sqrt(std::max(0.0, 1.0 - z * z));
      v << s * std::cos(phi), s * std::sin(phi), z;
    } else {
      for (int i = 0; i < d; ++i) v(i) = g(rng);
      v.normalize();
    }
    out.push_back(v);
  }
  return out;
}

namespace {

// ancestors[cell * (N+1) + k] = level-k cube containing the cell.
std::vector<std::size_t> ancestor_table(const DyadicSystem& sys) {
  const int N = sys.N();
  std::vector<std::size_t> t(sys.cell_count() * static_cast<std::size_t>(N + 1));
  for (std::size_t c = 0; c < sys.cell_count(); ++c) {
    std::size_t q = sys.finest_cube_of_cell(c);
    for (int k = N; k >= 0; --k) {
      t[c * (N + 1) + k] = q;
      q = sys.parent(q);
    }
  }
  return t;
}

double fujii_wilson_with(const DyadicSystem& sys, const std::vector<std::size_t>& anc, const std::vector<double>& w) {
  const int N = sys.N();
  Vec cells(static_cast<Eigen::Index>(w.size()));
  for (std::size_t i = 0; i < w.size(); ++i) cells(static_cast<Eigen::Index>(i)) = w[i];
  const Vec avg = cube_averages_raw(sys, cells, 1);
  std::vector<double> acc(sys.cube_count(), 0.0);
  for (std::size_t c = 0; c < sys.cell_count(); ++c) {
    double run = 0.0;
    for (int k = N; k >= 0; --k) {
      const std::size_t q = anc[c * (N + 1) + k];
      run = std::max(run, avg(static_cast<Eigen::Index>(q)).real());
      acc[q] += run;
    }
  }
  double best = 0.0;
  for (std::size_t I = 0; I < sys.cube_count(); ++I) {
    const double cells_in = std::ldexp(1.0, (N - sys.level_of(I)) * sys.p());
    best = std::max(best, acc[I] / (avg(static_cast<Eigen::Index>(I)).real() * cells_in));
  }
  return best;
}

std::vector<double> directional(const MatrixWeight& w, const Vec& e) {
  std::vector<double> out(w.cells());
  for (std::size_t i = 0; i < w.cells(); ++i) out[i] = e.dot(w.block(i) * e).real();
  return out;
}

std::vector<Vec> with_phases(const std::vector<Vec>& base) {
  std::vector<Vec> out;
  for (const Vec& v : base) {
    if (v.size() == 1) {
      out.push_back(v);
      continue;
    }
    for (int j = 0; j < 8; ++j) {
      Vec u = v;
      u(u.size() - 1) *= std::polar(1.0, std::numbers::pi * j / 4.0);
      out.push_back(u);
    }
  }
  return out;
}

}  // namespace

double fujii_wilson(const DyadicSystem& sys, const std::vector<double>& w) {
  if (w.size() != sys.cell_count()) throw UsageError("scalar weight does not match the system");
  return fujii_wilson_with(sys, ancestor_table(sys), w);
}

double ainf_characteristic(const WeightCache& cache, int directions) {
  const MatrixWeight& w = cache.weight();
  const DyadicSystem& sys = cache.system();
  if (directions < w.d()) throw ValidationError("A_inf needs at least d directions");
  const auto anc = ancestor_table(sys);
  double best = 0.0;
  for (const Vec& e : with_phases(sphere_directions(w.d(), directions)))
    best = std::max(best, fujii_wilson_with(sys, anc, directional(w, e)));
  if (w.d() > 1)
    for (std::size_t I = 0; I < cache.size(); ++I)
      for (Eigen::Index j = 0; j < w.d(); ++j)
        best = std::max(best, fujii_wilson_with(sys, anc, directional(w, cache[I].eig.vectors.col(j))));
  return best;
}

double ainf_characteristic(const MatrixWeight& w, int directions, const DyadicSystem& sys) {
  const WeightCache cache(sys, w);
  return ainf_characteristic(cache, directions);
}

AinfConvergence ainf_convergence(const WeightCache& cache, int max_directions) {
  AinfConvergence out;
  const MatrixWeight& w = cache.weight();
  const auto anc = ancestor_table(cache.system());
  const auto dirs = with_phases(sphere_directions(w.d(), max_directions));
  const std::size_t per = w.d() > 1 ? 8 : 1;
  std::vector<int> counts;
  for (int n = 1; n < max_directions; n *= 2) counts.push_back(n);
  counts.push_back(max_directions);
  double best = 0.0;
  std::size_t done = 0;
  for (int n : counts) {
    for (; done < static_cast<std::size_t>(n) * per; ++done)
      best = std::max(best, fujii_wilson_with(cache.system(), anc, directional(w, dirs[done])));
    out.counts.push_back(n);
    out.sampled.push_back(best);
  }
  out.with_eigenvectors = std::max(best, ainf_characteristic(cache, std::max(max_directions, w.d())));
  return out;
}

double weighted_norm(const DyadicSystem& sys, const VectorField& f, const MatrixWeight& w) {
  if (f.d != w.d() || f.cells() != w.cells()) throw UsageError("field and weight do not match");
  double s = 0.0;
  for (std::size_t i = 0; i < f.cells(); ++i) s += f.cell(i).dot(w.block(i) * f.cell(i)).real();
  return std::sqrt(std::max(0.0, s * sys.cell_volume()));
}

BmoSymbol BmoSymbol::from_field(const DyadicSystem& sys, MatrixField b) {
  BmoSymbol s;
  s.haar = analyze_matrix(sys, b);
  s.blocks = std::move(b);
  return s;
}

BmoSymbol BmoSymbol::from_haar(const DyadicSystem& sys, MatrixHaar h) {
  BmoSymbol s;
  s.blocks = synthesize_matrix(sys, h);
  s.haar = std::move(h);
  return s;
}

BmoNorms bmo_w_norm(const BmoSymbol& b, const WeightCache& cache) {
  const DyadicSystem& sys = cache.system();
  const int N = sys.N();
  const int nsig = signature_count(sys.p());
  std::vector<double> acc(sys.cube_count(), 0.0);
  for (int k = N - 1; k >= 0; --k)
    for (std::size_t I = sys.level_offset(k); I < sys.level_offset(k + 1); ++I) {
      double s = 0.0;
      for (int e = 1; e <= nsig; ++e) {
        const Mat& B = b.haar.blocks[1 + I * nsig + (e - 1)];
        s += op_norm(cache[I].avg_sqrt * B.adjoint() * B * cache[I].avg_inv_sqrt);
      }
      for (unsigned c = 0; c < static_cast<unsigned>(sys.children_per_cube()); ++c) s += acc[sys.child(I, c)];
      acc[I] = s;
    }
  BmoNorms out;
  double best = 0.0;
  for (std::size_t J = 0; J < sys.cube_count(); ++J) {
    const double v = acc[J] / sys.volume(sys.level_of(J));
    if (v > best) {
      best = v;
      out.carleson_argmax = J;
    }
  }
  out.carleson = std::sqrt(best);
  out.oscillation = bmo_oscillation(b.blocks, cache, &out.oscillation_argmax);
  return out;
}

double bmo_oscillation(const MatrixField& b, const WeightCache& cache, std::size_t* argmax) {
  const DyadicSystem& sys = cache.system();
  const MatrixWeight& w = cache.weight();
  const auto avg = matrix_cube_averages(sys, b);
  double best = 0.0;
  std::size_t arg = 0;
  for (std::size_t I = 0; I < sys.level_offset(sys.N()); ++I) {
    double s = 0.0;
    for (std::size_t c : sys.cells_of(I)) {
      const double n = op_norm(w.sqrt(c) * (b.blocks[c] - avg[I]) * cache[I].avg_inv_sqrt);
      s += n * n;
    }
    s *= sys.cell_volume() / sys.volume(sys.level_of(I));
    if (s > best) {
      best = s;
      arg = I;
    }
  }
  if (argmax) *argmax = arg;
  return std::sqrt(best);
}

namespace {

Mat rotation(int d, double theta) {
  Mat u = Mat::Identity(d, d);
  for (int a = 0; a + 1 < d; a += 2) {
    u(a, a) = std::cos(theta);
    u(a, a + 1) = -std::sin(theta);
    u(a + 1, a) = std::sin(theta);
    u(a + 1, a + 1) = std::cos(theta);
  }
  return u;
}

Eigen::VectorXd spread(int d) {
  Eigen::VectorXd k(d);
  for (int j = 0; j < d; ++j) k(j) = d == 1 ? 1.0 : 1.0 - 2.0 * j / (d - 1);
  return k;
}

double torus_distance(const std::array<double, 3>& x, const std::array<double, 3>& y, int p) {
  double s = 0.0;
  for (int a = 0; a < p; ++a) {
    double t = std::fabs(x[a] - y[a]);
    t = std::min(t, 1.0 - t);
    s += t * t;
  }
  return std::sqrt(s);
}

}  // namespace

MatrixWeight generate_weight(const DyadicSystem& sys, int d, const WeightGenerator& gen) {
  const std::size_t n = sys.cell_count();
  std::vector<Mat> blocks(n);
  const double two_pi = 2.0 * std::numbers::pi;
  if (gen.kind == "identity") {
    blocks.assign(n, Mat::Identity(d, d));
  } else if (gen.kind == "constant") {
    Rng rng(gen.seed);
    const Mat q = random_unitary(d, rng);
    const Eigen::VectorXd l = (gen.strength * spread(d)).array().exp();
    blocks.assign(n, hermitian_part(q * l.asDiagonal() * q.adjoint()));
  } else if (gen.kind == "power") {
    for (std::size_t c = 0; c < n; ++c) {
      const double r = torus_distance(sys.cell_center(c), gen.center, sys.p());
      blocks[c] = Mat::Identity(d, d) * std::pow(r, gen.strength);
    }
  } else if (gen.kind == "rotating") {
    const Eigen::VectorXd k = spread(d);
    for (std::size_t c = 0; c < n; ++c) {
      const double x = sys.cell_center(c)[0];
      const Mat u = rotation(d, two_pi * gen.twist * x);
      const Eigen::VectorXd l = (gen.strength * std::cos(two_pi * x) * k).array().exp();
      blocks[c] = hermitian_part(u * l.asDiagonal() * u.adjoint());
    }
  } else if (gen.kind == "loghermitian") {
    Rng rng(gen.seed);
    std::vector<Mat> A, B;
    std::vector<std::array<int, 3>> freq;
    for (int m = 1; m <= gen.modes; ++m) {
      Mat a = d == 1 ? Mat::Constant(1, 1, std::normal_distribution<double>()(rng)) : random_hermitian(d, rng);
      Mat b = d == 1 ? Mat::Constant(1, 1, std::normal_distribution<double>()(rng)) : random_hermitian(d, rng);
      a /= std::max(1e-12, op_norm(a)) * m;
      b /= std::max(1e-12, op_norm(b)) * m;
      std::array<int, 3> k{0, 0, 0};
      std::uniform_int_distribution<int> pick(-m, m);
      while (k[0] == 0 && k[1] == 0 && k[2] == 0)
        for (int a2 = 0; a2 < sys.p(); ++a2) k[a2] = pick(rng);
      A.push_back(a);
      B.push_back(b);
      freq.push_back(k);
    }
    for (std::size_t c = 0; c < n; ++c) {
      const auto x = sys.cell_center(c);
      Mat h = Mat::Zero(d, d);
      for (std::size_t m = 0; m < A.size(); ++m) {
        double ph = 0.0;
        for (int a = 0; a < sys.p(); ++a) ph += freq[m][a] * x[a];
        h += std::cos(two_pi * ph) * A[m] + std::sin(two_pi * ph) * B[m];
      }
      blocks[c] = hermitian_part(expm_hermitian(gen.strength * h));
    }
  } else {
    throw ValidationError("unknown weight kind '" + gen.kind + "'");
  }
  return MatrixWeight(d, std::move(blocks));
}

CalibratedWeight calibrate_weight(const DyadicSystem& sys, int d, WeightGenerator gen, double target, bool squared,
                                  double rel_tol) {
  auto measure = [&](double s) {
    gen.strength = s;
    MatrixWeight w = generate_weight(sys, d, gen);
    const WeightCache cache(sys, w);
    const double a = a2_characteristic({&cache}).a2_dyadic;
    return std::pair{squared ? a * a : a, std::move(w)};
  };
  CalibratedWeight out;
  if (gen.kind == "identity" || gen.kind == "constant" || target <= 1.0) {
    auto [v, w] = measure(gen.kind == "constant" ? gen.strength : 0.0);
    out.weight = std::move(w);
    out.generator = gen;
    out.achieved = v;
    out.reached = std::fabs(v / target - 1.0) <= rel_tol;
    return out;
  }
  const double cap = gen.kind == "power" ? 0.999 * sys.p() : 64.0;
  double lo = 0.0, hi = std::min(1.0, cap);
  while (measure(hi).first < target && hi < cap) hi = std::min(cap, hi * 2.0);
  for (int it = 0; it < 80; ++it) {
    const double mid = 0.5 * (lo + hi);
    const double v = measure(mid).first;
    if (std::fabs(v / target - 1.0) <= 0.05 * rel_tol) {
      lo = hi = mid;
      break;
    }
    (v < target ? lo : hi) = mid;
  }
  auto [v, w] = measure(0.5 * (lo + hi));
  out.weight = std::move(w);
  out.generator = gen;
  out.achieved = v;
  out.reached = std::fabs(v / target - 1.0) <= rel_tol;
  return out;
}

}  // namespace dmw
