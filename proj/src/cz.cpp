#include "dmw/cz.hpp"

#include <cmath>
#include <numbers>

#include "dmw/linalg.hpp"
#include "dmw/rng.hpp"

namespace dmw {

namespace {

constexpr double kPi = std::numbers::pi;
constexpr double kPass = 1.0 + 1e-9;

double unit(Rng& rng) { return static_cast<double>(rng() >> 11) * 0x1.0p-53; }

double wrap(double t) { return t - std::floor(t); }

// Minimal-image difference on the torus, plain difference otherwise.
double axis_diff(double x, double y, Topology t) {
  double d = x - y;
  if (t == Topology::Torus) d -= std::round(d);
  return d;
}

double param(const std::map<std::string, double>& m, const std::string& key, double fallback) {
  auto it = m.find(key);
  return it == m.end() ? fallback : it->second;
}

Mat rotation(int d, double angle) {
  Mat u = Mat::Identity(d, d);
  const double c = std::cos(angle), s = std::sin(angle);
  for (int a = 0; a + 1 < d; a += 2) {
    u(a, a) = c;
    u(a, a + 1) = -s;
    u(a + 1, a) = s;
    u(a + 1, a + 1) = c;
  }
  return u;
}

double torus_hilbert(double t) { return kPi / std::tan(kPi * t); }

double cutoff(double r) {
  if (r <= 0.25) return 1.0;
  if (r >= 0.5) return 0.0;
  const double c = std::cos(2.0 * kPi * (r - 0.25));
  return c * c;
}

Point cube_center(const DyadicSystem& sys, std::size_t cube) {
  Point c{0.0, 0.0, 0.0};
  const double unit_len = sys.side(sys.N());
  const double half = 0.5 * sys.side(sys.level_of(cube));
  for (int a = 0; a < sys.p(); ++a) {
    c[a] = static_cast<double>(sys.corner(cube)[a]) * unit_len + half;
    if (sys.topology() == Topology::Torus) c[a] = wrap(c[a]);
  }
  return c;
}

}  // namespace

double point_distance(const Point& x, const Point& y, int p, Topology t) {
  double s = 0.0;
  for (int a = 0; a < p; ++a) {
    const double g = axis_diff(x[a], y[a], t);
    s += g * g;
  }
  return std::sqrt(s);
}

KernelSpec make_kernel(const std::string& kind, int p, int d, const std::map<std::string, double>& params) {
  if (d < 1) throw UsageError("kernel dimension must be positive");
  KernelSpec k;
  k.name = kind;
  k.kind = kind;
  k.p = p;
  k.d = d;
  k.params = params;
  const Mat id = Mat::Identity(d, d);
  auto need_p1 = [&] {
    if (p != 1) throw UsageError("kernel '" + kind + "' is defined for p = 1 only");
  };
  if (kind == "hilbert") {
    need_p1();
    k.topology = Topology::ZeroExtension;
    k.delta = 1.0;
    k.C0 = 1.0;
    k.Cdelta = 4.0;
    k.evaluator = [id](const Point& x, const Point& y) -> Mat { return id * Complex(1.0 / (x[0] - y[0])); };
  } else if (kind == "torus_hilbert") {
    need_p1();
    k.delta = 1.0;
    k.C0 = 1.0;
    k.Cdelta = 2.0 * kPi * kPi;
    k.evaluator = [id](const Point& x, const Point& y) -> Mat {
      return id * Complex(torus_hilbert(x[0] - y[0]));
    };
  } else if (kind == "rotated") {
    need_p1();
    if (d < 2) throw UsageError("kernel 'rotated' needs d >= 2");
    const double twist = param(params, "twist", 1.0);
    k.delta = 1.0;
    k.C0 = 1.0;
    k.Cdelta = 2.0 * (kPi * kPi + kPi * std::abs(twist));
    k.evaluator = [d, twist](const Point& x, const Point& y) -> Mat {
      const Mat ux = rotation(d, 2.0 * kPi * twist * x[0]);
      const Mat uy = rotation(d, 2.0 * kPi * twist * y[0]);
      return ux * uy.adjoint() * Complex(torus_hilbert(x[0] - y[0]));
    };
  } else if (kind == "degraded") {
    need_p1();
    const double delta = param(params, "delta", 0.5);
    if (!(delta > 0.0 && delta <= 1.0)) throw UsageError("degraded kernel needs 0 < delta <= 1");
    k.delta = delta;
    k.C0 = 1.5;
    k.Cdelta = 3.0 * kPi * kPi * std::pow(2.0, delta - 1.0) + 0.5 * std::pow(kPi, delta);
    k.evaluator = [id, delta](const Point& x, const Point& y) -> Mat {
      const double g = 1.0 + 0.5 * std::pow(std::abs(std::sin(2.0 * kPi * x[0])), delta);
      return id * Complex(torus_hilbert(x[0] - y[0]) * g);
    };
  } else if (kind == "riesz") {
    if (p < 2) throw UsageError("kernel 'riesz' needs p >= 2");
    const int axis = static_cast<int>(param(params, "axis", 0.0));
    if (axis < 0 || axis >= p) throw UsageError("riesz axis out of range");
    k.delta = 1.0;
    k.C0 = 1.0;
    k.Cdelta = std::ldexp(1.0, p + 2) * (p + 2 + kPi);
    k.evaluator = [id, p, axis](const Point& x, const Point& y) -> Mat {
      double r2 = 0.0, ta = 0.0;
      for (int a = 0; a < p; ++a) {
        const double t = axis_diff(x[a], y[a], Topology::Torus);
        r2 += t * t;
        if (a == axis) ta = t;
      }
      const double r = std::sqrt(r2);
      return id * Complex(ta / std::pow(r, p + 1) * cutoff(r));
    };
  } else if (kind == "zero") {
    k.C0 = 0.0;
    k.Cdelta = 0.0;
    k.evaluator = [d](const Point&, const Point&) -> Mat { return Mat::Zero(d, d); };
  } else {
    throw UsageError("unknown kernel kind '" + kind + "'");
  }
  k.C0 = param(params, "C0", k.C0);
  k.Cdelta = param(params, "Cdelta", k.Cdelta);
  return k;
}

KernelSpec adjoint_kernel(const KernelSpec& k) {
  KernelSpec a = k;
  a.name = k.name + "*";
  auto f = k.evaluator;
  a.evaluator = [f](const Point& x, const Point& y) -> Mat { return f(y, x).adjoint(); };
  return a;
}

DiscreteOperator sample_kernel(const KernelSpec& k, const DyadicSystem& sys, const DiagonalRule& rule) {
  if (k.p != sys.p()) throw UsageError("kernel and grid dimensions differ");
  const std::size_t n = sys.cell_count();
  const int d = k.d;
  const double vol = sys.cell_volume();
  Mat m = Mat::Zero(static_cast<Eigen::Index>(n) * d, static_cast<Eigen::Index>(n) * d);
  std::vector<Point> c(n);
  for (std::size_t i = 0; i < n; ++i) c[i] = sys.cell_center(i);
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = 0; j < n; ++j) {
      Mat b;
      if (i != j) {
        b = k(c[i], c[j]) * vol;
      } else if (rule.kind == DiagonalRule::Kind::User) {
        if (rule.blocks.size() != n) throw UsageError("diagonal rule needs one block per cell");
        b = rule.blocks[i];
      } else if (rule.kind == DiagonalRule::Kind::SymmetricPV) {
        b = Mat::Zero(d, d);
        const double h = 0.5 * sys.side(sys.N());
        for (int a = 0; a < k.p; ++a) {
          for (double s : {-h, h}) {
            Point y = c[i];
            y[a] += s;
            b += k(c[i], y);
          }
        }
        b *= vol / (2.0 * k.p);
      } else {
        continue;
      }
      if (b.rows() != d || b.cols() != d) throw UsageError("kernel block has the wrong shape");
      if (!b.allFinite())
        throw NumericalError("kernel '" + k.name + "' is not finite at cells " + std::to_string(i) + ", " +
                             std::to_string(j));
      m.block(static_cast<Eigen::Index>(i) * d, static_cast<Eigen::Index>(j) * d, d, d) = b;
    }
  }
  return DiscreteOperator(n, d, std::move(m), Provenance::KernelSampled);
}

std::vector<KernelSample> draw_kernel_samples(const DyadicSystem& sys, Topology metric, std::size_t budget,
                                              std::uint64_t seed) {
  Rng rng = make_rng(seed, "kernel-samples");
  const int p = sys.p();
  const double ulen = sys.side(sys.N());
  std::vector<KernelSample> out;
  out.reserve(budget);
  while (out.size() < budget) {
    KernelSample s;
    const int level = static_cast<int>(rng() % static_cast<std::uint64_t>(sys.N() + 1));
    s.cube = sys.level_offset(level) + rng() % sys.level_size(level);
    const double side = sys.side(level);
    for (int a = 0; a < p; ++a) {
      const double base = static_cast<double>(sys.corner(s.cube)[a]) * ulen;
      s.x[a] = base + unit(rng) * side;
      s.xp[a] = base + unit(rng) * side;
      if (sys.topology() == Topology::Torus) {
        s.x[a] = wrap(s.x[a]);
        s.xp[a] = wrap(s.xp[a]);
      }
    }
    bool found = false;
    for (int attempt = 0; attempt < 256 && !found; ++attempt) {
      for (int a = 0; a < p; ++a) s.y[a] = unit(rng);
      const double r = point_distance(s.x, s.y, p, metric);
      found = r > 0.0 && r > 2.0 * point_distance(s.x, s.xp, p, metric);
      if (!found && attempt % 16 == 15) {
        for (int a = 0; a < p; ++a) s.xp[a] = s.x[a] + 0.5 * axis_diff(s.xp[a], s.x[a], metric);
      }
    }
    if (found) out.push_back(s);
  }
  return out;
}

std::vector<KernelSample> lattice_kernel_samples(const DyadicSystem& sys, Topology metric, int points_per_axis,
                                                 int max_level) {
  const int p = sys.p();
  const double ulen = sys.side(sys.N());
  std::vector<KernelSample> out;
  const std::size_t per_cube = static_cast<std::size_t>(std::pow(points_per_axis, p));
  std::vector<Point> ys(sys.cell_count());
  for (std::size_t i = 0; i < ys.size(); ++i) ys[i] = sys.cell_center(i);
  for (int level = 0; level <= std::min(max_level, sys.N()); ++level) {
    const double side = sys.side(level);
    for (std::size_t q = 0; q < sys.level_size(level); ++q) {
      const std::size_t cube = sys.level_offset(level) + q;
      std::vector<Point> pts(per_cube);
      for (std::size_t t = 0; t < per_cube; ++t) {
        std::size_t rem = t;
        for (int a = 0; a < p; ++a) {
          const int k = static_cast<int>(rem % points_per_axis);
          rem /= points_per_axis;
          double v = static_cast<double>(sys.corner(cube)[a]) * ulen + (k + 0.25) / points_per_axis * side;
          pts[t][a] = sys.topology() == Topology::Torus ? wrap(v) : v;
        }
      }
      for (const auto& x : pts)
        for (const auto& xp : pts)
          for (const auto& y : ys) {
            const double r = point_distance(x, y, p, metric);
            if (r > 0.0 && r > 2.0 * point_distance(x, xp, p, metric)) out.push_back({cube, x, xp, y});
          }
    }
  }
  return out;
}

ConditionReport verify_kernel_conditions(const KernelSpec& k, const WeightCache& cache,
                                         const std::vector<KernelSample>& samples) {
  if (cache.weight().d() != k.d) throw UsageError("kernel and weight dimensions differ");
  ConditionReport rep;
  rep.samples = samples.size();
  rep.claimed_C0 = k.C0;
  rep.claimed_Cdelta = k.Cdelta;
  const int p = k.p;
  for (std::size_t i = 0; i < samples.size(); ++i) {
    const auto& s = samples[i];
    const CubeStats& st = cache[s.cube];
    const double r = point_distance(s.x, s.y, p, k.topology);
    const double rp = std::pow(r, p);
    const Mat kxy = k(s.x, s.y), kyx = k(s.y, s.x);
    const double dec = op_norm(st.avg_sqrt * kxy * st.avg_inv_sqrt) * rp;
    const double dual = op_norm(st.inv_avg_sqrt * kyx.adjoint() * st.inv_avg_inv_sqrt) * rp;
    if (dec > rep.decay_max || dual > rep.decay_max) rep.decay_argmax = i;
    if (!std::isfinite(dec) || !std::isfinite(dual))
      throw NumericalError("kernel '" + k.name + "' is not finite on a sample");
    rep.decay_max = std::max(rep.decay_max, dec);
    rep.decay_dual_max = std::max(rep.decay_dual_max, dual);
    const double h = point_distance(s.x, s.xp, p, k.topology);
    if (h == 0.0) continue;
    const Mat d1 = kxy - k(s.xp, s.y);
    const Mat d2 = (kyx - k(s.y, s.xp)).adjoint();
    const double sm = (op_norm(st.avg_sqrt * d1 * st.avg_inv_sqrt) +
                       op_norm(st.inv_avg_sqrt * d2 * st.inv_avg_inv_sqrt)) *
                      std::pow(r, p + k.delta) / std::pow(h, k.delta);
    if (sm > rep.smooth_max) rep.smooth_argmax = i;
    rep.smooth_max = std::max(rep.smooth_max, sm);
  }
  rep.decay_pass = std::max(rep.decay_max, rep.decay_dual_max) <= k.C0 * kPass;
  rep.smooth_pass = rep.smooth_max <= k.Cdelta * kPass;
  return rep;
}

ConditionReport verify_kernel_conditions(const KernelSpec& k, const WeightCache& cache, std::size_t budget,
                                         std::uint64_t seed) {
  return verify_kernel_conditions(k, cache, draw_kernel_samples(cache.system(), k.topology, budget, seed));
}

WbpResult weak_boundedness_check(const DiscreteOperator& t, const WeightCache& cache) {
  const DyadicSystem& sys = cache.system();
  const int d = t.d();
  const double vol = sys.cell_volume();
  WbpResult res;
  for (std::size_t j = 1; j < sys.cube_count(); ++j) {
    const auto cells = sys.cells_of(j);
    Mat pair = Mat::Zero(d, d);
    for (auto x : cells)
      for (auto y : cells) pair += t.block(x, y);
    pair *= vol;
    const std::size_t parent = sys.parent(j);
    const CubeStats& st = cache[parent];
    const double ratio = op_norm(st.avg_sqrt * pair * st.avg_inv_sqrt) / sys.volume(sys.level_of(parent));
    if (ratio > res.max_ratio) {
      res.max_ratio = ratio;
      res.cube = parent;
      res.child = sys.child_position(j);
    }
  }
  return res;
}

T1Coefficients t1_coefficients(const DiscreteOperator& t, const DyadicSystem& sys) {
  const std::size_t n = sys.cell_count();
  const int d = t.d();
  T1Coefficients out;
  out.t1.d = out.tstar1.d = d;
  out.t1.blocks.assign(n, Mat::Zero(d, d));
  out.tstar1.blocks.assign(n, Mat::Zero(d, d));
  for (std::size_t x = 0; x < n; ++x)
    for (std::size_t y = 0; y < n; ++y) {
      const Mat b = t.block(x, y);
      out.t1.blocks[x] += b;
      out.tstar1.blocks[y] += b.adjoint();
    }
  out.t1_haar = analyze_matrix(sys, out.t1);
  out.tstar1_haar = analyze_matrix(sys, out.tstar1);
  return out;
}

std::vector<T1Split> t1_split_diagnostic(const DiscreteOperator& t, const KernelSpec& k, const WeightCache& cache) {
  const DyadicSystem& sys = cache.system();
  const std::size_t n = sys.cell_count();
  const int d = t.d(), p = sys.p();
  const double vol = sys.cell_volume();
  std::vector<Point> c(n);
  for (std::size_t i = 0; i < n; ++i) c[i] = sys.cell_center(i);
  std::vector<T1Split> out;
  const std::size_t top = sys.level_offset(sys.N());
  for (std::size_t cube = 0; cube < top; ++cube) {
    const int level = sys.level_of(cube);
    const double l = sys.side(level);
    const Point ci = cube_center(sys, cube);
    const auto inside = sys.cells_of(cube);
    std::vector<char> near(n, 0);
    for (std::size_t y = 0; y < n; ++y) {
      bool in = true;
      for (int a = 0; a < p && in; ++a) in = std::abs(axis_diff(c[y][a], ci[a], sys.topology())) < 1.5 * l;
      near[y] = in;
    }
    const CubeStats& st = cache[cube];
    const double pre = op_norm(st.avg_inv_sqrt) * op_norm(st.avg_sqrt);
    for (Signature eps = 1; eps <= static_cast<Signature>(signature_count(p)); ++eps) {
      const auto h = haar_function(sys, cube, eps);
      T1Split s;
      s.cube = cube;
      s.eps = eps;
      s.near = Mat::Zero(d, d);
      s.far = Mat::Zero(d, d);
      double env = 0.0;
      for (std::size_t y = 0; y < n; ++y) {
        Mat acc = Mat::Zero(d, d);
        for (auto x : inside) acc += h[x] * t.block(x, y);
        (near[y] ? s.near : s.far) += acc * vol;
        if (near[y]) continue;
        const Mat kc = k(ci, c[y]);
        for (auto x : inside)
          env += std::abs(h[x]) * op_norm(st.avg_sqrt * (k(c[x], c[y]) - kc) * st.avg_inv_sqrt) * vol * vol;
      }
      s.far_norm = op_norm(s.far);
      s.envelope = pre * env;
      out.push_back(std::move(s));
    }
  }
  return out;
}

}  // namespace dmw
