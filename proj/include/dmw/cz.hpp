#pragma once

#include <array>
#include <functional>
#include <map>
#include <string>
#include <vector>

#include "dmw/operators.hpp"
#include "dmw/weights.hpp"

namespace dmw {

using Point = std::array<double, 3>;
using KernelFn = std::function<Mat(const Point& x, const Point& y)>;

struct KernelSpec {
  std::string name;
  std::string kind;
  int p = 1;
  int d = 1;
  Topology topology = Topology::Torus;  // metric for |x - y|
  double delta = 1.0;
  double C0 = 1.0;
  double Cdelta = 1.0;
  std::map<std::string, double> params;
  KernelFn evaluator;

  Mat operator()(const Point& x, const Point& y) const { return evaluator(x, y); }
};

/// |x - y| in the kernel's topology.
double point_distance(const Point& x, const Point& y, int p, Topology t);

/// Shipped kernels:
///   hilbert        1/(x-y) Id on [0,1) (zero-extension metric, p = 1)
///   torus_hilbert  pi cot(pi (x-y)) Id (p = 1)
///   rotated        U(x) K0(x-y) U(y)^*, K0 = torus_hilbert, U a rotation field (d >= 2)
///   degraded       torus_hilbert * (1 + |sin 2 pi x|^delta / 2), Hoelder-delta in x
///   riesz          component `axis` of the periodized Riesz kernel with a smooth cutoff (p >= 2)
///   zero           K = 0
KernelSpec make_kernel(const std::string& kind, int p, int d, const std::map<std::string, double>& params = {});

/// K~(x, y) = K(y, x)^*.
KernelSpec adjoint_kernel(const KernelSpec& k);

struct DiagonalRule {
  enum class Kind { Zero, User, SymmetricPV } kind = Kind::Zero;
  std::vector<Mat> blocks;  // used by Kind::User, one per cell
};

DiscreteOperator sample_kernel(const KernelSpec& k, const DyadicSystem& sys, const DiagonalRule& rule = {});

struct KernelSample {
  std::size_t cube = 0;
  Point x{}, xp{}, y{};
};

/// Random (cube, x, x' in cube, y with |x-y| > 2|x-x'|) samples.
std::vector<KernelSample> draw_kernel_samples(const DyadicSystem& sys, Topology metric, std::size_t budget,
                                              std::uint64_t seed);
/// Deterministic lattice sample on every cube down to `max_level` (oracle use).
std::vector<KernelSample> lattice_kernel_samples(const DyadicSystem& sys, Topology metric, int points_per_axis,
                                                 int max_level);

struct ConditionReport {
  std::size_t samples = 0;
  double decay_max = 0.0;       // W-form
  double decay_dual_max = 0.0;  // adjoint kernel against W^{-1}
  double smooth_max = 0.0;
  double claimed_C0 = 0.0;
  double claimed_Cdelta = 0.0;
  bool decay_pass = true;
  bool smooth_pass = true;
  std::size_t decay_argmax = 0;
  std::size_t smooth_argmax = 0;
  bool pass() const { return decay_pass && smooth_pass; }
};

/// Averages of W and W^{-1} over the sample cube are read from `cache`.
ConditionReport verify_kernel_conditions(const KernelSpec& k, const WeightCache& cache,
                                         const std::vector<KernelSample>& samples);
ConditionReport verify_kernel_conditions(const KernelSpec& k, const WeightCache& cache, std::size_t budget,
                                         std::uint64_t seed);

struct WbpResult {
  double max_ratio = 0.0;
  std::size_t cube = 0;
  unsigned child = 0;
};

WbpResult weak_boundedness_check(const DiscreteOperator& t, const WeightCache& cache);

struct T1Coefficients {
  MatrixField t1, tstar1;
  MatrixHaar t1_haar, tstar1_haar;
};

T1Coefficients t1_coefficients(const DiscreteOperator& t, const DyadicSystem& sys);

struct T1Split {
  std::size_t cube = 0;
  Signature eps = 1;
  Mat near, far;
  double far_norm = 0.0;
  double envelope = 0.0;  // kernel bound on the far part
};

/// Splits <T1, h_I^eps> into the 3I part and the remainder for a kernel-sampled T.
std::vector<T1Split> t1_split_diagnostic(const DiscreteOperator& t, const KernelSpec& k, const WeightCache& cache);

}  // namespace dmw
