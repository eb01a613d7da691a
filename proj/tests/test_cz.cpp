#include <gtest/gtest.h>

#include <cmath>
#include <numbers>

#include "dmw/cz.hpp"
#include "dmw/operators.hpp"

using namespace dmw;

namespace {

GridSpec spec(int p, int N, Topology t = Topology::Torus) {
  GridSpec s;
  s.p = p;
  s.N = N;
  s.topology = t;
  return s;
}

MatrixWeight rotating(const DyadicSystem& sys, int d, double strength) {
  WeightGenerator g;
  g.kind = "rotating";
  g.strength = strength;
  return generate_weight(sys, d, g);
}

double max_abs(const Mat& m) { return m.cwiseAbs().maxCoeff(); }

}  // namespace

TEST(KernelSampling, TorusHilbertIsAntisymmetric) {
  auto sys = build_grid(spec(1, 6));
  auto t = sample_kernel(make_kernel("torus_hilbert", 1, 2), sys);
  EXPECT_EQ(t.provenance(), Provenance::KernelSampled);
  EXPECT_LT(max_abs(t.matrix() + t.matrix().adjoint()), 1e-9);
}

TEST(KernelSampling, BlocksCarryCellVolume) {
  auto sys = build_grid(spec(1, 5));
  auto k = make_kernel("torus_hilbert", 1, 1);
  auto t = sample_kernel(k, sys);
  for (std::size_t i : {0u, 3u, 17u})
    for (std::size_t j : {1u, 9u, 31u}) {
      if (i == j) continue;
      const double x = (i + 0.5) / 32.0, y = (j + 0.5) / 32.0;
      const double expect = std::numbers::pi / std::tan(std::numbers::pi * (x - y)) / 32.0;
      EXPECT_NEAR(t.block(i, j)(0, 0).real(), expect, 1e-12);
    }
  EXPECT_EQ(t.block(4, 4)(0, 0), Complex(0.0));
}

TEST(KernelSampling, SymmetricPrincipalValueVanishesForOddKernels) {
  auto sys = build_grid(spec(1, 5));
  DiagonalRule rule;
  rule.kind = DiagonalRule::Kind::SymmetricPV;
  auto t = sample_kernel(make_kernel("torus_hilbert", 1, 2), sys, rule);
  for (std::size_t i = 0; i < sys.cell_count(); ++i) EXPECT_LT(max_abs(t.block(i, i)), 1e-9);
}

TEST(KernelSampling, UserDiagonalAndNonFinite) {
  auto sys = build_grid(spec(1, 3));
  DiagonalRule rule;
  rule.kind = DiagonalRule::Kind::User;
  rule.blocks.assign(sys.cell_count(), Mat::Identity(1, 1) * 2.0);
  auto t = sample_kernel(make_kernel("zero", 1, 1), sys, rule);
  EXPECT_EQ(t.matrix(), Mat::Identity(8, 8) * 2.0);

  KernelSpec bad = make_kernel("zero", 1, 1);
  bad.evaluator = [](const Point&, const Point&) -> Mat { return Mat::Constant(1, 1, std::nan("")); };
  EXPECT_THROW(sample_kernel(bad, sys), NumericalError);
}

TEST(KernelSampling, AdjointKernelMatchesAdjointOperator) {
  auto sys = build_grid(spec(1, 5));
  auto k = make_kernel("rotated", 1, 2, {{"twist", 2.0}});
  auto a = sample_kernel(adjoint_kernel(k), sys);
  auto b = sample_kernel(k, sys).adjoint();
  EXPECT_LT(max_abs(a.matrix() - b.matrix()), 1e-14);
}

TEST(KernelConditions, ZeroKernelPasses) {
  auto sys = build_grid(spec(1, 5));
  WeightCache c(sys, rotating(sys, 2, 1.0));
  auto rep = verify_kernel_conditions(make_kernel("zero", 1, 2), c, 500, 1);
  EXPECT_TRUE(rep.pass());
  EXPECT_EQ(rep.decay_max, 0.0);
  EXPECT_EQ(rep.smooth_max, 0.0);
}

TEST(KernelConditions, HilbertUnweightedMatchesClosedForm) {
  auto sys = build_grid(spec(1, 6, Topology::ZeroExtension));
  WeightCache c(sys, MatrixWeight::identity(sys.cell_count(), 1));
  auto k = make_kernel("hilbert", 1, 1);
  auto samples = draw_kernel_samples(sys, k.topology, 2000, 7);
  auto rep = verify_kernel_conditions(k, c, samples);
  EXPECT_NEAR(rep.decay_max, 1.0, 1e-12);
  EXPECT_NEAR(rep.decay_dual_max, 1.0, 1e-12);
  double oracle = 0.0;
  for (const auto& s : samples)
    if (s.x[0] != s.xp[0]) oracle = std::max(oracle, 2.0 * std::abs(s.x[0] - s.y[0]) / std::abs(s.xp[0] - s.y[0]));
  EXPECT_NEAR(rep.smooth_max, oracle, 1e-9 * oracle);
  EXPECT_LE(rep.smooth_max, 4.0);
  EXPECT_TRUE(rep.pass());

  auto lattice = verify_kernel_conditions(k, c, lattice_kernel_samples(sys, k.topology, 4, 3));
  EXPECT_LE(lattice.smooth_max, 4.0);
  EXPECT_GT(lattice.smooth_max, 2.5);
}

TEST(KernelConditions, ShippedConstantsHoldUnweighted) {
  struct Case {
    std::string kind;
    int p, d, N;
  };
  for (const Case& cs : {Case{"torus_hilbert", 1, 2, 6}, Case{"rotated", 1, 2, 6}, Case{"degraded", 1, 1, 6},
                         Case{"riesz", 2, 1, 4}}) {
    auto sys = build_grid(spec(cs.p, cs.N));
    WeightCache c(sys, MatrixWeight::identity(sys.cell_count(), cs.d));
    auto rep = verify_kernel_conditions(make_kernel(cs.kind, cs.p, cs.d), c, 3000, 11);
    EXPECT_TRUE(rep.pass()) << cs.kind << " decay " << rep.decay_max << " smooth " << rep.smooth_max;
  }
}

TEST(KernelConditions, ScalarMultipleOfWeightIsInvisible) {
  auto sys = build_grid(spec(1, 5));
  auto w = rotating(sys, 2, 1.5);
  WeightCache a(sys, w), b(sys, w.scaled(37.0));
  auto k = make_kernel("rotated", 1, 2);
  auto s = draw_kernel_samples(sys, k.topology, 800, 3);
  auto ra = verify_kernel_conditions(k, a, s), rb = verify_kernel_conditions(k, b, s);
  EXPECT_NEAR(ra.decay_max, rb.decay_max, 1e-9 * ra.decay_max);
  EXPECT_NEAR(ra.decay_dual_max, rb.decay_dual_max, 1e-9 * ra.decay_dual_max);
  EXPECT_NEAR(ra.smooth_max, rb.smooth_max, 1e-9 * ra.smooth_max);
}

TEST(KernelConditions, AdjointAgainstInverseWeightSwapsRoles) {
  auto sys = build_grid(spec(1, 5));
  auto w = rotating(sys, 2, 1.2);
  WeightCache cw(sys, w), ci(sys, w.inverse_weight());
  auto k = make_kernel("rotated", 1, 2, {{"twist", 1.5}});
  auto s = draw_kernel_samples(sys, k.topology, 1000, 5);
  auto r = verify_kernel_conditions(k, cw, s);
  auto rd = verify_kernel_conditions(adjoint_kernel(k), ci, s);
  EXPECT_NEAR(r.decay_max, rd.decay_dual_max, 1e-8 * r.decay_max);
  EXPECT_NEAR(r.decay_dual_max, rd.decay_max, 1e-8 * r.decay_max);
  EXPECT_NEAR(r.smooth_max, rd.smooth_max, 1e-8 * r.smooth_max);
  EXPECT_EQ(r.pass(), rd.pass());
}

TEST(WeakBoundedness, IdentityGivesChildFraction) {
  for (int p : {1, 2}) {
    auto sys = build_grid(spec(p, 3));
    WeightCache c(sys, rotating(sys, 2, 1.0));
    auto r = weak_boundedness_check(DiscreteOperator::identity(sys.cell_count(), 2), c);
    EXPECT_NEAR(r.max_ratio, std::ldexp(1.0, -p), 1e-12);
  }
}

TEST(WeakBoundedness, LinearInOperator) {
  auto sys = build_grid(spec(1, 5));
  WeightCache c(sys, rotating(sys, 2, 1.0));
  auto t = sample_kernel(make_kernel("rotated", 1, 2), sys);
  auto a = weak_boundedness_check(t, c), b = weak_boundedness_check(3.0 * t, c);
  EXPECT_NEAR(b.max_ratio, 3.0 * a.max_ratio, 1e-10);
  EXPECT_EQ(a.cube, b.cube);
}

TEST(T1, ParaproductReturnsItsSymbol) {
  auto sys = build_grid(spec(1, 4));
  Rng rng(9);
  MatrixHaar b;
  b.d = 2;
  b.blocks.assign(1 + sys.level_offset(sys.N()), Mat::Zero(2, 2));
  for (std::size_t s = 1; s < b.blocks.size(); ++s) b.blocks[s] = random_gaussian(2, 2, rng);
  auto t = assemble_dense(ParaproductOperator(sys, b));
  auto t1 = t1_coefficients(t, sys);
  for (std::size_t s = 1; s < b.blocks.size(); ++s) EXPECT_LT(max_abs(t1.t1_haar.blocks[s] - b.blocks[s]), 1e-12);
}

TEST(T1, AntisymmetricKernelFlipsSign) {
  auto sys = build_grid(spec(1, 5));
  auto t = sample_kernel(make_kernel("torus_hilbert", 1, 2), sys);
  auto t1 = t1_coefficients(t, sys);
  for (std::size_t s = 0; s < t1.t1_haar.blocks.size(); ++s)
    EXPECT_LT(max_abs(t1.t1_haar.blocks[s] + t1.tstar1_haar.blocks[s]), 1e-10);
}

TEST(T1, CoefficientEntriesFollowPairingOrder) {
  auto sys = build_grid(spec(1, 4));
  Rng rng(4);
  Mat m = random_gaussian(16 * 2, 16 * 2, rng);
  DiscreteOperator t(16, 2, m);
  auto t1 = t1_coefficients(t, sys);
  const std::vector<Complex> one(16, 1.0);
  for (std::size_t cube : {0u, 2u, 9u}) {
    auto h = haar_function(sys, cube, 1);
    std::vector<Complex> hc(h.begin(), h.end());
    const Mat pair = matrix_pairing(sys, t, one, hc);
    EXPECT_LT(max_abs(pair - t1.t1_haar.blocks[haar_index(sys, cube, 1)]), 1e-12);
  }
}

TEST(T1, SplitAddsUpAndFarPartObeysEnvelope) {
  auto sys = build_grid(spec(1, 5));
  WeightCache c(sys, rotating(sys, 2, 1.0));
  auto k = make_kernel("rotated", 1, 2);
  auto t = sample_kernel(k, sys);
  auto t1 = t1_coefficients(t, sys);
  auto split = t1_split_diagnostic(t, k, c);
  ASSERT_EQ(split.size(), sys.level_offset(sys.N()));
  for (const auto& s : split) {
    EXPECT_LT(max_abs(s.near + s.far - t1.t1_haar.blocks[haar_index(sys, s.cube, s.eps)]), 1e-10);
    EXPECT_LE(s.far_norm, s.envelope * (1 + 1e-9) + 1e-14);
  }
}

TEST(Kernels, DomainChecks) {
  EXPECT_THROW(make_kernel("hilbert", 2, 1), UsageError);
  EXPECT_THROW(make_kernel("riesz", 1, 1), UsageError);
  EXPECT_THROW(make_kernel("rotated", 1, 1), UsageError);
  EXPECT_THROW(make_kernel("nope", 1, 1), UsageError);
  EXPECT_DOUBLE_EQ(make_kernel("torus_hilbert", 1, 1, {{"C0", 3.0}}).C0, 3.0);
}
