#include <gtest/gtest.h>

#include <cmath>

#include "dmw/dyadic_ops.hpp"

using namespace dmw;

namespace {

GridSpec spec(int p, int N) {
  GridSpec s;
  s.p = p;
  s.N = N;
  return s;
}

VectorField random_field(std::size_t cells, int d, Rng& rng) {
  VectorField f = VectorField::zeros(cells, d);
  std::normal_distribution<double> g;
  for (auto& v : f.values) v = Complex(g(rng), g(rng));
  return f;
}

MatrixWeight random_weight(const DyadicSystem& sys, int d, Rng& rng) {
  std::vector<Mat> b;
  std::uniform_real_distribution<double> u(-1.0, 1.0);
  for (std::size_t i = 0; i < sys.cell_count(); ++i) {
    const Mat q = random_unitary(d, rng);
    Eigen::VectorXd l(d);
    for (int k = 0; k < d; ++k) l(k) = std::exp(u(rng));
    b.push_back(hermitian_part(q * l.asDiagonal() * q.adjoint()));
  }
  return MatrixWeight(d, b);
}

// Dense block matrix of sum A h_J(x) h_I(y) cellvol from sampled Haar functions.
Mat dense_shift_oracle(const HaarShift& s) {
  const DyadicSystem& sys = s.system();
  const int d = s.d();
  const auto n = static_cast<Eigen::Index>(sys.cell_count()) * d;
  Mat m = Mat::Zero(n, n);
  for (const auto& c : s.coeffs()) {
    const auto hi = haar_function(sys, c.I, c.eps);
    const auto hj = haar_function(sys, c.J, c.eps_out);
    for (std::size_t x = 0; x < sys.cell_count(); ++x)
      for (std::size_t y = 0; y < sys.cell_count(); ++y)
        if (hj[x] != 0 && hi[y] != 0)
          m.block(static_cast<Eigen::Index>(x) * d, static_cast<Eigen::Index>(y) * d, d, d) +=
              c.A * (hj[x] * hi[y] * sys.cell_volume());
  }
  return m;
}

Mat dense_paraproduct_oracle(const DyadicSystem& sys, const BmoSymbol& b) {
  const int d = b.d();
  const auto n = static_cast<Eigen::Index>(sys.cell_count()) * d;
  Mat m = Mat::Zero(n, n);
  for (std::size_t I = 0; I < sys.level_offset(sys.N()); ++I) {
    const auto cells = sys.cells_of(I);
    for (int e = 1; e <= signature_count(sys.p()); ++e) {
      const auto h = haar_function(sys, I, e);
      const Mat& B = b.haar.blocks[haar_index(sys, I, e)];
      for (std::size_t x = 0; x < sys.cell_count(); ++x)
        for (std::size_t y : cells)
          m.block(static_cast<Eigen::Index>(x) * d, static_cast<Eigen::Index>(y) * d, d, d) +=
              B * (h[x] * sys.cell_volume() / sys.volume(sys.level_of(I)));
    }
  }
  return m;
}

BmoSymbol random_symbol(const DyadicSystem& sys, int d, Rng& rng) {
  MatrixField b;
  b.d = d;
  for (std::size_t i = 0; i < sys.cell_count(); ++i) b.blocks.push_back(random_gaussian(d, d, rng));
  return BmoSymbol::from_field(sys, b);
}

}  // namespace

TEST(Martingale, IdentityAndZero) {
  Rng rng(1);
  const auto sys = build_grid(spec(2, 3), RandomShift::sample(2, 3, 4));
  const auto f = random_field(sys.cell_count(), 2, rng);
  const auto id = martingale_transform(sys, f, SigmaSequence::constant(sys, Mat::Identity(2, 2)));
  const Vec mean = average(sys, f, std::size_t{0});
  for (std::size_t c = 0; c < sys.cell_count(); ++c) EXPECT_LT((id.cell(c) - (f.cell(c) - mean)).norm(), 1e-12);
  const auto z = martingale_transform(sys, f, SigmaSequence::constant(sys, Mat::Zero(2, 2)));
  EXPECT_LT(z.values.norm(), 1e-14);
}

TEST(Martingale, DenseDiagonalAndNormW) {
  Rng rng(2);
  const auto sys = build_grid(spec(1, 4));
  const auto w = random_weight(sys, 2, rng);
  const WeightCache cache(sys, w);
  const auto sigma = random_sigma(cache, rng);
  EXPECT_NEAR(sigma.norm_w(cache), 1.0, 1e-10);
  const auto dense = assemble_dense(martingale_operator(sys, sigma));
  const Mat hat = haar_matrix(sys, dense);
  for (std::size_t s = 0; s < sys.cell_count(); ++s)
    for (std::size_t r = 0; r < sys.cell_count(); ++r) {
      const Mat blk = haar_block(hat, 2, r, s);
      if (r == s && s > 0) EXPECT_LT((blk - sigma.entries[haar_label(sys, s).cube]).norm(), 1e-10);
      else EXPECT_LT(blk.norm(), 1e-10);
    }
}

TEST(Shift, CollapsesToMartingaleTransform) {
  Rng rng(3);
  const auto sys = build_grid(spec(2, 3));
  const auto w = random_weight(sys, 2, rng);
  const WeightCache cache(sys, w);
  const auto sigma = random_sigma(cache, rng);
  std::vector<ShiftCoefficient> coeffs;
  for (std::size_t L = 0; L < sys.level_offset(sys.N()); ++L)
    for (int e = 1; e <= 3; ++e) coeffs.push_back({L, L, L, static_cast<Signature>(e), static_cast<Signature>(e), sigma.entries[L]});
  const HaarShift s(sys, 0, 0, 2, coeffs, &cache);
  EXPECT_EQ(s.complexity(), 1);
  const auto f = random_field(sys.cell_count(), 2, rng);
  EXPECT_LT((apply_shift(s, f).values - martingale_transform(sys, f, sigma).values).norm(), 1e-12);
}

TEST(Shift, SingleCoefficient) {
  Rng rng(4);
  const auto sys = build_grid(spec(1, 4));
  const std::size_t L = 1, I = sys.descendants(L, 1)[1], J = L;
  Mat A = random_gaussian(2, 2, rng) * 0.1;
  const HaarShift s(sys, 1, 0, 2, {{L, I, J, 1, 1, A}});
  const auto f = random_field(sys.cell_count(), 2, rng);
  const Vec fi = analyze(sys, f).slot(haar_index(sys, I, 1));
  const auto hj = haar_function(sys, J, 1);
  const auto out = apply_shift(s, f);
  for (std::size_t c = 0; c < sys.cell_count(); ++c) EXPECT_LT((out.cell(c) - A * fi * hj[c]).norm(), 1e-12);
}

TEST(Shift, DenseAssemblyOracle) {
  Rng rng(5);
  for (int p = 1; p <= 2; ++p) {
    const int N = p == 1 ? 5 : 3;
    const auto sys = build_grid(spec(p, N), RandomShift::sample(p, N, rng()));
    const auto w = random_weight(sys, 2, rng);
    const WeightCache cache(sys, w);
    for (auto [m, n] : {std::pair{1, 0}, std::pair{0, 2}, std::pair{1, 1}}) {
      if (std::max(m, n) >= N) continue;
      const auto s = random_shift(cache, m, n, rng, false);
      const Mat oracle = dense_shift_oracle(s);
      const auto op = shift_operator(s);
      const auto dense = assemble_dense(op);
      EXPECT_LT((dense.matrix() - oracle).norm(), 1e-10 * oracle.norm());
      const auto f = random_field(sys.cell_count(), 2, rng);
      EXPECT_LT((op.apply_adjoint(f.values) - oracle.adjoint() * f.values).norm(), 1e-10 * oracle.norm() * f.values.norm());
      EXPECT_LE(shift_normalization(s, cache), 1.0 + 1e-9);
    }
  }
}

TEST(Shift, NormalizationIsEnforced) {
  Rng rng(6);
  const auto sys = build_grid(spec(1, 4));
  const auto w = random_weight(sys, 2, rng);
  const WeightCache cache(sys, w);
  const auto s = random_shift(cache, 1, 1, rng, true);
  EXPECT_NEAR(shift_normalization(s, cache), 1.0, 1e-10);
  auto coeffs = s.coeffs();
  coeffs[3].A *= 1.0 + 1e-6;
  EXPECT_THROW(HaarShift(sys, 1, 1, 2, coeffs, &cache), ValidationError);
  coeffs = s.coeffs();
  coeffs[3].A *= 1.0 + 1e-12;
  EXPECT_NO_THROW(HaarShift(sys, 1, 1, 2, coeffs, &cache));
  coeffs = s.coeffs();
  coeffs[0].I = coeffs[0].L;
  EXPECT_THROW(HaarShift(sys, 1, 1, 2, coeffs), ValidationError);
}

TEST(Shift, SlicesSumToShift) {
  Rng rng(7);
  for (int p = 1; p <= 2; ++p) {
    const int N = p == 1 ? 6 : 4;
    const auto sys = build_grid(spec(p, N), RandomShift::sample(p, N, rng()));
    const auto w = random_weight(sys, 2, rng);
    const WeightCache cache(sys, w);
    for (int k = 1; k <= 3; ++k) {
      const auto s = random_shift(cache, k - 1, (k - 1) / 2, rng, false);
      ASSERT_EQ(s.complexity(), k);
      const auto f = random_field(sys.cell_count(), 2, rng);
      const Vec full = apply_shift(s, f).values;
      Vec sum = Vec::Zero(full.size());
      std::vector<int> seen(static_cast<std::size_t>(N), 0);
      for (int t = 0; t < k; ++t) {
        sum += apply_shift(slice(s, t), f).values;
        for (int l : slice_levels(k, t, N)) ++seen[static_cast<std::size_t>(l)];
      }
      EXPECT_LT((sum - full).norm(), 1e-12 * std::max(1.0, full.norm()));
      for (int c : seen) EXPECT_EQ(c, 1);
      EXPECT_THROW(slice(s, k), ValidationError);
      if (k == 1) EXPECT_EQ(slice(s, 0).coeffs().size(), s.coeffs().size());
    }
  }
}

TEST(Paraproduct, DenseOracleAndAdjoint) {
  Rng rng(8);
  for (int p = 1; p <= 2; ++p) {
    const int N = p == 1 ? 4 : 2;
    const auto sys = build_grid(spec(p, N), RandomShift::sample(p, N, rng()));
    const auto b = random_symbol(sys, 2, rng);
    const Mat oracle = dense_paraproduct_oracle(sys, b);
    const auto pi = assemble_dense(ParaproductOperator(sys, b.haar));
    const auto pis = assemble_dense(ParaproductOperator(sys, b.haar, true));
    EXPECT_LT((pi.matrix() - oracle).norm(), 1e-10 * oracle.norm());
    EXPECT_LT((pis.matrix() - oracle.adjoint()).norm(), 1e-10 * oracle.norm());
    const auto f = random_field(sys.cell_count(), 2, rng), g = random_field(sys.cell_count(), 2, rng);
    const Complex lhs = inner(sys, paraproduct(sys, b, f), g);
    const Complex rhs = std::conj(inner(sys, adjoint_paraproduct(sys, b, g), f));
    EXPECT_LT(std::abs(lhs - rhs), 1e-10 * std::abs(lhs));
  }
}

TEST(Paraproduct, SymbolFixedPointAndLinearity) {
  Rng rng(9);
  const auto sys = build_grid(spec(1, 5));
  const auto b1 = random_symbol(sys, 2, rng), b2 = random_symbol(sys, 2, rng);
  const auto f = random_field(sys.cell_count(), 2, rng), g = random_field(sys.cell_count(), 2, rng);
  const auto out = analyze(sys, paraproduct(sys, b1, f));
  for (std::size_t J = 0; J < sys.level_offset(sys.N()); ++J) {
    const std::size_t slot = haar_index(sys, J, 1);
    EXPECT_LT((out.slot(slot) - b1.haar.blocks[slot] * average(sys, f, J)).norm(), 1e-12);
  }
  MatrixField sum = b1.blocks;
  for (std::size_t i = 0; i < sum.blocks.size(); ++i) sum.blocks[i] = 2.0 * b1.blocks.blocks[i] - b2.blocks.blocks[i];
  const auto bs = BmoSymbol::from_field(sys, sum);
  EXPECT_LT((paraproduct(sys, bs, f).values - 2.0 * paraproduct(sys, b1, f).values + paraproduct(sys, b2, f).values).norm(), 1e-11);
  VectorField fg{2, f.values * Complex(0.5, -1.0) + g.values};
  EXPECT_LT((paraproduct(sys, b1, fg).values - Complex(0.5, -1.0) * paraproduct(sys, b1, f).values - paraproduct(sys, b1, g).values).norm(), 1e-11);
  const auto cst = BmoSymbol::from_field(sys, MatrixField::constant(sys.cell_count(), random_gaussian(2, 2, rng)));
  EXPECT_LT(paraproduct(sys, cst, f).values.norm(), 1e-12);
}

TEST(Paraproduct, ScalarHandExample) {
  const auto sys = build_grid(spec(1, 2));
  MatrixHaar h{1, std::vector<Mat>(sys.cell_count(), Mat::Zero(1, 1))};
  h.blocks[haar_index(sys, 1, 1)](0, 0) = 3.0;  // b = 3 h_{[0,1/2)}
  const auto b = BmoSymbol::from_haar(sys, h);
  VectorField f = VectorField::zeros(4, 1);
  f.values << 1.0, 2.0, 5.0, 7.0;
  // <f>_{[0,1/2)} = 1.5; h = sqrt(2) on [0,1/4), -sqrt(2) on [1/4,1/2).
  const auto out = paraproduct(sys, b, f);
  const double v = 3.0 * 1.5 * std::sqrt(2.0);
  EXPECT_NEAR(out.values(0).real(), v, 1e-12);
  EXPECT_NEAR(out.values(1).real(), -v, 1e-12);
  EXPECT_NEAR(std::abs(out.values(2)), 0.0, 1e-12);
}

TEST(SquareFunction, ScalarPlancherelAndDirect) {
  Rng rng(10);
  const auto sys = build_grid(spec(1, 5), RandomShift::sample(1, 5, 3));
  const WeightCache id(sys, MatrixWeight::identity(sys.cell_count(), 1));
  const auto f = random_field(sys.cell_count(), 1, rng);
  const auto s = square_function(id, f);
  double l2 = 0;
  for (double v : s) l2 += v * v * sys.cell_volume();
  const Vec mean = average(sys, f, std::size_t{0});
  VectorField centred = f;
  for (std::size_t c = 0; c < sys.cell_count(); ++c) centred.cell(c) -= mean;
  EXPECT_NEAR(l2, norm_sq(sys, centred), 1e-10);
  VectorField cst = VectorField::zeros(sys.cell_count(), 1);
  cst.values.setConstant(Complex(2, 1));
  for (double v : square_function(id, cst)) EXPECT_NEAR(v, 0.0, 1e-12);

  const auto w = random_weight(sys, 2, rng);
  const WeightCache cache(sys, w);
  const auto g = random_field(sys.cell_count(), 2, rng);
  const auto sw = square_function(cache, g);
  const auto coeffs = analyze(sys, g);
  for (std::size_t x = 0; x < sys.cell_count(); ++x) {
    double acc = 0;
    for (std::size_t I = 0; I < sys.level_offset(sys.N()); ++I)
      if (sys.contains(I, sys.finest_cube_of_cell(x)))
        acc += (cache[I].avg_sqrt * coeffs.slot(haar_index(sys, I, 1))).squaredNorm() / sys.volume(sys.level_of(I));
    EXPECT_NEAR(sw[x], std::sqrt(acc), 1e-12 * std::sqrt(acc));
  }
}

TEST(MaximalFunction, ScalarBruteForceAndConstant) {
  Rng rng(11);
  const auto sys = build_grid(spec(1, 5));
  const auto sys2 = build_grid(spec(1, 5), RandomShift::sample(1, 5, 9));
  const WeightCache a(sys, MatrixWeight::identity(sys.cell_count(), 1));
  const WeightCache b(sys2, MatrixWeight::identity(sys.cell_count(), 1));
  for (int t = 0; t < 20; ++t) {
    VectorField f = VectorField::zeros(sys.cell_count(), 1);
    for (auto& v : f.values) v = std::exp(std::normal_distribution<double>()(rng));
    const auto m = maximal_function(f, {&a, &b});
    for (std::size_t x = 0; x < sys.cell_count(); ++x) {
      double best = 0;
      for (const DyadicSystem* s : {&sys, &sys2})
        for (std::size_t I = 0; I < s->cube_count(); ++I)
          if (s->contains(I, s->finest_cube_of_cell(x))) best = std::max(best, average(*s, f, I)(0).real());
      EXPECT_NEAR(m[x], best, 1e-12 * best);
    }
  }
  VectorField c = VectorField::zeros(sys.cell_count(), 2);
  for (std::size_t i = 0; i < sys.cell_count(); ++i) c.cell(i) << Complex(3, 0), Complex(0, 4);
  const WeightCache id2(sys, MatrixWeight::identity(sys.cell_count(), 2));
  for (double v : maximal_function(c, {&id2})) EXPECT_NEAR(v, 5.0, 1e-12);
}
