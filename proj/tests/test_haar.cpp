#include <gtest/gtest.h>

#include <cmath>

#include "dmw/haar.hpp"
#include "dmw/rng.hpp"

using namespace dmw;

namespace {

GridSpec spec(int p, int N) {
  GridSpec s;
  s.p = p;
  s.N = N;
  return s;
}

VectorField random_field(std::size_t cells, int d, Rng& rng) {
  std::normal_distribution<double> g;
  VectorField f = VectorField::zeros(cells, d);
  for (auto& v : f.values) v = Complex(g(rng), g(rng));
  return f;
}

Complex direct_coeff(const DyadicSystem& sys, const VectorField& f, int comp, std::size_t cube, Signature e) {
  const auto h = haar_function(sys, cube, e);
  Complex s = 0;
  for (std::size_t c = 0; c < h.size(); ++c) s += f.cell(c)(comp) * h[c];
  return s * sys.cell_volume();
}

}  // namespace

TEST(Haar, OneDimensionalExamples) {
  const auto sys = build_grid(spec(1, 3));
  const auto h1 = haar_function(sys, 0, 1);
  for (std::size_t c = 0; c < 8; ++c) EXPECT_DOUBLE_EQ(h1[c], c < 4 ? 1.0 : -1.0);
  const auto h0 = haar_function(sys, 0, 0);
  for (double v : h0) EXPECT_DOUBLE_EQ(v, 1.0);
  EXPECT_THROW(haar_function(sys, sys.level_offset(3), 1), ResolutionError);
}

TEST(Haar, TwoDimensionalCheckerboard) {
  const auto sys = build_grid(spec(2, 1));
  const auto h = haar_function(sys, 0, 3);
  // cells: (x,y) = (0,0), (0,1), (1,0), (1,1)
  EXPECT_DOUBLE_EQ(h[sys.cell_index({0, 0, 0})], 1.0);
  EXPECT_DOUBLE_EQ(h[sys.cell_index({1, 0, 0})], -1.0);
  EXPECT_DOUBLE_EQ(h[sys.cell_index({0, 1, 0})], -1.0);
  EXPECT_DOUBLE_EQ(h[sys.cell_index({1, 1, 0})], 1.0);
}

TEST(Haar, LeftChildCarriesPlus) {
  EXPECT_EQ(kLeftChildSign, 1);
  EXPECT_EQ(haar_sign(1, 0), 1);
  EXPECT_EQ(haar_sign(1, 1), -1);
  EXPECT_EQ(haar_sign(3, 3), 1);
  EXPECT_EQ(haar_sign(2, 1), 1);
}

TEST(Haar, OrthonormalityExhaustive) {
  Rng rng(1);
  for (int p = 1; p <= 2; ++p)
    for (int N = 1; N <= 4; ++N) {
      const auto sys = build_grid(spec(p, N), RandomShift::sample(p, N, rng()));
      std::vector<std::vector<double>> hs;
      for (std::size_t I = 0; I < sys.level_offset(N); ++I)
        for (int e = 1; e <= signature_count(p); ++e) hs.push_back(haar_function(sys, I, e));
      hs.push_back(haar_function(sys, 0, 0));
      ASSERT_EQ(hs.size(), sys.cell_count());
      for (std::size_t a = 0; a < hs.size(); ++a)
        for (std::size_t b = a; b < hs.size(); ++b) {
          double s = 0;
          for (std::size_t c = 0; c < hs[a].size(); ++c) s += hs[a][c] * hs[b][c];
          EXPECT_NEAR(s * sys.cell_volume(), a == b ? 1.0 : 0.0, 1e-12);
        }
    }
}

TEST(Haar, AnalyzeMatchesDirectInnerProducts) {
  Rng rng(2);
  for (int p = 1; p <= 3; ++p) {
    const int N = p == 3 ? 2 : 3;
    const auto sys = build_grid(spec(p, N), RandomShift::sample(p, N, rng()));
    const auto f = random_field(sys.cell_count(), 2, rng);
    const auto c = analyze(sys, f);
    for (std::size_t slot = 1; slot < c.size(); ++slot) {
      const auto lab = haar_label(sys, slot);
      EXPECT_EQ(haar_index(sys, lab.cube, lab.eps), slot);
      for (int k = 0; k < 2; ++k) EXPECT_LT(std::abs(c.slot(slot)(k) - direct_coeff(sys, f, k, lab.cube, lab.eps)), 1e-12);
    }
    EXPECT_LT((c.mean() - average(sys, f, std::size_t{0})).norm(), 1e-12);
  }
}

TEST(Haar, RoundTripsAndPlancherel) {
  Rng rng(3);
  for (int p = 1; p <= 2; ++p)
    for (int N = 1; N <= 5; ++N) {
      const auto sys = build_grid(spec(p, N), RandomShift::sample(p, N, rng()));
      for (int d = 1; d <= 3; ++d) {
        const auto f = random_field(sys.cell_count(), d, rng);
        const auto c = analyze(sys, f);
        EXPECT_LT((synthesize(sys, c).values - f.values).norm(), 1e-10 * f.values.norm());
        const double plancherel = c.mean().squaredNorm() + (c.values.squaredNorm() - c.mean().squaredNorm());
        EXPECT_NEAR(norm_sq(sys, f), plancherel, 1e-10 * plancherel);
        HaarCoefficients r{d, random_field(sys.cell_count(), d, rng).values};
        EXPECT_LT((analyze(sys, synthesize(sys, r)).values - r.values).norm(), 1e-10 * r.values.norm());
      }
    }
}

TEST(Haar, ConstantsAndSingleCoefficients) {
  const auto sys = build_grid(spec(2, 3));
  Vec cst(2);
  cst << Complex(1, 2), Complex(-3, 0.5);
  VectorField f = VectorField::zeros(sys.cell_count(), 2);
  for (std::size_t i = 0; i < sys.cell_count(); ++i) f.cell(i) = cst;
  const auto c = analyze(sys, f);
  EXPECT_LT((c.mean() - cst).norm(), 1e-14);
  EXPECT_LT(c.values.tail(c.values.size() - 2).norm(), 1e-13);
  EXPECT_LT((synthesize(sys, HaarCoefficients{2, c.values}).values - f.values).norm(), 1e-13);

  // Finest admissible level: magnitude 2^{(N-1)p/2}.
  const std::size_t I = sys.level_offset(2) + 5;
  HaarCoefficients one{1, Vec::Zero(static_cast<Eigen::Index>(sys.cell_count()))};
  one.slot(haar_index(sys, I, 2))(0) = 1.0;
  const auto g = synthesize(sys, one);
  const double mag = std::pow(2.0, (3 - 1) * 2 / 2.0);
  const auto cells = sys.cells_of(I);
  for (std::size_t cidx = 0; cidx < sys.cell_count(); ++cidx) {
    const bool inside = std::find(cells.begin(), cells.end(), cidx) != cells.end();
    EXPECT_NEAR(std::abs(g.cell(cidx)(0)), inside ? mag : 0.0, 1e-12);
  }
  // f = h_I^eps e_1 has a single unit coefficient.
  VectorField h = VectorField::zeros(sys.cell_count(), 2);
  const auto hv = haar_function(sys, I, 2);
  for (std::size_t cidx = 0; cidx < sys.cell_count(); ++cidx) h.cell(cidx)(0) = hv[cidx];
  const auto hc = analyze(sys, h);
  for (std::size_t s = 0; s < hc.size(); ++s)
    for (int k = 0; k < 2; ++k)
      EXPECT_NEAR(std::abs(hc.slot(s)(k)), (s == haar_index(sys, I, 2) && k == 0) ? 1.0 : 0.0, 1e-12);
}

TEST(Haar, AveragesAndMartingaleProperty) {
  Rng rng(4);
  const auto sys = build_grid(spec(2, 3), RandomShift::sample(2, 3, 77));
  const auto f = random_field(sys.cell_count(), 2, rng);
  const Vec avg = cube_averages_raw(sys, f.values, 2);
  for (std::size_t I = 0; I < sys.cube_count(); ++I) {
    const Vec direct = average(sys, f, I);
    EXPECT_LT((avg.segment(static_cast<Eigen::Index>(I) * 2, 2) - direct).norm(), 1e-12);
    if (sys.level_of(I) == sys.N()) continue;
    Vec kids = Vec::Zero(2);
    for (unsigned b = 0; b < 4; ++b) kids += average(sys, f, sys.child(I, b));
    EXPECT_LT((kids / 4.0 - direct).norm(), 1e-12);
    for (int e = 1; e <= 3; ++e) {
      const auto h = haar_function(sys, I, e);
      double s = 0;
      for (std::size_t c : sys.cells_of(I)) s += h[c];
      EXPECT_NEAR(s, 0.0, 1e-12);
    }
  }
}

TEST(Haar, OneDimensionalDifferenceFormula) {
  Rng rng(5);
  const auto sys = build_grid(spec(1, 5), RandomShift::sample(1, 5, 3));
  const auto f = random_field(sys.cell_count(), 1, rng);
  const auto c = analyze(sys, f);
  for (std::size_t I = 0; I < sys.level_offset(5); ++I) {
    const Complex plus = average(sys, f, sys.child(I, 0))(0);
    const Complex minus = average(sys, f, sys.child(I, 1))(0);
    const Complex expect = std::sqrt(sys.volume(sys.level_of(I))) / 2.0 * (plus - minus);
    EXPECT_LT(std::abs(c.slot(haar_index(sys, I, 1))(0) - expect), 1e-12);
  }
}

TEST(Haar, MatrixFieldRoundTrip) {
  Rng rng(6);
  const auto sys = build_grid(spec(1, 4));
  MatrixField B;
  B.d = 2;
  std::normal_distribution<double> g;
  for (std::size_t i = 0; i < sys.cell_count(); ++i) {
    Mat m(2, 2);
    for (auto& v : m.reshaped()) v = Complex(g(rng), g(rng));
    B.blocks.push_back(m);
  }
  const auto H = analyze_matrix(sys, B);
  // Entry (a,b) of each block is the Haar coefficient of the scalar entry field.
  for (int a = 0; a < 2; ++a)
    for (int b = 0; b < 2; ++b) {
      VectorField s = VectorField::zeros(sys.cell_count(), 1);
      for (std::size_t i = 0; i < sys.cell_count(); ++i) s.values(static_cast<Eigen::Index>(i)) = B.blocks[i](a, b);
      const auto cs = analyze(sys, s);
      for (std::size_t k = 0; k < cs.size(); ++k) EXPECT_LT(std::abs(cs.slot(k)(0) - H.blocks[k](a, b)), 1e-12);
    }
  const auto back = synthesize_matrix(sys, H);
  for (std::size_t i = 0; i < sys.cell_count(); ++i) EXPECT_LT((back.blocks[i] - B.blocks[i]).norm(), 1e-12);
}
