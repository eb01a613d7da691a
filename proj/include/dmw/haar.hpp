#pragma once

#include <vector>

#include "dmw/dyadic.hpp"
#include "dmw/types.hpp"

namespace dmw {

// Sign of the lower ("left") child in the 1-D factor h^1.
inline constexpr int kLeftChildSign = +1;

/// Signature eps in {0,1}^p, bit a = eps_a. Cancellative iff eps != 0.
using Signature = unsigned;

inline int signature_count(int p) { return (1 << p) - 1; }

/// Value of the normalized factor product for child position `pos` of a cube.
inline int haar_sign(Signature eps, unsigned pos) {
  int s = 1;
  for (unsigned m = eps; m; m &= m - 1) {
    const unsigned axis_bit = m & (~m + 1);
    s *= (pos & axis_bit) ? -kLeftChildSign : kLeftChildSign;
  }
  return s;
}

/// Piecewise-constant C^d field; values are cell-major (cell * d + component).
struct VectorField {
  int d = 1;
  Vec values;

  static VectorField zeros(std::size_t cells, int d);
  std::size_t cells() const { return static_cast<std::size_t>(values.size()) / static_cast<std::size_t>(d); }
  auto cell(std::size_t i) { return values.segment(static_cast<Eigen::Index>(i) * d, d); }
  auto cell(std::size_t i) const { return values.segment(static_cast<Eigen::Index>(i) * d, d); }
};

/// Haar coordinates. Slot 0 holds the root mean; slot 1 + cube*(2^p-1) + (eps-1)
/// holds <f, h_cube^eps> for cubes above the finest level.
struct HaarCoefficients {
  int d = 1;
  Vec values;

  std::size_t size() const { return static_cast<std::size_t>(values.size()) / static_cast<std::size_t>(d); }
  auto slot(std::size_t i) { return values.segment(static_cast<Eigen::Index>(i) * d, d); }
  auto slot(std::size_t i) const { return values.segment(static_cast<Eigen::Index>(i) * d, d); }
  auto mean() const { return slot(0); }
};

struct HaarLabel {
  std::size_t cube = 0;
  Signature eps = 0;
};

std::size_t haar_index(const DyadicSystem& sys, std::size_t cube, Signature eps);
HaarLabel haar_label(const DyadicSystem& sys, std::size_t slot);

/// Cell values of h_I^eps (eps = 0 gives |I|^{-1/2} chi_I).
std::vector<double> haar_function(const DyadicSystem& sys, std::size_t cube, Signature eps);
std::vector<double> haar_function(const DyadicSystem& sys, const DyadicCube& cube, Signature eps);

// Generic transforms over `comps` interleaved components per cell / slot.
Vec analyze_raw(const DyadicSystem& sys, const Vec& cells, int comps);
Vec synthesize_raw(const DyadicSystem& sys, const Vec& coeffs, int comps);
/// Averages of every cube, cube-major.
Vec cube_averages_raw(const DyadicSystem& sys, const Vec& cells, int comps);

HaarCoefficients analyze(const DyadicSystem& sys, const VectorField& f);
VectorField synthesize(const DyadicSystem& sys, const HaarCoefficients& c);

/// <f>_I computed directly from the cells of I.
Vec average(const DyadicSystem& sys, const VectorField& f, std::size_t cube);
Vec average(const DyadicSystem& sys, const VectorField& f, const DyadicCube& cube);

/// <f, g> = sum_cells g^* f * cellvol.
Complex inner(const DyadicSystem& sys, const VectorField& f, const VectorField& g);
double norm_sq(const DyadicSystem& sys, const VectorField& f);

/// d x d matrix-valued field, one block per cell.
struct MatrixField {
  int d = 1;
  std::vector<Mat> blocks;

  static MatrixField constant(std::size_t cells, const Mat& m);
};

/// Entrywise Haar coefficients of a matrix field, same slot layout as HaarCoefficients.
struct MatrixHaar {
  int d = 1;
  std::vector<Mat> blocks;
};

MatrixHaar analyze_matrix(const DyadicSystem& sys, const MatrixField& B);
MatrixField synthesize_matrix(const DyadicSystem& sys, const MatrixHaar& B);
std::vector<Mat> matrix_cube_averages(const DyadicSystem& sys, const MatrixField& B);

}  // namespace dmw
