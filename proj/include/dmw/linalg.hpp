#pragma once

#include "dmw/rng.hpp"
#include "dmw/types.hpp"

namespace dmw {

// Hermitian / PD tolerances used at ingestion.
inline constexpr double kHermitianTol = 1e-12;
inline constexpr double kPdFloor = 1e-10;

bool is_hermitian(const Mat& m, double rel_tol = kHermitianTol);
Mat hermitian_part(const Mat& m);

/// Eigenpairs in ascending order; each eigenvector is rotated so that its
/// largest-magnitude coordinate is positive real.
struct Eigensystem {
  Eigen::VectorXd values;
  Mat vectors;
};
Eigensystem hermitian_eigensystem(const Mat& m);

/// Throws ValidationError when m is not Hermitian PD (min eigenvalue >= kPdFloor * ||m||).
void validate_spd(const Mat& m, const char* what = "matrix");

Mat spd_power(const Mat& m, double exponent);
Mat sqrt_spd(const Mat& m);
Mat inv_sqrt_spd(const Mat& m);
Mat expm_hermitian(const Mat& h);

/// Spectral norm.
double op_norm(const Mat& m);

Mat random_gaussian(int rows, int cols, Rng& rng);
Mat random_unitary(int d, Rng& rng);
Mat random_hermitian(int d, Rng& rng);

}  // namespace dmw
