#include "dmw/linalg.hpp"

#include <cmath>
#include <random>

namespace dmw {

bool is_hermitian(const Mat& m, double rel_tol) {
  if (m.rows() != m.cols()) return false;
  const double scale = std::max(1e-300, m.norm());
  return (m - m.adjoint()).norm() <= rel_tol * scale;
}

Mat hermitian_part(const Mat& m) { return 0.5 * (m + m.adjoint()); }

Eigensystem hermitian_eigensystem(const Mat& m) {
  Eigen::SelfAdjointEigenSolver<Mat> es(hermitian_part(m));
  if (es.info() != Eigen::Success) throw NumericalError("eigensolver failed");
  Eigensystem out{es.eigenvalues(), es.eigenvectors()};
  for (Eigen::Index j = 0; j < out.vectors.cols(); ++j) {
    Eigen::Index arg = 0;
    double best = -1.0;
    for (Eigen::Index i = 0; i < out.vectors.rows(); ++i) {
      const double a = std::abs(out.vectors(i, j));
      if (a > best + 1e-12) {
        best = a;
        arg = i;
      }
    }
    const Complex z = out.vectors(arg, j);
    out.vectors.col(j) *= std::conj(z) / std::abs(z);
    out.vectors(arg, j) = Complex(std::abs(out.vectors(arg, j)), 0.0);
  }
  return out;
}

void validate_spd(const Mat& m, const char* what) {
  if (!is_hermitian(m)) throw ValidationError(std::string(what) + " is not Hermitian");
  if (!m.allFinite()) throw ValidationError(std::string(what) + " has non-finite entries");
  Eigen::SelfAdjointEigenSolver<Mat> es(hermitian_part(m), Eigen::EigenvaluesOnly);
  const double top = es.eigenvalues().cwiseAbs().maxCoeff();
  if (!(es.eigenvalues()(0) >= kPdFloor * top) || top == 0.0)
    throw ValidationError(std::string(what) + " is not positive definite above the floor");
}

Mat spd_power(const Mat& m, double exponent) {
  validate_spd(m);
  Eigen::SelfAdjointEigenSolver<Mat> es(hermitian_part(m));
  const Eigen::VectorXd pw = es.eigenvalues().array().pow(exponent);
  return es.eigenvectors() * pw.asDiagonal() * es.eigenvectors().adjoint();
}

Mat sqrt_spd(const Mat& m) { return spd_power(m, 0.5); }
Mat inv_sqrt_spd(const Mat& m) { return spd_power(m, -0.5); }

Mat expm_hermitian(const Mat& h) {
  Eigen::SelfAdjointEigenSolver<Mat> es(hermitian_part(h));
  const Eigen::VectorXd ex = es.eigenvalues().array().exp();
  return es.eigenvectors() * ex.asDiagonal() * es.eigenvectors().adjoint();
}

double op_norm(const Mat& m) {
  if (m.size() == 0) return 0.0;
  if (m.size() == 1) return std::abs(m(0, 0));
  return Eigen::JacobiSVD<Mat>(m).singularValues()(0);
}

Mat random_gaussian(int rows, int cols, Rng& rng) {
  std::normal_distribution<double> g(0.0, std::sqrt(0.5));
  Mat m(rows, cols);
  for (auto& v : m.reshaped()) {
    const double re = g(rng);
    const double im = g(rng);
    v = Complex(re, im);
  }
  return m;
}

Mat random_unitary(int d, Rng& rng) {
  const Mat z = random_gaussian(d, d, rng);
  Eigen::HouseholderQR<Mat> qr(z);
  Mat q = qr.householderQ();
  const Mat r = qr.matrixQR().triangularView<Eigen::Upper>();
  for (int j = 0; j < d; ++j) {
    const Complex rj = r(j, j);
    if (std::abs(rj) > 0) q.col(j) *= rj / std::abs(rj);
  }
  return q;
}

Mat random_hermitian(int d, Rng& rng) {
  const Mat z = random_gaussian(d, d, rng);
  return hermitian_part(z);
}

}  // namespace dmw
