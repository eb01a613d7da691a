#pragma once

#include <Eigen/Sparse>
#include <memory>
#include <vector>

#include "dmw/haar.hpp"

namespace dmw {

/// Linear map on C^d-valued cell fields (cell-major vectors). Adjoints are
/// taken with respect to <f,g> = cellvol * g^* f.
class LinearOperator {
 public:
  virtual ~LinearOperator() = default;
  virtual std::size_t cells() const = 0;
  virtual int d() const = 0;
  virtual Vec apply(const Vec& x) const = 0;
  virtual Vec apply_adjoint(const Vec& x) const = 0;

  Eigen::Index dim() const { return static_cast<Eigen::Index>(cells()) * d(); }
  VectorField operator()(const VectorField& f) const { return {d(), apply(f.values)}; }
};

enum class Provenance { KernelSampled, Assembled, User };
const char* to_string(Provenance p);

/// Dense block operator: (Tf)(x_i) = sum_j block(i, j) f(x_j).
class DiscreteOperator : public LinearOperator {
 public:
  DiscreteOperator() = default;
  DiscreteOperator(std::size_t cells, int d, Mat dense, Provenance prov = Provenance::User);
  static DiscreteOperator zero(std::size_t cells, int d);
  static DiscreteOperator identity(std::size_t cells, int d);

  std::size_t cells() const override { return cells_; }
  int d() const override { return d_; }
  Vec apply(const Vec& x) const override { return m_ * x; }
  Vec apply_adjoint(const Vec& x) const override { return m_.adjoint() * x; }

  const Mat& matrix() const { return m_; }
  Mat block(std::size_t i, std::size_t j) const {
    return m_.block(static_cast<Eigen::Index>(i) * d_, static_cast<Eigen::Index>(j) * d_, d_, d_);
  }
  Provenance provenance() const { return prov_; }
  DiscreteOperator adjoint() const;

  friend DiscreteOperator operator+(const DiscreteOperator& a, const DiscreteOperator& b);
  friend DiscreteOperator operator-(const DiscreteOperator& a, const DiscreteOperator& b);
  friend DiscreteOperator operator*(double s, const DiscreteOperator& a);

 private:
  std::size_t cells_ = 0;
  int d_ = 1;
  Mat m_;
  Provenance prov_ = Provenance::User;
};

using SparseMat = Eigen::SparseMatrix<Complex, Eigen::RowMajor>;

/// Sparse matrix acting on Haar coordinates: f -> synthesize(S analyze(f)).
class HaarOperator : public LinearOperator {
 public:
  HaarOperator(const DyadicSystem& sys, int d, SparseMat coeffs);

  std::size_t cells() const override { return sys_->cell_count(); }
  int d() const override { return d_; }
  Vec apply(const Vec& x) const override;
  Vec apply_adjoint(const Vec& x) const override;
  const SparseMat& coefficients() const { return s_; }
  const DyadicSystem& system() const { return *sys_; }

 private:
  const DyadicSystem* sys_;
  int d_;
  SparseMat s_;
};

/// Pi_B f = sum B_I^eps <f>_I h_I^eps, or its adjoint.
class ParaproductOperator : public LinearOperator {
 public:
  ParaproductOperator(const DyadicSystem& sys, MatrixHaar b, bool adjoint = false);

  std::size_t cells() const override { return sys_->cell_count(); }
  int d() const override { return b_.d; }
  Vec apply(const Vec& x) const override { return adjoint_ ? backward(x) : forward(x); }
  Vec apply_adjoint(const Vec& x) const override { return adjoint_ ? forward(x) : backward(x); }

 private:
  Vec forward(const Vec& x) const;
  Vec backward(const Vec& x) const;
  const DyadicSystem* sys_;
  MatrixHaar b_;
  bool adjoint_;
};

/// Wraps an operator by cellwise left/right factors: x -> L(x) T(R(x) x).
class ConjugatedOperator : public LinearOperator {
 public:
  ConjugatedOperator(const LinearOperator& t, std::vector<Mat> left, std::vector<Mat> right);

  std::size_t cells() const override { return t_->cells(); }
  int d() const override { return t_->d(); }
  Vec apply(const Vec& x) const override;
  Vec apply_adjoint(const Vec& x) const override;

 private:
  const LinearOperator* t_;
  std::vector<Mat> left_, right_;
};

/// Sum of operators with coefficients.
class SumOperator : public LinearOperator {
 public:
  void add(const LinearOperator& op, Complex coef = 1.0);
  std::size_t cells() const override { return terms_.front().first->cells(); }
  int d() const override { return terms_.front().first->d(); }
  Vec apply(const Vec& x) const override;
  Vec apply_adjoint(const Vec& x) const override;

 private:
  std::vector<std::pair<const LinearOperator*, Complex>> terms_;
};

DiscreteOperator assemble_dense(const LinearOperator& op);

/// Haar analysis applied to every column (each column a field with d components).
Mat analyze_columns(const DyadicSystem& sys, const Mat& m, int d);

/// Operator in Haar coordinates: block (J, I) equals <T h_I, h_J> with entries
/// (a, b) = <T h_I e_b, h_J e_a>.
Mat haar_matrix(const DyadicSystem& sys, const DiscreteOperator& t);
inline Mat haar_block(const Mat& hat, int d, std::size_t row_slot, std::size_t col_slot) {
  return hat.block(static_cast<Eigen::Index>(row_slot) * d, static_cast<Eigen::Index>(col_slot) * d, d, d);
}

/// (<Tf, g>)_{ij} = <T(f e_j), g e_i> for scalar fields f, g.
Mat matrix_pairing(const DyadicSystem& sys, const LinearOperator& t, const std::vector<Complex>& f,
                   const std::vector<Complex>& g);

}  // namespace dmw
