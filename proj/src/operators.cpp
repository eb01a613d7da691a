#include "dmw/operators.hpp"

namespace dmw {

const char* to_string(Provenance p) {
  switch (p) {
    case Provenance::KernelSampled: return "kernel-sampled";
    case Provenance::Assembled: return "assembled";
    case Provenance::User: return "user";
  }
  return "user";
}

DiscreteOperator::DiscreteOperator(std::size_t cells, int d, Mat dense, Provenance prov)
    : cells_(cells), d_(d), m_(std::move(dense)), prov_(prov) {
  const auto n = static_cast<Eigen::Index>(cells) * d;
  if (m_.rows() != n || m_.cols() != n) throw UsageError("dense operator has the wrong size");
}

DiscreteOperator DiscreteOperator::zero(std::size_t cells, int d) {
  const auto n = static_cast<Eigen::Index>(cells) * d;
  return DiscreteOperator(cells, d, Mat::Zero(n, n));
}

DiscreteOperator DiscreteOperator::identity(std::size_t cells, int d) {
  const auto n = static_cast<Eigen::Index>(cells) * d;
  return DiscreteOperator(cells, d, Mat::Identity(n, n));
}

DiscreteOperator DiscreteOperator::adjoint() const {
  return DiscreteOperator(cells_, d_, m_.adjoint(), prov_);
}

DiscreteOperator operator+(const DiscreteOperator& a, const DiscreteOperator& b) {
  return DiscreteOperator(a.cells_, a.d_, a.m_ + b.m_, Provenance::Assembled);
}

DiscreteOperator operator-(const DiscreteOperator& a, const DiscreteOperator& b) {
  return DiscreteOperator(a.cells_, a.d_, a.m_ - b.m_, Provenance::Assembled);
}

DiscreteOperator operator*(double s, const DiscreteOperator& a) {
  return DiscreteOperator(a.cells_, a.d_, s * a.m_, a.prov_);
}

HaarOperator::HaarOperator(const DyadicSystem& sys, int d, SparseMat coeffs) : sys_(&sys), d_(d), s_(std::move(coeffs)) {
  const auto n = static_cast<Eigen::Index>(sys.cell_count()) * d;
  if (s_.rows() != n || s_.cols() != n) throw UsageError("Haar operator has the wrong size");
}

Vec HaarOperator::apply(const Vec& x) const {
  const Vec c = analyze_raw(*sys_, x, d_);
  return synthesize_raw(*sys_, s_ * c, d_);
}

Vec HaarOperator::apply_adjoint(const Vec& x) const {
  const Vec c = analyze_raw(*sys_, x, d_);
  return synthesize_raw(*sys_, s_.adjoint() * c, d_);
}

ParaproductOperator::ParaproductOperator(const DyadicSystem& sys, MatrixHaar b, bool adjoint)
    : sys_(&sys), b_(std::move(b)), adjoint_(adjoint) {
  if (b_.blocks.size() != sys.cell_count()) throw UsageError("paraproduct symbol does not match the system");
}

Vec ParaproductOperator::forward(const Vec& x) const {
  const int d = b_.d;
  const Vec avg = cube_averages_raw(*sys_, x, d);
  const int nsig = signature_count(sys_->p());
  Vec c = Vec::Zero(x.size());
  for (std::size_t I = 0; I < sys_->level_offset(sys_->N()); ++I)
    for (int e = 1; e <= nsig; ++e) {
      const std::size_t slot = 1 + I * nsig + (e - 1);
      c.segment(static_cast<Eigen::Index>(slot) * d, d) = b_.blocks[slot] * avg.segment(static_cast<Eigen::Index>(I) * d, d);
    }
  return synthesize_raw(*sys_, c, d);
}

Vec ParaproductOperator::backward(const Vec& x) const {
  const int d = b_.d;
  const Vec c = analyze_raw(*sys_, x, d);
  const int nsig = signature_count(sys_->p());
  const int N = sys_->N();
  // acc(I) = sum over ancestors-or-self J of (1/|J|) sum_eps (B_J^eps)^* <x, h_J^eps>.
  Vec acc = Vec::Zero(static_cast<Eigen::Index>(sys_->cube_count()) * d);
  for (int k = 0; k <= N; ++k)
    for (std::size_t I = sys_->level_offset(k); I < sys_->level_offset(k + 1); ++I) {
      auto out = acc.segment(static_cast<Eigen::Index>(I) * d, d);
      if (k > 0) out = acc.segment(static_cast<Eigen::Index>(sys_->parent(I)) * d, d);
      if (k == N) continue;
      const double inv = 1.0 / sys_->volume(k);
      for (int e = 1; e <= nsig; ++e) {
        const std::size_t slot = 1 + I * nsig + (e - 1);
        out += inv * (b_.blocks[slot].adjoint() * c.segment(static_cast<Eigen::Index>(slot) * d, d));
      }
    }
  return acc.segment(static_cast<Eigen::Index>(sys_->level_offset(N)) * d, x.size());
}

ConjugatedOperator::ConjugatedOperator(const LinearOperator& t, std::vector<Mat> left, std::vector<Mat> right)
    : t_(&t), left_(std::move(left)), right_(std::move(right)) {}

namespace {
Vec cellwise(const std::vector<Mat>& m, const Vec& x, int d, bool adjoint) {
  if (m.empty()) return x;
  Vec y(x.size());
  for (std::size_t i = 0; i < m.size(); ++i) {
    const auto seg = x.segment(static_cast<Eigen::Index>(i) * d, d);
    y.segment(static_cast<Eigen::Index>(i) * d, d) = adjoint ? Vec(m[i].adjoint() * seg) : Vec(m[i] * seg);
  }
  return y;
}
}  // namespace

Vec ConjugatedOperator::apply(const Vec& x) const {
  return cellwise(left_, t_->apply(cellwise(right_, x, d(), false)), d(), false);
}

Vec ConjugatedOperator::apply_adjoint(const Vec& x) const {
  return cellwise(right_, t_->apply_adjoint(cellwise(left_, x, d(), true)), d(), true);
}

void SumOperator::add(const LinearOperator& op, Complex coef) {
  if (!terms_.empty() && (op.cells() != cells() || op.d() != d())) throw UsageError("sum of mismatched operators");
  terms_.emplace_back(&op, coef);
}

Vec SumOperator::apply(const Vec& x) const {
  Vec y = Vec::Zero(x.size());
  for (const auto& [op, c] : terms_) y += c * op->apply(x);
  return y;
}

Vec SumOperator::apply_adjoint(const Vec& x) const {
  Vec y = Vec::Zero(x.size());
  for (const auto& [op, c] : terms_) y += std::conj(c) * op->apply_adjoint(x);
  return y;
}

DiscreteOperator assemble_dense(const LinearOperator& op) {
  const Eigen::Index n = op.dim();
  Mat m(n, n);
  for (Eigen::Index j = 0; j < n; ++j) m.col(j) = op.apply(Vec::Unit(n, j));
  return DiscreteOperator(op.cells(), op.d(), std::move(m), Provenance::Assembled);
}

Mat analyze_columns(const DyadicSystem& sys, const Mat& m, int d) {
  Mat out(m.rows(), m.cols());
  for (Eigen::Index j = 0; j < m.cols(); ++j) out.col(j) = analyze_raw(sys, m.col(j), d);
  return out;
}

Mat haar_matrix(const DyadicSystem& sys, const DiscreteOperator& t) {
  const Mat x = analyze_columns(sys, t.matrix(), t.d());
  const Mat y = analyze_columns(sys, x.transpose(), t.d());
  return y.transpose() / sys.cell_volume();
}

Mat matrix_pairing(const DyadicSystem& sys, const LinearOperator& t, const std::vector<Complex>& f,
                   const std::vector<Complex>& g) {
  const int d = t.d();
  Mat out(d, d);
  for (int j = 0; j < d; ++j) {
    Vec fe = Vec::Zero(t.dim());
    for (std::size_t c = 0; c < f.size(); ++c) fe(static_cast<Eigen::Index>(c) * d + j) = f[c];
    const Vec tf = t.apply(fe);
    for (int i = 0; i < d; ++i) {
      Complex s = 0;
      for (std::size_t c = 0; c < g.size(); ++c) s += tf(static_cast<Eigen::Index>(c) * d + i) * std::conj(g[c]);
      out(i, j) = s * sys.cell_volume();
    }
  }
  return out;
}

}  // namespace dmw
