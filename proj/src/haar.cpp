#include "dmw/haar.hpp"

#include <cmath>

namespace dmw {

namespace {

void check_comps(const DyadicSystem& sys, Eigen::Index size, int comps) {
  if (comps < 1 || size != static_cast<Eigen::Index>(sys.cell_count()) * comps)
    throw UsageError("field size does not match the dyadic system");
}

Vec pack(const std::vector<Mat>& blocks, int d) {
  const Eigen::Index dd = d * d;
  Vec v(static_cast<Eigen::Index>(blocks.size()) * dd);
  for (std::size_t i = 0; i < blocks.size(); ++i)
    v.segment(static_cast<Eigen::Index>(i) * dd, dd) = blocks[i].reshaped();
  return v;
}

std::vector<Mat> unpack(const Vec& v, int d) {
  const Eigen::Index dd = d * d;
  std::vector<Mat> out(static_cast<std::size_t>(v.size() / dd));
  for (std::size_t i = 0; i < out.size(); ++i)
    out[i] = v.segment(static_cast<Eigen::Index>(i) * dd, dd).reshaped(d, d);
  return out;
}

}  // namespace

VectorField VectorField::zeros(std::size_t cells, int d) {
  VectorField f;
  f.d = d;
  f.values = Vec::Zero(static_cast<Eigen::Index>(cells) * d);
  return f;
}

MatrixField MatrixField::constant(std::size_t cells, const Mat& m) {
  MatrixField B;
  B.d = static_cast<int>(m.rows());
  B.blocks.assign(cells, m);
  return B;
}

std::size_t haar_index(const DyadicSystem& sys, std::size_t cube, Signature eps) {
  if (eps == 0) {
    if (cube != 0) throw UsageError("only the root carries a mean slot");
    return 0;
  }
  if (eps >= static_cast<Signature>(1 << sys.p())) throw UsageError("signature out of range");
  if (sys.level_of(cube) >= sys.N()) throw ResolutionError("cancellative Haar function at the finest level");
  return 1 + cube * static_cast<std::size_t>(signature_count(sys.p())) + (eps - 1);
}

HaarLabel haar_label(const DyadicSystem& sys, std::size_t slot) {
  if (slot == 0) return {0, 0};
  const std::size_t s = static_cast<std::size_t>(signature_count(sys.p()));
  return {(slot - 1) / s, static_cast<Signature>((slot - 1) % s + 1)};
}

std::vector<double> haar_function(const DyadicSystem& sys, std::size_t cube, Signature eps) {
  const int k = sys.level_of(cube);
  if (eps != 0 && k >= sys.N())
    throw ResolutionError("h_I^eps is not resolved for " + sys.cube_label(cube));
  std::vector<double> h(sys.cell_count(), 0.0);
  const double amp = 1.0 / std::sqrt(sys.volume(k));
  if (eps == 0) {
    for (std::size_t c : sys.cells_of(cube)) h[c] = amp;
    return h;
  }
  for (unsigned b = 0; b < static_cast<unsigned>(sys.children_per_cube()); ++b) {
    const double v = amp * haar_sign(eps, b);
    for (std::size_t c : sys.cells_of(sys.child(cube, b))) h[c] = v;
  }
  return h;
}

std::vector<double> haar_function(const DyadicSystem& sys, const DyadicCube& cube, Signature eps) {
  return haar_function(sys, sys.flat_id(cube), eps);
}

Vec cube_averages_raw(const DyadicSystem& sys, const Vec& cells, int comps) {
  check_comps(sys, cells.size(), comps);
  const int N = sys.N();
  Vec avg(static_cast<Eigen::Index>(sys.cube_count()) * comps);
  avg.segment(static_cast<Eigen::Index>(sys.level_offset(N)) * comps, cells.size()) = cells;
  const double inv = 1.0 / sys.children_per_cube();
  for (int k = N - 1; k >= 0; --k) {
    for (std::size_t I = sys.level_offset(k); I < sys.level_offset(k + 1); ++I) {
      auto out = avg.segment(static_cast<Eigen::Index>(I) * comps, comps);
      out.setZero();
      for (unsigned b = 0; b < static_cast<unsigned>(sys.children_per_cube()); ++b)
        out += avg.segment(static_cast<Eigen::Index>(sys.child(I, b)) * comps, comps);
      out *= inv;
    }
  }
  return avg;
}

Vec analyze_raw(const DyadicSystem& sys, const Vec& cells, int comps) {
  const Vec avg = cube_averages_raw(sys, cells, comps);
  const int N = sys.N();
  const int nsig = signature_count(sys.p());
  const unsigned nchild = static_cast<unsigned>(sys.children_per_cube());
  Vec out = Vec::Zero(cells.size());
  out.head(comps) = avg.head(comps);
  for (std::size_t I = 0; I < sys.level_offset(N); ++I) {
    const double scale = std::sqrt(sys.volume(sys.level_of(I))) / nchild;
    for (int e = 1; e <= nsig; ++e) {
      auto c = out.segment(static_cast<Eigen::Index>(1 + I * nsig + (e - 1)) * comps, comps);
      for (unsigned b = 0; b < nchild; ++b)
        c += static_cast<double>(haar_sign(static_cast<Signature>(e), b)) *
             avg.segment(static_cast<Eigen::Index>(sys.child(I, b)) * comps, comps);
      c *= scale;
    }
  }
  return out;
}

Vec synthesize_raw(const DyadicSystem& sys, const Vec& coeffs, int comps) {
  check_comps(sys, coeffs.size(), comps);
  const int N = sys.N();
  const int nsig = signature_count(sys.p());
  const unsigned nchild = static_cast<unsigned>(sys.children_per_cube());
  Vec avg(static_cast<Eigen::Index>(sys.cube_count()) * comps);
  avg.head(comps) = coeffs.head(comps);
  for (std::size_t I = 0; I < sys.level_offset(N); ++I) {
    const double amp = 1.0 / std::sqrt(sys.volume(sys.level_of(I)));
    const auto parent = avg.segment(static_cast<Eigen::Index>(I) * comps, comps);
    for (unsigned b = 0; b < nchild; ++b) {
      Vec v = parent;
      for (int e = 1; e <= nsig; ++e)
        v += (amp * haar_sign(static_cast<Signature>(e), b)) *
             coeffs.segment(static_cast<Eigen::Index>(1 + I * nsig + (e - 1)) * comps, comps);
      avg.segment(static_cast<Eigen::Index>(sys.child(I, b)) * comps, comps) = v;
    }
  }
  return avg.segment(static_cast<Eigen::Index>(sys.level_offset(N)) * comps,
                     static_cast<Eigen::Index>(sys.cell_count()) * comps);
}

HaarCoefficients analyze(const DyadicSystem& sys, const VectorField& f) {
  return {f.d, analyze_raw(sys, f.values, f.d)};
}

VectorField synthesize(const DyadicSystem& sys, const HaarCoefficients& c) {
  return {c.d, synthesize_raw(sys, c.values, c.d)};
}

Vec average(const DyadicSystem& sys, const VectorField& f, std::size_t cube) {
  check_comps(sys, f.values.size(), f.d);
  Vec s = Vec::Zero(f.d);
  const auto cells = sys.cells_of(cube);
  for (std::size_t c : cells) s += f.cell(c);
  return s / static_cast<double>(cells.size());
}

Vec average(const DyadicSystem& sys, const VectorField& f, const DyadicCube& cube) {
  return average(sys, f, sys.flat_id(cube));
}

Complex inner(const DyadicSystem& sys, const VectorField& f, const VectorField& g) {
  if (f.values.size() != g.values.size()) throw UsageError("inner product of mismatched fields");
  return g.values.dot(f.values) * sys.cell_volume();
}

double norm_sq(const DyadicSystem& sys, const VectorField& f) {
  return f.values.squaredNorm() * sys.cell_volume();
}

MatrixHaar analyze_matrix(const DyadicSystem& sys, const MatrixField& B) {
  return {B.d, unpack(analyze_raw(sys, pack(B.blocks, B.d), B.d * B.d), B.d)};
}

MatrixField synthesize_matrix(const DyadicSystem& sys, const MatrixHaar& B) {
  return {B.d, unpack(synthesize_raw(sys, pack(B.blocks, B.d), B.d * B.d), B.d)};
}

std::vector<Mat> matrix_cube_averages(const DyadicSystem& sys, const MatrixField& B) {
  return unpack(cube_averages_raw(sys, pack(B.blocks, B.d), B.d * B.d), B.d);
}

}  // namespace dmw
