#include "dmw/dyadic_ops.hpp"

#include <cmath>
#include <sstream>

namespace dmw {

namespace {

void add_block(std::vector<Eigen::Triplet<Complex>>& t, std::size_t row_slot, std::size_t col_slot, const Mat& a) {
  const int d = static_cast<int>(a.rows());
  for (int i = 0; i < d; ++i)
    for (int j = 0; j < d; ++j)
      if (a(i, j) != Complex(0.0))
        t.emplace_back(static_cast<Eigen::Index>(row_slot) * d + i, static_cast<Eigen::Index>(col_slot) * d + j, a(i, j));
}

SparseMat from_triplets(const DyadicSystem& sys, int d, const std::vector<Eigen::Triplet<Complex>>& t) {
  const auto n = static_cast<Eigen::Index>(sys.cell_count()) * d;
  SparseMat s(n, n);
  s.setFromTriplets(t.begin(), t.end());
  return s;
}

}  // namespace

SigmaSequence SigmaSequence::constant(const DyadicSystem& sys, const Mat& m) {
  SigmaSequence s;
  s.d = static_cast<int>(m.rows());
  s.entries.assign(sys.cube_count(), m);
  return s;
}

double SigmaSequence::norm_w(const WeightCache& cache) const {
  const DyadicSystem& sys = cache.system();
  double best = 0.0;
  for (std::size_t I = 0; I < sys.level_offset(sys.N()); ++I)
    best = std::max(best, op_norm(cache[I].avg_sqrt * entries[I] * cache[I].avg_inv_sqrt));
  return best;
}

HaarOperator martingale_operator(const DyadicSystem& sys, const SigmaSequence& sigma) {
  if (sigma.entries.size() != sys.cube_count()) throw UsageError("sigma does not match the system");
  const int nsig = signature_count(sys.p());
  std::vector<Eigen::Triplet<Complex>> t;
  for (std::size_t I = 0; I < sys.level_offset(sys.N()); ++I)
    for (int e = 1; e <= nsig; ++e) {
      const std::size_t slot = 1 + I * nsig + (e - 1);
      add_block(t, slot, slot, sigma.entries[I]);
    }
  return HaarOperator(sys, sigma.d, from_triplets(sys, sigma.d, t));
}

VectorField martingale_transform(const DyadicSystem& sys, const VectorField& f, const SigmaSequence& sigma) {
  return martingale_operator(sys, sigma)(f);
}

HaarShift::HaarShift(const DyadicSystem& sys, int m, int n, int d, std::vector<ShiftCoefficient> coeffs,
                     const WeightCache* check, double slack)
    : sys_(&sys), m_(m), n_(n), d_(d), coeffs_(std::move(coeffs)) {
  if (m < 0 || n < 0) throw ValidationError("shift generations must be nonnegative");
  const double bound = std::pow(2.0, -(m + n) * sys.p() / 2.0);
  const unsigned nsig = static_cast<unsigned>(signature_count(sys.p()));
  for (const auto& c : coeffs_) {
    const int kL = sys.level_of(c.L);
    std::ostringstream where;
    where << "coefficient L=" << sys.cube_label(c.L) << " I=" << sys.cube_label(c.I) << " J=" << sys.cube_label(c.J);
    if (sys.level_of(c.I) != kL + m || sys.level_of(c.J) != kL + n || !sys.contains(c.L, c.I) ||
        !sys.contains(c.L, c.J))
      throw ValidationError("shift " + where.str() + " is not in D_m(L) x D_n(L)");
    if (sys.level_of(c.I) >= sys.N() || sys.level_of(c.J) >= sys.N())
      throw ResolutionError("shift " + where.str() + " is not resolved at the finest level");
    if (c.eps < 1 || c.eps > nsig || c.eps_out < 1 || c.eps_out > nsig)
      throw ValidationError("shift " + where.str() + " has a non-cancellative signature");
    if (c.A.rows() != d || c.A.cols() != d) throw ValidationError("shift " + where.str() + " has the wrong block size");
    if (check) {
      const auto& s = (*check)[c.L];
      const double v = op_norm(s.avg_sqrt * c.A * s.avg_inv_sqrt);
      if (v > bound * (1.0 + slack))
        throw ValidationError("shift " + where.str() + " violates the W-normalization (" + std::to_string(v) + " > " +
                              std::to_string(bound) + ")");
    }
  }
}

double shift_normalization(const HaarShift& s, const WeightCache& cache) {
  double best = 0.0;
  const double scale = std::pow(2.0, (s.m() + s.n()) * s.system().p() / 2.0);
  for (const auto& c : s.coeffs()) best = std::max(best, op_norm(cache[c.L].avg_sqrt * c.A * cache[c.L].avg_inv_sqrt));
  return best * scale;
}

HaarOperator shift_operator(const HaarShift& s) {
  const DyadicSystem& sys = s.system();
  std::vector<Eigen::Triplet<Complex>> t;
  for (const auto& c : s.coeffs()) add_block(t, haar_index(sys, c.J, c.eps_out), haar_index(sys, c.I, c.eps), c.A);
  return HaarOperator(sys, s.d(), from_triplets(sys, s.d(), t));
}

VectorField apply_shift(const HaarShift& s, const VectorField& f) { return shift_operator(s)(f); }

std::vector<int> slice_levels(int k, int t, int N) {
  if (k < 1 || t < 0 || t >= k) throw ValidationError("slice index out of range");
  std::vector<int> out;
  for (int l = t; l < N; l += k) out.push_back(l);
  return out;
}

HaarShift slice(const HaarShift& s, int t) {
  const int k = s.complexity();
  if (t < 0 || t >= k) throw ValidationError("slice index out of range");
  std::vector<ShiftCoefficient> kept;
  for (const auto& c : s.coeffs())
    if (s.system().level_of(c.L) % k == t) kept.push_back(c);
  return HaarShift(s.system(), s.m(), s.n(), s.d(), std::move(kept));
}

SigmaSequence random_sigma(const WeightCache& cache, Rng& rng) {
  const DyadicSystem& sys = cache.system();
  SigmaSequence s;
  s.d = cache.weight().d();
  s.entries.assign(sys.cube_count(), Mat::Zero(s.d, s.d));
  for (std::size_t I = 0; I < sys.level_offset(sys.N()); ++I)
    s.entries[I] = cache[I].avg_inv_sqrt * random_unitary(s.d, rng) * cache[I].avg_sqrt;
  return s;
}

HaarShift random_shift(const WeightCache& cache, int m, int n, Rng& rng, bool saturated) {
  const DyadicSystem& sys = cache.system();
  const int d = cache.weight().d();
  const int nsig = signature_count(sys.p());
  const double bound = std::pow(2.0, -(m + n) * sys.p() / 2.0);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  std::vector<ShiftCoefficient> coeffs;
  for (int l = 0; l + std::max(m, n) < sys.N(); ++l)
    for (std::size_t L = sys.level_offset(l); L < sys.level_offset(l + 1); ++L) {
      const auto Is = sys.descendants(L, m);
      const auto Js = sys.descendants(L, n);
      for (std::size_t I : Is)
        for (std::size_t J : Js)
          for (int e = 1; e <= nsig; ++e)
            for (int e2 = 1; e2 <= nsig; ++e2) {
              ShiftCoefficient c;
              c.L = L;
              c.I = I;
              c.J = J;
              c.eps = static_cast<Signature>(e);
              c.eps_out = static_cast<Signature>(e2);
              c.A = cache[L].avg_inv_sqrt * random_unitary(d, rng) * cache[L].avg_sqrt * bound;
              if (!saturated) c.A *= u(rng);
              coeffs.push_back(std::move(c));
            }
    }
  return HaarShift(sys, m, n, d, std::move(coeffs), &cache);
}

VectorField paraproduct(const DyadicSystem& sys, const BmoSymbol& b, const VectorField& f) {
  return ParaproductOperator(sys, b.haar)(f);
}

VectorField adjoint_paraproduct(const DyadicSystem& sys, const BmoSymbol& b, const VectorField& f) {
  return ParaproductOperator(sys, b.haar, true)(f);
}

std::vector<double> square_function(const WeightCache& cache, const VectorField& f) {
  const DyadicSystem& sys = cache.system();
  const int d = f.d, N = sys.N();
  const int nsig = signature_count(sys.p());
  const Vec c = analyze_raw(sys, f.values, d);
  std::vector<double> acc(sys.cube_count(), 0.0);
  for (int k = 0; k < N; ++k)
    for (std::size_t I = sys.level_offset(k); I < sys.level_offset(k + 1); ++I) {
      double s = k > 0 ? acc[sys.parent(I)] : 0.0;
      for (int e = 1; e <= nsig; ++e) {
        const std::size_t slot = 1 + I * nsig + (e - 1);
        s += (cache[I].avg_sqrt * c.segment(static_cast<Eigen::Index>(slot) * d, d)).squaredNorm() / sys.volume(k);
      }
      acc[I] = s;
    }
  std::vector<double> out(sys.cell_count());
  for (std::size_t x = 0; x < out.size(); ++x) out[x] = std::sqrt(acc[sys.parent(sys.finest_cube_of_cell(x))]);
  return out;
}

std::vector<double> maximal_function(const VectorField& f, const std::vector<const WeightCache*>& caches) {
  if (caches.empty()) throw UsageError("maximal_function needs at least one system");
  std::vector<double> out(f.cells(), 0.0);
  for (const WeightCache* cache : caches) {
    const DyadicSystem& sys = cache->system();
    std::vector<double> val(sys.cube_count(), 0.0);
    for (std::size_t I = 0; I < sys.cube_count(); ++I) {
      double s = 0.0;
      for (std::size_t x : sys.cells_of(I)) s += ((*cache)[I].avg_sqrt * f.cell(x)).norm();
      val[I] = s * sys.cell_volume() / sys.volume(sys.level_of(I));
    }
    for (std::size_t x = 0; x < out.size(); ++x) {
      std::size_t q = sys.finest_cube_of_cell(x);
      while (q != DyadicSystem::npos) {
        out[x] = std::max(out[x], val[q]);
        q = sys.parent(q);
      }
    }
  }
  return out;
}

}  // namespace dmw
