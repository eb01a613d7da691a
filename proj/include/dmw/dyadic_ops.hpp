#pragma once

#include <vector>

#include "dmw/operators.hpp"
#include "dmw/weights.hpp"

namespace dmw {

/// sigma_I per cube (indexed by flat cube id); finest-level entries are unused.
struct SigmaSequence {
  int d = 1;
  std::vector<Mat> entries;

  static SigmaSequence constant(const DyadicSystem& sys, const Mat& m);
  /// sup_I ||<W>_I^{1/2} sigma_I <W>_I^{-1/2}|| over cubes above the finest level.
  double norm_w(const WeightCache& cache) const;
};

HaarOperator martingale_operator(const DyadicSystem& sys, const SigmaSequence& sigma);
VectorField martingale_transform(const DyadicSystem& sys, const VectorField& f, const SigmaSequence& sigma);

struct ShiftCoefficient {
  std::size_t L = 0, I = 0, J = 0;
  Signature eps = 1, eps_out = 1;
  Mat A;
};

inline constexpr double kShiftSlack = 1e-9;

/// Cancellative shift: S f = sum A^L_{I,J} <f, h_I^eps> h_J^eps_out with
/// I in D_m(L), J in D_n(L).
class HaarShift {
 public:
  HaarShift(const DyadicSystem& sys, int m, int n, int d, std::vector<ShiftCoefficient> coeffs,
            const WeightCache* check = nullptr, double slack = kShiftSlack);

  int m() const { return m_; }
  int n() const { return n_; }
  int d() const { return d_; }
  int complexity() const { return std::max(m_, n_) + 1; }
  const std::vector<ShiftCoefficient>& coeffs() const { return coeffs_; }
  const DyadicSystem& system() const { return *sys_; }

 private:
  const DyadicSystem* sys_;
  int m_, n_, d_;
  std::vector<ShiftCoefficient> coeffs_;
};

/// Largest ||<W>_L^{1/2} A <W>_L^{-1/2}|| * 2^{(m+n)p/2} over the coefficients.
double shift_normalization(const HaarShift& s, const WeightCache& cache);

HaarOperator shift_operator(const HaarShift& s);
VectorField apply_shift(const HaarShift& s, const VectorField& f);

/// Levels l in [0, N) with l = t + k q.
std::vector<int> slice_levels(int k, int t, int N);
HaarShift slice(const HaarShift& s, int t);

/// sigma_I = <W>_I^{-1/2} U_I <W>_I^{1/2} with Haar-random unitary U_I, so ||sigma||_{inf,W} = 1.
SigmaSequence random_sigma(const WeightCache& cache, Rng& rng);

/// Random shift with every admissible coefficient present. Saturated coefficients are
/// <W>_L^{-1/2} U <W>_L^{1/2} 2^{-(m+n)p/2}; otherwise that matrix is scaled by U(0,1).
HaarShift random_shift(const WeightCache& cache, int m, int n, Rng& rng, bool saturated = true);

VectorField paraproduct(const DyadicSystem& sys, const BmoSymbol& b, const VectorField& f);
VectorField adjoint_paraproduct(const DyadicSystem& sys, const BmoSymbol& b, const VectorField& f);

/// S_W f per cell.
std::vector<double> square_function(const WeightCache& cache, const VectorField& f);
/// M'_W f per cell over the cubes of every cached system.
std::vector<double> maximal_function(const VectorField& f, const std::vector<const WeightCache*>& caches);

}  // namespace dmw
