#pragma once

#include <string>
#include <vector>

#include "dmw/dyadic_ops.hpp"
#include "dmw/weights.hpp"

namespace dmw {

struct NormOptions {
  double tol = 1e-10;  // relative change of the Rayleigh quotient
  int max_iter = 2000;
  int restarts = 3;
  std::uint64_t seed = 1;
};

struct NormEstimate {
  double value = 0.0;
  int iterations = 0;
  double residual = 0.0;
  bool converged = false;
  Vec witness;  // unit vector with ||A witness|| = value
};

/// Largest singular value of A by power iteration on A^*A (max over restarts).
NormEstimate operator_norm(const LinearOperator& a, const NormOptions& opts = {});

/// ||T||_{L^2(W) -> L^2(W)} = ||W^{1/2} T W^{-1/2}||.
NormEstimate weighted_operator_norm(const LinearOperator& t, const MatrixWeight& w, const NormOptions& opts = {});

struct LinearFit {
  double slope = 0.0, intercept = 0.0;
  double slope_se = 0.0;
  std::size_t n = 0;
  bool insufficient = true;
  double ci_low() const { return slope - 1.959963984540054 * slope_se; }
  double ci_high() const { return slope + 1.959963984540054 * slope_se; }
};

LinearFit linear_fit(const std::vector<double>& x, const std::vector<double>& y);
/// Fit of log y against log x over positive pairs.
LinearFit loglog_fit(const std::vector<double>& x, const std::vector<double>& y);

struct CurveRow {
  double X = 1.0;     // squared dyadic A2 characteristic
  double Xinf = 1.0;  // weak A_inf characteristic
  double norm = 0.0;
  std::string op;
  int k = 0;
  std::uint64_t seed = 0;
  bool converged = true;
  bool reached = true;  // weight generator hit the target X
};

struct SweepCurve {
  std::vector<CurveRow> rows;
  LinearFit fit;  // log norm against log X (or k)
};

struct SweepOptions {
  int d = 2;
  WeightGenerator generator;  // kind and shape; strength is calibrated
  std::size_t sigma_samples = 8;
  std::uint64_t seed = 1;
  int threads = 1;
  int ainf_directions = 64;
  NormOptions norm;
};

/// Empirical N(X): max ||T_sigma||_{L^2(W)} over random sigma with ||sigma||_{inf,W} = 1.
SweepCurve sweep_N_hat(const DyadicSystem& sys, const std::vector<double>& X_targets, const SweepOptions& opts);

/// Max ||S||_{L^2(W)} over random saturated shifts of complexity k (m = k-1, n <= k-1, orientation random).
SweepCurve shift_complexity_scaling(const WeightCache& cache, const std::vector<int>& k_values, std::size_t trials,
                                    std::uint64_t seed, const NormOptions& norm = {}, int threads = 1);

struct SliceTriangle {
  double whole = 0.0;
  std::vector<double> slices;
  double slice_sum() const;
};

SliceTriangle slice_triangle(const HaarShift& s, const MatrixWeight& w, const NormOptions& norm = {});

struct SliceIdentity {
  Complex lhs, rhs;
  double gap = 0.0;
  double rank_one_deviation = 0.0;  // max | ||<W>^{1/2}(l_j^{-1/2} e_j (x) l_i^{1/2} e_i)<W>^{-1/2}|| - 1 |
};

SliceIdentity slice_identity_check(const HaarShift& s, const WeightCache& cache, const VectorField& f,
                                   const VectorField& g, int t);

struct LambdaTable {
  int k = 0;
  Mat lambda;  // (K, L) over D_k(I0) in index order
  double sum_abs = 0.0;
  double lhs12 = 0.0;  // |I0| sum |lambda_KL|
  double lhs13 = 0.0;  // sum_I |<sigma(<f>_{I+} - <f>_{I-}), <g>_{I+} - <g>_{I-}>| |I|
  double rhs13 = 0.0;  // 4 sum_I |<sigma <f,h_I>, <g,h_I>>|
  double dynamics_defect = 0.0;  // max deviation of A_I from the mean of its children
  double ratio() const { return rhs13 > 0.0 ? lhs12 / rhs13 : 0.0; }
};

/// p = 1 only. sigma must satisfy ||<W>_{I0}^{1/2} sigma <W>_{I0}^{-1/2}|| <= 1.
LambdaTable lambda_kl_table(const WeightCache& cache, std::size_t I0, int k, const VectorField& f,
                            const VectorField& g, const Mat& sigma);

struct RatioRow {
  double X = 1.0, Xinf = 1.0;
  double square = 0.0;   // ||S_W||_{L^2(W) -> L^2}
  double maximal = 0.0;  // lower bound for ||M'_W||_{L^2(W) -> L^2}
  double reference = 1.0;  // sqrt(X Xinf)
  bool reached = true;
};

/// Exact ||S_W||_{L^2(W)->L^2} (a quadratic form) by power iteration.
NormEstimate square_function_norm(const WeightCache& cache, const NormOptions& opts = {});
/// max ||M'_W f|| / ||f||_{L^2(W)} over indicator-type test fields and random fields.
double maximal_function_ratio(const WeightCache& cache, std::size_t random_trials, std::uint64_t seed);

std::vector<RatioRow> ratio_curves(const DyadicSystem& sys, const std::vector<double>& X_targets,
                                   const SweepOptions& opts);

}  // namespace dmw
