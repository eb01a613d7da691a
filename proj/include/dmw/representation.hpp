#pragma once

#include <array>
#include <optional>
#include <vector>

#include "dmw/cz.hpp"
#include "dmw/dyadic_ops.hpp"

namespace dmw {

/// T - Pi_{T1} - (Pi_{T*1})^*.
DiscreteOperator form_tilde(const DiscreteOperator& t, const DyadicSystem& sys);

/// max over cubes, signatures and columns of |sum_cells (T h_I e_j)(x) cellvol|.
double tilde_mean_defect(const DiscreteOperator& t, const DyadicSystem& sys);

enum class GammaCase { In = 0, Equal = 1, Out = 2, Near = 3 };
const char* to_string(GammaCase c);

/// Case of the pair (small, large) with l(small) <= l(large).
GammaCase classify_gamma(const DyadicSystem& sys, std::size_t small, std::size_t large, double gamma);

enum class Smaller { I, J };

struct TildeCoefficient {
  std::size_t I = 0, J = 0, L = 0;
  int m = 0, n = 0;
  Signature eps = 1, eps_out = 1;
  Mat raw;          // <T h_I, h_J>
  Mat conjugated;   // <W>_L^{1/2} raw <W>_L^{-1/2}
  GammaCase gamma_case = GammaCase::In;
  Smaller smaller = Smaller::I;
};

struct ExtractOptions {
  GoodnessParams goodness;
  bool filter_good = true;  // drop pairs whose smaller cube is bad
  double delta = 1.0;       // kernel smoothness exponent used in decay_fit
};

struct ShiftBundle {
  int m = 0, n = 0;
  std::vector<TildeCoefficient> coeffs;
  double tau = 0.0;        // max ||T^L_{I,J}|| |L| / sqrt(|I||J|)
  double decay_fit = 0.0;  // tau * 2^{(m+n) delta / 4}
  std::array<std::size_t, 4> case_histogram{};
  std::optional<HaarShift> shift;  // coefficients divided by tau
};

std::vector<ShiftBundle> extract_shifts(const DiscreteOperator& tilde, const WeightCache& cache,
                                        const ExtractOptions& opts = {});

/// sum over bundles of tau <S f, g>.
Complex bundles_pairing(const std::vector<ShiftBundle>& bundles, const VectorField& f, const VectorField& g);

struct CaseRow {
  GammaCase gamma_case = GammaCase::In;
  int N = 0;
  std::size_t count = 0;
  double max_first = 0.0;   // ||T^L|| D^{p+delta} / (l(I) l(J))^{(p+delta)/2}
  double max_second = 0.0;  // ||T^L|| |L| / sqrt(|I||J|) 2^{(m+n)delta/4}
};

struct CaseReport {
  int N = 0;
  std::array<CaseRow, 4> rows{};
};

CaseReport verify_lemma_envelope(const std::vector<ShiftBundle>& bundles, const DyadicSystem& sys, double delta);

/// True when no case maximum grows by more than `tol` from `coarse` to `fine`.
bool envelope_trend_ok(const CaseReport& coarse, const CaseReport& fine, double tol = 0.1);

/// Right-hand side of the far-pair chain for disjoint I, J:
/// sum_{x in J, y in I} ||<W>_L^{1/2}(K(x,y) - K(x,c_I))<W>_L^{-1/2}|| |h_I(y)| |h_J(x)| cellvol^2.
double gamma_out_chain(const KernelSpec& k, const WeightCache& cache, std::size_t I, std::size_t J, std::size_t L);

/// Per-level probability that a cube is good, with a zero check on levels below N.
std::vector<double> truncated_pi_good(const GridSpec& spec, const GoodnessParams& params);

/// sum over Haar pairs of <g,h_J>^* <T h_I, h_J> <f,h_I>, weighted by 1/pi(level of the smaller cube)
/// when the smaller cube is good and by 0 otherwise. An empty `pi` disables the filter.
Complex expansion_pairing(const DyadicSystem& sys, const DiscreteOperator& t, const VectorField& f,
                          const VectorField& g, const GoodnessParams& params, const std::vector<double>& pi);

struct ExpansionResult {
  Complex estimate;
  Complex exact;
  double ci_re = 0.0;  // half widths of the 95% intervals
  double ci_im = 0.0;
  std::size_t grids = 0;
  std::vector<double> pi_good;
  std::vector<Complex> samples;
  bool covers_exact() const {
    return std::abs(estimate.real() - exact.real()) <= ci_re && std::abs(estimate.imag() - exact.imag()) <= ci_im;
  }
};

ExpansionResult randomized_expansion(const DiscreteOperator& t, const VectorField& f, const VectorField& g,
                                     const GridSpec& spec, std::size_t grids, std::uint64_t seed,
                                     const GoodnessParams& params, int threads = 1);

struct BmoExtraction {
  double t1 = 0.0;      // oscillation norm of T1 against W
  double tstar1 = 0.0;  // oscillation norm of T*1 against W^{-1}
  std::size_t t1_argmax = 0, tstar1_argmax = 0;
};

BmoExtraction extract_bmo_from_T(const DiscreteOperator& t, const WeightCache& cache,
                                 const WeightCache& inverse_cache);

/// P~_I f = <f,h_I> h_I + sum_{J strictly inside I} <h_I>_{I_J} <f,h_J> h_J.
HaarOperator ptilde_operator(const DyadicSystem& sys, int d, std::size_t cube, Signature eps);

}  // namespace dmw
