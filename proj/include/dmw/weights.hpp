#pragma once

#include <array>
#include <string>
#include <vector>

#include "dmw/dyadic.hpp"
#include "dmw/haar.hpp"
#include "dmw/linalg.hpp"

namespace dmw {

/// Piecewise-constant Hermitian positive definite d x d field on the finest cells.
class MatrixWeight {
 public:
  MatrixWeight() = default;
  MatrixWeight(int d, std::vector<Mat> blocks);

  static MatrixWeight identity(std::size_t cells, int d);
  static MatrixWeight scalar(const std::vector<double>& w);

  int d() const { return d_; }
  std::size_t cells() const { return blocks_.size(); }
  const Mat& block(std::size_t i) const { return blocks_[i]; }
  const Mat& inverse(std::size_t i) const { return inverse_[i]; }
  const Mat& sqrt(std::size_t i) const { return sqrt_[i]; }
  const Mat& inv_sqrt(std::size_t i) const { return inv_sqrt_[i]; }
  const std::vector<Mat>& blocks() const { return blocks_; }

  MatrixWeight inverse_weight() const;
  MatrixWeight scaled(double c) const;

 private:
  int d_ = 0;
  std::vector<Mat> blocks_, inverse_, sqrt_, inv_sqrt_;
};

struct CubeStats {
  Mat avg;              // <W>_I
  Mat avg_sqrt;         // <W>_I^{1/2}
  Mat avg_inv_sqrt;     // <W>_I^{-1/2}
  Mat inv_avg;          // <W^{-1}>_I
  Mat inv_avg_sqrt;     // <W^{-1}>_I^{1/2}
  Mat inv_avg_inv_sqrt; // <W^{-1}>_I^{-1/2}
  Eigensystem eig;      // of <W>_I
  double a2 = 1.0;      // ||<W>^{1/2} <W^{-1}>^{1/2}||
};

/// Per-cube averages of W and W^{-1}. Holds a copy of the weight and a
/// reference to the system, which must outlive the cache.
class WeightCache {
 public:
  WeightCache(const DyadicSystem& sys, const MatrixWeight& w, int threads = 1);

  const CubeStats& operator[](std::size_t cube) const { return stats_[cube]; }
  std::size_t size() const { return stats_.size(); }
  const DyadicSystem& system() const { return *sys_; }
  const MatrixWeight& weight() const { return w_; }

 private:
  const DyadicSystem* sys_;
  MatrixWeight w_;
  std::vector<CubeStats> stats_;
};

struct WeightCharacteristics {
  double a2 = 1.0;         // unsquared sup over every supplied system
  double a2_dyadic = 1.0;  // unsquared sup over the first system
  std::size_t argmax_system = 0;
  std::size_t argmax_cube = 0;
  std::string argmax_label;

  double squared() const { return a2 * a2; }
  double dyadic_squared() const { return a2_dyadic * a2_dyadic; }
};

WeightCharacteristics a2_characteristic(const std::vector<const WeightCache*>& caches);
WeightCharacteristics a2_characteristic(const MatrixWeight& w, const std::vector<const DyadicSystem*>& systems);

/// Deterministic nested direction sample: the first n entries never change as n grows.
std::vector<Vec> sphere_directions(int d, int count);

/// Discrete Fujii-Wilson constant of a positive scalar weight on one system.
double fujii_wilson(const DyadicSystem& sys, const std::vector<double>& w);

/// Directional A_inf estimate: max over `directions` sampled directions (each with
/// 8 phases when d > 1) and every cached eigenvector.
double ainf_characteristic(const WeightCache& cache, int directions);
double ainf_characteristic(const MatrixWeight& w, int directions, const DyadicSystem& sys);

struct AinfConvergence {
  std::vector<int> counts;
  std::vector<double> sampled;  // sampled directions only
  double with_eigenvectors = 0.0;
};
AinfConvergence ainf_convergence(const WeightCache& cache, int max_directions);

/// ||f||_{L^2(W)}.
double weighted_norm(const DyadicSystem& sys, const VectorField& f, const MatrixWeight& w);

struct BmoSymbol {
  MatrixField blocks;
  MatrixHaar haar;

  static BmoSymbol from_field(const DyadicSystem& sys, MatrixField b);
  static BmoSymbol from_haar(const DyadicSystem& sys, MatrixHaar h);
  int d() const { return blocks.d; }
};

struct BmoNorms {
  double carleson = 0.0;
  double oscillation = 0.0;
  std::size_t carleson_argmax = 0;
  std::size_t oscillation_argmax = 0;
  double ratio() const { return carleson > 0 ? oscillation / carleson : 0.0; }
};

BmoNorms bmo_w_norm(const BmoSymbol& b, const WeightCache& cache);
/// sqrt(sup_I |I|^{-1} sum_{x in I} ||W^{1/2}(x)(B(x) - <B>_I)<W>_I^{-1/2}||^2 cellvol).
double bmo_oscillation(const MatrixField& b, const WeightCache& cache, std::size_t* argmax = nullptr);

// Weight generators.
struct WeightGenerator {
  std::string kind = "identity";  // identity | constant | power | rotating | loghermitian
  double strength = 0.0;          // alpha (power) or eigenvalue log-amplitude
  double twist = 1.0;             // rotation turns across the unit interval
  std::array<double, 3> center{0.5, 0.5, 0.5};
  int modes = 3;
  std::uint64_t seed = 0;
};

MatrixWeight generate_weight(const DyadicSystem& sys, int d, const WeightGenerator& gen);

struct CalibratedWeight {
  MatrixWeight weight;
  WeightGenerator generator;
  double achieved = 1.0;
  bool reached = false;
};

/// Bisects on `strength` so that the dyadic characteristic of the first system
/// (squared when `squared`) hits `target` within `rel_tol`.
CalibratedWeight calibrate_weight(const DyadicSystem& sys, int d, WeightGenerator gen, double target,
                                  bool squared, double rel_tol = 0.1);

}  // namespace dmw
