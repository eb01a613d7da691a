#pragma once

#include <array>
#include <cstdint>
#include <optional>
#include <string>
#include <vector>

namespace dmw {

enum class Topology { Torus, ZeroExtension };

const char* to_string(Topology t);
Topology topology_from_string(const std::string& name);

struct GridSpec {
  int p = 1;
  int N = 4;
  Topology topology = Topology::Torus;
  std::uint64_t seed = 0;
  // Largest admissible number of finest cells.
  std::size_t cell_cap = std::size_t{1} << 22;

  void validate() const;
  std::size_t cells() const { return std::size_t{1} << (N * p); }
};

/// Bits omega_i in {0,1}^p for levels i = 1..N, stored row-major (level, axis).
struct RandomShift {
  int p = 1;
  int N = 0;
  std::vector<std::uint8_t> bits;
  std::uint64_t seed = 0;

  static RandomShift zero(int p, int N);
  static RandomShift sample(int p, int N, std::uint64_t seed);
  int bit(int level, int axis) const { return bits[static_cast<std::size_t>((level - 1) * p + axis)]; }
  bool is_zero() const;
};

struct GoodnessParams {
  int r = 2;
  double delta = 1.0;
  double gamma(int p) const { return delta / (4.0 * (delta + p)); }
  void validate() const;
};

using Index3 = std::array<std::int64_t, 3>;

struct DyadicCube {
  int level = 0;
  Index3 index{0, 0, 0};
  std::uint64_t grid_id = 0;

  bool operator==(const DyadicCube&) const = default;
};

/// A truncated dyadic system: levels 0..N over the unit cube, optionally
/// translated by a random shift (torus only). Cubes are numbered
/// level-major, index-lexicographic; the finest level is never moved.
class DyadicSystem {
 public:
  explicit DyadicSystem(const GridSpec& spec, std::optional<RandomShift> shift = std::nullopt);

  const GridSpec& spec() const { return spec_; }
  const RandomShift& shift() const { return shift_; }
  int p() const { return spec_.p; }
  int N() const { return spec_.N; }
  Topology topology() const { return spec_.topology; }
  std::uint64_t grid_id() const { return grid_id_; }

  std::size_t cell_count() const { return spec_.cells(); }
  std::size_t cube_count() const { return offsets_.back(); }
  std::size_t level_offset(int level) const { return offsets_[static_cast<std::size_t>(level)]; }
  std::size_t level_size(int level) const { return std::size_t{1} << (level * spec_.p); }
  int children_per_cube() const { return 1 << spec_.p; }

  double side(int level) const;
  double volume(int level) const;
  double cell_volume() const { return volume(spec_.N); }

  int level_of(std::size_t flat) const;
  std::size_t flat_id(const DyadicCube& cube) const;
  DyadicCube cube(std::size_t flat) const;
  std::string cube_label(std::size_t flat) const;
  std::string cube_label(const DyadicCube& c) const { return cube_label(flat_id(c)); }

  /// Child at position bits b (bit a set = upper half along axis a).
  std::size_t child(std::size_t flat, unsigned b) const;
  /// Returns npos for the root.
  std::size_t parent(std::size_t flat) const { return parent_[flat]; }
  std::size_t ancestor(std::size_t flat, int level) const;
  /// Descendants `generations` levels below, in flat-id order.
  std::vector<std::size_t> descendants(std::size_t flat, int generations) const;
  /// Position bits of `flat` inside its parent.
  unsigned child_position(std::size_t flat) const { return position_[flat]; }

  /// Lower corner in units of 2^{-N} (wrapped into [0, 2^N) on the torus).
  const std::int64_t* corner(std::size_t flat) const { return &corners_[flat * 3]; }
  std::int64_t side_units(int level) const { return std::int64_t{1} << (spec_.N - level); }

  bool contains(std::size_t outer, std::size_t inner) const;
  /// Finest cells of the cube, in increasing cell order.
  std::vector<std::size_t> cells_of(std::size_t flat) const;
  std::size_t finest_cube_of_cell(std::size_t cell) const { return offsets_[spec_.N] + cell; }
  /// Cell index of a lattice coordinate (each axis in [0, 2^N)).
  std::size_t cell_index(const Index3& units) const;
  /// Cell center in [0,1)^p.
  std::array<double, 3> cell_center(std::size_t cell) const;

  /// Euclidean distance between closed cubes, per-axis circular on the torus.
  double distance(std::size_t a, std::size_t b) const;
  double long_distance(std::size_t a, std::size_t b) const;
  /// dist(I, boundary of J) for I inside J; +inf for the torus root.
  double boundary_distance(std::size_t inner, std::size_t outer) const;

  bool is_good(std::size_t flat, const GoodnessParams& params) const;
  std::optional<std::size_t> minimal_common_ancestor(std::size_t a, std::size_t b) const;

  static constexpr std::size_t npos = static_cast<std::size_t>(-1);

 private:
  void check(std::size_t flat) const;

  GridSpec spec_;
  RandomShift shift_;
  std::uint64_t grid_id_;
  std::vector<std::size_t> offsets_;
  std::vector<std::int64_t> corners_;
  std::vector<std::size_t> parent_;
  std::vector<std::size_t> children_;
  std::vector<unsigned> position_;
};

DyadicSystem build_grid(const GridSpec& spec, std::optional<RandomShift> shift = std::nullopt);

/// Cube-level wrappers; mismatched grid ids raise UsageError.
bool classify_good(const DyadicCube& cube, const DyadicSystem& system, const GoodnessParams& params);
std::optional<DyadicCube> minimal_common_ancestor(const DyadicCube& a, const DyadicCube& b,
                                                  const DyadicSystem& system);
double long_distance(const DyadicCube& a, const DyadicCube& b, const DyadicSystem& system);

/// Goodness of the cube (level, index) translated by `shift`, without building a system.
bool shifted_cube_is_bad(const GridSpec& spec, const RandomShift& shift, int level,
                         const Index3& index, const GoodnessParams& params);

struct ProportionEstimate {
  double estimate = 0.0;
  double ci_low = 0.0;
  double ci_high = 0.0;
  std::size_t hits = 0;
  std::size_t samples = 0;
};

ProportionEstimate wilson_interval(std::size_t hits, std::size_t samples, double z = 1.959963984540054);

struct PiBadReport {
  int reference_level = 0;
  ProportionEstimate reference;
  std::vector<Index3> cube_indices;
  std::vector<ProportionEstimate> per_cube;
};

/// Monte Carlo estimate of P(I + omega is bad). The reference cube is the
/// level-`level` cube at the origin (level < 0 selects N); per-cube
/// estimates cover up to `max_cubes` cubes of that level on the same draws.
PiBadReport estimate_pi_bad(const GridSpec& spec, const GoodnessParams& params, std::size_t samples,
                            std::uint64_t seed, int level = -1, std::size_t max_cubes = 16,
                            int threads = 1);

/// Exact fraction of good cubes per level in the unshifted system; on the
/// torus this is the probability that a fixed cube of that level is good.
std::vector<double> level_good_fraction(const GridSpec& spec, const GoodnessParams& params);

}  // namespace dmw
