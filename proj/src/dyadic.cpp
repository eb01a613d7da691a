#include "dmw/dyadic.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <limits>
#include <sstream>

#include "dmw/parallel.hpp"
#include "dmw/rng.hpp"
#include "dmw/types.hpp"

namespace dmw {

namespace {

std::atomic<std::uint64_t> next_grid_id{1};

std::int64_t wrap(std::int64_t x, std::int64_t m) {
  x %= m;
  return x < 0 ? x + m : x;
}

// Offset S_k = sum_{i=k+1}^{N} 2^{N-i} omega_{i,a}, in lattice units.
std::int64_t shift_offset(const RandomShift& s, int N, int level, int axis) {
  std::int64_t off = 0;
  if (s.bits.empty()) return 0;
  for (int i = level + 1; i <= N; ++i) off += static_cast<std::int64_t>(s.bit(i, axis)) << (N - i);
  return off;
}

// Gap between [a, a+la] and [b, b+lb] along one axis.
std::int64_t axis_gap(std::int64_t a, std::int64_t la, std::int64_t b, std::int64_t lb,
                      std::int64_t M, bool torus) {
  if (!torus) return std::max<std::int64_t>({0, b - (a + la), a - (b + lb)});
  const std::int64_t x = wrap(b - a, M);
  if (x > la && x + lb < M) return std::min(x - la, M - x - lb);
  return 0;
}

}  // namespace

const char* to_string(Topology t) { return t == Topology::Torus ? "torus" : "zero-extension"; }

Topology topology_from_string(const std::string& name) {
  if (name == "torus") return Topology::Torus;
  if (name == "zero-extension" || name == "zero_extension") return Topology::ZeroExtension;
  throw ValidationError("unknown topology '" + name + "'");
}

void GridSpec::validate() const {
  if (p < 1 || p > 3) throw ValidationError("grid.p must be in [1,3]");
  if (N < 1 || N > 12) throw ValidationError("grid.N must be in [1,12]");
  if (N * p >= 62 || cells() > cell_cap)
    throw CapacityError("2^(N*p) = 2^" + std::to_string(N * p) + " cells exceeds the cell cap " +
                        std::to_string(cell_cap));
}

void GoodnessParams::validate() const {
  if (r < 0) throw ValidationError("goodness.r must be >= 0");
  if (!(delta > 0.0 && delta <= 1.0)) throw ValidationError("goodness.delta must be in (0,1]");
}

RandomShift RandomShift::zero(int p, int N) {
  RandomShift s;
  s.p = p;
  s.N = N;
  s.bits.assign(static_cast<std::size_t>(p * N), 0);
  return s;
}

RandomShift RandomShift::sample(int p, int N, std::uint64_t seed) {
  RandomShift s = zero(p, N);
  s.seed = seed;
  Rng rng(seed);
  for (auto& b : s.bits) b = static_cast<std::uint8_t>(rng() >> 63);
  return s;
}

bool RandomShift::is_zero() const {
  return std::all_of(bits.begin(), bits.end(), [](std::uint8_t b) { return b == 0; });
}

DyadicSystem::DyadicSystem(const GridSpec& spec, std::optional<RandomShift> shift)
    : spec_(spec), grid_id_(next_grid_id.fetch_add(1)) {
  spec_.validate();
  const int p = spec_.p, N = spec_.N;
  shift_ = shift ? *shift : RandomShift::zero(p, N);
  if (shift_.p != p || shift_.N != N || shift_.bits.size() != static_cast<std::size_t>(p * N))
    throw UsageError("random shift does not match the grid spec");
  if (spec_.topology == Topology::ZeroExtension && !shift_.is_zero())
    throw UsageError("shifted systems require the torus topology");

  offsets_.resize(static_cast<std::size_t>(N) + 2);
  offsets_[0] = 0;
  for (int k = 0; k <= N; ++k) offsets_[k + 1] = offsets_[k] + level_size(k);
  const std::size_t total = offsets_.back();
  const std::int64_t M = std::int64_t{1} << N;

  std::vector<std::array<std::int64_t, 3>> S(static_cast<std::size_t>(N) + 1);
  for (int k = 0; k <= N; ++k)
    for (int a = 0; a < 3; ++a) S[k][a] = a < p ? shift_offset(shift_, N, k, a) : 0;

  corners_.assign(total * 3, 0);
  parent_.assign(total, npos);
  position_.assign(total, 0);
  children_.assign(offsets_[N] * static_cast<std::size_t>(children_per_cube()), npos);

  for (int k = 0; k <= N; ++k) {
    for (std::size_t local = 0; local < level_size(k); ++local) {
      const std::size_t flat = offsets_[k] + local;
      const DyadicCube c = cube(flat);
      for (int a = 0; a < p; ++a) {
        const std::int64_t x = c.index[a] * side_units(k) + S[k][a];
        corners_[flat * 3 + a] = spec_.topology == Topology::Torus ? wrap(x, M) : x;
      }
      if (k == N) continue;
      const std::int64_t half = side_units(k + 1);
      const std::int64_t span = std::int64_t{1} << (k + 1);
      for (unsigned b = 0; b < static_cast<unsigned>(children_per_cube()); ++b) {
        DyadicCube ch;
        ch.level = k + 1;
        for (int a = 0; a < p; ++a) {
          const std::int64_t x = c.index[a] * side_units(k) + S[k][a] + ((b >> a) & 1u) * half;
          ch.index[a] = wrap((x - S[k + 1][a]) / half, span);
        }
        ch.grid_id = grid_id_;
        const std::size_t cf = flat_id(ch);
        children_[flat * children_per_cube() + b] = cf;
        parent_[cf] = flat;
        position_[cf] = b;
      }
    }
  }
}

double DyadicSystem::side(int level) const { return std::ldexp(1.0, -level); }
double DyadicSystem::volume(int level) const { return std::ldexp(1.0, -level * spec_.p); }

int DyadicSystem::level_of(std::size_t flat) const {
  check(flat);
  const auto it = std::upper_bound(offsets_.begin(), offsets_.end(), flat);
  return static_cast<int>(it - offsets_.begin()) - 1;
}

std::size_t DyadicSystem::flat_id(const DyadicCube& c) const {
  if (c.grid_id != 0 && c.grid_id != grid_id_) throw UsageError("cube belongs to another dyadic system");
  if (c.level < 0 || c.level > spec_.N) throw UsageError("cube level out of range");
  std::size_t local = 0;
  const std::int64_t span = std::int64_t{1} << c.level;
  for (int a = 0; a < spec_.p; ++a) {
    if (c.index[a] < 0 || c.index[a] >= span) throw UsageError("cube index out of range");
    local = (local << c.level) | static_cast<std::size_t>(c.index[a]);
  }
  return offsets_[c.level] + local;
}

DyadicCube DyadicSystem::cube(std::size_t flat) const {
  DyadicCube c;
  c.level = level_of(flat);
  c.grid_id = grid_id_;
  std::size_t local = flat - offsets_[c.level];
  const std::size_t mask = (std::size_t{1} << c.level) - 1;
  for (int a = spec_.p - 1; a >= 0; --a) {
    c.index[a] = static_cast<std::int64_t>(local & mask);
    local >>= c.level;
  }
  return c;
}

std::string DyadicSystem::cube_label(std::size_t flat) const {
  const DyadicCube c = cube(flat);
  std::ostringstream os;
  os << 'L' << c.level << ':';
  for (int a = 0; a < spec_.p; ++a) os << (a ? "," : "") << c.index[a];
  return os.str();
}

std::size_t DyadicSystem::child(std::size_t flat, unsigned b) const {
  check(flat);
  if (level_of(flat) == spec_.N) throw ResolutionError("finest cubes have no children");
  return children_[flat * children_per_cube() + b];
}

std::size_t DyadicSystem::ancestor(std::size_t flat, int level) const {
  int k = level_of(flat);
  if (level > k || level < 0) throw UsageError("ancestor level out of range");
  while (k > level) {
    flat = parent_[flat];
    --k;
  }
  return flat;
}

std::vector<std::size_t> DyadicSystem::descendants(std::size_t flat, int generations) const {
  if (level_of(flat) + generations > spec_.N || generations < 0) throw ResolutionError("descendants below the finest level");
  std::vector<std::size_t> cur{flat};
  for (int g = 0; g < generations; ++g) {
    std::vector<std::size_t> next;
    next.reserve(cur.size() * static_cast<std::size_t>(children_per_cube()));
    for (std::size_t c : cur)
      for (unsigned b = 0; b < static_cast<unsigned>(children_per_cube()); ++b) next.push_back(child(c, b));
    cur.swap(next);
  }
  std::sort(cur.begin(), cur.end());
  return cur;
}

bool DyadicSystem::contains(std::size_t outer, std::size_t inner) const {
  const int ko = level_of(outer), ki = level_of(inner);
  return ki >= ko && ancestor(inner, ko) == outer;
}

std::vector<std::size_t> DyadicSystem::cells_of(std::size_t flat) const {
  const int k = level_of(flat);
  const std::int64_t len = side_units(k);
  const std::int64_t M = std::int64_t{1} << spec_.N;
  const std::int64_t* c = corner(flat);
  std::vector<std::size_t> out;
  out.reserve(static_cast<std::size_t>(1) << ((spec_.N - k) * spec_.p));
  Index3 u{0, 0, 0};
  const std::size_t count = std::size_t{1} << ((spec_.N - k) * spec_.p);
  for (std::size_t t = 0; t < count; ++t) {
    std::size_t rest = t;
    for (int a = spec_.p - 1; a >= 0; --a) {
      u[a] = wrap(c[a] + static_cast<std::int64_t>(rest % static_cast<std::size_t>(len)), M);
      rest /= static_cast<std::size_t>(len);
    }
    out.push_back(cell_index(u));
  }
  std::sort(out.begin(), out.end());
  return out;
}

std::size_t DyadicSystem::cell_index(const Index3& u) const {
  std::size_t idx = 0;
  for (int a = 0; a < spec_.p; ++a) idx = (idx << spec_.N) | static_cast<std::size_t>(u[a]);
  return idx;
}

std::array<double, 3> DyadicSystem::cell_center(std::size_t cell) const {
  std::array<double, 3> x{0.0, 0.0, 0.0};
  const std::size_t mask = (std::size_t{1} << spec_.N) - 1;
  for (int a = spec_.p - 1; a >= 0; --a) {
    x[a] = (static_cast<double>(cell & mask) + 0.5) * side(spec_.N);
    cell >>= spec_.N;
  }
  return x;
}

double DyadicSystem::distance(std::size_t a, std::size_t b) const {
  const std::int64_t la = side_units(level_of(a)), lb = side_units(level_of(b));
  const std::int64_t M = std::int64_t{1} << spec_.N;
  const bool torus = spec_.topology == Topology::Torus;
  double sum = 0.0;
  for (int ax = 0; ax < spec_.p; ++ax) {
    const double g = static_cast<double>(axis_gap(corner(a)[ax], la, corner(b)[ax], lb, M, torus));
    sum += g * g;
  }
  return std::sqrt(sum) * side(spec_.N);
}

double DyadicSystem::long_distance(std::size_t a, std::size_t b) const {
  return side(level_of(a)) + side(level_of(b)) + distance(a, b);
}

double DyadicSystem::boundary_distance(std::size_t inner, std::size_t outer) const {
  const int ko = level_of(outer);
  if (ko == 0 && spec_.topology == Topology::Torus) return std::numeric_limits<double>::infinity();
  const std::int64_t lo = side_units(ko), li = side_units(level_of(inner));
  const std::int64_t M = std::int64_t{1} << spec_.N;
  std::int64_t best = std::numeric_limits<std::int64_t>::max();
  for (int a = 0; a < spec_.p; ++a) {
    const std::int64_t off = wrap(corner(inner)[a] - corner(outer)[a], M);
    best = std::min({best, off, lo - off - li});
  }
  return static_cast<double>(best) * side(spec_.N);
}

bool DyadicSystem::is_good(std::size_t flat, const GoodnessParams& params) const {
  const DyadicCube c = cube(flat);
  return !shifted_cube_is_bad(spec_, shift_, c.level, c.index, params);
}

std::optional<std::size_t> DyadicSystem::minimal_common_ancestor(std::size_t a, std::size_t b) const {
  int ka = level_of(a), kb = level_of(b);
  while (ka > kb) {
    a = parent_[a];
    --ka;
  }
  while (kb > ka) {
    b = parent_[b];
    --kb;
  }
  while (a != b) {
    a = parent_[a];
    b = parent_[b];
    if (a == npos || b == npos) return std::nullopt;
  }
  return a;
}

void DyadicSystem::check(std::size_t flat) const {
  if (flat >= offsets_.back()) throw UsageError("cube id out of range");
}

DyadicSystem build_grid(const GridSpec& spec, std::optional<RandomShift> shift) {
  return DyadicSystem(spec, std::move(shift));
}

namespace {
void same_system(const DyadicCube& c, const DyadicSystem& s) {
  if (c.grid_id != s.grid_id()) throw UsageError("cube belongs to another dyadic system");
}
}  // namespace

bool classify_good(const DyadicCube& cube, const DyadicSystem& system, const GoodnessParams& params) {
  same_system(cube, system);
  return !shifted_cube_is_bad(system.spec(), system.shift(), cube.level, cube.index, params);
}

std::optional<DyadicCube> minimal_common_ancestor(const DyadicCube& a, const DyadicCube& b,
                                                  const DyadicSystem& system) {
  if (a.grid_id != b.grid_id) throw UsageError("cubes from different dyadic systems");
  same_system(a, system);
  const auto m = system.minimal_common_ancestor(system.flat_id(a), system.flat_id(b));
  if (!m) return std::nullopt;
  return system.cube(*m);
}

double long_distance(const DyadicCube& a, const DyadicCube& b, const DyadicSystem& system) {
  if (a.grid_id != b.grid_id) throw UsageError("cubes from different dyadic systems");
  same_system(a, system);
  return system.long_distance(system.flat_id(a), system.flat_id(b));
}

bool shifted_cube_is_bad(const GridSpec& spec, const RandomShift& shift, int level,
                         const Index3& index, const GoodnessParams& params) {
  const int N = spec.N, p = spec.p;
  const bool torus = spec.topology == Topology::Torus;
  const double gamma = params.gamma(p);
  const double unit = std::ldexp(1.0, -N);
  const std::int64_t li = std::int64_t{1} << (N - level);
  std::int64_t X[3] = {0, 0, 0};
  for (int a = 0; a < p; ++a) X[a] = index[a] * li + shift_offset(shift, N, level, a);
  const double ell_i = std::ldexp(1.0, -level);
  for (int j = level - params.r; j >= (torus ? 1 : 0); --j) {
    const std::int64_t lj = std::int64_t{1} << (N - j);
    std::int64_t best = std::numeric_limits<std::int64_t>::max();
    for (int a = 0; a < p; ++a) {
      const std::int64_t off = wrap(X[a] - shift_offset(shift, N, j, a), lj);
      best = std::min({best, off, lj - off - li});
    }
    const double threshold = std::pow(ell_i, gamma) * std::pow(std::ldexp(1.0, -j), 1.0 - gamma);
    if (static_cast<double>(best) * unit <= threshold) return true;
  }
  return false;
}

ProportionEstimate wilson_interval(std::size_t hits, std::size_t samples, double z) {
  ProportionEstimate e;
  e.hits = hits;
  e.samples = samples;
  if (samples == 0) return e;
  const double n = static_cast<double>(samples);
  const double ph = static_cast<double>(hits) / n;
  const double z2 = z * z;
  const double centre = (ph + z2 / (2 * n)) / (1 + z2 / n);
  const double half = z * std::sqrt(ph * (1 - ph) / n + z2 / (4 * n * n)) / (1 + z2 / n);
  e.estimate = ph;
  e.ci_low = std::max(0.0, centre - half);
  e.ci_high = std::min(1.0, centre + half);
  return e;
}

PiBadReport estimate_pi_bad(const GridSpec& spec, const GoodnessParams& params, std::size_t samples,
                            std::uint64_t seed, int level, std::size_t max_cubes, int threads) {
  spec.validate();
  params.validate();
  if (samples < 100) throw ValidationError("estimate_pi_bad needs at least 100 samples");
  PiBadReport rep;
  rep.reference_level = level < 0 ? spec.N : level;
  if (rep.reference_level > spec.N) throw ValidationError("reference level exceeds N");

  const std::size_t level_cubes = std::size_t{1} << (rep.reference_level * spec.p);
  const std::size_t count = std::max<std::size_t>(1, std::min(max_cubes, level_cubes));
  const std::size_t stride = level_cubes / count;
  const std::int64_t span = std::int64_t{1} << rep.reference_level;
  for (std::size_t c = 0; c < count; ++c) {
    std::size_t local = c * stride;
    Index3 idx{0, 0, 0};
    for (int a = spec.p - 1; a >= 0; --a) {
      idx[a] = static_cast<std::int64_t>(local % static_cast<std::size_t>(span));
      local /= static_cast<std::size_t>(span);
    }
    rep.cube_indices.push_back(idx);
  }

  std::vector<std::vector<std::uint8_t>> bad(samples);
  parallel_for(samples, threads, [&](std::size_t s) {
    const RandomShift w = RandomShift::sample(spec.p, spec.N, derive_seed(seed, "grid", s));
    auto& row = bad[s];
    row.resize(count);
    for (std::size_t c = 0; c < count; ++c)
      row[c] = shifted_cube_is_bad(spec, w, rep.reference_level, rep.cube_indices[c], params) ? 1 : 0;
  });

  for (std::size_t c = 0; c < count; ++c) {
    std::size_t hits = 0;
    for (std::size_t s = 0; s < samples; ++s) hits += bad[s][c];
    rep.per_cube.push_back(wilson_interval(hits, samples));
  }
  rep.reference = rep.per_cube.front();
  return rep;
}

std::vector<double> level_good_fraction(const GridSpec& spec, const GoodnessParams& params) {
  spec.validate();
  const RandomShift zero = RandomShift::zero(spec.p, spec.N);
  std::vector<double> out(static_cast<std::size_t>(spec.N) + 1, 1.0);
  for (int k = 0; k <= spec.N; ++k) {
    const std::int64_t span = std::int64_t{1} << k;
    const std::size_t total = std::size_t{1} << (k * spec.p);
    std::size_t good = 0;
    for (std::size_t local = 0; local < total; ++local) {
      Index3 idx{0, 0, 0};
      std::size_t rest = local;
      for (int a = spec.p - 1; a >= 0; --a) {
        idx[a] = static_cast<std::int64_t>(rest % static_cast<std::size_t>(span));
        rest /= static_cast<std::size_t>(span);
      }
      if (!shifted_cube_is_bad(spec, zero, k, idx, params)) ++good;
    }
    out[static_cast<std::size_t>(k)] = static_cast<double>(good) / static_cast<double>(total);
  }
  return out;
}

}  // namespace dmw
