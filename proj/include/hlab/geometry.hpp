#pragma once

// Field calculus on the flat 3-torus (R / 2piZ)^3 sampled on a uniform n^3
// grid: closed-form test fields, spectral differential operators and the
// periodic trapezoid quadrature that every integral in the library uses.

#include <hlab/error.hpp>
#include <hlab/fft.hpp>
#include <hlab/parallel.hpp>
#include <hlab/vec.hpp>

#include <algorithm>
#include <array>
#include <cmath>
#include <complex>
#include <cstddef>
#include <map>
#include <sstream>
#include <string>
#include <variant>
#include <vector>

namespace hlab {

// ---------------------------------------------------------------------------
// Grid and sampled fields

class GridSpec {
 public:
  /// Throws ValidationError unless n >= 8 is a power of two.
  explicit GridSpec(int n) : n_(n) {
    if (n < 8 || (n & (n - 1)) != 0) {
      std::ostringstream msg;
      msg << "grid resolution must be a power of two >= 8, got " << n;
      throw ValidationError(msg.str());
    }
  }

  int n() const { return n_; }
  double period() const { return two_pi; }
  double spacing() const { return two_pi / n_; }
  double coordinate(int i) const { return i * spacing(); }
  std::size_t node_count() const { return std::size_t(n_) * n_ * n_; }
  std::size_t index(int i, int j, int k) const { return (std::size_t(i) * n_ + j) * n_ + k; }
  Vec3 node(int i, int j, int k) const { return {coordinate(i), coordinate(j), coordinate(k)}; }
  Vec3 node(std::size_t idx) const {
    const int k = int(idx % n_);
    const int j = int((idx / n_) % n_);
    const int i = int(idx / (std::size_t(n_) * n_));
    return node(i, j, k);
  }
  double volume() const { return two_pi * two_pi * two_pi; }

  friend bool operator==(const GridSpec&, const GridSpec&) = default;

 private:
  int n_;
};

struct ScalarField3 {
  explicit ScalarField3(GridSpec g) : grid(g), values(g.node_count(), 0.0) {}

  double& at(int i, int j, int k) { return values[grid.index(i, j, k)]; }
  double at(int i, int j, int k) const { return values[grid.index(i, j, k)]; }

  GridSpec grid;
  std::vector<double> values;
};

/// Divergence-free fields double as 2-forms (via contraction with the volume
/// form) and as 1-forms (via the flat metric).
struct VectorField3 {
  explicit VectorField3(GridSpec g) : grid(g), components{ScalarField3(g), ScalarField3(g), ScalarField3(g)} {}

  Vec3 at(std::size_t idx) const {
    return {components[0].values[idx], components[1].values[idx], components[2].values[idx]};
  }
  void set(std::size_t idx, Vec3 v) {
    for (int d = 0; d < 3; ++d) components[d].values[idx] = v[d];
  }

  GridSpec grid;
  std::array<ScalarField3, 3> components;
  /// Set when the samples come from a closed form that is exactly
  /// divergence-free; precondition checks then trust the closed form instead
  /// of the spectral divergence of the (possibly non-band-limited) samples.
  bool analytic_solenoidal = false;
};

inline void require_same_grid(const GridSpec& a, const GridSpec& b) {
  if (!(a == b)) {
    std::ostringstream msg;
    msg << "grid mismatch: " << a.n() << "^3 vs " << b.n() << "^3";
    throw ShapeError(msg.str());
  }
}

inline double max_abs(const ScalarField3& f) {
  double m = 0.0;
  for (double v : f.values) m = std::max(m, std::abs(v));
  return m;
}

/// Largest pointwise Euclidean norm.
inline double max_norm(const VectorField3& v) {
  double m = 0.0;
  for (std::size_t i = 0; i < v.grid.node_count(); ++i) m = std::max(m, norm(v.at(i)));
  return m;
}

inline double max_difference(const VectorField3& a, const VectorField3& b) {
  require_same_grid(a.grid, b.grid);
  double m = 0.0;
  for (std::size_t i = 0; i < a.grid.node_count(); ++i) m = std::max(m, norm(a.at(i) - b.at(i)));
  return m;
}

inline VectorField3 scaled(const VectorField3& v, double s) {
  VectorField3 out = v;
  for (auto& c : out.components)
    for (double& x : c.values) x *= s;
  return out;
}

inline VectorField3 sum(const VectorField3& a, const VectorField3& b) {
  require_same_grid(a.grid, b.grid);
  VectorField3 out = a;
  for (int d = 0; d < 3; ++d)
    for (std::size_t i = 0; i < a.grid.node_count(); ++i)
      out.components[d].values[i] += b.components[d].values[i];
  out.analytic_solenoidal = a.analytic_solenoidal && b.analytic_solenoidal;
  return out;
}

// ---------------------------------------------------------------------------
// Closed-form field specifications

/// (A sin z + C cos y, B sin x + A cos z, C sin y + B cos x); curl v = v.
struct AbcSpec {
  double a = 1.0, b = 1.0, c = 1.0;
};

/// Contributes (cos_amp cos(k.x) + sin_amp sin(k.x)) to one component.
struct FourierMode {
  IVec3 k{0, 0, 0};
  int component = 0;  // 0-based
  double cos_amp = 0.0;
  double sin_amp = 0.0;
};

struct FourierSpec {
  std::vector<FourierMode> modes;
};

struct ZeroSpec {};

struct ConstantSpec {
  Vec3 value;
};

/// Axis-aligned coordinates (t, u, v) with dt ^ du ^ dv = dx ^ dy ^ dz.
struct AxisFrame {
  int t, u, v;
};

inline AxisFrame axis_frame(int axis) {
  switch (axis) {
    case 0: return {0, 1, 2};
    case 1: return {1, 2, 0};
    case 2: return {2, 0, 1};
    default: throw ValidationError("axis must be 0, 1 or 2 (x, y, z)");
  }
}

struct SuspensionPatch {
  Vec2 center;            // transverse (u, v) coordinates
  double inner_radius;    // profile is exactly 1 inside
  double outer_radius;    // profile is the background constant outside
};

/// Zero-helicity exact field f(u, v) e_axis. f equals 1 on every inner disc,
/// so plugs whose boxes sit inside the discs see a pure suspension; outside
/// the outer discs f is a negative constant chosen so that the sampled field
/// has zero mean on the grid it is materialised on.
struct SuspensionSpec {
  int axis = 0;
  std::vector<SuspensionPatch> patches;
};

using FieldSpec = std::variant<AbcSpec, FourierSpec, ZeroSpec, ConstantSpec, SuspensionSpec>;

/// C-infinity step: 0 for x <= 0, 1 for x >= 1.
inline double smooth_step(double x) {
  if (x <= 0.0) return 0.0;
  if (x >= 1.0) return 1.0;
  const double a = std::exp(-1.0 / x);
  const double b = std::exp(-1.0 / (1.0 - x));
  return a / (a + b);
}

namespace detail {

inline std::string format_k(const IVec3& k) {
  std::ostringstream s;
  s << "(" << k[0] << "," << k[1] << "," << k[2] << ")";
  return s.str();
}

/// Canonical representative of {k, -k}: first nonzero entry positive.
inline std::pair<IVec3, int> canonical(const IVec3& k) {
  for (int d = 0; d < 3; ++d) {
    if (k[d] > 0) return {k, +1};
    if (k[d] < 0) return {IVec3{-k[0], -k[1], -k[2]}, -1};
  }
  return {k, +1};
}

inline double suspension_bump(const SuspensionSpec& s, double u, double v) {
  double beta = 0.0;
  for (const auto& p : s.patches) {
    const double r = std::hypot(periodic_delta(u, p.center.x), periodic_delta(v, p.center.y));
    if (r <= p.inner_radius) return 1.0;
    beta += 1.0 - smooth_step((r - p.inner_radius) / (p.outer_radius - p.inner_radius));
  }
  return beta;
}

}  // namespace detail

/// Exact divergence-freeness of the closed form (not of its samples).
inline bool is_analytically_solenoidal(const FieldSpec& spec) {
  if (const auto* f = std::get_if<FourierSpec>(&spec)) {
    // Group +-k, then require k . (cos amplitudes) = k . (sin amplitudes) = 0.
    std::map<IVec3, std::pair<Vec3, Vec3>> groups;
    for (const auto& m : f->modes) {
      auto [k, sign] = detail::canonical(m.k);
      auto& g = groups[k];
      g.first[m.component] += m.cos_amp;
      g.second[m.component] += sign * m.sin_amp;
    }
    for (const auto& [k, amps] : groups) {
      const Vec3 kv{double(k[0]), double(k[1]), double(k[2])};
      const double scale = 1.0 + norm(amps.first) + norm(amps.second);
      if (std::abs(dot(kv, amps.first)) > 1e-14 * scale * norm(kv) ||
          std::abs(dot(kv, amps.second)) > 1e-14 * scale * norm(kv))
        return false;
    }
  }
  return true;
}

/// Every Fourier mode must satisfy 2|k_d| < n/2 (factor-two headroom below
/// Nyquist, so quadratic integrands are still integrated exactly).
inline void check_resolution(const FieldSpec& spec, const GridSpec& grid) {
  const int n = grid.n();
  if (const auto* f = std::get_if<FourierSpec>(&spec)) {
    for (const auto& m : f->modes) {
      if (m.component < 0 || m.component > 2)
        throw ValidationError("Fourier mode component index must be 1, 2 or 3");
      for (int d = 0; d < 3; ++d) {
        if (4 * std::abs(m.k[d]) >= n) {
          std::ostringstream msg;
          msg << "unresolved Fourier mode: wavevector " << detail::format_k(m.k) << " needs 4*|k| < n = " << n;
          throw ResolutionError(msg.str());
        }
      }
    }
  }
  if (const auto* s = std::get_if<SuspensionSpec>(&spec)) {
    axis_frame(s->axis);
    for (std::size_t i = 0; i < s->patches.size(); ++i) {
      const auto& p = s->patches[i];
      if (!(p.inner_radius > 0.0 && p.outer_radius > p.inner_radius && p.outer_radius <= pi))
        throw ValidationError("suspension patch radii must satisfy 0 < inner < outer <= pi");
      if (p.outer_radius - p.inner_radius < 2.0 * grid.spacing())
        throw ResolutionError("suspension patch transition narrower than two grid cells");
      for (std::size_t j = 0; j < i; ++j) {
        const auto& q = s->patches[j];
        const double d = std::hypot(periodic_delta(p.center.x, q.center.x), periodic_delta(p.center.y, q.center.y));
        if (d < p.outer_radius + q.outer_radius)
          throw ValidationError("suspension patches overlap");
      }
    }
  }
}

/// Point evaluation of the band-limited kinds.
inline Vec3 evaluate(const FieldSpec& spec, Vec3 p) {
  return std::visit(
      [&](const auto& s) -> Vec3 {
        using T = std::decay_t<decltype(s)>;
        if constexpr (std::is_same_v<T, AbcSpec>) {
          return {s.a * std::sin(p.z) + s.c * std::cos(p.y), s.b * std::sin(p.x) + s.a * std::cos(p.z),
                  s.c * std::sin(p.y) + s.b * std::cos(p.x)};
        } else if constexpr (std::is_same_v<T, FourierSpec>) {
          Vec3 out;
          for (const auto& m : s.modes) {
            const double phase = m.k[0] * p.x + m.k[1] * p.y + m.k[2] * p.z;
            out[m.component] += m.cos_amp * std::cos(phase) + m.sin_amp * std::sin(phase);
          }
          return out;
        } else if constexpr (std::is_same_v<T, ZeroSpec>) {
          return {};
        } else if constexpr (std::is_same_v<T, ConstantSpec>) {
          return s.value;
        } else {
          throw ValidationError("suspension fields are defined relative to a grid; use materialize");
        }
      },
      spec);
}

/// Exact point samples of the closed form on the grid nodes.
inline VectorField3 materialize(const FieldSpec& spec, const GridSpec& grid) {
  check_resolution(spec, grid);
  VectorField3 out(grid);
  out.analytic_solenoidal = is_analytically_solenoidal(spec);
  const int n = grid.n();
  if (const auto* s = std::get_if<SuspensionSpec>(&spec)) {
    const AxisFrame fr = axis_frame(s->axis);
    std::vector<double> beta(std::size_t(n) * n);
    for (int a = 0; a < n; ++a)
      for (int b = 0; b < n; ++b)
        beta[std::size_t(a) * n + b] = detail::suspension_bump(*s, grid.coordinate(a), grid.coordinate(b));
    const double mean = pairwise_sum(beta) / double(beta.size());
    if (mean >= 1.0) throw ValidationError("suspension patches cover the whole cross-section");
    for (double& b : beta) b = (b == 1.0) ? 1.0 : (b - mean) / (1.0 - mean);
    for (std::size_t idx = 0; idx < grid.node_count(); ++idx) {
      const Vec3 p = grid.node(idx);
      const int iu = int(std::lround(p[fr.u] / grid.spacing()));
      const int iv = int(std::lround(p[fr.v] / grid.spacing()));
      out.components[fr.t].values[idx] = beta[std::size_t(iu) * n + iv];
    }
    return out;
  }
  for (std::size_t idx = 0; idx < grid.node_count(); ++idx) out.set(idx, evaluate(spec, grid.node(idx)));
  return out;
}

inline FourierSpec to_fourier(const FieldSpec& spec) {
  return std::visit(
      [](const auto& s) -> FourierSpec {
        using T = std::decay_t<decltype(s)>;
        if constexpr (std::is_same_v<T, AbcSpec>) {
          return FourierSpec{{{{0, 0, 1}, 0, 0.0, s.a},
                              {{0, 1, 0}, 0, s.c, 0.0},
                              {{1, 0, 0}, 1, 0.0, s.b},
                              {{0, 0, 1}, 1, s.a, 0.0},
                              {{0, 1, 0}, 2, 0.0, s.c},
                              {{1, 0, 0}, 2, s.b, 0.0}}};
        } else if constexpr (std::is_same_v<T, FourierSpec>) {
          return s;
        } else if constexpr (std::is_same_v<T, ZeroSpec>) {
          return {};
        } else if constexpr (std::is_same_v<T, ConstantSpec>) {
          return FourierSpec{{{{0, 0, 0}, 0, s.value.x, 0.0}, {{0, 0, 0}, 1, s.value.y, 0.0},
                              {{0, 0, 0}, 2, s.value.z, 0.0}}};
        } else {
          throw ValidationError("suspension fields have no finite Fourier representation");
        }
      },
      spec);
}

inline int determinant(const IMat3& m) {
  return m[0][0] * (m[1][1] * m[2][2] - m[1][2] * m[2][1]) - m[0][1] * (m[1][0] * m[2][2] - m[1][2] * m[2][0]) +
         m[0][2] * (m[1][0] * m[2][1] - m[1][1] * m[2][0]);
}

/// Inverse of a unimodular integer matrix (the adjugate).
inline IMat3 unimodular_inverse(const IMat3& m) {
  if (determinant(m) != 1) throw ValidationError("matrix is not in SL(3,Z)");
  IMat3 inv{};
  for (int r = 0; r < 3; ++r)
    for (int c = 0; c < 3; ++c) {
      const int r1 = (c + 1) % 3, r2 = (c + 2) % 3, c1 = (r + 1) % 3, c2 = (r + 2) % 3;
      inv[r][c] = m[r1][c1] * m[r2][c2] - m[r1][c2] * m[r2][c1];
    }
  return inv;
}

/// Pullback of the field by the torus automorphism x -> M x:
/// W'(x) = M^{-1} W(M x). Volume- and orientation-preserving for M in SL(3,Z).
inline FourierSpec pullback(const FieldSpec& spec, const IMat3& m) {
  const IMat3 inv = unimodular_inverse(m);
  FourierSpec out;
  for (const auto& mode : to_fourier(spec).modes) {
    IVec3 k2{};
    for (int c = 0; c < 3; ++c) k2[c] = m[0][c] * mode.k[0] + m[1][c] * mode.k[1] + m[2][c] * mode.k[2];
    for (int r = 0; r < 3; ++r) {
      const int w = inv[r][mode.component];
      if (w != 0) out.modes.push_back({k2, r, w * mode.cos_amp, w * mode.sin_amp});
    }
  }
  return out;
}

// ---------------------------------------------------------------------------
// Spectral calculus

/// Wavenumber used by odd-order derivatives: Nyquist modes are dropped.
inline double derivative_wavenumber(const fft::Spectrum& s, int idx, bool half_axis) {
  const int n = s.n();
  const int k = half_axis ? idx : s.wavenumber(idx);
  return (std::abs(k) == n / 2) ? 0.0 : double(k);
}

inline fft::Spectrum spectrum(const ScalarField3& f) { return fft::forward(f.grid.n(), f.values); }

inline ScalarField3 from_spectrum(const GridSpec& grid, const fft::Spectrum& s) {
  ScalarField3 out(grid);
  fft::inverse(s, out.values);
  return out;
}

/// Calls fn(index, wavevector) for every half-spectrum entry.
template <class Fn>
void for_each_mode(const fft::Spectrum& s, Fn&& fn) {
  const int n = s.n();
  for (int i = 0; i < n; ++i)
    for (int j = 0; j < n; ++j)
      for (int k = 0; k < s.nz(); ++k)
        fn(s.index(i, j, k), Vec3{derivative_wavenumber(s, i, false), derivative_wavenumber(s, j, false),
                                  derivative_wavenumber(s, k, true)});
}

inline ScalarField3 divergence(const VectorField3& v) {
  std::array<fft::Spectrum, 3> c{spectrum(v.components[0]), spectrum(v.components[1]), spectrum(v.components[2])};
  fft::Spectrum out(v.grid.n());
  const std::complex<double> I(0.0, 1.0);
  for_each_mode(out, [&](std::size_t idx, Vec3 k) {
    out.set(idx, I * (k.x * c[0][idx] + k.y * c[1][idx] + k.z * c[2][idx]));
  });
  return from_spectrum(v.grid, out);
}

inline VectorField3 curl(const VectorField3& v) {
  std::array<fft::Spectrum, 3> c{spectrum(v.components[0]), spectrum(v.components[1]), spectrum(v.components[2])};
  std::array<fft::Spectrum, 3> o{fft::Spectrum(v.grid.n()), fft::Spectrum(v.grid.n()), fft::Spectrum(v.grid.n())};
  const std::complex<double> I(0.0, 1.0);
  for_each_mode(c[0], [&](std::size_t idx, Vec3 k) {
    o[0].set(idx, I * (k.y * c[2][idx] - k.z * c[1][idx]));
    o[1].set(idx, I * (k.z * c[0][idx] - k.x * c[2][idx]));
    o[2].set(idx, I * (k.x * c[1][idx] - k.y * c[0][idx]));
  });
  VectorField3 out(v.grid);
  for (int d = 0; d < 3; ++d) out.components[d] = from_spectrum(v.grid, o[d]);
  return out;
}

inline VectorField3 gradient(const ScalarField3& f) {
  const fft::Spectrum c = spectrum(f);
  std::array<fft::Spectrum, 3> o{fft::Spectrum(f.grid.n()), fft::Spectrum(f.grid.n()), fft::Spectrum(f.grid.n())};
  const std::complex<double> I(0.0, 1.0);
  for_each_mode(c, [&](std::size_t idx, Vec3 k) {
    for (int d = 0; d < 3; ++d) o[d].set(idx, I * k[d] * c[idx]);
  });
  VectorField3 out(f.grid);
  for (int d = 0; d < 3; ++d) out.components[d] = from_spectrum(f.grid, o[d]);
  out.analytic_solenoidal = false;
  return out;
}

/// Mean value times (2pi)^3; exact for trigonometric polynomials of degree < n.
inline double integrate_scalar(const ScalarField3& f) {
  return pairwise_sum(f.values) / double(f.grid.node_count()) * f.grid.volume();
}

inline double mean(const ScalarField3& f) { return pairwise_sum(f.values) / double(f.grid.node_count()); }

/// Integral of the pointwise dot product; on the flat torus this is the
/// wedge pairing of the 1-form u with the 2-form i_v mu.
inline double l2_pairing(const VectorField3& u, const VectorField3& v) {
  require_same_grid(u.grid, v.grid);
  ScalarField3 d(u.grid);
  for (std::size_t i = 0; i < u.grid.node_count(); ++i) d.values[i] = dot(u.at(i), v.at(i));
  return integrate_scalar(d);
}

/// max |div v| / max |v| computed spectrally (0 for the zero field).
inline double divergence_ratio(const VectorField3& v) {
  const double scale = max_norm(v);
  if (scale == 0.0) return 0.0;
  return max_abs(divergence(v)) / scale;
}

/// Fraction of spectral energy in modes with some |k_d| > n/4, an indicator
/// of how much of a sampled field sits near the resolution limit.
inline double outer_band_energy_fraction(const VectorField3& v) {
  const int n = v.grid.n();
  double total = 0.0, outer = 0.0;
  for (int d = 0; d < 3; ++d) {
    const fft::Spectrum s = spectrum(v.components[d]);
    for (int i = 0; i < n; ++i)
      for (int j = 0; j < n; ++j)
        for (int k = 0; k < s.nz(); ++k) {
          const std::size_t idx = s.index(i, j, k);
          const double w = (k == 0 || k == n / 2) ? 1.0 : 2.0;
          const double e = w * std::norm(s[idx]);
          total += e;
          if (4 * std::abs(s.wavenumber(i)) > n || 4 * std::abs(s.wavenumber(j)) > n || 4 * k > n) outer += e;
        }
  }
  return total == 0.0 ? 0.0 : outer / total;
}

// ---------------------------------------------------------------------------
// Off-grid evaluation

/// Trigonometric interpolant of sampled data, stored as the sparse list of
/// non-negligible modes. Exact for band-limited samples.
class TrigInterpolant {
 public:
  TrigInterpolant() = default;

  explicit TrigInterpolant(const VectorField3& v, double rel_cutoff = 1e-14) : dims_(3) {
    build({&v.components[0], &v.components[1], &v.components[2]}, rel_cutoff);
  }
  explicit TrigInterpolant(const ScalarField3& f, double rel_cutoff = 1e-14) : dims_(1) {
    build({&f}, rel_cutoff);
  }

  Vec3 vector_at(Vec3 p) const {
    Vec3 out;
    for (const auto& m : modes_) {
      const double phase = m.k.x * p.x + m.k.y * p.y + m.k.z * p.z;
      const double c = std::cos(phase), s = std::sin(phase);
      for (int d = 0; d < 3; ++d) out[d] += m.weight * (m.coef[d].real() * c - m.coef[d].imag() * s);
    }
    return out;
  }

  double scalar_at(Vec3 p) const {
    double out = 0.0;
    for (const auto& m : modes_) {
      const double phase = m.k.x * p.x + m.k.y * p.y + m.k.z * p.z;
      out += m.weight * (m.coef[0].real() * std::cos(phase) - m.coef[0].imag() * std::sin(phase));
    }
    return out;
  }

  std::size_t mode_count() const { return modes_.size(); }

 private:
  struct Mode {
    Vec3 k;
    double weight;
    std::array<std::complex<double>, 3> coef;
  };

  void build(std::vector<const ScalarField3*> comps, double rel_cutoff) {
    const int n = comps[0]->grid.n();
    std::vector<fft::Spectrum> specs;
    for (const auto* c : comps) specs.push_back(spectrum(*c));
    double largest = 0.0;
    for (const auto& s : specs)
      for (std::size_t i = 0; i < s.size(); ++i) largest = std::max(largest, std::abs(s[i]));
    const double cutoff = rel_cutoff * largest;
    for (int i = 0; i < n; ++i)
      for (int j = 0; j < n; ++j)
        for (int k = 0; k < n / 2 + 1; ++k) {
          const int ki = specs[0].wavenumber(i), kj = specs[0].wavenumber(j);
          if (std::abs(ki) == n / 2 || std::abs(kj) == n / 2 || k == n / 2) continue;
          const std::size_t idx = specs[0].index(i, j, k);
          Mode m{{double(ki), double(kj), double(k)}, k == 0 ? 1.0 : 2.0, {}};
          bool keep = false;
          for (std::size_t d = 0; d < specs.size(); ++d) {
            m.coef[d] = specs[d][idx];
            keep = keep || std::abs(m.coef[d]) > cutoff;
          }
          if (keep) modes_.push_back(m);
        }
  }

  int dims_ = 0;
  std::vector<Mode> modes_;
};

}  // namespace hlab
