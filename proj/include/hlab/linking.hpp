#pragma once

// Compactly supported fields in R^3, linking numbers of closed curves and
// the two helicity estimators compared against each other: Biot-Savart
// quadrature of int A . v, and the mean asymptotic linking number of pairs
// of trajectories closed by straight segments.

#include <hlab/error.hpp>
#include <hlab/parallel.hpp>
#include <hlab/vec.hpp>

#include <boost/math/quadrature/gauss_kronrod.hpp>

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <random>
#include <sstream>
#include <vector>

namespace hlab {

// ---------------------------------------------------------------------------
// Solenoid family

/// Axisymmetric divergence-free field supported in the solid torus
/// sigma = ((varpi - R0)^2 + z^2) / r0^2 < 1 about the z-axis, with core
/// profile q(sigma) = (1 - sigma^k)^3:
///   toroidal  B_phi = tau q varpi / R0,
///   poloidal  B_pol = grad psi x e_phi / varpi,  psi = (p R0 r0 / 2) int_sigma^1 q.
/// `mirror` reflects the field through the plane z = 0.
struct Solenoid {
  double major_radius = 1.0;
  double minor_radius = 0.4;
  double toroidal = 1.0;
  double poloidal = 1.0;
  int profile_power = 16;
  bool mirror = false;

  void validate() const {
    if (!(major_radius > 0.0 && minor_radius > 0.0 && minor_radius < major_radius))
      throw ValidationError("solenoid radii must satisfy 0 < minor < major");
    if (profile_power < 1) throw ValidationError("solenoid profile power must be >= 1");
    if (!std::isfinite(toroidal) || !std::isfinite(poloidal)) throw ValidationError("solenoid amplitudes must be finite");
  }

  double sigma(Vec3 x) const {
    const double w = std::hypot(x.x, x.y);
    const double dw = w - major_radius;
    return (dw * dw + x.z * x.z) / (minor_radius * minor_radius);
  }

  double core(double s) const {
    if (s >= 1.0) return 0.0;
    const double c = 1.0 - std::pow(s, profile_power);
    return c * c * c;
  }

  /// int_s^1 q(u) du in closed form.
  double core_integral(double s) const {
    if (s >= 1.0) return 0.0;
    const double k = profile_power;
    auto prim = [k](double u) {
      return u - 3.0 * std::pow(u, k + 1) / (k + 1) + 3.0 * std::pow(u, 2 * k + 1) / (2 * k + 1) -
             std::pow(u, 3 * k + 1) / (3 * k + 1);
    };
    return prim(1.0) - prim(s);
  }

  Vec3 operator()(Vec3 x) const {
    if (mirror) x.z = -x.z;
    const double w = std::hypot(x.x, x.y);
    if (w == 0.0) return {};
    const double s = sigma(x);
    if (s >= 1.0) return {};
    const double q = core(s);
    const double dw = w - major_radius;
    const double bphi = toroidal * q * w / major_radius;
    const double c = -poloidal * major_radius * q / (w * minor_radius);
    const double bw = -c * x.z, bz = c * dw;
    const double ex = x.x / w, ey = x.y / w;
    Vec3 v{bw * ex - bphi * ey, bw * ey + bphi * ex, bz};
    if (mirror) v.z = -v.z;
    return v;
  }

  /// Central-difference divergence (the field is divergence-free in closed form).
  double divergence(Vec3 x, double h = 1e-5) const {
    double d = 0.0;
    for (int k = 0; k < 3; ++k) {
      Vec3 e;
      e[k] = h;
      d += ((*this)(x + e)[k] - (*this)(x - e)[k]) / (2 * h);
    }
    return d;
  }

  double support_volume() const { return 2.0 * pi * pi * major_radius * minor_radius * minor_radius; }
  double support_radius() const { return major_radius + minor_radius; }

  Solenoid scaled(double s) const {
    Solenoid out = *this;
    out.toroidal *= s;
    out.poloidal *= s;
    return out;
  }
};

/// Helicity of the solenoid from its flux function:
/// H = 2 int psi B_phi / varpi dV = 4 pi int int psi B_phi dvarpi dz (up to the
/// mirror sign), evaluated by nested Gauss-Kronrod quadrature.
inline double solenoid_helicity_closed_form(const Solenoid& s) {
  s.validate();
  boost::math::quadrature::gauss_kronrod<double, 61> gk;
  const double r0 = s.minor_radius, R0 = s.major_radius;
  // Polar coordinates in the meridian half-plane: varpi = R0 + rho cos a, z = rho sin a.
  auto radial = [&](double a) {
    return gk.integrate(
        [&](double rho) {
          const double sg = rho * rho / (r0 * r0);
          const double w = R0 + rho * std::cos(a);
          const double psi = 0.5 * s.poloidal * R0 * r0 * s.core_integral(sg);
          const double bphi = s.toroidal * s.core(sg) * w / R0;
          return psi * bphi * rho;
        },
        0.0, r0, 15, 1e-13);
  };
  const double h = 2.0 * two_pi * gk.integrate(radial, 0.0, two_pi, 15, 1e-13);
  return s.mirror ? -h : h;
}

/// int A . v with A the Biot-Savart potential, by midpoint quadrature on a
/// cylindrical grid of spacing h = r0 / cells_per_radius around the support,
/// excluding the singular self-cell. Axisymmetry puts all targets in the
/// half-plane phi = 0.
inline double biot_savart_helicity(const Solenoid& s, int cells_per_radius = 16) {
  s.validate();
  if (cells_per_radius < 8) throw ValidationError("Biot-Savart resolution must resolve the minor radius with >= 8 cells");
  const double r0 = s.minor_radius, R0 = s.major_radius;
  const double h = r0 / cells_per_radius;
  const int m = 2 * cells_per_radius;
  const int nphi = std::max(8, int(std::ceil(two_pi * (R0 + r0) / h)));
  const double dphi = two_pi / nphi;

  struct Cell {
    double w, z;
    Vec3 v;  // field at phi = 0
  };
  std::vector<Cell> cells;
  for (int i = 0; i < m; ++i)
    for (int j = 0; j < m; ++j) {
      const double w = R0 - r0 + (i + 0.5) * h;
      const double z = -r0 + (j + 0.5) * h;
      const Vec3 v = s({w, 0.0, z});
      if (v.x != 0.0 || v.y != 0.0 || v.z != 0.0) cells.push_back({w, z, v});
    }
  std::vector<double> cphi(nphi), sphi(nphi);
  for (int k = 0; k < nphi; ++k) {
    cphi[k] = std::cos(k * dphi);
    sphi[k] = std::sin(k * dphi);
  }

  std::vector<double> contrib(cells.size());
  parallel_for(cells.size(), [&](std::size_t t) {
    const Vec3 x{cells[t].w, 0.0, cells[t].z};
    CompensatedSum ax, ay, az;
    for (std::size_t src = 0; src < cells.size(); ++src) {
      const double vol = cells[src].w * dphi * h * h;
      for (int k = 0; k < nphi; ++k) {
        if (k == 0 && src == t) continue;
        const double c = cphi[k], sn = sphi[k];
        const Vec3 y{cells[src].w * c, cells[src].w * sn, cells[src].z};
        const Vec3 vs = cells[src].v;
        const Vec3 v{vs.x * c - vs.y * sn, vs.x * sn + vs.y * c, vs.z};
        const Vec3 d = x - y;
        const double r2 = dot(d, d);
        const Vec3 k3 = (vol / (r2 * std::sqrt(r2))) * cross(v, d);
        ax.add(k3.x);
        ay.add(k3.y);
        az.add(k3.z);
      }
    }
    const Vec3 a = (1.0 / (2.0 * two_pi)) * Vec3{ax.value(), ay.value(), az.value()};
    contrib[t] = dot(a, cells[t].v) * two_pi * cells[t].w * h * h;
  });
  return compensated_sum(contrib);
}

// ---------------------------------------------------------------------------
// Curves and linking numbers

/// Closed polygon; the last point connects back to the first.
struct ClosedCurve {
  std::vector<Vec3> points;

  std::size_t segment_count() const { return points.size(); }
  Vec3 segment_start(std::size_t i) const { return points[i]; }
  Vec3 segment_end(std::size_t i) const { return points[(i + 1) % points.size()]; }

  double length() const {
    CompensatedSum s;
    for (std::size_t i = 0; i < points.size(); ++i) s.add(norm(segment_end(i) - segment_start(i)));
    return s.value();
  }
  double max_segment_length() const {
    double m = 0.0;
    for (std::size_t i = 0; i < points.size(); ++i) m = std::max(m, norm(segment_end(i) - segment_start(i)));
    return m;
  }

  void validate() const {
    if (points.size() < 3) throw ValidationError("a closed curve needs at least 3 points");
    for (const auto& p : points)
      if (!std::isfinite(p.x) || !std::isfinite(p.y) || !std::isfinite(p.z))
        throw ValidationError("closed curve has non-finite points");
    if (!(max_segment_length() < length() / 8.0))
      throw ValidationError("closed curve has a gap longer than 1/8 of its length");
  }

  ClosedCurve moved(const std::array<Vec3, 3>& rotation, Vec3 shift) const {
    ClosedCurve out;
    for (const auto& p : points)
      out.points.push_back(Vec3{dot(rotation[0], p), dot(rotation[1], p), dot(rotation[2], p)} + shift);
    return out;
  }

  static ClosedCurve circle(Vec3 center, Vec3 e1, Vec3 e2, double radius, int segments) {
    ClosedCurve c;
    for (int i = 0; i < segments; ++i) {
      const double t = two_pi * i / segments;
      c.points.push_back(center + radius * std::cos(t) * e1 + radius * std::sin(t) * e2);
    }
    return c;
  }
};

inline double min_vertex_distance(const ClosedCurve& a, const ClosedCurve& b) {
  double m = std::numeric_limits<double>::infinity();
  for (const auto& p : a.points)
    for (const auto& q : b.points) m = std::min(m, norm(p - q));
  return m;
}

/// (1/4pi) sum_ij (m_i - m_j) . (d_i x d_j) / |m_i - m_j|^3 over segment
/// midpoints m and segment vectors d.
inline double gauss_linking(const ClosedCurve& a, const ClosedCurve& b) {
  a.validate();
  b.validate();
  const double seg = std::max(a.max_segment_length(), b.max_segment_length());
  const double dist = min_vertex_distance(a, b);
  if (!(dist > 10.0 * seg)) {
    std::ostringstream msg;
    msg << "curves too close: minimum distance " << dist << " is not above 10x the longest segment (" << seg << ")";
    throw CurvesTooCloseError(msg.str());
  }
  CompensatedSum s;
  for (std::size_t i = 0; i < a.segment_count(); ++i) {
    const Vec3 ma = 0.5 * (a.segment_start(i) + a.segment_end(i));
    const Vec3 da = a.segment_end(i) - a.segment_start(i);
    for (std::size_t j = 0; j < b.segment_count(); ++j) {
      const Vec3 mb = 0.5 * (b.segment_start(j) + b.segment_end(j));
      const Vec3 db = b.segment_end(j) - b.segment_start(j);
      const Vec3 r = ma - mb;
      const double r2 = dot(r, r);
      s.add(dot(r, cross(da, db)) / (r2 * std::sqrt(r2)));
    }
  }
  return s.value() / (2.0 * two_pi);
}

namespace detail {

inline double clamped_asin(double x) { return std::asin(std::clamp(x, -1.0, 1.0)); }

/// Exact Gauss double integral over two straight segments (signed solid
/// angle of the quadrilateral p1 p2 p3 p4 / 4pi times 4pi).
inline double segment_pair_linking(Vec3 p1, Vec3 p2, Vec3 p3, Vec3 p4) {
  const Vec3 r13 = p3 - p1, r14 = p4 - p1, r23 = p3 - p2, r24 = p4 - p2;
  Vec3 n[4] = {cross(r13, r14), cross(r14, r24), cross(r24, r23), cross(r23, r13)};
  for (auto& v : n) {
    const double l = norm(v);
    if (l == 0.0) return 0.0;
    v = (1.0 / l) * v;
  }
  const double omega = clamped_asin(dot(n[0], n[1])) + clamped_asin(dot(n[1], n[2])) +
                       clamped_asin(dot(n[2], n[3])) + clamped_asin(dot(n[3], n[0]));
  return dot(cross(p4 - p3, p2 - p1), r13) > 0.0 ? omega : -omega;
}

inline double segment_distance(Vec3 p, Vec3 q, Vec3 r, Vec3 s) {
  // Closest points of segments [p,q] and [r,s] (clamped parameter solve).
  const Vec3 d1 = q - p, d2 = s - r, w = p - r;
  const double a = dot(d1, d1), e = dot(d2, d2), f = dot(d2, w);
  double t1 = 0.0, t2 = 0.0;
  if (a == 0.0 && e == 0.0) return norm(w);
  if (a == 0.0) {
    t2 = std::clamp(f / e, 0.0, 1.0);
  } else {
    const double c = dot(d1, w);
    if (e == 0.0) {
      t1 = std::clamp(-c / a, 0.0, 1.0);
    } else {
      const double b = dot(d1, d2), den = a * e - b * b;
      t1 = den > 0.0 ? std::clamp((b * f - c * e) / den, 0.0, 1.0) : 0.0;
      t2 = (b * t1 + f) / e;
      if (t2 < 0.0) {
        t2 = 0.0;
        t1 = std::clamp(-c / a, 0.0, 1.0);
      } else if (t2 > 1.0) {
        t2 = 1.0;
        t1 = std::clamp((b - c) / a, 0.0, 1.0);
      }
    }
  }
  return norm((p + t1 * d1) - (r + t2 * d2));
}

}  // namespace detail

/// Exact linking number of two disjoint closed polygons (sum of exact
/// segment-pair Gauss integrals); an integer up to rounding.
inline double polygon_linking(const ClosedCurve& a, const ClosedCurve& b) {
  CompensatedSum s;
  for (std::size_t i = 0; i < a.segment_count(); ++i)
    for (std::size_t j = 0; j < b.segment_count(); ++j)
      s.add(detail::segment_pair_linking(a.segment_start(i), a.segment_end(i), b.segment_start(j), b.segment_end(j)));
  return s.value() / (2.0 * two_pi);
}

/// Smallest distance between the closing segment of `a` and any segment of `b`.
inline double closure_clearance(const ClosedCurve& a, const ClosedCurve& b) {
  const std::size_t last = a.segment_count() - 1;
  double m = std::numeric_limits<double>::infinity();
  for (std::size_t j = 0; j < b.segment_count(); ++j)
    m = std::min(m, detail::segment_distance(a.segment_start(last), a.segment_end(last), b.segment_start(j),
                                             b.segment_end(j)));
  return m;
}

// ---------------------------------------------------------------------------
// Asymptotic linking

struct LinkingParams {
  double duration = 100.0;  // T
  int pairs = 100;
  std::uint64_t seed = 7;
  double step = 0.05;
  double closure_bound = 1e-6;  // closing segments must keep this clearance
  int max_resamples = 1000;
};

struct LinkingEstimate {
  double mean = 0.0;            // mean of lk / T^2
  double standard_error = 0.0;  // of that mean
  double normalization = 0.0;   // support volume squared
  double normalized_mean = 0.0;
  double normalized_standard_error = 0.0;
  double duration = 0.0;
  int pairs = 0;
  std::uint64_t seed = 0;
  int resamples = 0;
  std::vector<double> samples;  // per-pair lk / T^2
};

namespace detail {

/// Uniform double in [0, 1) from the top 53 bits (platform independent).
inline double unit_uniform(std::mt19937_64& g) { return double(g() >> 11) * 0x1.0p-53; }

inline Vec3 sample_support(const Solenoid& s, std::mt19937_64& g) {
  const double R = s.support_radius(), r0 = s.minor_radius;
  for (;;) {
    const Vec3 x{(2 * unit_uniform(g) - 1) * R, (2 * unit_uniform(g) - 1) * R, (2 * unit_uniform(g) - 1) * r0};
    if (s.sigma(x) < 1.0) return x;
  }
}

inline ClosedCurve trajectory(const Solenoid& s, Vec3 x, double duration, double step) {
  const long steps = std::max(1L, std::lround(duration / step));
  const double dt = duration / double(steps);
  ClosedCurve c;
  c.points.reserve(steps + 1);
  c.points.push_back(x);
  for (long i = 0; i < steps; ++i) {
    const Vec3 k1 = s(x);
    const Vec3 k2 = s(x + 0.5 * dt * k1);
    const Vec3 k3 = s(x + 0.5 * dt * k2);
    const Vec3 k4 = s(x + dt * k3);
    x = x + (dt / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4);
    c.points.push_back(x);
  }
  return c;
}

}  // namespace detail

/// Mean over random pairs of lk(closed trajectory pair) / T^2, with initial
/// points uniform in the support. Each pair draws from its own generator
/// seeded by (seed, pair index), so the result does not depend on the number
/// of threads. Multiplying by volume^2 estimates the helicity.
inline LinkingEstimate asymptotic_linking(const Solenoid& s, const LinkingParams& prm) {
  s.validate();
  if (!(prm.duration > 0.0) || !std::isfinite(prm.duration)) throw ValidationError("linking horizon T must be positive");
  if (prm.pairs < 2) throw ValidationError("asymptotic linking needs at least 2 pairs");
  if (!(prm.step > 0.0)) throw ValidationError("trajectory step must be positive");

  std::vector<double> values(prm.pairs);
  std::vector<int> resamples(prm.pairs, 0);
  parallel_for(std::size_t(prm.pairs), [&](std::size_t i) {
    std::seed_seq seq{std::uint64_t(prm.seed & 0xffffffffu), std::uint64_t(prm.seed >> 32), std::uint64_t(i)};
    std::mt19937_64 gen(seq);
    for (;;) {
      const ClosedCurve a = detail::trajectory(s, detail::sample_support(s, gen), prm.duration, prm.step);
      const ClosedCurve b = detail::trajectory(s, detail::sample_support(s, gen), prm.duration, prm.step);
      if (closure_clearance(a, b) > prm.closure_bound && closure_clearance(b, a) > prm.closure_bound) {
        values[i] = polygon_linking(a, b) / (prm.duration * prm.duration);
        return;
      }
      if (++resamples[i] > prm.max_resamples) throw PreconditionError("closure segments keep hitting partner curves");
    }
  });

  LinkingEstimate e;
  e.duration = prm.duration;
  e.pairs = prm.pairs;
  e.seed = prm.seed;
  e.samples = values;
  for (int r : resamples) e.resamples += r;
  e.mean = compensated_sum(values) / prm.pairs;
  CompensatedSum var;
  for (double v : values) var.add((v - e.mean) * (v - e.mean));
  e.standard_error = std::sqrt(var.value() / (prm.pairs - 1) / prm.pairs);
  e.normalization = s.support_volume() * s.support_volume();
  e.normalized_mean = e.normalization * e.mean;
  e.normalized_standard_error = e.normalization * e.standard_error;
  return e;
}

}  // namespace hlab
