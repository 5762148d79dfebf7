#pragma once

// Compactly supported time-dependent Hamiltonians on planar domains, their
// isotopies and the Calabi invariant Cal = 2 * int H dt ^ omega.
// Sign convention: i_X omega = dH with omega = dx ^ dy, i.e.
// X_H = (dH/dy, -dH/dx).

#include <hlab/error.hpp>
#include <hlab/vec.hpp>

#include <boost/math/quadrature/gauss_kronrod.hpp>
#include <boost/math/quadrature/tanh_sinh.hpp>
#include <boost/math/special_functions/expint.hpp>

#include <algorithm>
#include <array>
#include <cmath>
#include <sstream>
#include <string>
#include <vector>

namespace hlab {

// ---------------------------------------------------------------------------
// Domains

/// Open disc or open axis-aligned square with the standard area form.
struct SurfaceDomain {
  enum class Kind { disc, square };
  Kind kind = Kind::disc;
  Vec2 center;
  double size = 1.0;  // disc radius or square half-side

  static SurfaceDomain disc(Vec2 c, double radius) { return {Kind::disc, c, radius}; }
  static SurfaceDomain square(Vec2 c, double half_side) { return {Kind::square, c, half_side}; }

  void validate() const {
    if (!(size > 0.0) || !std::isfinite(size)) throw ValidationError("surface domain size must be positive");
  }

  /// Largest r such that the closed disc of radius r about p lies inside.
  double inner_distance(Vec2 p) const {
    const Vec2 d = p - center;
    if (kind == Kind::disc) return size - norm(d);
    return size - std::max(std::abs(d.x), std::abs(d.y));
  }

  bool contains(Vec2 p) const { return inner_distance(p) > 0.0; }

  /// Half-extent of the bounding square.
  double half_extent() const { return size; }

  friend bool operator==(const SurfaceDomain&, const SurfaceDomain&) = default;
};

// ---------------------------------------------------------------------------
// Spatial and temporal profiles

/// Radial bump H0(p) = a g(|p - c|^2) supported in the closed disc of radius rho.
struct RadialBump {
  enum class Shape {
    polynomial,  // (1 - r^2/rho^2)^3, C^2 at the support boundary
    smooth,      // exp(1 - 1/(1 - r^2/rho^2)), C-infinity, value 1 at the centre
  };
  Shape shape = Shape::smooth;
  Vec2 center;
  double radius = 1.0;
  double amplitude = 1.0;

  /// g(s) and g'(s) for s = r^2 (g includes the amplitude).
  std::pair<double, double> profile(double s) const {
    const double q = s / (radius * radius);
    if (q >= 1.0) return {0.0, 0.0};
    const double w = 1.0 - q;
    if (shape == Shape::polynomial)
      return {amplitude * w * w * w, -3.0 * amplitude * w * w / (radius * radius)};
    const double e = amplitude * std::exp(1.0 - 1.0 / w);
    return {e, -e / (w * w) / (radius * radius)};
  }

  double value(Vec2 p) const {
    const Vec2 d = p - center;
    return profile(d.x * d.x + d.y * d.y).first;
  }

  /// (dH/dx, dH/dy).
  Vec2 gradient(Vec2 p) const {
    const Vec2 d = p - center;
    const double gp = profile(d.x * d.x + d.y * d.y).second;
    return {2.0 * gp * d.x, 2.0 * gp * d.y};
  }

  /// g''(s) for s = r^2 (includes the amplitude).
  double second_derivative(double s) const {
    const double r2 = radius * radius;
    const double q = s / r2;
    if (q >= 1.0) return 0.0;
    const double w = 1.0 - q;
    if (shape == Shape::polynomial) return 6.0 * amplitude * w / (r2 * r2);
    const double e = amplitude * std::exp(1.0 - 1.0 / w);
    return e * (1.0 - 2.0 * w) / (w * w * w * w * r2 * r2);
  }

  /// (H_xx, H_xy, H_yy).
  std::array<double, 3> hessian(Vec2 p) const {
    const Vec2 d = p - center;
    const double s = d.x * d.x + d.y * d.y;
    const double gp = profile(s).second, gpp = second_derivative(s);
    return {4.0 * gpp * d.x * d.x + 2.0 * gp, 4.0 * gpp * d.x * d.y, 4.0 * gpp * d.y * d.y + 2.0 * gp};
  }

  /// Closed-form integral of H0 over the plane.
  double integral() const {
    const double base = amplitude * pi * radius * radius;
    if (shape == Shape::polynomial) return base / 4.0;
    // int_0^1 exp(1 - 1/w) dw = 1 - e E1(1)
    return base * (1.0 - std::exp(1.0) * boost::math::expint(1, 1.0));
  }

  friend bool operator==(const RadialBump&, const RadialBump&) = default;
};

namespace detail {

/// exp(-1/(u(1-u))) on (0,1), zero elsewhere.
inline double window_kernel(double u) {
  if (u <= 0.0 || u >= 1.0) return 0.0;
  return std::exp(-1.0 / (u * (1.0 - u)));
}

inline double window_kernel_integral() {
  static const double z = [] {
    boost::math::quadrature::gauss_kronrod<double, 61> gk;
    return gk.integrate(window_kernel, 0.0, 1.0, 20, 1e-15);
  }();
  return z;
}

}  // namespace detail

/// Smooth non-negative (for positive integral) temporal profile
/// h(t) = I psi((t - t0)/(t1 - t0)) / (t1 - t0) with psi a C-infinity bump of
/// unit mass on (0,1). h vanishes outside (t0, t1), so the generated isotopy
/// is the identity for t <= t0 and frozen for t >= t1.
struct TemporalProfile {
  double start = 0.1;
  double end = 0.9;
  double integral = 1.0;

  void validate() const {
    if (!(0.0 < start && start < end && end < 1.0))
      throw ValidationError("temporal window must satisfy 0 < start < end < 1");
    if (!std::isfinite(integral)) throw ValidationError("temporal integral must be finite");
  }

  double rate(double t) const {
    const double len = end - start;
    return integral * detail::window_kernel((t - start) / len) / (len * detail::window_kernel_integral());
  }

  /// int_0^t h.
  double cumulative(double t) const {
    if (t <= start) return 0.0;
    if (t >= end) return integral;
    const double len = end - start;
    boost::math::quadrature::gauss_kronrod<double, 61> gk;
    const double part = gk.integrate(detail::window_kernel, 0.0, (t - start) / len, 20, 1e-15);
    return integral * part / detail::window_kernel_integral();
  }

  friend bool operator==(const TemporalProfile&, const TemporalProfile&) = default;
};

// ---------------------------------------------------------------------------
// Hamiltonians

struct HamiltonianTerm {
  RadialBump bump;
  TemporalProfile time;

  friend bool operator==(const HamiltonianTerm&, const HamiltonianTerm&) = default;
};

/// H(t, p) = sum_i h_i(t) H0_i(p), compactly supported inside the domain.
struct TimeDependentHamiltonian {
  SurfaceDomain domain = SurfaceDomain::disc({0.0, 0.0}, 1.0);
  std::vector<HamiltonianTerm> terms;

  bool is_trivial() const { return terms.empty(); }

  /// Throws unless every term is well formed and its support keeps at least
  /// `margin` distance from the domain boundary.
  void validate(double margin = 0.0) const {
    domain.validate();
    for (const auto& term : terms) {
      term.time.validate();
      const auto& b = term.bump;
      if (!(b.radius > 0.0) || !std::isfinite(b.radius) || !std::isfinite(b.amplitude))
        throw ValidationError("bump radius must be positive and amplitude finite");
      const double room = domain.inner_distance(b.center) - b.radius;
      if (!(room > margin)) {
        std::ostringstream msg;
        msg << "Hamiltonian support (centre (" << b.center.x << ", " << b.center.y << "), radius " << b.radius
            << ") is not strictly inside its surface domain with margin " << margin;
        throw StructuralError(msg.str());
      }
    }
  }

  double value(double t, Vec2 p) const {
    double v = 0.0;
    for (const auto& term : terms) v += term.time.rate(t) * term.bump.value(p);
    return v;
  }

  /// Hamiltonian vector field (dH/dy, -dH/dx) without the domain check.
  Vec2 field(double t, Vec2 p) const {
    Vec2 x;
    for (const auto& term : terms) {
      const double h = term.time.rate(t);
      if (h == 0.0) continue;
      const Vec2 g = term.bump.gradient(p);
      x = x + h * Vec2{g.y, -g.x};
    }
    return x;
  }

  /// Derivative of the Hamiltonian vector field, row-major
  /// ((dX1/dx, dX1/dy), (dX2/dx, dX2/dy)).
  std::array<double, 4> field_jacobian(double t, Vec2 p) const {
    std::array<double, 4> j{};
    for (const auto& term : terms) {
      const double h = term.time.rate(t);
      if (h == 0.0) continue;
      const auto [hxx, hxy, hyy] = term.bump.hessian(p);
      j[0] += h * hxy;
      j[1] += h * hyy;
      j[2] -= h * hxx;
      j[3] -= h * hxy;
    }
    return j;
  }
};

/// X_H(t, p) = (dH/dy, -dH/dx); throws DomainError outside the domain.
inline Vec2 ham_vector_field(const TimeDependentHamiltonian& h, double t, Vec2 p) {
  if (!h.domain.contains(p)) {
    std::ostringstream msg;
    msg << "point (" << p.x << ", " << p.y << ") lies outside the Hamiltonian's surface domain";
    throw DomainError(msg.str());
  }
  return h.field(t, p);
}

/// phi^t(p) by classical RK4 with a fixed step no larger than `step`.
/// Points outside the support never move: every stage evaluates to zero.
inline Vec2 integrate_isotopy(const TimeDependentHamiltonian& h, Vec2 p, double t, double step = 1e-3) {
  if (!(t >= 0.0 && t <= 1.0)) throw ValidationError("isotopy time must lie in [0, 1]");
  if (!(step > 0.0)) throw ValidationError("integration step must be positive");
  if (t == 0.0 || h.is_trivial()) return p;
  const long steps = std::max(1L, long(std::ceil(t / step - 1e-9)));
  const double dt = t / double(steps);
  for (long i = 0; i < steps; ++i) {
    const double s = i * dt;
    const Vec2 k1 = h.field(s, p);
    const Vec2 k2 = h.field(s + 0.5 * dt, p + 0.5 * dt * k1);
    const Vec2 k3 = h.field(s + 0.5 * dt, p + 0.5 * dt * k2);
    const Vec2 k4 = h.field(s + dt, p + dt * k3);
    const Vec2 inc = (dt / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4);
    if (inc.x != 0.0 || inc.y != 0.0) p = p + inc;
  }
  return p;
}

/// det D(phi^t)(p), from the variational equation J' = DX_H J integrated
/// with the same RK4 steps as the trajectory (the exact Jacobian of the
/// discrete map).
inline double isotopy_jacobian(const TimeDependentHamiltonian& h, Vec2 p, double t, double step = 1e-3) {
  if (!(t >= 0.0 && t <= 1.0)) throw ValidationError("isotopy time must lie in [0, 1]");
  if (!(step > 0.0)) throw ValidationError("integration step must be positive");
  if (t == 0.0 || h.is_trivial()) return 1.0;
  using M = std::array<double, 4>;
  auto mul = [](const M& a, const M& b) {
    return M{a[0] * b[0] + a[1] * b[2], a[0] * b[1] + a[1] * b[3], a[2] * b[0] + a[3] * b[2],
             a[2] * b[1] + a[3] * b[3]};
  };
  auto axpy = [](const M& a, double s, const M& b) { return M{a[0] + s * b[0], a[1] + s * b[1], a[2] + s * b[2], a[3] + s * b[3]}; };
  const long steps = std::max(1L, long(std::ceil(t / step - 1e-9)));
  const double dt = t / double(steps);
  M j{1.0, 0.0, 0.0, 1.0};
  for (long i = 0; i < steps; ++i) {
    const double s = i * dt;
    const Vec2 k1 = h.field(s, p);
    const M l1 = mul(h.field_jacobian(s, p), j);
    const Vec2 p2 = p + 0.5 * dt * k1;
    const Vec2 k2 = h.field(s + 0.5 * dt, p2);
    const M l2 = mul(h.field_jacobian(s + 0.5 * dt, p2), axpy(j, 0.5 * dt, l1));
    const Vec2 p3 = p + 0.5 * dt * k2;
    const Vec2 k3 = h.field(s + 0.5 * dt, p3);
    const M l3 = mul(h.field_jacobian(s + 0.5 * dt, p3), axpy(j, 0.5 * dt, l2));
    const Vec2 p4 = p + dt * k3;
    const Vec2 k4 = h.field(s + dt, p4);
    const M l4 = mul(h.field_jacobian(s + dt, p4), axpy(j, dt, l3));
    const Vec2 inc = (dt / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4);
    if (inc.x != 0.0 || inc.y != 0.0) p = p + inc;
    for (int c = 0; c < 4; ++c) j[c] += dt / 6.0 * (l1[c] + 2.0 * l2[c] + 2.0 * l3[c] + l4[c]);
  }
  return j[0] * j[3] - j[1] * j[2];
}

/// Cal = 2 int_0^1 int_Sigma H dt omega, from the closed-form bump integrals.
inline double calabi(const TimeDependentHamiltonian& h) {
  double cal = 0.0;
  for (const auto& term : h.terms) cal += 2.0 * term.time.integral * term.bump.integral();
  return cal;
}

/// Same quantity by nested numerical quadrature over each term's support
/// (tanh-sinh in time and in both space directions).
inline double calabi_quadrature(const TimeDependentHamiltonian& h, double tol = 1e-13) {
  boost::math::quadrature::tanh_sinh<double> ts;
  double cal = 0.0;
  for (const auto& term : h.terms) {
    const auto& tp = term.time;
    const double time_integral = ts.integrate([&](double t) { return tp.rate(t); }, tp.start, tp.end, tol);
    const auto& b = term.bump;
    const double rho = b.radius;
    auto column = [&](double x) {
      const double dx = x - b.center.x;
      const double half = std::sqrt(std::max(0.0, rho * rho - dx * dx));
      if (half == 0.0) return 0.0;
      return ts.integrate([&](double y) { return b.value({x, y}); }, b.center.y - half, b.center.y + half, tol);
    };
    const double space_integral = ts.integrate(column, b.center.x - rho, b.center.x + rho, tol);
    cal += 2.0 * time_integral * space_integral;
  }
  return cal;
}

// ---------------------------------------------------------------------------
// Algebra of isotopies

/// Generates phi_1^{2t} on [0, 1/2] and phi_2^{2t-1} o phi_1^1 on [1/2, 1].
/// Each term keeps its temporal integral, so Calabi is additive.
inline TimeDependentHamiltonian concatenate(const TimeDependentHamiltonian& first,
                                            const TimeDependentHamiltonian& second) {
  if (!(first.domain == second.domain))
    throw DomainError("cannot concatenate Hamiltonians defined on different surface domains");
  TimeDependentHamiltonian out{first.domain, {}};
  for (auto term : first.terms) {
    term.time.start *= 0.5;
    term.time.end *= 0.5;
    out.terms.push_back(term);
  }
  for (auto term : second.terms) {
    term.time.start = 0.5 + 0.5 * term.time.start;
    term.time.end = 0.5 + 0.5 * term.time.end;
    out.terms.push_back(term);
  }
  return out;
}

/// -H(1 - t, p): generates phi^{1-t} o (phi^1)^{-1}, time-1 map (phi^1)^{-1}.
inline TimeDependentHamiltonian reversed(const TimeDependentHamiltonian& h) {
  TimeDependentHamiltonian out{h.domain, {}};
  for (auto term : h.terms) {
    const double s = term.time.start;
    term.time.start = 1.0 - term.time.end;
    term.time.end = 1.0 - s;
    term.time.integral = -term.time.integral;
    out.terms.push_back(term);
  }
  return out;
}

/// -H(t, p).
inline TimeDependentHamiltonian negated(const TimeDependentHamiltonian& h) {
  TimeDependentHamiltonian out = h;
  for (auto& term : out.terms) term.time.integral = -term.time.integral;
  return out;
}

/// Terms of a and b on the domain of a.
inline TimeDependentHamiltonian combined(const TimeDependentHamiltonian& a, const TimeDependentHamiltonian& b) {
  TimeDependentHamiltonian out = a;
  out.terms.insert(out.terms.end(), b.terms.begin(), b.terms.end());
  return out;
}

/// Merges terms that differ only in their temporal integral and drops terms
/// whose integral is zero. The represented function is unchanged.
inline TimeDependentHamiltonian simplify(const TimeDependentHamiltonian& h) {
  TimeDependentHamiltonian out{h.domain, {}};
  for (const auto& term : h.terms) {
    auto it = std::find_if(out.terms.begin(), out.terms.end(), [&](const HamiltonianTerm& o) {
      return o.bump == term.bump && o.time.start == term.time.start && o.time.end == term.time.end;
    });
    if (it == out.terms.end())
      out.terms.push_back(term);
    else
      it->time.integral += term.time.integral;
  }
  std::erase_if(out.terms, [](const HamiltonianTerm& t) { return t.time.integral == 0.0 || t.bump.amplitude == 0.0; });
  return out;
}

/// Rotation by `angle` about the origin followed by a translation.
struct RigidMotion2 {
  double angle = 0.0;
  Vec2 shift;

  Vec2 apply(Vec2 p) const {
    const double c = std::cos(angle), s = std::sin(angle);
    return Vec2{c * p.x - s * p.y, s * p.x + c * p.y} + shift;
  }
};

/// Push-forward iota_* H = H o iota^{-1} on iota(Sigma). Square domains only
/// accept rotations by multiples of pi/2 so that they stay axis-aligned.
inline TimeDependentHamiltonian transformed(const TimeDependentHamiltonian& h, const RigidMotion2& iota) {
  if (h.domain.kind == SurfaceDomain::Kind::square) {
    const double quarter = iota.angle / (0.5 * pi);
    if (std::abs(quarter - std::round(quarter)) > 1e-12)
      throw DomainError("square domains can only be rotated by multiples of pi/2");
  }
  TimeDependentHamiltonian out = h;
  out.domain.center = iota.apply(h.domain.center);
  for (auto& term : out.terms) term.bump.center = iota.apply(term.bump.center);
  return out;
}

}  // namespace hlab
