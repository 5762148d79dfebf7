#pragma once

// Compatible triples on the flat torus (the flow of W, Lebesgue measure,
// omega = i_W mu), flow maps, the mass flow of the isotopy against
// circle-valued maps, and the check that mass flow per unit time equals the
// flux pairing.

#include <hlab/error.hpp>
#include <hlab/geometry.hpp>
#include <hlab/helicity.hpp>
#include <hlab/parallel.hpp>

#include <cmath>
#include <functional>
#include <memory>
#include <sstream>

namespace hlab {

using VelocityFn = std::function<Vec3(Vec3)>;

/// Autonomous divergence-free, fixed-point-free field together with the
/// integrator settings used for its flow.
class CompatibleTriple {
 public:
  /// Off-grid values come from the trigonometric interpolant of the samples.
  explicit CompatibleTriple(VectorField3 w, double step = 1e-2, const Tolerances& tol = {})
      : field_(std::move(w)), step_(step) {
    validate(tol);
    auto interp = std::make_shared<TrigInterpolant>(field_);
    velocity_ = [interp](Vec3 p) { return interp->vector_at(p); };
  }

  /// Off-grid values come from `velocity`, which must agree with the samples;
  /// used for fields that are not band-limited.
  CompatibleTriple(VectorField3 w, VelocityFn velocity, double step = 1e-2, const Tolerances& tol = {})
      : field_(std::move(w)), velocity_(std::move(velocity)), step_(step) {
    validate(tol, /*require_nonvanishing=*/false);
  }

  const VectorField3& field() const { return field_; }
  const GridSpec& grid() const { return field_.grid; }
  double step() const { return step_; }
  Vec3 velocity(Vec3 p) const { return velocity_(p); }

 private:
  void validate(const Tolerances& tol, bool require_nonvanishing = true);

  VectorField3 field_;
  VelocityFn velocity_;
  double step_;
};

/// Smallest node norm below which a field counts as vanishing.
inline double fixed_point_threshold(const VectorField3& w) { return 1e-8 * std::max(1.0, max_norm(w)); }

/// The characteristic field of i_W mu is W itself on the flat torus; throws
/// FixedPointError if W vanishes at a node.
inline const VectorField3& characteristic_field(const VectorField3& w, const Tolerances& tol = {}) {
  require_solenoidal(w, tol);
  const double threshold = fixed_point_threshold(w);
  for (std::size_t i = 0; i < w.grid.node_count(); ++i) {
    if (norm(w.at(i)) <= threshold) {
      const Vec3 p = w.grid.node(i);
      std::ostringstream msg;
      msg << "fixed point present: the field vanishes at node (" << p.x << ", " << p.y << ", " << p.z
          << "), outside the fixed-point-free setting of the flux/mass-flow identity";
      throw FixedPointError(msg.str());
    }
  }
  return w;
}

inline void CompatibleTriple::validate(const Tolerances& tol, bool require_nonvanishing) {
  if (!(step_ > 0.0) || !std::isfinite(step_)) throw ValidationError("integration step must be positive");
  if (require_nonvanishing)
    characteristic_field(field_, tol);
  else
    require_solenoidal(field_, tol);
}

/// RK4 in the universal cover R^3 (no wrapping), so the returned point
/// carries the winding of the trajectory.
inline Vec3 flow_lifted(const CompatibleTriple& tr, Vec3 p, double t) {
  if (!std::isfinite(t)) throw ValidationError("flow time must be finite");
  if (t == 0.0) return p;
  const long steps = std::max(1L, long(std::ceil(std::abs(t) / tr.step() - 1e-9)));
  const double dt = t / double(steps);
  for (long i = 0; i < steps; ++i) {
    const Vec3 k1 = tr.velocity(p);
    const Vec3 k2 = tr.velocity(p + 0.5 * dt * k1);
    const Vec3 k3 = tr.velocity(p + 0.5 * dt * k2);
    const Vec3 k4 = tr.velocity(p + dt * k3);
    p = p + (dt / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4);
  }
  return p;
}

/// phi_t(p) on the torus, coordinates in [0, 2pi).
inline Vec3 flow_map(const CompatibleTriple& tr, Vec3 p, double t) {
  const Vec3 q = flow_lifted(tr, p, t);
  return {wrap_period(q.x), wrap_period(q.y), wrap_period(q.z)};
}

/// Determinant of the central-difference Jacobian of the lifted flow map.
inline double flow_jacobian(const CompatibleTriple& tr, Vec3 p, double t, double delta = 1e-5) {
  std::array<Vec3, 3> cols;
  for (int d = 0; d < 3; ++d) {
    Vec3 e;
    e[d] = delta;
    cols[d] = (1.0 / (2 * delta)) * (flow_lifted(tr, p + e, t) - flow_lifted(tr, p - e, t));
  }
  return dot(cols[0], cross(cols[1], cols[2]));
}

/// f(p) = (m . p) / 2pi + g(p) mod 1, with g periodic.
struct CircleMap {
  IVec3 winding{0, 0, 0};
  std::function<double(Vec3)> smooth;  // empty means g = 0

  double lift_value(Vec3 p) const {
    double v = (winding[0] * p.x + winding[1] * p.y + winding[2] * p.z) / two_pi;
    if (smooth) v += smooth(p);
    return v;
  }
  double value(Vec3 p) const {
    const double v = lift_value(p);
    return v - std::floor(v);
  }

  static CircleMap basis(int axis) {
    CircleMap f;
    f.winding[axis] = 1;
    return f;
  }
  /// g given by grid samples (evaluated with the trigonometric interpolant).
  static CircleMap with_samples(IVec3 m, const ScalarField3& g) {
    auto interp = std::make_shared<TrigInterpolant>(g);
    return {m, [interp](Vec3 p) { return interp->scalar_at(p); }};
  }
};

struct MassFlowResult {
  double value = 0.0;
  double duration = 0.0;
  IVec3 winding{0, 0, 0};
  double max_increment = 0.0;  // largest |lift increment| seen, certified < 1/4
};

/// Lift of t -> f(phi_t(p)) - f(p) at t = T, tracked through the torus values
/// of f with every increment certified below a quarter turn.
inline double tracked_lift(const CompatibleTriple& tr, const CircleMap& f, Vec3 p, double duration,
                           double* max_increment = nullptr) {
  const long steps = duration == 0.0 ? 0 : std::max(1L, long(std::ceil(std::abs(duration) / tr.step() - 1e-9)));
  const double dt = steps == 0 ? 0.0 : duration / double(steps);
  Vec3 x = p;
  double prev = f.value(p);
  double lift = 0.0;
  double worst = 0.0;
  for (long i = 0; i < steps; ++i) {
    const Vec3 k1 = tr.velocity(x);
    const Vec3 k2 = tr.velocity(x + 0.5 * dt * k1);
    const Vec3 k3 = tr.velocity(x + 0.5 * dt * k2);
    const Vec3 k4 = tr.velocity(x + dt * k3);
    x = x + (dt / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4);
    x = {wrap_period(x.x), wrap_period(x.y), wrap_period(x.z)};
    const double cur = f.value(x);
    const double inc = std::remainder(cur - prev, 1.0);
    if (std::abs(inc) >= 0.25) {
      std::ostringstream msg;
      msg << "lift ambiguity: circle-map increment " << inc << " per step is not below 1/4; reduce the step";
      throw LiftAmbiguityError(msg.str());
    }
    worst = std::max(worst, std::abs(inc));
    lift += inc;
    prev = cur;
  }
  if (max_increment) *max_increment = std::max(*max_increment, worst);
  return lift;
}

/// int_Y lift(f o phi_T - f) d mu over the grid nodes. Any finite T is
/// accepted; T = 0 gives 0 and negative T runs the flow backwards.
inline MassFlowResult mass_flow(const CompatibleTriple& tr, const CircleMap& f, double duration) {
  if (!std::isfinite(duration)) throw ValidationError("mass-flow duration must be finite");
  const GridSpec& g = tr.grid();
  std::vector<double> lifts(g.node_count());
  std::vector<double> worst(g.node_count(), 0.0);
  parallel_for(g.node_count(), [&](std::size_t i) { lifts[i] = tracked_lift(tr, f, g.node(i), duration, &worst[i]); });
  MassFlowResult r;
  r.value = pairwise_sum(lifts) / double(g.node_count()) * g.volume();
  r.duration = duration;
  r.winding = f.winding;
  for (double w : worst) r.max_increment = std::max(r.max_increment, w);
  return r;
}

struct MassFlowFluxReport {
  double duration = 0.0;
  FluxClass flux;
  std::array<double, 3> mass_flow_rate{};  // mass_flow(e_i) / T
  std::array<double, 3> residual{};
  double max_residual = 0.0;
};

/// For each basis class e_i: (1/T) mass_flow(e_i) - period_i.
inline MassFlowFluxReport verify_massflow_flux(const CompatibleTriple& tr, double duration,
                                               const Tolerances& tol = {}) {
  if (duration == 0.0 || !std::isfinite(duration))
    throw ValidationError("mass flow per unit time needs a finite nonzero duration");
  MassFlowFluxReport r;
  r.duration = duration;
  r.flux = flux(tr.field(), tol);
  for (int d = 0; d < 3; ++d) {
    r.mass_flow_rate[d] = mass_flow(tr, CircleMap::basis(d), duration).value / duration;
    r.residual[d] = r.mass_flow_rate[d] - r.flux.periods[d];
    r.max_residual = std::max(r.max_residual, std::abs(r.residual[d]));
  }
  return r;
}

}  // namespace hlab
