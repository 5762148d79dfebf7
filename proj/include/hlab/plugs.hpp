#pragma once

// Plugs: replace the straight suspension flow inside an axis-aligned box by
// the suspension of a Hamiltonian isotopy. In box coordinates (t, u, v) with
// tau = (t - lo) / L the inserted field is (1, X_H(tau, u, v) / L), which is
// the vector-field form of the 2-form du ^ dv + dH ^ dt / L.

#include <hlab/error.hpp>
#include <hlab/geometry.hpp>
#include <hlab/helicity.hpp>
#include <hlab/surface.hpp>

#include <boost/math/quadrature/gauss.hpp>

#include <cmath>
#include <sstream>
#include <vector>

namespace hlab {

/// Surgery datum. `chart` describes the base field inside the box: the base
/// must equal (1, X_chart / L) there (an empty chart means a straight
/// suspension). Non-empty charts arise from inverse plugs, whose embedding is
/// twisted by the isotopy of the plug they undo.
struct Plug {
  int axis = 0;
  double window_lo = 0.5;
  double window_hi = 5.5;
  SurfaceDomain patch = SurfaceDomain::disc({pi, pi}, 1.0);
  TimeDependentHamiltonian hamiltonian;
  TimeDependentHamiltonian chart;

  double length() const { return window_hi - window_lo; }
};

namespace detail {

/// Overlap of closed arcs on the circle of length 2pi.
inline bool arcs_overlap(double c1, double h1, double c2, double h2) {
  return std::abs(periodic_delta(c1, c2)) <= h1 + h2;
}

struct BoxExtent {
  std::array<double, 3> center;
  std::array<double, 3> half;
};

inline BoxExtent box_extent(const Plug& p) {
  const AxisFrame fr = axis_frame(p.axis);
  BoxExtent b{};
  b.center[fr.t] = 0.5 * (p.window_lo + p.window_hi);
  b.half[fr.t] = 0.5 * p.length();
  b.center[fr.u] = p.patch.center.x;
  b.center[fr.v] = p.patch.center.y;
  b.half[fr.u] = b.half[fr.v] = p.patch.half_extent();
  return b;
}

}  // namespace detail

/// Geometric well-formedness on a grid: window inside (0, 2pi) (the box does
/// not wrap along the axis), patch narrower than the torus, and both the
/// temporal and spatial supports keep at least one grid cell from the box
/// boundary.
inline void validate_plug(const Plug& p, const GridSpec& grid) {
  axis_frame(p.axis);
  if (!(0.0 < p.window_lo && p.window_lo < p.window_hi && p.window_hi < two_pi))
    throw StructuralError("plug window must satisfy 0 < lo < hi < 2pi (the box may not wrap around the torus)");
  p.patch.validate();
  if (!(p.patch.half_extent() < pi - grid.spacing()))
    throw StructuralError("plug patch is wider than the transverse torus");
  if (!(p.hamiltonian.domain == p.patch) || !(p.chart.domain == p.patch))
    throw StructuralError("plug Hamiltonian must be defined on the plug patch");
  const double h = grid.spacing();
  p.hamiltonian.validate(h);
  p.chart.validate(h);
  for (const auto* ham : {&p.hamiltonian, &p.chart})
    for (const auto& term : ham->terms)
      if (!(term.time.start * p.length() >= h && (1.0 - term.time.end) * p.length() >= h))
        throw StructuralError("plug time support is closer than one grid cell to the box ends");
}

inline bool boxes_overlap(const Plug& a, const Plug& b) {
  const auto ea = detail::box_extent(a), eb = detail::box_extent(b);
  for (int d = 0; d < 3; ++d)
    if (!detail::arcs_overlap(ea.center[d], ea.half[d], eb.center[d], eb.half[d])) return false;
  return true;
}

namespace detail {

/// Calls fn(node index, tau, local transverse point) for every node in the
/// closed box.
template <class Fn>
void for_each_box_node(const Plug& p, const GridSpec& grid, Fn&& fn) {
  const AxisFrame fr = axis_frame(p.axis);
  const int n = grid.n();
  const double half = p.patch.half_extent();
  std::vector<int> ts, us, vs;
  for (int i = 0; i < n; ++i) {
    const double x = grid.coordinate(i);
    if (x >= p.window_lo && x <= p.window_hi) ts.push_back(i);
    if (std::abs(periodic_delta(x, p.patch.center.x)) <= half) us.push_back(i);
    if (std::abs(periodic_delta(x, p.patch.center.y)) <= half) vs.push_back(i);
  }
  for (int it : ts)
    for (int iu : us)
      for (int iv : vs) {
        std::array<int, 3> idx{};
        idx[fr.t] = it;
        idx[fr.u] = iu;
        idx[fr.v] = iv;
        const double tau = (grid.coordinate(it) - p.window_lo) / p.length();
        const Vec2 local = p.patch.center + Vec2{periodic_delta(grid.coordinate(iu), p.patch.center.x),
                                                 periodic_delta(grid.coordinate(iv), p.patch.center.y)};
        fn(grid.index(idx[0], idx[1], idx[2]), tau, local);
      }
}

/// Hamiltonian vector field of the cell average of H(tau, .) over the
/// square of side `h` about p. Edge integrals make the grid sums of each
/// component telescope to zero, so insertion leaves the discrete flux
/// unchanged; the average has the same integral (and Calabi invariant) as H.
inline Vec2 cell_averaged_field(const TimeDependentHamiltonian& ham, double tau, Vec2 p, double h) {
  using boost::math::quadrature::gauss;
  const double half = 0.5 * h;
  Vec2 x;
  for (const auto& term : ham.terms) {
    const double rate = term.time.rate(tau);
    if (rate == 0.0) continue;
    const RadialBump& b = term.bump;
    const Vec2 d = p - b.center;
    if (std::abs(d.x) >= b.radius + half || std::abs(d.y) >= b.radius + half) continue;
    // Integral of H0 along the segment {offset + s e} for s in [lo, hi],
    // clipped to the chord inside the support so the integrand is smooth.
    auto edge = [&](double across, double along_center, double lo, double hi, bool horizontal) {
      const double r2 = b.radius * b.radius - across * across;
      if (r2 <= 0.0) return 0.0;
      const double chord = std::sqrt(r2);
      const double a = std::max(lo, along_center - chord), z = std::min(hi, along_center + chord);
      if (a >= z) return 0.0;
      return gauss<double, 8>::integrate(
          [&](double s) {
            return horizontal ? b.value({s, b.center.y + across}) : b.value({b.center.x + across, s});
          },
          a, z);
    };
    const double dv = edge(d.y + half, b.center.x, p.x - half, p.x + half, true) -
                      edge(d.y - half, b.center.x, p.x - half, p.x + half, true);
    const double du = edge(d.x + half, b.center.y, p.y - half, p.y + half, false) -
                      edge(d.x - half, b.center.y, p.y - half, p.y + half, false);
    x = x + (rate / (h * h)) * Vec2{dv, -du};
  }
  return x;
}

inline void check_base_in_box(const VectorField3& w, const Plug& p, double tol) {
  const AxisFrame fr = axis_frame(p.axis);
  const double inv_len = 1.0 / p.length();
  for_each_box_node(p, w.grid, [&](std::size_t idx, double tau, Vec2 local) {
    const Vec2 x = cell_averaged_field(p.chart, tau, local, w.grid.spacing());
    const double dt = w.components[fr.t].values[idx] - 1.0;
    const double du = w.components[fr.u].values[idx] - x.x * inv_len;
    const double dv = w.components[fr.v].values[idx] - x.y * inv_len;
    if (std::abs(dt) > tol || std::abs(du) > tol || std::abs(dv) > tol) {
      std::ostringstream msg;
      msg << "base field is not the suspension expected by the plug at node " << idx
          << " (deviation " << std::max({std::abs(dt), std::abs(du), std::abs(dv)}) << ")";
      throw StructuralError(msg.str());
    }
  });
}

}  // namespace detail

/// Throws unless the plug can be inserted into w.
inline void check_insertable(const VectorField3& w, const Plug& p, double tol = 1e-12) {
  validate_plug(p, w.grid);
  detail::check_base_in_box(w, p, tol);
}

/// W # P. Inside the box the transverse components gain X/L, where X is the
/// Hamiltonian field of H averaged over one grid cell. Nodes where X vanishes
/// are left untouched, so the output agrees bit-for-bit with W outside the
/// support.
inline VectorField3 insert_plug(const VectorField3& w, const Plug& p) {
  check_insertable(w, p);
  VectorField3 out = w;
  const AxisFrame fr = axis_frame(p.axis);
  const double inv_len = 1.0 / p.length();
  detail::for_each_box_node(p, w.grid, [&](std::size_t idx, double tau, Vec2 local) {
    const Vec2 x = detail::cell_averaged_field(p.hamiltonian, tau, local, w.grid.spacing());
    if (x.x != 0.0) out.components[fr.u].values[idx] += x.x * inv_len;
    if (x.y != 0.0) out.components[fr.v].values[idx] += x.y * inv_len;
  });
  return out;
}

/// The plug that undoes p: same patch, embedding twisted by the isotopy of p
/// (chart' = chart + H), isotopy reversed pointwise (H' = -H).
inline Plug inverse_plug(const Plug& p, const VectorField3& w) {
  check_insertable(w, p);
  Plug inv = p;
  inv.hamiltonian = negated(p.hamiltonian);
  inv.chart = simplify(combined(p.chart, p.hamiltonian));
  return inv;
}

inline double calabi_of_plug(const Plug& p) { return calabi(p.hamiltonian); }

/// Closed-form output field inside the box of p for a base equal to the
/// plug's expected suspension; ambient coordinates.
inline Vec3 plug_field_at(const Plug& p, Vec3 x) {
  const AxisFrame fr = axis_frame(p.axis);
  const double tau = (x[fr.t] - p.window_lo) / p.length();
  const Vec2 local = p.patch.center + Vec2{periodic_delta(x[fr.u], p.patch.center.x),
                                           periodic_delta(x[fr.v], p.patch.center.y)};
  const Vec2 xh = p.chart.field(tau, local) + p.hamiltonian.field(tau, local);
  Vec3 out;
  out[fr.t] = 1.0;
  out[fr.u] = xh.x / p.length();
  out[fr.v] = xh.y / p.length();
  return out;
}

/// Follows the characteristic line of the plugged field from the entry face
/// (transverse point `entry`) to the exit face with RK4; returns the exit
/// transverse point. Since the axis component is 1 the line crosses the box
/// in arc time L.
inline Vec2 trace_exit_map(const Plug& p, Vec2 entry, int steps = 2000) {
  const AxisFrame fr = axis_frame(p.axis);
  Vec3 x;
  x[fr.t] = p.window_lo;
  x[fr.u] = entry.x;
  x[fr.v] = entry.y;
  const double ds = p.length() / steps;
  for (int i = 0; i < steps; ++i) {
    const Vec3 k1 = plug_field_at(p, x);
    const Vec3 k2 = plug_field_at(p, x + 0.5 * ds * k1);
    const Vec3 k3 = plug_field_at(p, x + 0.5 * ds * k2);
    const Vec3 k4 = plug_field_at(p, x + ds * k3);
    x = x + (ds / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4);
  }
  return {x[fr.u], x[fr.v]};
}

// ---------------------------------------------------------------------------
// Presentations

/// Smooth base field plus an ordered list of plugs with disjoint boxes.
struct C0Presentation {
  VectorField3 base;
  std::vector<Plug> plugs;
};

inline void validate_presentation(const C0Presentation& p) {
  for (std::size_t i = 0; i < p.plugs.size(); ++i) {
    validate_plug(p.plugs[i], p.base.grid);
    for (std::size_t j = 0; j < i; ++j)
      if (boxes_overlap(p.plugs[i], p.plugs[j])) {
        std::ostringstream msg;
        msg << "plug boxes " << j << " and " << i << " overlap";
        throw StructuralError(msg.str());
      }
  }
}

/// The surgery field base # P_1 # ... # P_k.
inline VectorField3 materialize(const C0Presentation& p) {
  validate_presentation(p);
  VectorField3 w = p.base;
  for (const auto& plug : p.plugs) w = insert_plug(w, plug);
  return w;
}

/// H(base) + sum_i Cal(P_i).
inline double extended_helicity(const C0Presentation& p, const Tolerances& tol = {}) {
  validate_presentation(p);
  double h = helicity(p.base, tol);
  for (const auto& plug : p.plugs) h += calabi_of_plug(plug);
  return h;
}

inline FluxClass extended_flux(const C0Presentation& p, const Tolerances& tol = {}) {
  validate_presentation(p);
  return flux(p.base, tol);
}

// ---------------------------------------------------------------------------
// Helicity change law

struct GgReport {
  int grid = 0;
  double helicity_before = 0.0;
  double helicity_after = 0.0;
  double calabi = 0.0;
  double residual = 0.0;           // after - before - calabi
  double relative_residual = 0.0;  // |residual| / |calabi| (|residual| if calabi == 0)
  FluxClass flux_before;
  FluxClass flux_after;
  double max_flux_change = 0.0;
  double divergence_ratio = 0.0;     // spectral, of the surgery field
  double outer_band_fraction = 0.0;  // spectral energy above n/4
};

inline GgReport gg_verify(const C0Presentation& p, const Tolerances& tol = {}) {
  validate_presentation(p);
  GgReport r;
  r.grid = p.base.grid.n();
  const VectorField3 after = materialize(p);
  r.flux_before = flux(p.base, tol);
  r.flux_after = flux(after, tol);
  for (int d = 0; d < 3; ++d)
    r.max_flux_change = std::max(r.max_flux_change, std::abs(r.flux_after.periods[d] - r.flux_before.periods[d]));
  r.helicity_before = helicity(p.base, tol);
  r.helicity_after = helicity(after, tol);
  for (const auto& plug : p.plugs) r.calabi += calabi_of_plug(plug);
  r.residual = r.helicity_after - r.helicity_before - r.calabi;
  r.relative_residual = r.calabi != 0.0 ? std::abs(r.residual / r.calabi) : std::abs(r.residual);
  r.divergence_ratio = divergence_ratio(after);
  r.outer_band_fraction = outer_band_energy_fraction(after);
  return r;
}

inline GgReport gg_verify(const VectorField3& w, const Plug& p, const Tolerances& tol = {}) {
  return gg_verify(C0Presentation{w, {p}}, tol);
}

}  // namespace hlab
