#pragma once

// Reference configurations shared by the CLI, the sample configs and the
// test suites.

#include <hlab/geometry.hpp>
#include <hlab/linking.hpp>
#include <hlab/plugs.hpp>
#include <hlab/surface.hpp>

#include <vector>

namespace hlab::presets {

/// Zero-helicity suspension along x, exactly (1, 0, 0) on the disc of radius
/// 1.9 about (y, z) = (pi, pi), which contains the reference plug box.
inline SuspensionSpec reference_suspension() {
  return SuspensionSpec{0, {{{pi, pi}, 1.9, 3.1}}};
}

/// Smooth radial bump (rho = 1, a = 1) with unit temporal integral on a disc
/// patch of radius 1.3, inserted along x over the window [0.6, 2pi - 0.6].
inline Plug reference_plug(RadialBump::Shape shape = RadialBump::Shape::smooth) {
  Plug p;
  p.axis = 0;
  p.window_lo = 0.6;
  p.window_hi = two_pi - 0.6;
  p.patch = SurfaceDomain::disc({pi, pi}, 1.3);
  p.hamiltonian.domain = p.patch;
  p.hamiltonian.terms.push_back({RadialBump{shape, {pi, pi}, 1.0, 1.0}, TemporalProfile{0.1, 0.9, 1.0}});
  p.chart.domain = p.patch;
  return p;
}

inline Plug trivial_plug() {
  Plug p = reference_plug();
  p.hamiltonian.terms.clear();
  return p;
}

inline Solenoid reference_solenoid() { return Solenoid{}; }

/// ABC field without stagnation points: the first two components vanish
/// together only if sin^2 z + cos^2 z = C^2 cos^2 y + B^2 sin^2 x, which
/// B^2 + C^2 < A^2 = 1 rules out.
inline AbcSpec nonvanishing_abc() { return AbcSpec{1.0, 0.6, 0.5}; }

/// Unimodular matrices used for the pullback-invariance checks.
inline std::vector<IMat3> unimodular_matrices() {
  return {
      IMat3{{{0, 1, 0}, {0, 0, 1}, {1, 0, 0}}},   // cyclic permutation
      IMat3{{{1, 1, 0}, {0, 1, 0}, {0, 0, 1}}},   // shear
      IMat3{{{1, 0, 0}, {0, 1, -1}, {0, 0, 1}}},  // negative shear
      IMat3{{{2, 1, 0}, {1, 1, 0}, {0, 0, 1}}},   // hyperbolic (cat map) block
      IMat3{{{0, -1, 0}, {1, 0, 0}, {0, 0, 1}}},  // quarter turn
  };
}

}  // namespace hlab::presets
