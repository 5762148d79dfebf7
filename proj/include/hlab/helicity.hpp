#pragma once

// Flux periods, Coulomb-gauge vector potentials and helicity of
// divergence-free fields on the flat 3-torus. Orientation is fixed by
// mu = dx ^ dy ^ dz, so the wedge pairing of a 1-form with i_W mu is the
// pointwise dot product integrated against Lebesgue measure.

#include <hlab/error.hpp>
#include <hlab/fft.hpp>
#include <hlab/geometry.hpp>

#include <array>
#include <complex>
#include <sstream>

namespace hlab {

/// Default tolerances; every report echoes the values actually used.
struct Tolerances {
  /// max |div W| / max |W| accepted as "divergence-free" for sampled fields.
  double divergence = 1e-8;
  /// |period| / ((2pi)^2 max |W|) accepted as "zero flux".
  double exactness = 1e-8;
};

/// Integrals of i_W mu over the three coordinate 2-tori {x = c}, {y = c}, {z = c}.
struct FluxClass {
  std::array<double, 3> periods{0.0, 0.0, 0.0};
};

/// Throws NotHamiltonianError unless the field is divergence-free, either by
/// construction (closed-form flag) or spectrally within tol.divergence.
inline void require_solenoidal(const VectorField3& w, const Tolerances& tol = {}) {
  if (w.analytic_solenoidal) return;
  const double ratio = divergence_ratio(w);
  if (ratio > tol.divergence) {
    std::ostringstream msg;
    msg << "not a Hamiltonian structure: relative divergence " << ratio << " exceeds " << tol.divergence
        << " (i_W mu is not closed)";
    throw NotHamiltonianError(msg.str());
  }
}

inline FluxClass flux(const VectorField3& w, const Tolerances& tol = {}) {
  require_solenoidal(w, tol);
  FluxClass f;
  for (int d = 0; d < 3; ++d) f.periods[d] = two_pi * two_pi * mean(w.components[d]);
  return f;
}

/// Period of i_W mu over the single coordinate 2-torus {x_axis = coordinate(slice)}.
inline double slice_period(const VectorField3& w, int axis, int slice) {
  const int n = w.grid.n();
  if (axis < 0 || axis > 2 || slice < 0 || slice >= n) throw ValidationError("slice out of range");
  std::vector<double> vals;
  vals.reserve(std::size_t(n) * n);
  for (int a = 0; a < n; ++a)
    for (int b = 0; b < n; ++b) {
      std::array<int, 3> idx{};
      idx[axis] = slice;
      idx[(axis + 1) % 3] = a;
      idx[(axis + 2) % 3] = b;
      vals.push_back(w.components[axis].values[w.grid.index(idx[0], idx[1], idx[2])]);
    }
  return pairwise_sum(vals) / double(vals.size()) * two_pi * two_pi;
}

/// Throws NonExactError (carrying the periods) unless all periods vanish.
inline void require_exact(const VectorField3& w, const Tolerances& tol = {}) {
  const FluxClass f = flux(w, tol);
  const double scale = two_pi * two_pi * max_norm(w);
  for (double p : f.periods) {
    if (std::abs(p) > tol.exactness * scale) {
      std::ostringstream msg;
      msg << "non-exact Hamiltonian structure: flux periods (" << f.periods[0] << ", " << f.periods[1] << ", "
          << f.periods[2] << ") are nonzero, so no primitive exists and helicity is undefined";
      throw NonExactError(msg.str(), f.periods[0], f.periods[1], f.periods[2]);
    }
  }
}

/// Coulomb-gauge primitive: A_k = i k x W_k / |k|^2, A_0 = 0, so that
/// curl A = W, div A = 0 and A has zero mean.
inline VectorField3 vector_potential(const VectorField3& w, const Tolerances& tol = {}) {
  require_exact(w, tol);
  std::array<fft::Spectrum, 3> c{spectrum(w.components[0]), spectrum(w.components[1]), spectrum(w.components[2])};
  std::array<fft::Spectrum, 3> o{fft::Spectrum(w.grid.n()), fft::Spectrum(w.grid.n()), fft::Spectrum(w.grid.n())};
  const std::complex<double> I(0.0, 1.0);
  for_each_mode(c[0], [&](std::size_t idx, Vec3 k) {
    const double k2 = dot(k, k);
    if (k2 == 0.0) return;
    const std::complex<double> wx = c[0][idx], wy = c[1][idx], wz = c[2][idx];
    o[0].set(idx, I * (k.y * wz - k.z * wy) / k2);
    o[1].set(idx, I * (k.z * wx - k.x * wz) / k2);
    o[2].set(idx, I * (k.x * wy - k.y * wx) / k2);
  });
  VectorField3 a(w.grid);
  for (int d = 0; d < 3; ++d) a.components[d] = from_spectrum(w.grid, o[d]);
  return a;
}

inline double helicity(const VectorField3& w, const Tolerances& tol = {}) {
  return l2_pairing(vector_potential(w, tol), w);
}

}  // namespace hlab
