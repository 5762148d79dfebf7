#pragma once

// Thin RAII layer over FFTW's real-to-complex 3-D transforms. Plans are
// created once per resolution under a mutex (the FFTW planner is not
// thread-safe) and executed with the new-array interface on fftw_malloc'd
// buffers, which keeps alignment, and therefore the chosen codelets and the
// numerical results, identical from call to call.

#include <fftw3.h>

#include <algorithm>
#include <complex>
#include <cstddef>
#include <map>
#include <memory>
#include <mutex>
#include <span>

namespace hlab::fft {

struct FftwFree {
  void operator()(void* p) const noexcept { fftw_free(p); }
};

template <class T>
using fftw_buffer = std::unique_ptr<T[], FftwFree>;

template <class T>
fftw_buffer<T> allocate(std::size_t count) {
  auto* raw = static_cast<T*>(fftw_malloc(sizeof(T) * count));
  if (raw == nullptr) throw std::bad_alloc();
  return fftw_buffer<T>(raw);
}

namespace detail {

struct PlanPair {
  fftw_plan forward = nullptr;
  fftw_plan backward = nullptr;
};

inline std::mutex& planner_mutex() {
  static std::mutex m;
  return m;
}

inline const PlanPair& plans_for(int n) {
  static std::map<int, PlanPair> cache;
  std::lock_guard lock(planner_mutex());
  auto it = cache.find(n);
  if (it != cache.end()) return it->second;
  const std::size_t real_count = std::size_t(n) * n * n;
  const std::size_t spec_count = std::size_t(n) * n * (n / 2 + 1);
  auto in = allocate<double>(real_count);
  auto out = allocate<fftw_complex>(spec_count);
  PlanPair p;
  p.forward = fftw_plan_dft_r2c_3d(n, n, n, in.get(), out.get(), FFTW_ESTIMATE);
  p.backward = fftw_plan_dft_c2r_3d(n, n, n, out.get(), in.get(), FFTW_ESTIMATE);
  return cache.emplace(n, p).first->second;
}

}  // namespace detail

/// Half spectrum of a real n^3 array, layout [i][j][k] with k in [0, n/2].
/// Coefficients are normalised so that the inverse is a plain sum,
/// i.e. value(x) = sum_k c_k exp(i k.x) over the full (Hermitian) spectrum.
class Spectrum {
 public:
  Spectrum() = default;
  explicit Spectrum(int n) : n_(n) {
    if (n <= 0) return;
    data_ = allocate<fftw_complex>(size_for(n));
    std::fill_n(reinterpret_cast<double*>(data_.get()), 2 * size_for(n), 0.0);
  }
  Spectrum(const Spectrum& other) : Spectrum(other.n_) {
    std::copy_n(reinterpret_cast<const double*>(other.data_.get()), 2 * size(),
                reinterpret_cast<double*>(data_.get()));
  }
  Spectrum& operator=(const Spectrum& other) {
    if (this != &other) {
      Spectrum tmp(other);
      std::swap(n_, tmp.n_);
      std::swap(data_, tmp.data_);
    }
    return *this;
  }
  Spectrum(Spectrum&&) noexcept = default;
  Spectrum& operator=(Spectrum&&) noexcept = default;

  int n() const { return n_; }
  int nz() const { return n_ / 2 + 1; }
  std::size_t size() const { return size_for(n_); }
  static std::size_t size_for(int n) { return std::size_t(n) * n * (n / 2 + 1); }

  std::size_t index(int i, int j, int k) const { return (std::size_t(i) * n_ + j) * nz() + k; }

  std::complex<double> operator[](std::size_t idx) const {
    return {data_[idx][0], data_[idx][1]};
  }
  void set(std::size_t idx, std::complex<double> v) {
    data_[idx][0] = v.real();
    data_[idx][1] = v.imag();
  }

  /// Signed wavenumber of array index i along a full axis.
  int wavenumber(int i) const { return i <= n_ / 2 - 1 ? i : i - n_; }

  fftw_complex* raw() { return data_.get(); }
  const fftw_complex* raw() const { return data_.get(); }

 private:
  int n_ = 0;
  fftw_buffer<fftw_complex> data_;
};

/// values: n^3 samples in [i][j][k] order.
inline Spectrum forward(int n, std::span<const double> values) {
  const auto& plan = detail::plans_for(n);
  const std::size_t count = std::size_t(n) * n * n;
  auto in = allocate<double>(count);
  std::copy_n(values.data(), count, in.get());
  Spectrum out(n);
  fftw_execute_dft_r2c(plan.forward, in.get(), out.raw());
  const double scale = 1.0 / double(count);
  double* flat = reinterpret_cast<double*>(out.raw());
  for (std::size_t i = 0; i < 2 * out.size(); ++i) flat[i] *= scale;
  return out;
}

/// Writes n^3 samples into values.
inline void inverse(const Spectrum& spec, std::span<double> values) {
  const int n = spec.n();
  const auto& plan = detail::plans_for(n);
  Spectrum scratch(spec);  // c2r destroys its input
  auto out = allocate<double>(std::size_t(n) * n * n);
  fftw_execute_dft_c2r(plan.backward, scratch.raw(), out.get());
  std::copy_n(out.get(), values.size(), values.data());
}

}  // namespace hlab::fft
