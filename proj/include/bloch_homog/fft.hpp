#ifndef BLOCH_HOMOG_FFT_HPP
#define BLOCH_HOMOG_FFT_HPP

#include <fftw3.h>

#include <complex>
#include <map>
#include <mutex>
#include <span>
#include <tuple>
#include <vector>

#include "common.hpp"

namespace bloch_homog {

namespace detail {

// FFTW planning is not thread-safe; execution with the new-array interface is.
// Plans are created once per (dim, n, sign), in place, unaligned, and live for
// the whole process.
inline fftw_plan cached_plan(int dim, int n, int sign) {
  static std::mutex mutex;
  static std::map<std::tuple<int, int, int>, fftw_plan> plans;
  std::lock_guard lock(mutex);
  auto key = std::make_tuple(dim, n, sign);
  if (auto it = plans.find(key); it != plans.end()) return it->second;
  std::vector<std::complex<double>> scratch(static_cast<std::size_t>(dim == 1 ? n : n * n));
  auto* data = reinterpret_cast<fftw_complex*>(scratch.data());
  int dims[2] = {n, n};
  fftw_plan plan = fftw_plan_dft(dim, dims, data, data, sign, FFTW_ESTIMATE | FFTW_UNALIGNED);
  plans.emplace(key, plan);
  return plan;
}

}  // namespace detail

/// Signed wavenumber of DFT index i on an n-point axis. Index n/2 maps to -n/2.
inline int wavenumber(int i, int n) { return i < n / 2 ? i : i - n; }
inline bool is_nyquist(int i, int n) { return i == n / 2; }

/// Fourier coefficients of cell-centered grid functions on the unit torus.
///
/// Coefficients are the "physical" ones, c_k = mean_j f(y_j) exp(-2 pi i k.y_j)
/// with y_j = (j+1/2)/n, so they do not depend on the sampling offset and can
/// be synthesized on any finer cell-centered grid.
class Spectral {
 public:
  Spectral() = default;
  Spectral(int dim, int n) : dim_(dim), n_(n) {}

  int dim() const { return dim_; }
  int n() const { return n_; }
  std::size_t size() const { return Grid{dim_, n_}.size(); }

  /// Coefficients indexed on this n-grid -> samples on an m-point grid (m >= n).
  std::vector<cplx> synthesize(std::span<const cplx> coeffs, int m) const {
    std::vector<cplx> out(Grid{dim_, m}.size(), cplx{0.0, 0.0});
    const auto ph = phase_table(m, +1);
    if (dim_ == 1) {
      for (int i = 0; i < n_; ++i) {
        const int k = wavenumber(i, n_);
        out[static_cast<std::size_t>((k + m) % m)] = coeffs[i] * ph[i];
      }
    } else {
      for (int i = 0; i < n_; ++i) {
        const int ki = (wavenumber(i, n_) + m) % m;
        for (int j = 0; j < n_; ++j) {
          const int kj = (wavenumber(j, n_) + m) % m;
          out[static_cast<std::size_t>(ki) * m + kj] =
              coeffs[static_cast<std::size_t>(i) * n_ + j] * ph[i] * ph[j];
        }
      }
    }
    execute(out, dim_, m, FFTW_BACKWARD);
    return out;
  }

  /// Samples on an m-point grid -> coefficients truncated to this n-grid.
  std::vector<cplx> analyze(std::vector<cplx> samples, int m) const {
    execute(samples, dim_, m, FFTW_FORWARD);
    const double scale = 1.0 / static_cast<double>(Grid{dim_, m}.size());
    const auto ph = phase_table(m, -1);
    std::vector<cplx> out(size());
    if (dim_ == 1) {
      for (int i = 0; i < n_; ++i) {
        const int k = (wavenumber(i, n_) + m) % m;
        out[i] = samples[static_cast<std::size_t>(k)] * ph[i] * scale;
      }
    } else {
      for (int i = 0; i < n_; ++i) {
        const int ki = (wavenumber(i, n_) + m) % m;
        for (int j = 0; j < n_; ++j) {
          const int kj = (wavenumber(j, n_) + m) % m;
          out[static_cast<std::size_t>(i) * n_ + j] =
              samples[static_cast<std::size_t>(ki) * m + kj] * ph[i] * ph[j] * scale;
        }
      }
    }
    return out;
  }

  /// Coefficients -> samples on the native grid.
  std::vector<cplx> inverse(std::span<const cplx> coeffs) const { return synthesize(coeffs, n_); }

  std::vector<cplx> coefficients(std::vector<cplx> samples) const {
    return analyze(std::move(samples), n_);
  }

 private:
  // exp(sign * i pi k / m) for the signed wavenumbers of this n-grid.
  std::vector<cplx> phase_table(int m, int sign) const {
    std::vector<cplx> ph(static_cast<std::size_t>(n_));
    for (int i = 0; i < n_; ++i)
      ph[i] = std::polar(1.0, sign * std::numbers::pi * wavenumber(i, n_) / m);
    return ph;
  }

  static void execute(std::vector<cplx>& data, int dim, int m, int sign) {
    fftw_plan plan = detail::cached_plan(dim, m, sign);
    auto* p = reinterpret_cast<fftw_complex*>(data.data());
    fftw_execute_dft(plan, p, p);
  }

  int dim_ = 1;
  int n_ = 0;
};

}  // namespace bloch_homog

#endif  // BLOCH_HOMOG_FFT_HPP
