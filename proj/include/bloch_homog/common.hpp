#ifndef BLOCH_HOMOG_COMMON_HPP
#define BLOCH_HOMOG_COMMON_HPP

#include <algorithm>
#include <atomic>
#include <cmath>
#include <complex>
#include <cstddef>
#include <cstdlib>
#include <exception>
#include <mutex>
#include <numbers>
#include <stdexcept>
#include <string>
#include <thread>
#include <utility>
#include <vector>

namespace bloch_homog {

using cplx = std::complex<double>;

inline constexpr double two_pi = 2.0 * std::numbers::pi;

/// Base error. `reason()` is a stable machine-readable tag used in reports.
class Error : public std::runtime_error {
 public:
  Error(std::string reason, const std::string& what)
      : std::runtime_error(what), reason_(std::move(reason)) {}
  const std::string& reason() const noexcept { return reason_; }

 private:
  std::string reason_;
};

class InvalidArgument : public Error {
 public:
  explicit InvalidArgument(const std::string& what) : Error("invalid-argument", what) {}
};

class GridMismatch : public Error {
 public:
  explicit GridMismatch(const std::string& what) : Error("grid-mismatch", what) {}
};

class ConvergenceError : public Error {
 public:
  explicit ConvergenceError(const std::string& what) : Error("non-convergence", what) {}
};

/// Uniform cell-centered grid on the unit torus [0,1)^dim with n points per
/// axis. Linear index is row-major with axis 0 slowest.
struct Grid {
  int dim = 1;
  int n = 0;

  std::size_t size() const {
    std::size_t s = 1;
    for (int d = 0; d < dim; ++d) s *= static_cast<std::size_t>(n);
    return s;
  }
  double coord(int index) const { return (index + 0.5) / n; }
  int axis_index(std::size_t linear, int axis) const {
    if (dim == 1) return static_cast<int>(linear);
    return axis == 0 ? static_cast<int>(linear / n) : static_cast<int>(linear % n);
  }
  std::size_t linear(int i0, int i1 = 0) const {
    return dim == 1 ? static_cast<std::size_t>(i0)
                    : static_cast<std::size_t>(i0) * n + static_cast<std::size_t>(i1);
  }
  bool operator==(const Grid&) const = default;
};

inline void require_grid(const Grid& g) {
  if (g.dim != 1 && g.dim != 2) throw InvalidArgument("dimension must be 1 or 2");
  if (g.n < 4 || g.n % 2 != 0)
    throw InvalidArgument("resolution must be even and >= 4, got " + std::to_string(g.n));
}

/// Number of worker threads, capped by BLOCH_HOMOG_THREADS when set.
inline unsigned thread_budget() {
  unsigned hw = std::max(1u, std::thread::hardware_concurrency());
  if (const char* env = std::getenv("BLOCH_HOMOG_THREADS")) {
    char* end = nullptr;
    long v = std::strtol(env, &end, 10);
    if (end != env && v >= 1) return static_cast<unsigned>(std::min<long>(v, 256));
  }
  return hw;
}

/// Runs fn(i) for i in [0, count). Results must be written to disjoint slots;
/// the first exception thrown by any task is rethrown.
template <typename Fn>
void parallel_for(std::size_t count, Fn&& fn) {
  unsigned workers = static_cast<unsigned>(std::min<std::size_t>(thread_budget(), count));
  if (workers <= 1) {
    for (std::size_t i = 0; i < count; ++i) fn(i);
    return;
  }
  std::atomic<std::size_t> next{0};
  std::exception_ptr failure;
  std::mutex failure_mutex;
  {
    std::vector<std::jthread> pool;
    pool.reserve(workers);
    for (unsigned w = 0; w < workers; ++w) {
      pool.emplace_back([&] {
        for (std::size_t i = next++; i < count; i = next++) {
          try {
            fn(i);
          } catch (...) {
            std::lock_guard lock(failure_mutex);
            if (!failure) failure = std::current_exception();
          }
        }
      });
    }
  }
  if (failure) std::rethrow_exception(failure);
}

inline double norm2(const std::vector<cplx>& v) {
  double s = 0.0;
  for (const auto& x : v) s += std::norm(x);
  return std::sqrt(s);
}

inline double norm2(const std::vector<double>& v) {
  double s = 0.0;
  for (double x : v) s += x * x;
  return std::sqrt(s);
}

/// Least-squares slope of log(y) against log(x).
inline double loglog_slope(const std::vector<double>& x, const std::vector<double>& y) {
  if (x.size() != y.size() || x.size() < 2) throw InvalidArgument("slope needs >= 2 paired points");
  double mx = 0, my = 0;
  const double k = static_cast<double>(x.size());
  for (std::size_t i = 0; i < x.size(); ++i) {
    mx += std::log(x[i]);
    my += std::log(y[i]);
  }
  mx /= k;
  my /= k;
  double sxy = 0, sxx = 0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    const double dx = std::log(x[i]) - mx;
    sxy += dx * (std::log(y[i]) - my);
    sxx += dx * dx;
  }
  return sxy / sxx;
}

}  // namespace bloch_homog

#endif  // BLOCH_HOMOG_COMMON_HPP
