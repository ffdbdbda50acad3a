#ifndef BLOCH_HOMOG_CELL_SOLVER_HPP
#define BLOCH_HOMOG_CELL_SOLVER_HPP

#include <array>
#include <cstdio>
#include <cmath>
#include <fstream>
#include <functional>
#include <limits>
#include <numeric>
#include <optional>
#include <string>
#include <vector>

#include "common.hpp"
#include "fft.hpp"
#include "microstructure.hpp"

namespace bloch_homog {

enum class Discretization { fourier_galerkin, fd_harmonic };

inline Discretization parse_discretization(const std::string& s) {
  if (s == "fourier-galerkin") return Discretization::fourier_galerkin;
  if (s == "fd-harmonic") return Discretization::fd_harmonic;
  throw InvalidArgument("unknown discretization '" + s + "'");
}

inline std::string to_string(Discretization d) {
  return d == Discretization::fourier_galerkin ? "fourier-galerkin" : "fd-harmonic";
}

struct SolverConfig {
  double tol = 1e-10;
  int max_iterations = 1000;
  Discretization mode = Discretization::fourier_galerkin;
  bool dealias = false;

  void validate() const {
    if (!(tol > 0.0 && tol < 1.0)) throw InvalidArgument("solver tolerance must lie in (0, 1)");
    if (max_iterations < 1) throw InvalidArgument("max iterations must be >= 1");
  }
};

using Vec = std::array<double, 2>;
using RealField = std::vector<double>;
using ComplexField = std::vector<cplx>;

/// Quadrature resolution used for coefficient products: 3n/2 rounded up to
/// even when dealiasing, n otherwise.
inline int quadrature_resolution(int n, bool dealias) {
  if (!dealias) return n;
  const int m = 3 * n / 2;
  return m + (m % 2);
}

/// Fourier-Galerkin realization of A(eta) = -(d + i eta) . [A(y) (d + i eta)].
///
/// Works on Fourier coefficient vectors of the native n-grid. Modes with a
/// Nyquist index on any axis are excluded from the trial space; the operator
/// is Hermitian positive semidefinite on what remains.
class ShiftedOperator {
 public:
  ShiftedOperator(const CoefficientField& field, bool dealias)
      : grid_(field.grid()),
        quad_n_(quadrature_resolution(field.n(), dealias)),
        spectral_(field.dim(), field.n()),
        coeff_(field.interpolated(quad_n_)) {
    double tr = 0.0;
    for (int d = 0; d < dim(); ++d)
      tr += std::accumulate(coeff_[static_cast<std::size_t>(d * dim() + d)].begin(),
                            coeff_[static_cast<std::size_t>(d * dim() + d)].end(), 0.0);
    precond_scale_ = tr / (static_cast<double>(dim()) * static_cast<double>(coeff_[0].size()));
    for (std::size_t q = 0; q < coeff_[0].size(); ++q)
      for (int i = 0; i < dim(); ++i) {
        double row = 0.0;
        for (int j = 0; j < dim(); ++j) row += std::abs(coefficient(i, j)[q]);
        coeff_bound_ = std::max(coeff_bound_, row);
      }
  }

  int dim() const { return grid_.dim; }
  const Grid& grid() const { return grid_; }
  Grid quad_grid() const { return {grid_.dim, quad_n_}; }
  int quad_n() const { return quad_n_; }
  const Spectral& spectral() const { return spectral_; }
  double preconditioner_scale() const { return precond_scale_; }
  const std::vector<double>& coefficient(int i, int j) const {
    return coeff_[static_cast<std::size_t>(i * dim() + j)];
  }

  bool masked(std::size_t p) const {
    for (int d = 0; d < dim(); ++d)
      if (is_nyquist(grid_.axis_index(p, d), grid_.n)) return true;
    return false;
  }

  /// 2 pi k_d + eta_d for coefficient index p, or 0 on masked modes.
  double wave(std::size_t p, int d, const Vec& eta) const {
    if (masked(p)) return 0.0;
    return two_pi * wavenumber(grid_.axis_index(p, d), grid_.n) + eta[static_cast<std::size_t>(d)];
  }

  double wave_norm2(std::size_t p, const Vec& eta) const {
    double s = 0.0;
    for (int d = 0; d < dim(); ++d) s += wave(p, d, eta) * wave(p, d, eta);
    return s;
  }

  /// Upper bound on the operator norm of A(eta).
  double norm_bound(const Vec& eta) const {
    double w = 0.0;
    for (int d = 0; d < dim(); ++d) {
      const double k = two_pi * (grid_.n / 2) + std::abs(eta[static_cast<std::size_t>(d)]);
      w += k * k;
    }
    return coeff_bound_ * w;
  }

  /// Samples of (d + i eta) u on the quadrature grid, one field per axis.
  std::vector<ComplexField> gradient(const ComplexField& coeffs, const Vec& eta) const {
    std::vector<ComplexField> out;
    out.reserve(static_cast<std::size_t>(dim()));
    for (int d = 0; d < dim(); ++d) {
      ComplexField c(coeffs.size());
      for (std::size_t p = 0; p < coeffs.size(); ++p) c[p] = cplx{0.0, wave(p, d, eta)} * coeffs[p];
      out.push_back(spectral_.synthesize(c, quad_n_));
    }
    return out;
  }

  /// Pointwise A(y) g.
  std::vector<ComplexField> flux(const std::vector<ComplexField>& g) const {
    return apply_matrix(coeff_, g);
  }

  std::vector<ComplexField> apply_matrix(const std::vector<std::vector<double>>& mat,
                                         const std::vector<ComplexField>& g) const {
    const std::size_t npts = g[0].size();
    std::vector<ComplexField> out(static_cast<std::size_t>(dim()), ComplexField(npts));
    for (int i = 0; i < dim(); ++i)
      for (std::size_t q = 0; q < npts; ++q) {
        cplx s{};
        for (int j = 0; j < dim(); ++j)
          s += mat[static_cast<std::size_t>(i * dim() + j)][q] * g[static_cast<std::size_t>(j)][q];
        out[static_cast<std::size_t>(i)][q] = s;
      }
    return out;
  }

  /// Coefficients of (d + i eta)^* F = -(d + i eta) . F for a vector field on
  /// the quadrature grid.
  ComplexField divergence_adjoint(const std::vector<ComplexField>& field, const Vec& eta) const {
    ComplexField out(grid_.size(), cplx{});
    for (int d = 0; d < dim(); ++d) {
      auto c = spectral_.analyze(field[static_cast<std::size_t>(d)], quad_n_);
      for (std::size_t p = 0; p < out.size(); ++p) out[p] += cplx{0.0, -wave(p, d, eta)} * c[p];
    }
    return out;
  }

  ComplexField apply(const ComplexField& coeffs, const Vec& eta) const {
    return divergence_adjoint(flux(gradient(coeffs, eta)), eta);
  }

  /// Preconditioner: inverse of c |k + eta|^2 + shift, zero on the kernel and masked modes.
  ComplexField precondition(const ComplexField& r, const Vec& eta, double shift) const {
    ComplexField z(r.size());
    for (std::size_t p = 0; p < r.size(); ++p) {
      const double den = precond_scale_ * wave_norm2(p, eta) + shift;
      z[p] = (masked(p) || den <= 0.0) ? cplx{} : r[p] / den;
    }
    return z;
  }

  /// Projection onto the trial space (drops masked modes, and the mean when the
  /// operator is singular).
  void project(ComplexField& v, bool drop_mean) const {
    for (std::size_t p = 0; p < v.size(); ++p)
      if (masked(p)) v[p] = cplx{};
    if (drop_mean) v[0] = cplx{};
  }

 private:
  Grid grid_;
  int quad_n_;
  Spectral spectral_;
  std::vector<std::vector<double>> coeff_;
  double precond_scale_ = 1.0;
  double coeff_bound_ = 0.0;
};

inline cplx dot(const ComplexField& a, const ComplexField& b) {
  cplx s{};
  for (std::size_t i = 0; i < a.size(); ++i) s += std::conj(b[i]) * a[i];
  return s;
}

struct SolveStats {
  double residual = 0.0;
  double attainable = 0.0;  // roundoff floor of the true residual
  int iterations = 0;
  std::vector<double> history;
};

/// Preconditioned conjugate gradients for a Hermitian system that is positive
/// definite on the range of `project`. Starts from zero. The stopping test
/// uses the true residual ||b - A x|| <= tol ||b||. Given a bound on ||A||, a
/// residual at the roundoff floor 16 eps ||A|| ||x|| / ||b|| also counts as converged.
template <typename Apply, typename Precondition, typename Project>
ComplexField pcg(const Apply& apply, const Precondition& precondition, const Project& project,
                 ComplexField b, double tol, int max_iterations, SolveStats& stats, double op_norm = 0.0) {
  project(b);
  const double bnorm = norm2(b);
  ComplexField x(b.size(), cplx{});
  stats = {};
  if (bnorm == 0.0) return x;
  ComplexField r = b;
  int it = 0;
  // Restarts guard against drift between the recursive and the true residual.
  for (int restart = 0; restart < 4 && it < max_iterations; ++restart) {
    ComplexField z = precondition(r);
    project(z);
    ComplexField d = z;
    cplx rz = dot(r, z);
    double rnorm = norm2(r);
    while (it < max_iterations && rnorm > tol * bnorm) {
      ComplexField ad = apply(d);
      project(ad);
      const cplx dad = dot(ad, d);
      if (std::abs(dad) == 0.0) break;
      const cplx step = rz / dad;
      for (std::size_t i = 0; i < x.size(); ++i) {
        x[i] += step * d[i];
        r[i] -= step * ad[i];
      }
      z = precondition(r);
      project(z);
      const cplx rz_new = dot(r, z);
      const cplx beta = rz_new / rz;
      rz = rz_new;
      for (std::size_t i = 0; i < d.size(); ++i) d[i] = z[i] + beta * d[i];
      rnorm = norm2(r);
      stats.history.push_back(rnorm / bnorm);
      ++it;
    }
    ComplexField ax = apply(x);
    project(ax);
    for (std::size_t i = 0; i < r.size(); ++i) r[i] = b[i] - ax[i];
    stats.residual = norm2(r) / bnorm;
    stats.attainable = 16.0 * std::numeric_limits<double>::epsilon() * op_norm * norm2(x) / bnorm;
    if (stats.residual <= std::max(tol, stats.attainable)) break;
  }
  stats.iterations = it;
  if (stats.residual > std::max(tol, stats.attainable))
  {
    char buf[128];
    std::snprintf(buf, sizeof buf, "conjugate gradients stalled at relative residual %.3e after %d iterations",
                  stats.residual, it);
    throw ConvergenceError(buf);
  }
  return x;
}

/// Solves (A(eta) + shift) x = b in coefficient space.
inline ComplexField solve_shifted(const ShiftedOperator& op, const ComplexField& b, const Vec& eta,
                                  double shift, double tol, int max_iterations, SolveStats& stats) {
  const bool singular = eta[0] == 0.0 && eta[1] == 0.0 && shift == 0.0;
  auto project = [&](ComplexField& v) { op.project(v, singular); };
  auto apply = [&](const ComplexField& v) {
    auto y = op.apply(v, eta);
    if (shift != 0.0)
      for (std::size_t i = 0; i < y.size(); ++i) y[i] += shift * v[i];
    return y;
  };
  auto precondition = [&](const ComplexField& r) { return op.precondition(r, eta, shift); };
  return pcg(apply, precondition, project, b, tol, max_iterations, stats, op.norm_bound(eta) + shift);
}

/// Applies A(eta) to a complex grid function sampled on the field's grid.
inline ComplexField apply_shifted_operator(const CoefficientField& field, const ComplexField& phi,
                                           const Vec& eta, bool dealias = false) {
  if (phi.size() != field.grid().size()) throw GridMismatch("operator: function does not match field grid");
  ShiftedOperator op(field, dealias);
  auto c = op.spectral().coefficients(phi);
  op.project(c, false);
  return op.spectral().inverse(op.apply(c, eta));
}

enum class CorrectorKind { chi, zeta, psi };

/// One periodic cell solution: zero-mean samples on the native grid and its
/// gradient on the quadrature grid.
struct Corrector {
  RealField values;
  std::vector<RealField> gradient;
  double residual = 0.0;
  int iterations = 0;
  std::vector<double> history;
};

struct CorrectorSet {
  Grid grid{};
  Grid quad_grid{};
  Discretization mode = Discretization::fourier_galerkin;
  CorrectorKind kind = CorrectorKind::chi;
  double tol = 0.0;
  std::vector<Corrector> fields;

  int dim() const { return grid.dim; }
  const Corrector& operator[](int k) const { return fields[static_cast<std::size_t>(k)]; }

  /// (grad w_k + e_k) at quadrature point q, axis i.
  double shifted_gradient(int k, int i, std::size_t q) const {
    return fields[static_cast<std::size_t>(k)].gradient[static_cast<std::size_t>(i)][q] + (i == k ? 1.0 : 0.0);
  }

  bool compatible(const CorrectorSet& other) const {
    return grid == other.grid && quad_grid == other.quad_grid && mode == other.mode;
  }
};

/// Writes one corrector's residual history as CSV (iteration, residual).
inline void write_residual_history(const Corrector& c, const std::string& path) {
  std::ofstream out(path);
  if (!out) throw Error("io", "cannot write " + path);
  out << "iteration,residual\n";
  out.precision(17);
  for (std::size_t i = 0; i < c.history.size(); ++i) out << i + 1 << ',' << c.history[i] << '\n';
}

namespace detail {

inline Corrector corrector_from_coeffs(const ShiftedOperator& op, const ComplexField& coeffs,
                                       const SolveStats& stats) {
  Corrector c;
  auto vals = op.spectral().inverse(coeffs);
  c.values.resize(vals.size());
  for (std::size_t i = 0; i < vals.size(); ++i) c.values[i] = vals[i].real();
  for (auto& g : op.gradient(coeffs, Vec{0.0, 0.0})) {
    RealField r(g.size());
    for (std::size_t i = 0; i < g.size(); ++i) r[i] = g[i].real();
    c.gradient.push_back(std::move(r));
  }
  c.residual = stats.residual;
  c.iterations = stats.iterations;
  c.history = stats.history;
  return c;
}

inline void require_scalar_1d(const CoefficientField& f) {
  if (f.dim() != 1) throw InvalidArgument("fd-harmonic discretization is only available for N = 1");
}

inline double mean(const RealField& v) {
  return std::accumulate(v.begin(), v.end(), 0.0) / static_cast<double>(v.size());
}

// Integrates cellwise derivative values between consecutive cell centers and
// removes the mean. The derivative is piecewise constant per cell.
inline RealField integrate_cellwise(const RealField& slope) {
  const std::size_t n = slope.size();
  RealField v(n, 0.0);
  for (std::size_t j = 0; j + 1 < n; ++j) v[j + 1] = v[j] + 0.5 * (slope[j] + slope[j + 1]) / static_cast<double>(n);
  const double m = mean(v);
  for (auto& x : v) x -= m;
  return v;
}

// Residual of the face-harmonic scheme -(F_{j+1/2} - F_{j-1/2}) n = rhs_j with
// F = a_f (D w + 1) (corrector) or F = a_f D w - source_f (psi).
inline double fd_residual(const RealField& a, const RealField& w, const RealField& face_source,
                          double unit) {
  const std::size_t n = a.size();
  const double h = 1.0 / static_cast<double>(n);
  RealField flux(n);
  double scale = 0.0;
  for (std::size_t j = 0; j < n; ++j) {
    const std::size_t k = (j + 1) % n;
    const double af = 2.0 * a[j] * a[k] / (a[j] + a[k]);
    flux[j] = af * ((w[k] - w[j]) / h + unit) - face_source[j];
    scale = std::max(scale, std::abs(af * unit) + std::abs(face_source[j]));
  }
  double r = 0.0;
  for (std::size_t j = 0; j < n; ++j) {
    const double d = (flux[j] - flux[(j + n - 1) % n]) / h;
    r += d * d;
  }
  return std::sqrt(r / static_cast<double>(n)) * h / std::max(scale, 1e-300);
}

}  // namespace detail

/// Solves -div(A(grad chi_k + e_k)) = 0 with zero mean (k is 0-based).
inline Corrector solve_corrector(const CoefficientField& field, int k, const SolverConfig& cfg) {
  cfg.validate();
  if (k < 0 || k >= field.dim()) throw InvalidArgument("direction out of range");
  if (cfg.mode == Discretization::fd_harmonic) {
    detail::require_scalar_1d(field);
    const auto& a = field.component(0, 0);
    double inv_mean = 0.0;
    for (double x : a) inv_mean += 1.0 / x;
    inv_mean /= static_cast<double>(a.size());
    const double astar = 1.0 / inv_mean;
    Corrector c;
    RealField slope(a.size());
    for (std::size_t j = 0; j < a.size(); ++j) slope[j] = astar / a[j] - 1.0;
    c.values = detail::integrate_cellwise(slope);
    c.gradient = {slope};
    c.residual = detail::fd_residual(a, c.values, RealField(a.size(), 0.0), 1.0);
    if (c.residual > cfg.tol) throw ConvergenceError("fd-harmonic corrector residual above tolerance");
    return c;
  }
  ShiftedOperator op(field, cfg.dealias);
  std::vector<ComplexField> unit(static_cast<std::size_t>(field.dim()),
                                 ComplexField(op.quad_grid().size(), cplx{}));
  for (auto& x : unit[static_cast<std::size_t>(k)]) x = 1.0;
  auto rhs = op.divergence_adjoint(op.flux(unit), Vec{0.0, 0.0});
  for (auto& x : rhs) x = -x;
  SolveStats stats;
  auto coeffs = solve_shifted(op, rhs, Vec{0.0, 0.0}, 0.0, cfg.tol, cfg.max_iterations, stats);
  op.project(coeffs, true);
  return detail::corrector_from_coeffs(op, coeffs, stats);
}

/// All N correctors of a field (chi for A, zeta for B).
inline CorrectorSet solve_correctors(const CoefficientField& field, const SolverConfig& cfg,
                                     CorrectorKind kind = CorrectorKind::chi) {
  CorrectorSet set;
  set.grid = field.grid();
  set.quad_grid = cfg.mode == Discretization::fd_harmonic
                      ? field.grid()
                      : Grid{field.dim(), quadrature_resolution(field.n(), cfg.dealias)};
  set.mode = cfg.mode;
  set.kind = kind;
  set.tol = cfg.tol;
  set.fields.resize(static_cast<std::size_t>(field.dim()));
  parallel_for(set.fields.size(), [&](std::size_t k) {
    set.fields[k] = solve_corrector(field, static_cast<int>(k), cfg);
  });
  return set;
}

/// Solves div(A grad psi_k - B(grad chi_k + e_k)) = 0 with zero mean.
inline Corrector solve_psi(const CoefficientField& fieldA, const CoefficientField& fieldB,
                           const CorrectorSet& chi, int k, const SolverConfig& cfg) {
  cfg.validate();
  if (fieldA.grid() != fieldB.grid() || chi.grid != fieldA.grid())
    throw GridMismatch("psi: A, B and chi must share a grid");
  if (chi.mode != cfg.mode) throw GridMismatch("psi: chi was solved with a different discretization");
  if (k < 0 || k >= fieldA.dim()) throw InvalidArgument("direction out of range");
  if (cfg.mode == Discretization::fd_harmonic) {
    detail::require_scalar_1d(fieldA);
    const auto& a = fieldA.component(0, 0);
    const auto& b = fieldB.component(0, 0);
    const auto& g = chi[0].gradient[0];
    const std::size_t n = a.size();
    double num = 0.0, inv = 0.0;
    for (std::size_t j = 0; j < n; ++j) {
      num += b[j] * (g[j] + 1.0) / a[j];
      inv += 1.0 / a[j];
    }
    const double s = -num / inv;
    RealField slope(n);
    for (std::size_t j = 0; j < n; ++j) slope[j] = (s + b[j] * (g[j] + 1.0)) / a[j];
    Corrector c;
    c.values = detail::integrate_cellwise(slope);
    c.gradient = {slope};
    // Face value of the B-flux: a_f times the average of b(chi'+1)/a over the two half cells.
    RealField face_src(n);
    for (std::size_t j = 0; j < n; ++j) {
      const std::size_t q = (j + 1) % n;
      const double af = 2.0 * a[j] * a[q] / (a[j] + a[q]);
      face_src[j] = af * 0.5 * (b[j] * (g[j] + 1.0) / a[j] + b[q] * (g[q] + 1.0) / a[q]);
    }
    c.residual = detail::fd_residual(a, c.values, face_src, 0.0);
    if (c.residual > cfg.tol) throw ConvergenceError("fd-harmonic psi residual above tolerance");
    return c;
  }
  ShiftedOperator opA(fieldA, cfg.dealias);
  if (chi.quad_grid != opA.quad_grid()) throw GridMismatch("psi: chi quadrature grid differs");
  const auto bq = fieldB.interpolated(opA.quad_n());
  std::vector<ComplexField> g(static_cast<std::size_t>(fieldA.dim()));
  for (int i = 0; i < fieldA.dim(); ++i) {
    const auto& gi = chi[k].gradient[static_cast<std::size_t>(i)];
    g[static_cast<std::size_t>(i)].assign(gi.begin(), gi.end());
    if (i == k)
      for (auto& x : g[static_cast<std::size_t>(i)]) x += 1.0;
  }
  auto rhs = opA.divergence_adjoint(opA.apply_matrix(bq, g), Vec{0.0, 0.0});
  SolveStats stats;
  auto coeffs = solve_shifted(opA, rhs, Vec{0.0, 0.0}, 0.0, cfg.tol, cfg.max_iterations, stats);
  opA.project(coeffs, true);
  return detail::corrector_from_coeffs(opA, coeffs, stats);
}

inline CorrectorSet solve_psi_set(const CoefficientField& fieldA, const CoefficientField& fieldB,
                                  const CorrectorSet& chi, const SolverConfig& cfg) {
  CorrectorSet set = chi;
  set.kind = CorrectorKind::psi;
  set.tol = cfg.tol;
  set.fields.assign(chi.fields.size(), {});
  parallel_for(set.fields.size(), [&](std::size_t k) {
    set.fields[k] = solve_psi(fieldA, fieldB, chi, static_cast<int>(k), cfg);
  });
  return set;
}

}  // namespace bloch_homog

#endif  // BLOCH_HOMOG_CELL_SOLVER_HPP
