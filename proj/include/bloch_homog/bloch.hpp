#ifndef BLOCH_HOMOG_BLOCH_HPP
#define BLOCH_HOMOG_BLOCH_HPP

#include <Eigen/Dense>

#include <functional>
#include <optional>
#include <vector>

#include "cell_solver.hpp"
#include "common.hpp"
#include "microstructure.hpp"
#include "tensors.hpp"

namespace bloch_homog {

struct BlochOptions {
  /// Relative change of the Rayleigh quotient that ends inverse iteration.
  double eig_tol = 1e-12;
  int max_outer = 100;
  /// Shift sigma = shift_factor * mean(tr A)/N.
  double shift_factor = 1e-3;
  /// Estimate the second eigenvalue and flag near-degenerate band edges.
  bool check_gap = true;
  int gap_iterations = 4;
};

/// First Bloch eigenpair of A(eta). `vector` holds grid samples of phi_1,
/// normalized in L2(Y) with real positive cell mean.
struct BlochMode {
  Vec eta{0.0, 0.0};
  double eigenvalue = 0.0;
  ComplexField vector;
  ComplexField coeffs;
  double residual = 0.0;
  int iterations = 0;
  bool near_degenerate = false;
  std::optional<double> second_estimate;
};

namespace detail {

inline void normalize_and_fix_phase(ComplexField& c) {
  const double nrm = norm2(c);
  if (nrm == 0.0) throw ConvergenceError("Bloch iteration collapsed to zero");
  // Coefficient 0 is the cell mean.
  const cplx m = c[0];
  cplx phase{1.0, 0.0};
  if (std::abs(m) > 1e-10 * nrm) {
    phase = std::conj(m) / std::abs(m);
  } else {
    std::size_t best = 0;
    for (std::size_t i = 1; i < c.size(); ++i)
      if (std::abs(c[i]) > std::abs(c[best]) * (1.0 + 1e-12)) best = i;
    phase = std::conj(c[best]) / std::abs(c[best]);
  }
  for (auto& x : c) x *= phase / nrm;
}

}  // namespace detail

/// Bloch eigen-solver for one coefficient field; reuses the operator across eta.
class BlochSolver {
 public:
  BlochSolver(const CoefficientField& field, const SolverConfig& cfg, BlochOptions opts = {})
      : op_(field, cfg.dealias), cfg_(cfg), opts_(opts) {
    cfg.validate();
    if (cfg.mode != Discretization::fourier_galerkin)
      throw InvalidArgument("Bloch modes require the fourier-galerkin discretization");
  }

  const ShiftedOperator& op() const { return op_; }

  /// <A(eta) u, u> computed as the energy int A (d + i eta)u . conj((d + i eta)u).
  cplx energy(const ComplexField& coeffs, const Vec& eta) const {
    return form_energy(op_, coeffs, eta);
  }

  static cplx form_energy(const ShiftedOperator& op, const ComplexField& coeffs, const Vec& eta) {
    const auto g = op.gradient(coeffs, eta);
    const int dim = op.dim();
    const std::size_t npts = g[0].size();
    cplx s{};
    for (int i = 0; i < dim; ++i)
      for (int l = 0; l < dim; ++l) {
        const auto& c = op.coefficient(i, l);
        const auto& gi = g[static_cast<std::size_t>(i)];
        const auto& gl = g[static_cast<std::size_t>(l)];
        for (std::size_t q = 0; q < npts; ++q) s += c[q] * gl[q] * std::conj(gi[q]);
      }
    return s / static_cast<double>(npts);
  }

  BlochMode mode(const Vec& eta) const {
    if (std::hypot(eta[0], op_.dim() == 2 ? eta[1] : 0.0) > std::numbers::pi + 1e-12)
      throw InvalidArgument("eta must lie in the first dual cell (|eta| <= pi)");
    const double shift = opts_.shift_factor * op_.preconditioner_scale();
    ComplexField x(op_.grid().size(), cplx{});
    x[0] = 1.0;
    double lambda = energy(x, eta).real();
    BlochMode out;
    out.eta = eta;
    bool converged = false;
    int it = 0;
    for (; it < opts_.max_outer; ++it) {
      SolveStats stats;
      x = solve_shifted(op_, x, eta, shift, cfg_.tol, cfg_.max_iterations, stats);
      detail::normalize_and_fix_phase(x);
      const double next = energy(x, eta).real();
      const double change = std::abs(next - lambda);
      lambda = next;
      if (change <= opts_.eig_tol * std::max(std::abs(lambda), 1e-300)) {
        converged = true;
        ++it;
        break;
      }
    }
    if (!converged) throw ConvergenceError("inverse iteration did not converge");
    out.eigenvalue = lambda;
    out.iterations = it;
    out.coeffs = x;
    out.vector = op_.spectral().inverse(x);
    auto ax = op_.apply(x, eta);
    for (std::size_t i = 0; i < ax.size(); ++i) ax[i] -= lambda * x[i];
    op_.project(ax, false);
    out.residual = norm2(ax);
    if (opts_.check_gap) {
      out.second_estimate = second_eigenvalue(x, eta, shift);
      out.near_degenerate = std::abs(*out.second_estimate - lambda) <= 1e-8 * std::max(1.0, std::abs(lambda));
    }
    return out;
  }

 private:
  // Upper estimate of lambda_2 by inverse iteration deflated against phi_1.
  double second_eigenvalue(const ComplexField& phi1, const Vec& eta, double shift) const {
    ComplexField x(phi1.size(), cplx{});
    for (std::size_t p = 1; p < x.size(); ++p) x[p] = 1.0 / (1.0 + op_.wave_norm2(p, Vec{0.0, 0.0}));
    auto deflate = [&](ComplexField& v) {
      op_.project(v, false);
      const cplx c = dot(v, phi1);
      for (std::size_t i = 0; i < v.size(); ++i) v[i] -= c * phi1[i];
    };
    deflate(x);
    for (int k = 0; k < opts_.gap_iterations; ++k) {
      SolveStats stats;
      x = solve_shifted(op_, x, eta, shift, std::max(cfg_.tol, 1e-10), cfg_.max_iterations, stats);
      deflate(x);
      const double nrm = norm2(x);
      for (auto& v : x) v /= nrm;
    }
    return energy(x, eta).real();
  }

  ShiftedOperator op_;
  SolverConfig cfg_;
  BlochOptions opts_;
};

inline BlochMode smallest_bloch_mode(const CoefficientField& field, const Vec& eta, const SolverConfig& cfg,
                                     BlochOptions opts = {}) {
  return BlochSolver(field, cfg, opts).mode(eta);
}

/// nu_1(eta) = <B(eta) phi_1, phi_1> with phi_1 the first Bloch vector of A at eta.
inline double nu1(const ShiftedOperator& opB, const BlochMode& mode) {
  if (mode.coeffs.size() != opB.grid().size()) throw GridMismatch("nu1: mode and B live on different grids");
  const cplx v = BlochSolver::form_energy(opB, mode.coeffs, mode.eta);
  if (std::abs(v.imag()) > 1e-10)
    throw Error("hermiticity", "nu1 has an imaginary part " + std::to_string(v.imag()));
  return v.real();
}

inline double nu1(const CoefficientField& fieldB, const BlochMode& mode, bool dealias = false) {
  return nu1(ShiftedOperator(fieldB, dealias), mode);
}

/// ||(phi_1(.; h e_k) - phi_1(.; 0))/h - i chi_k|| in L2(Y), with chi_k given by grid samples.
inline double eigenvector_derivative_error(const BlochSolver& solver, const Corrector& chi_k, int k, double h) {
  if (chi_k.values.size() != solver.op().grid().size())
    throw GridMismatch("eigenvector derivative: corrector lives on a different grid");
  Vec e{0.0, 0.0};
  e[static_cast<std::size_t>(k)] = h;
  const auto m0 = solver.mode({0.0, 0.0});
  const auto mh = solver.mode(e);
  double s = 0.0;
  for (std::size_t p = 0; p < chi_k.values.size(); ++p)
    s += std::norm((mh.vector[p] - m0.vector[p]) / h - cplx{0.0, chi_k.values[p]});
  return std::sqrt(s / static_cast<double>(chi_k.values.size()));
}

using EtaMap = std::function<double(const Vec&)>;

/// Stencil points used by hessian_at_zero, in evaluation order.
inline std::vector<Vec> hessian_stencil(int dim, double h) {
  std::vector<Vec> pts;
  for (int k = 0; k < dim; ++k) {
    Vec e{0.0, 0.0};
    e[static_cast<std::size_t>(k)] = h;
    pts.push_back(e);
    pts.push_back({-e[0], -e[1]});
  }
  for (int k = 0; k < dim; ++k)
    for (int l = k + 1; l < dim; ++l) {
      Vec p{0.0, 0.0}, m{0.0, 0.0};
      p[static_cast<std::size_t>(k)] = h;
      p[static_cast<std::size_t>(l)] = h;
      m[static_cast<std::size_t>(k)] = h;
      m[static_cast<std::size_t>(l)] = -h;
      pts.push_back(p);
      pts.push_back({-p[0], -p[1]});
      pts.push_back(m);
      pts.push_back({-m[0], -m[1]});
    }
  return pts;
}

/// Half the Hessian of f at 0 by second-order central differences.
inline HomogTensor hessian_at_zero(const EtaMap& f, int dim, double h, double f0, Provenance prov,
                                   int n = 0, double tol = 0.0) {
  if (!(h > 0.0)) throw InvalidArgument("finite-difference step must be positive");
  const auto pts = hessian_stencil(dim, h);
  std::vector<double> vals(pts.size());
  parallel_for(pts.size(), [&](std::size_t i) { vals[i] = f(pts[i]); });
  Eigen::MatrixXd m(dim, dim);
  std::size_t at = 0;
  for (int k = 0; k < dim; ++k, at += 2) m(k, k) = (vals[at] + vals[at + 1] - 2.0 * f0) / (2.0 * h * h);
  for (int k = 0; k < dim; ++k)
    for (int l = k + 1; l < dim; ++l, at += 4) {
      m(k, l) = (vals[at] + vals[at + 1] - vals[at + 2] - vals[at + 3]) / (8.0 * h * h);
      m(l, k) = m(k, l);
    }
  return make_tensor(m, prov, n, tol);
}

inline HomogTensor hessian_at_zero(const EtaMap& f, int dim, double h, Provenance prov = Provenance::HessianLambda1) {
  return hessian_at_zero(f, dim, h, f(Vec{0.0, 0.0}), prov);
}

/// First-order central differences of f at 0.
inline Eigen::VectorXd gradient_at_zero(const EtaMap& f, int dim, double h) {
  Eigen::VectorXd g(dim);
  for (int k = 0; k < dim; ++k) {
    Vec e{0.0, 0.0};
    e[static_cast<std::size_t>(k)] = h;
    g(k) = (f(e) - f({-e[0], -e[1]})) / (2.0 * h);
  }
  return g;
}

// ---------------------------------------------------------------------------
// Floquet-Bloch transform at scale eps = 1/M on the unit torus.

/// All n^N discrete Bloch bands of A(eta) on the cell grid, ascending.
/// Columns of `vectors` are grid samples normalized in L2(Y).
struct BlochBasis {
  Vec eta{0.0, 0.0};
  Eigen::VectorXd eigenvalues;
  Eigen::MatrixXcd vectors;
};

/// Dense Hermitian diagonalization of A(eta). Nyquist-indexed plane waves sit
/// outside the Galerkin trial space; they complete the basis with the
/// constant-coefficient energy mean(tr A)/N |2 pi k + eta|^2.
inline BlochBasis dense_bloch_basis(const ShiftedOperator& op, const Vec& eta) {
  const std::size_t size = op.grid().size();
  Eigen::MatrixXcd h = Eigen::MatrixXcd::Zero(static_cast<Eigen::Index>(size), static_cast<Eigen::Index>(size));
  for (std::size_t q = 0; q < size; ++q) {
    if (op.masked(q)) {
      double w = 0.0;
      for (int d = 0; d < op.dim(); ++d) {
        const double k = two_pi * wavenumber(op.grid().axis_index(q, d), op.grid().n) + eta[static_cast<std::size_t>(d)];
        w += k * k;
      }
      h(static_cast<Eigen::Index>(q), static_cast<Eigen::Index>(q)) = op.preconditioner_scale() * w;
      continue;
    }
    ComplexField e(size, cplx{});
    e[q] = 1.0;
    const auto col = op.apply(e, eta);
    for (std::size_t p = 0; p < size; ++p)
      if (!op.masked(p)) h(static_cast<Eigen::Index>(p), static_cast<Eigen::Index>(q)) = col[p];
  }
  h = 0.5 * (h + h.adjoint()).eval();
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXcd> es(h);
  if (es.info() != Eigen::Success) throw ConvergenceError("dense Bloch eigen-solve failed");
  BlochBasis basis;
  basis.eta = eta;
  basis.eigenvalues = es.eigenvalues();
  basis.vectors.resize(static_cast<Eigen::Index>(size), static_cast<Eigen::Index>(size));
  for (Eigen::Index m = 0; m < static_cast<Eigen::Index>(size); ++m) {
    ComplexField c(size);
    for (std::size_t p = 0; p < size; ++p) c[p] = es.eigenvectors()(static_cast<Eigen::Index>(p), m);
    detail::normalize_and_fix_phase(c);
    const auto samples = op.spectral().inverse(c);
    for (std::size_t p = 0; p < size; ++p) basis.vectors(static_cast<Eigen::Index>(p), m) = samples[p];
  }
  return basis;
}

/// Coefficients B_m g(xi) for bands m and dual points xi = 2 pi k,
/// k in [-M/2, M/2)^N (the centered representatives, so eta = xi/M lies in
/// the first dual cell).
struct BlochDecomposition {
  int cells = 0;  // M
  Grid cell_grid{};
  std::vector<Vec> xi;
  std::vector<BlochBasis> bases;
  std::vector<Eigen::VectorXcd> coefficients;  // per xi, one entry per band
  double energy = 0.0;                         // ||g||^2_{L2(0,1)^N}
  double parseval_residual = 0.0;              // relative

  double eps() const { return 1.0 / cells; }
};

namespace detail {

inline std::vector<std::array<int, 2>> dual_indices(int dim, int M) {
  std::vector<std::array<int, 2>> out;
  for (int a = -M / 2; a < M - M / 2; ++a) {
    if (dim == 1) {
      out.push_back({a, 0});
      continue;
    }
    for (int b = -M / 2; b < M - M / 2; ++b) out.push_back({a, b});
  }
  return out;
}

// Global point J (on the nM grid) -> cell-grid point.
inline std::size_t fold_index(const Grid& global, const Grid& cell, std::size_t J) {
  if (global.dim == 1) return J % static_cast<std::size_t>(cell.n);
  const int a = global.axis_index(J, 0) % cell.n;
  const int b = global.axis_index(J, 1) % cell.n;
  return cell.linear(a, b);
}

inline double phase_arg(const Grid& global, std::size_t J, const Vec& xi) {
  double s = xi[0] * global.coord(global.axis_index(J, 0));
  if (global.dim == 2) s += xi[1] * global.coord(global.axis_index(J, 1));
  return s;
}

// G(j) = sum over global points folding onto j of g(x) exp(-i x.xi).
inline Eigen::VectorXcd fold(const ComplexField& g, const Grid& global, const Grid& cell, const Vec& xi) {
  Eigen::VectorXcd G = Eigen::VectorXcd::Zero(static_cast<Eigen::Index>(cell.size()));
  for (std::size_t J = 0; J < global.size(); ++J)
    G(static_cast<Eigen::Index>(fold_index(global, cell, J))) += g[J] * std::polar(1.0, -phase_arg(global, J, xi));
  return G;
}

}  // namespace detail

inline Grid global_grid(const Grid& cell, int M) { return {cell.dim, cell.n * M}; }

/// Full decomposition of g, sampled on the (n M)^N grid of [0,1)^N.
inline BlochDecomposition bloch_decompose(const CoefficientField& field, const ComplexField& g, int M,
                                          bool dealias = false) {
  if (M < 1) throw InvalidArgument("cell count must be >= 1");
  const Grid cell = field.grid();
  const Grid global = global_grid(cell, M);
  if (g.size() != global.size()) throw GridMismatch("decompose: g must be sampled on the n*M grid");
  ShiftedOperator op(field, dealias);
  BlochDecomposition d;
  d.cells = M;
  d.cell_grid = cell;
  const auto ks = detail::dual_indices(cell.dim, M);
  d.xi.resize(ks.size());
  d.bases.resize(ks.size());
  d.coefficients.resize(ks.size());
  const double measure = 1.0 / static_cast<double>(global.size());
  parallel_for(ks.size(), [&](std::size_t i) {
    const Vec xi{two_pi * ks[i][0], two_pi * ks[i][1]};
    d.xi[i] = xi;
    d.bases[i] = dense_bloch_basis(op, Vec{xi[0] / M, xi[1] / M});
    d.coefficients[i] = d.bases[i].vectors.adjoint() * detail::fold(g, global, cell, xi) * measure;
  });
  for (const auto& x : g) d.energy += std::norm(x);
  d.energy *= measure;
  double total = 0.0;
  for (const auto& c : d.coefficients) total += c.squaredNorm();
  d.parseval_residual = std::abs(total - d.energy) / std::max(d.energy, 1e-300);
  return d;
}

/// Single coefficient B_m g(xi); m is 0-based, xi = 2 pi k with k in [-M/2, M/2)^N.
inline cplx bloch_coefficient(const CoefficientField& field, const ComplexField& g, int M, int m, const Vec& xi,
                              bool dealias = false) {
  const Grid cell = field.grid();
  const Grid global = global_grid(cell, M);
  if (g.size() != global.size()) throw GridMismatch("coefficient: g must be sampled on the n*M grid");
  if (m < 0 || static_cast<std::size_t>(m) >= cell.size()) throw InvalidArgument("band index out of range");
  for (int d = 0; d < cell.dim; ++d) {
    const double k = xi[static_cast<std::size_t>(d)] / two_pi;
    if (std::abs(k - std::round(k)) > 1e-9 || std::round(k) < -M / 2 || std::round(k) >= M - M / 2)
      throw InvalidArgument("xi is not on the discrete dual grid");
  }
  ShiftedOperator op(field, dealias);
  const auto basis = dense_bloch_basis(op, Vec{xi[0] / M, xi[1] / M});
  const auto G = detail::fold(g, global, cell, xi);
  return basis.vectors.col(m).dot(G) / static_cast<double>(global.size());
}

/// Inverse transform restricted to bands [0, bands) (all bands when bands < 0).
inline ComplexField bloch_reconstruct(const BlochDecomposition& d, int bands = -1) {
  const Grid global = global_grid(d.cell_grid, d.cells);
  ComplexField g(global.size(), cplx{});
  const auto nb = static_cast<Eigen::Index>(bands < 0 ? static_cast<int>(d.cell_grid.size()) : bands);
  for (std::size_t i = 0; i < d.xi.size(); ++i) {
    const Eigen::VectorXcd cell_values = d.bases[i].vectors.leftCols(nb) * d.coefficients[i].head(nb);
    for (std::size_t J = 0; J < global.size(); ++J)
      g[J] += cell_values(static_cast<Eigen::Index>(detail::fold_index(global, d.cell_grid, J))) *
              std::polar(1.0, detail::phase_arg(global, J, d.xi[i]));
  }
  return g;
}

/// Samples a function of x in [0,1)^N on the n*M cell-centered grid.
inline ComplexField sample_global(const Grid& cell, int M, const std::function<cplx(const Vec&)>& g) {
  const Grid global = global_grid(cell, M);
  ComplexField out(global.size());
  for (std::size_t J = 0; J < global.size(); ++J) {
    Vec x{global.coord(global.axis_index(J, 0)), 0.0};
    if (global.dim == 2) x[1] = global.coord(global.axis_index(J, 1));
    out[J] = g(x);
  }
  return out;
}

inline double l2_norm(const ComplexField& v) {
  return norm2(v) / std::sqrt(static_cast<double>(v.size()));
}

struct ScaleRow {
  double eps = 0.0;
  double error = 0.0;
  double reference = 0.0;
};

struct ScaleTable {
  std::vector<ScaleRow> rows;
  double slope = 0.0;
};

inline double fit_slope(const std::vector<ScaleRow>& rows) {
  std::vector<double> x, y;
  for (const auto& r : rows) {
    x.push_back(r.eps);
    y.push_back(r.error);
  }
  return loglog_slope(x, y);
}

/// ||g - first-band reconstruction of g|| for eps = 1/M over the given cell counts.
inline ScaleTable first_band_dominance(const CoefficientField& field, const std::function<cplx(const Vec&)>& g,
                                       const std::vector<int>& cell_counts) {
  ScaleTable t;
  for (int M : cell_counts) {
    const auto samples = sample_global(field.grid(), M, g);
    const auto d = bloch_decompose(field, samples, M);
    auto first = bloch_reconstruct(d, 1);
    for (std::size_t i = 0; i < first.size(); ++i) first[i] = samples[i] - first[i];
    t.rows.push_back({1.0 / M, l2_norm(first), l2_norm(samples)});
  }
  bool positive = t.rows.size() >= 2;
  for (const auto& r : t.rows) positive = positive && r.error > 0.0;
  t.slope = positive ? fit_slope(t.rows) : 0.0;
  return t;
}

/// max over xi = 2 pi k, |k_d| <= max_frequency, of |B_1 g(xi) - g^(xi)| with
/// g^(xi) = int g(x) exp(-i x.xi) dx on the same grid.
inline ScaleTable bloch_vs_fourier(const CoefficientField& field, const std::function<cplx(const Vec&)>& g,
                                   const std::vector<int>& cell_counts, int max_frequency = 3) {
  ScaleTable t;
  ShiftedOperator op(field, false);
  const Grid cell = field.grid();
  for (int M : cell_counts) {
    if (max_frequency >= M - M / 2) throw InvalidArgument("frequency set exceeds the dual grid");
    const Grid global = global_grid(cell, M);
    const auto samples = sample_global(cell, M, g);
    std::vector<std::array<int, 2>> ks;
    for (int a = -max_frequency; a <= max_frequency; ++a) {
      if (cell.dim == 1) {
        ks.push_back({a, 0});
        continue;
      }
      for (int b = -max_frequency; b <= max_frequency; ++b) ks.push_back({a, b});
    }
    std::vector<double> err(ks.size()), ref(ks.size());
    parallel_for(ks.size(), [&](std::size_t i) {
      const Vec xi{two_pi * ks[i][0], two_pi * ks[i][1]};
      const auto basis = dense_bloch_basis(op, Vec{xi[0] / M, xi[1] / M});
      const auto G = detail::fold(samples, global, cell, xi);
      const cplx b1 = basis.vectors.col(0).dot(G) / static_cast<double>(global.size());
      const cplx ghat = G.sum() / static_cast<double>(global.size());
      err[i] = std::abs(b1 - ghat);
      ref[i] = std::abs(ghat);
    });
    t.rows.push_back({1.0 / M, *std::max_element(err.begin(), err.end()), *std::max_element(ref.begin(), ref.end())});
  }
  bool positive = t.rows.size() >= 2;
  for (const auto& r : t.rows) positive = positive && r.error > 0.0;
  t.slope = positive ? fit_slope(t.rows) : 0.0;
  return t;
}

/// Half-Hessians of lambda_1 (A), mu_1 (B) and nu_1 at eta = 0.
struct SpectralRepresentation {
  HomogTensor astar;
  HomogTensor bstar;
  HomogTensor bsharp;
};

inline SpectralRepresentation spectral_representation(const CoefficientField& fieldA,
                                                      const CoefficientField& fieldB, const SolverConfig& cfg,
                                                      double h, BlochOptions opts = {}) {
  if (fieldA.grid() != fieldB.grid()) throw GridMismatch("spectral representation: A and B must share a grid");
  opts.check_gap = false;
  const BlochSolver sa(fieldA, cfg, opts);
  const BlochSolver sb(fieldB, cfg, opts);
  const int dim = fieldA.dim();
  const auto pts = hessian_stencil(dim, h);
  std::vector<double> lam(pts.size()), mu(pts.size()), nu(pts.size());
  parallel_for(pts.size(), [&](std::size_t i) {
    const auto m = sa.mode(pts[i]);
    lam[i] = m.eigenvalue;
    nu[i] = nu1(sb.op(), m);
    mu[i] = sb.mode(pts[i]).eigenvalue;
  });
  auto table = [&](const std::vector<double>& v) {
    return [&pts, &v](const Vec& eta) {
      for (std::size_t i = 0; i < pts.size(); ++i)
        if (pts[i] == eta) return v[i];
      throw InvalidArgument("eta not on the stencil");
    };
  };
  const auto m0 = sa.mode({0.0, 0.0});
  const double lam0 = m0.eigenvalue;
  const double nu0 = nu1(sb.op(), m0);
  const double mu0 = sb.mode({0.0, 0.0}).eigenvalue;
  return {hessian_at_zero(table(lam), dim, h, lam0, Provenance::HessianLambda1, fieldA.n(), cfg.tol),
          hessian_at_zero(table(mu), dim, h, mu0, Provenance::HessianMu1, fieldA.n(), cfg.tol),
          hessian_at_zero(table(nu), dim, h, nu0, Provenance::HessianNu1, fieldA.n(), cfg.tol)};
}

}  // namespace bloch_homog

#endif  // BLOCH_HOMOG_BLOCH_HPP
