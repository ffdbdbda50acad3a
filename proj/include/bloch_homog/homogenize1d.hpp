#ifndef BLOCH_HOMOG_HOMOGENIZE1D_HPP
#define BLOCH_HOMOG_HOMOGENIZE1D_HPP

#include <algorithm>
#include <cmath>
#include <functional>
#include <numeric>
#include <vector>

#include "common.hpp"
#include "microstructure.hpp"

namespace bloch_homog {

/// Piecewise-constant 1-periodic profile: values[i] on [starts[i], starts[i+1]).
struct PiecewiseProfile {
  std::vector<Rational> starts{Rational{0, 1}};
  std::vector<double> values{1.0};

  static PiecewiseProfile constant(double c) { return {{Rational{0, 1}}, {c}}; }
  static PiecewiseProfile two_phase(double v0, double v1, Rational fraction = {1, 2}) {
    return {{Rational{0, 1}, fraction}, {v0, v1}};
  }

  void validate() const {
    if (starts.empty() || starts.size() != values.size())
      throw InvalidArgument("profile needs one start per value");
    if (starts.front().p != 0) throw InvalidArgument("profile must start at 0");
    for (std::size_t i = 0; i < starts.size(); ++i) {
      if (starts[i].value() < 0.0 || starts[i].value() >= 1.0) throw InvalidArgument("profile breakpoint outside [0,1)");
      if (i > 0 && !(starts[i].value() > starts[i - 1].value()))
        throw InvalidArgument("profile breakpoints must increase");
      if (!(values[i] > 0.0) || !std::isfinite(values[i])) throw InvalidArgument("profile values must be positive");
    }
  }

  /// Value at y (taken modulo 1).
  double operator()(double y) const {
    y -= std::floor(y);
    std::size_t i = 0;
    while (i + 1 < starts.size() && starts[i + 1].value() <= y) ++i;
    return values[i];
  }

  double mean() const { return integrate([](double v) { return v; }); }
  double harmonic_mean() const { return 1.0 / integrate([](double v) { return 1.0 / v; }); }

  template <typename Fn>
  double integrate(Fn fn) const {
    double s = 0.0;
    for (std::size_t i = 0; i < starts.size(); ++i) {
      const double end = i + 1 < starts.size() ? starts[i + 1].value() : 1.0;
      s += (end - starts[i].value()) * fn(values[i]);
    }
    return s;
  }
};

/// Cell-centered samples of a profile on n points; breakpoints must fall on cell faces.
inline CoefficientField profile_field(const PiecewiseProfile& prof, int n) {
  prof.validate();
  require_grid({1, n});
  for (const auto& s : prof.starts)
    if ((static_cast<long>(n) * s.p) % s.q != 0) throw InvalidArgument("profile breakpoint is not on a cell face");
  std::vector<double> v(static_cast<std::size_t>(n));
  for (int j = 0; j < n; ++j) v[static_cast<std::size_t>(j)] = prof((j + 0.5) / n);
  const auto [lo, hi] = std::minmax_element(prof.values.begin(), prof.values.end());
  return CoefficientField(Grid{1, n}, {std::move(v)}, *lo, *hi);
}

struct Limits1d {
  double astar = 0.0;
  double bstar = 0.0;
  double bsharp = 0.0;
};

/// a* and b* are harmonic means; b# = a*^2 times the mean of b(t y)/a(y)^2
/// over the common period q of a and b(t .) for t = p/q.
inline Limits1d analytic_1d_limits(const PiecewiseProfile& a, const PiecewiseProfile& b, Rational t = {1, 1}) {
  a.validate();
  b.validate();
  if (t.p <= 0 || t.q <= 0) throw InvalidArgument("scale ratio must be a positive rational");
  const double q = static_cast<double>(t.q);
  std::vector<double> cuts{0.0, q};
  for (long k = 0; k < t.q; ++k)
    for (const auto& s : a.starts) cuts.push_back(static_cast<double>(k) + s.value());
  for (long m = 0; m < t.p; ++m)
    for (const auto& s : b.starts) cuts.push_back((static_cast<double>(m) + s.value()) / t.value());
  std::sort(cuts.begin(), cuts.end());
  double s = 0.0;
  for (std::size_t i = 0; i + 1 < cuts.size(); ++i) {
    const double len = cuts[i + 1] - cuts[i];
    if (len <= 1e-14) continue;
    const double y = 0.5 * (cuts[i] + cuts[i + 1]);
    const double av = a(y);
    s += len * b(t.value() * y) / (av * av);
  }
  Limits1d out;
  out.astar = a.harmonic_mean();
  out.bstar = b.harmonic_mean();
  out.bsharp = out.astar * out.astar * s / q;
  return out;
}

/// -(a^eps u')' = f on (0,1), u(0) = u(1) = 0, with a^eps(x) = a(x/eps) and
/// b^eps(x) = b(t x/eps). eps = 1/cells.
struct EpsilonProblem {
  PiecewiseProfile a;
  PiecewiseProfile b;
  Rational t{1, 1};
  int cells = 1;
  int per_cell = 32;
  std::function<double(double)> f = [](double) { return 1.0; };

  double eps() const { return 1.0 / cells; }
  int intervals() const { return cells * per_cell; }
  double h() const { return 1.0 / intervals(); }

  void validate() const {
    a.validate();
    b.validate();
    if (cells < 1) throw InvalidArgument("cell count must be >= 1");
    if (per_cell < 32) throw InvalidArgument("need at least 32 grid intervals per eps-cell");
    if (t.p <= 0 || t.q <= 0) throw InvalidArgument("scale ratio must be a positive rational");
    // Jumps of a sit at (k + r/s) per_cell grid units, those of b at
    // (k + r/s) per_cell q/p. Both must be integers for every k.
    auto aligned = [](long num, long den, const Rational& r) {
      return num % den == 0 && (num / den * r.p) % r.q == 0;
    };
    for (const auto& s : a.starts)
      if (!aligned(per_cell, 1, s)) throw InvalidArgument("jumps of a do not fall on grid faces");
    for (const auto& s : b.starts)
      if (!aligned(static_cast<long>(per_cell) * t.q, t.p, s))
        throw InvalidArgument("jumps of b do not fall on grid faces");
  }

  /// Coefficients on each grid interval.
  std::vector<double> a_intervals() const { return sample(a, 1.0); }
  std::vector<double> b_intervals() const { return sample(b, t.value()); }

 private:
  std::vector<double> sample(const PiecewiseProfile& p, double ratio) const {
    std::vector<double> v(static_cast<std::size_t>(intervals()));
    for (std::size_t i = 0; i < v.size(); ++i) v[i] = p(ratio * (static_cast<double>(i) + 0.5) * h() * cells);
    return v;
  }
};

/// Nodal values on x_i = i h, i = 0..N, and interval fluxes.
struct StateSolution {
  std::vector<double> u;
  std::vector<double> sigma;
};

struct AdjointSolution {
  std::vector<double> p;
  std::vector<double> z;
  double flux = 0.0;          // the constant value of z
  double boundary_residual = 0.0;
  double z_deviation = 0.0;   // max |z_i - flux|
};

namespace detail {

// Tridiagonal solve: sub, diag, sup, rhs all of length m (sub[0], sup[m-1] unused).
inline std::vector<double> thomas(std::vector<double> sub, std::vector<double> diag, std::vector<double> sup,
                                  std::vector<double> rhs) {
  const std::size_t m = diag.size();
  for (std::size_t i = 1; i < m; ++i) {
    if (diag[i - 1] == 0.0) throw InvalidArgument("singular tridiagonal system");
    const double w = sub[i] / diag[i - 1];
    diag[i] -= w * sup[i - 1];
    rhs[i] -= w * rhs[i - 1];
  }
  std::vector<double> x(m);
  if (m == 0) return x;
  x[m - 1] = rhs[m - 1] / diag[m - 1];
  for (std::size_t i = m - 1; i-- > 0;) x[i] = (rhs[i] - sup[i] * x[i + 1]) / diag[i];
  return x;
}

// Exact stiffness for piecewise-constant a on each interval; load by Simpson on f times hat functions.
inline StateSolution solve_state(const std::vector<double>& a, const std::function<double(double)>& f) {
  const std::size_t N = a.size();
  const double h = 1.0 / static_cast<double>(N);
  const std::size_t m = N - 1;
  std::vector<double> sub(m), diag(m), sup(m), rhs(m);
  for (std::size_t k = 0; k < m; ++k) {
    const std::size_t i = k + 1;
    const double x = static_cast<double>(i) * h;
    diag[k] = (a[i - 1] + a[i]) / h;
    sub[k] = -a[i - 1] / h;
    sup[k] = -a[i] / h;
    // Simpson on [x-h, x] and [x, x+h] against the hat centred at x.
    rhs[k] = h / 6.0 * (f(x - 0.5 * h) * 2.0 + f(x)) + h / 6.0 * (f(x) + 2.0 * f(x + 0.5 * h));
  }
  const auto inner = thomas(sub, diag, sup, rhs);
  StateSolution s;
  s.u.assign(N + 1, 0.0);
  std::copy(inner.begin(), inner.end(), s.u.begin() + 1);
  s.sigma.resize(N);
  for (std::size_t i = 0; i < N; ++i) s.sigma[i] = a[i] * (s.u[i + 1] - s.u[i]) / h;
  return s;
}

inline AdjointSolution solve_adjoint(const std::vector<double>& a, const std::vector<double>& b,
                                     const std::vector<double>& u) {
  const std::size_t N = a.size();
  const double h = 1.0 / static_cast<double>(N);
  std::vector<double> slope(N);
  double num = 0.0, den = 0.0;
  for (std::size_t i = 0; i < N; ++i) {
    slope[i] = (u[i + 1] - u[i]) / h;
    num += b[i] * slope[i] / a[i];
    den += 1.0 / a[i];
  }
  AdjointSolution s;
  s.flux = -num / den;
  s.p.assign(N + 1, 0.0);
  s.z.resize(N);
  std::vector<double> dp(N);
  double scale = 0.0;
  for (std::size_t i = 0; i < N; ++i) {
    dp[i] = h * (s.flux + b[i] * slope[i]) / a[i];
    s.p[i + 1] = s.p[i] + dp[i];
    scale = std::max(scale, std::abs(s.p[i + 1]));
  }
  s.boundary_residual = std::abs(s.p[N]);
  if (s.boundary_residual > 1e-12 * std::max(1.0, scale))
    throw ConvergenceError("adjoint boundary residual " + std::to_string(s.boundary_residual));
  s.p[N] = 0.0;
  for (std::size_t i = 0; i < N; ++i) {
    s.z[i] = a[i] * dp[i] / h - b[i] * slope[i];
    s.z_deviation = std::max(s.z_deviation, std::abs(s.z[i] - s.flux));
  }
  return s;
}

// Running integral at the nodes of a piecewise-linear nodal function.
inline std::vector<double> antiderivative_nodal(const std::vector<double>& v) {
  const double h = 1.0 / static_cast<double>(v.size() - 1);
  std::vector<double> out(v.size(), 0.0);
  for (std::size_t i = 0; i + 1 < v.size(); ++i) out[i + 1] = out[i] + 0.5 * h * (v[i] + v[i + 1]);
  return out;
}

// Running integral at the nodes of an interval-wise constant function.
inline std::vector<double> antiderivative_cellwise(const std::vector<double>& v) {
  const double h = 1.0 / static_cast<double>(v.size());
  std::vector<double> out(v.size() + 1, 0.0);
  for (std::size_t i = 0; i < v.size(); ++i) out[i + 1] = out[i] + h * v[i];
  return out;
}

// L2(0,1) norm of the piecewise-linear interpolant of x - y.
inline double l2_diff_linear(const std::vector<double>& x, const std::vector<double>& y) {
  const double h = 1.0 / static_cast<double>(x.size() - 1);
  double s = 0.0;
  for (std::size_t i = 0; i + 1 < x.size(); ++i) {
    const double d0 = x[i] - y[i], d1 = x[i + 1] - y[i + 1];
    s += h / 3.0 * (d0 * d0 + d0 * d1 + d1 * d1);
  }
  return std::sqrt(s);
}

}  // namespace detail

inline StateSolution solve_state_1d(const EpsilonProblem& prob) {
  prob.validate();
  return detail::solve_state(prob.a_intervals(), prob.f);
}

inline AdjointSolution solve_adjoint_1d(const EpsilonProblem& prob, const StateSolution& state) {
  prob.validate();
  if (state.u.size() != static_cast<std::size_t>(prob.intervals()) + 1)
    throw GridMismatch("adjoint: state lives on a different grid");
  return detail::solve_adjoint(prob.a_intervals(), prob.b_intervals(), state.u);
}

struct ConvergenceRow {
  double eps = 0.0;
  double err_u = 0.0;
  double err_sigma = 0.0;
  double err_z = 0.0;
  double err_p = 0.0;
  double err_z_control = 0.0;  // limit flux built with b* in place of b#
  double energy_error = 0.0;   // |int b^eps (u^eps')^2 - int b# (u')^2|
  double z_deviation = 0.0;
};

struct ConvergenceTable {
  Limits1d limits;
  std::vector<ConvergenceRow> rows;
  double slope_u = 0.0;
  double slope_sigma = 0.0;
  double slope_z = 0.0;
  double slope_energy = 0.0;

  void write_csv(const std::string& path) const;
};

inline void ConvergenceTable::write_csv(const std::string& path) const {
  std::FILE* fp = std::fopen(path.c_str(), "w");
  if (!fp) throw Error("io", "cannot write " + path);
  std::fprintf(fp, "eps,errU,errSigma,errZ\n");
  for (const auto& r : rows) std::fprintf(fp, "%.17g,%.17g,%.17g,%.17g\n", r.eps, r.err_u, r.err_sigma, r.err_z);
  std::fclose(fp);
}

/// Errors between the eps-problems and their homogenized limits, measured on
/// antiderivatives. The limit problems are solved on each eps grid.
inline ConvergenceTable flux_convergence(const PiecewiseProfile& a, const PiecewiseProfile& b, Rational t,
                                         const std::vector<int>& cell_counts,
                                         std::function<double(double)> f = [](double) { return 1.0; },
                                         int per_cell = 32) {
  ConvergenceTable table;
  table.limits = analytic_1d_limits(a, b, t);
  const auto lim = table.limits;
  table.rows.resize(cell_counts.size());
  parallel_for(cell_counts.size(), [&](std::size_t r) {
    EpsilonProblem prob{a, b, t, cell_counts[r], per_cell, f};
    prob.validate();
    const auto ae = prob.a_intervals();
    const auto be = prob.b_intervals();
    const auto st = detail::solve_state(ae, f);
    const auto ad = detail::solve_adjoint(ae, be, st.u);

    const std::vector<double> a0(ae.size(), lim.astar), b0(ae.size(), lim.bsharp);
    const auto st0 = detail::solve_state(a0, f);
    const auto ad0 = detail::solve_adjoint(a0, b0, st0.u);
    const double h = prob.h();
    std::vector<double> z_control(ae.size());
    double energy = 0.0, energy0 = 0.0;
    for (std::size_t i = 0; i < ae.size(); ++i) {
      const double du = (st.u[i + 1] - st.u[i]) / h, du0 = (st0.u[i + 1] - st0.u[i]) / h;
      z_control[i] = lim.astar * (ad0.p[i + 1] - ad0.p[i]) / h - lim.bstar * du0;
      energy += h * be[i] * du * du;
      energy0 += h * lim.bsharp * du0 * du0;
    }
    using detail::antiderivative_cellwise;
    using detail::antiderivative_nodal;
    using detail::l2_diff_linear;
    ConvergenceRow& row = table.rows[r];
    row.eps = prob.eps();
    row.err_u = l2_diff_linear(antiderivative_nodal(st.u), antiderivative_nodal(st0.u));
    row.err_p = l2_diff_linear(antiderivative_nodal(ad.p), antiderivative_nodal(ad0.p));
    row.err_sigma = l2_diff_linear(antiderivative_cellwise(st.sigma), antiderivative_cellwise(st0.sigma));
    row.err_z = l2_diff_linear(antiderivative_cellwise(ad.z), antiderivative_cellwise(ad0.z));
    row.err_z_control = l2_diff_linear(antiderivative_cellwise(ad.z), antiderivative_cellwise(z_control));
    row.energy_error = std::abs(energy - energy0);
    row.z_deviation = ad.z_deviation;
  });
  auto slope = [&](auto member) {
    std::vector<double> x, y;
    for (const auto& row : table.rows) {
      if (!(row.*member > 0.0)) return 0.0;
      x.push_back(row.eps);
      y.push_back(row.*member);
    }
    return x.size() >= 2 ? loglog_slope(x, y) : 0.0;
  };
  table.slope_u = slope(&ConvergenceRow::err_u);
  table.slope_sigma = slope(&ConvergenceRow::err_sigma);
  table.slope_z = slope(&ConvergenceRow::err_z);
  table.slope_energy = slope(&ConvergenceRow::energy_error);
  return table;
}

}  // namespace bloch_homog

#endif  // BLOCH_HOMOG_HOMOGENIZE1D_HPP
