#ifndef BLOCH_HOMOG_MICROSTRUCTURE_HPP
#define BLOCH_HOMOG_MICROSTRUCTURE_HPP

#include <Eigen/Dense>

#include <array>
#include <cmath>
#include <fstream>
#include <numeric>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "common.hpp"
#include "fft.hpp"

namespace bloch_homog {

/// Eigenvalue range of a symmetric 1x1 or 2x2 matrix given by its entries.
inline std::pair<double, double> sym_eig_range(int dim, double a00, double a01 = 0.0,
                                               double a11 = 0.0) {
  if (dim == 1) return {a00, a00};
  const double mid = 0.5 * (a00 + a11);
  const double rad = std::hypot(0.5 * (a00 - a11), a01);
  return {mid - rad, mid + rad};
}

/// Grid-sampled symmetric coefficient matrix A(y) on the unit torus.
///
/// Immutable once built. Components are stored per entry (i,j) as a field over
/// the grid; (i,j) and (j,i) hold identical data.
class CoefficientField {
 public:
  CoefficientField() = default;

  CoefficientField(Grid grid, std::vector<std::vector<double>> components, double alpha,
                   double beta)
      : grid_(grid), comp_(std::move(components)), alpha_(alpha), beta_(beta) {
    const auto nn = static_cast<std::size_t>(grid_.dim * grid_.dim);
    if (comp_.size() != nn) throw InvalidArgument("component count does not match dimension");
    for (const auto& c : comp_)
      if (c.size() != grid_.size()) throw InvalidArgument("component size does not match grid");
    for (int i = 0; i < grid_.dim; ++i)
      for (int j = 0; j < i; ++j)
        for (std::size_t p = 0; p < grid_.size(); ++p)
          if (std::abs(comp_[idx(i, j)][p] - comp_[idx(j, i)][p]) > 1e-14)
            throw InvalidArgument("coefficient matrix is not symmetric");
  }

  const Grid& grid() const { return grid_; }
  int dim() const { return grid_.dim; }
  int n() const { return grid_.n; }
  double alpha() const { return alpha_; }
  double beta() const { return beta_; }

  double operator()(std::size_t point, int i, int j) const { return comp_[idx(i, j)][point]; }
  const std::vector<double>& component(int i, int j) const { return comp_[idx(i, j)]; }

  Eigen::MatrixXd at(std::size_t point) const {
    Eigen::MatrixXd m(dim(), dim());
    for (int i = 0; i < dim(); ++i)
      for (int j = 0; j < dim(); ++j) m(i, j) = (*this)(point, i, j);
    return m;
  }

  /// Cell average (|Y| = 1).
  Eigen::MatrixXd mean() const {
    Eigen::MatrixXd m = Eigen::MatrixXd::Zero(dim(), dim());
    for (int i = 0; i < dim(); ++i)
      for (int j = 0; j < dim(); ++j)
        m(i, j) = std::accumulate(component(i, j).begin(), component(i, j).end(), 0.0) /
                  static_cast<double>(grid_.size());
    return m;
  }

  Eigen::MatrixXd mean_inverse() const {
    Eigen::MatrixXd m = Eigen::MatrixXd::Zero(dim(), dim());
    for (std::size_t p = 0; p < grid_.size(); ++p) m += at(p).inverse();
    return m / static_cast<double>(grid_.size());
  }

  std::pair<double, double> eig_range(std::size_t point) const {
    return dim() == 1 ? sym_eig_range(1, (*this)(point, 0, 0))
                      : sym_eig_range(2, (*this)(point, 0, 0), (*this)(point, 0, 1),
                                      (*this)(point, 1, 1));
  }

  CoefficientField scaled(double c) const {
    auto comp = comp_;
    for (auto& v : comp)
      for (auto& x : v) x *= c;
    return {grid_, std::move(comp), alpha_ * c, beta_ * c};
  }

  /// Trigonometric interpolant sampled on an m-point grid (m >= n). The
  /// Nyquist coefficient is split evenly between +-n/2 so real data stays real.
  std::vector<std::vector<double>> interpolated(int m) const {
    if (m == n()) return comp_;
    Spectral sp(dim(), n());
    std::vector<std::vector<double>> out;
    out.reserve(comp_.size());
    for (const auto& c : comp_) {
      std::vector<cplx> z(c.begin(), c.end());
      auto coeffs = sp.coefficients(std::move(z));
      auto fine = synthesize_split(coeffs, m);
      std::vector<double> r(fine.size());
      for (std::size_t p = 0; p < fine.size(); ++p) r[p] = fine[p].real();
      out.push_back(std::move(r));
    }
    return out;
  }

 private:
  std::size_t idx(int i, int j) const { return static_cast<std::size_t>(i * grid_.dim + j); }

  std::vector<cplx> synthesize_split(const std::vector<cplx>& coeffs, int m) const {
    const int n = this->n();
    auto shifted = [&](int k) { return std::polar(1.0, std::numbers::pi * k / m); };
    std::vector<cplx> spec(Grid{dim(), m}.size(), cplx{});
    // Each native wavenumber k contributes at k (and at +n/2 for the Nyquist half).
    auto targets = [&](int i) {
      std::vector<std::pair<int, double>> t;
      const int k = wavenumber(i, n);
      if (is_nyquist(i, n)) {
        t.emplace_back(-n / 2, 0.5);
        t.emplace_back(n / 2, 0.5);
      } else {
        t.emplace_back(k, 1.0);
      }
      return t;
    };
    if (dim() == 1) {
      for (int i = 0; i < n; ++i)
        for (auto [k, w] : targets(i)) spec[static_cast<std::size_t>((k + m) % m)] += w * coeffs[i] * shifted(k);
    } else {
      for (int i = 0; i < n; ++i)
        for (auto [ki, wi] : targets(i))
          for (int j = 0; j < n; ++j)
            for (auto [kj, wj] : targets(j))
              spec[static_cast<std::size_t>((ki + m) % m) * m + (kj + m) % m] +=
                  wi * wj * coeffs[static_cast<std::size_t>(i) * n + j] * shifted(ki) * shifted(kj);
    }
    fftw_plan plan = detail::cached_plan(dim(), m, FFTW_BACKWARD);
    auto* p = reinterpret_cast<fftw_complex*>(spec.data());
    fftw_execute_dft(plan, p, p);
    return spec;
  }

  Grid grid_{};
  std::vector<std::vector<double>> comp_;
  double alpha_ = 0.0;
  double beta_ = 0.0;
};

enum class PresetKind { constant, laminate, checkerboard, disk_inclusion, trig_smooth, tabulated };

inline PresetKind parse_preset_kind(const std::string& s) {
  if (s == "constant") return PresetKind::constant;
  if (s == "laminate") return PresetKind::laminate;
  if (s == "checkerboard") return PresetKind::checkerboard;
  if (s == "disk-inclusion") return PresetKind::disk_inclusion;
  if (s == "trig-smooth") return PresetKind::trig_smooth;
  if (s == "tabulated") return PresetKind::tabulated;
  throw InvalidArgument("unknown preset kind '" + s + "'");
}

/// A phase value: either a scalar (times identity) or a full row-major N x N matrix.
struct Phase {
  std::vector<double> entries;

  static Phase scalar(double s) { return Phase{{s}}; }

  Eigen::MatrixXd matrix(int dim) const {
    if (entries.size() == 1) return entries[0] * Eigen::MatrixXd::Identity(dim, dim);
    if (entries.size() != static_cast<std::size_t>(dim * dim))
      throw InvalidArgument("phase matrix size does not match dimension");
    Eigen::MatrixXd m(dim, dim);
    for (int i = 0; i < dim; ++i)
      for (int j = 0; j < dim; ++j) m(i, j) = entries[static_cast<std::size_t>(i * dim + j)];
    return m;
  }
};

enum class TrigFn { sin, cos };

/// amplitude * prod_d fn_d(2 pi freq_d y_d); axes beyond the field dimension are ignored.
struct TrigTerm {
  double amplitude = 0.0;
  std::array<TrigFn, 2> fn{TrigFn::cos, TrigFn::cos};
  std::array<int, 2> freq{0, 0};
};

/// Recipe for a coefficient field.
///
/// `fraction` is the share of phases[0] for laminates (phases[0] occupies
/// [0, fraction) along `axis`) and the share of the inclusion phases[1] for
/// disk-inclusion. Checkerboards require fraction 1/2. `smoothing` is the
/// blending width in grid cells. Trig-smooth fields are scalar:
/// (trig_offset + sum of terms) * I.
struct PresetSpec {
  PresetKind kind = PresetKind::constant;
  std::vector<Phase> phases;
  double fraction = 0.5;
  int axis = 0;
  double smoothing = 0.0;
  double trig_offset = 0.0;
  std::vector<TrigTerm> terms;
  std::vector<double> table;
  std::optional<double> alpha;
  std::optional<double> beta;

  static PresetSpec constant(double c) {
    PresetSpec s;
    s.kind = PresetKind::constant;
    s.phases = {Phase::scalar(c)};
    return s;
  }
  static PresetSpec two_phase(PresetKind kind, double p0, double p1, double fraction = 0.5,
                              double smoothing = 0.0, int axis = 0) {
    PresetSpec s;
    s.kind = kind;
    s.phases = {Phase::scalar(p0), Phase::scalar(p1)};
    s.fraction = fraction;
    s.smoothing = smoothing;
    s.axis = axis;
    return s;
  }
  static PresetSpec trig(double offset, std::vector<TrigTerm> terms) {
    PresetSpec s;
    s.kind = PresetKind::trig_smooth;
    s.trig_offset = offset;
    s.terms = std::move(terms);
    return s;
  }
};

namespace detail {

inline double blend_weight(double signed_cells, double width) {
  if (width <= 0.0) return signed_cells > 0.0 ? 1.0 : 0.0;
  return std::clamp(0.5 + signed_cells / width, 0.0, 1.0);
}

inline double trig_eval(TrigFn fn, double x) { return fn == TrigFn::sin ? std::sin(x) : std::cos(x); }

inline void check_spd(const Eigen::MatrixXd& m, const PresetSpec& spec, const char* what) {
  if ((m - m.transpose()).cwiseAbs().maxCoeff() > 1e-14)
    throw InvalidArgument(std::string(what) + " is not symmetric");
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(m, Eigen::EigenvaluesOnly);
  const double lo = es.eigenvalues().minCoeff();
  const double hi = es.eigenvalues().maxCoeff();
  if (!(lo > 0.0)) throw InvalidArgument(std::string(what) + " is not positive definite");
  if (spec.alpha && lo < *spec.alpha - 1e-14)
    throw InvalidArgument(std::string(what) + " violates the declared coercivity bound");
  if (spec.beta && hi > *spec.beta + 1e-14)
    throw InvalidArgument(std::string(what) + " violates the declared boundedness bound");
}

}  // namespace detail

/// Samples a preset at cell centers y_j = (j + 1/2)/n.
inline CoefficientField build_field(const PresetSpec& spec, int dim, int n) {
  const Grid grid{dim, n};
  require_grid(grid);
  const std::size_t npts = grid.size();
  const auto nn = static_cast<std::size_t>(dim * dim);
  std::vector<std::vector<double>> comp(nn, std::vector<double>(npts, 0.0));

  auto put = [&](std::size_t p, const Eigen::MatrixXd& m) {
    for (int i = 0; i < dim; ++i)
      for (int j = 0; j < dim; ++j) comp[static_cast<std::size_t>(i * dim + j)][p] = m(i, j);
  };
  auto point = [&](std::size_t p) {
    std::array<double, 2> y{grid.coord(grid.axis_index(p, 0)), 0.0};
    if (dim == 2) y[1] = grid.coord(grid.axis_index(p, 1));
    return y;
  };

  const bool piecewise = spec.kind == PresetKind::laminate || spec.kind == PresetKind::checkerboard ||
                         spec.kind == PresetKind::disk_inclusion;
  const std::size_t needed_phases = spec.kind == PresetKind::constant ? 1 : piecewise ? 2 : 0;
  if (spec.phases.size() < needed_phases)
    throw InvalidArgument("preset needs " + std::to_string(needed_phases) + " phase values");
  std::vector<Eigen::MatrixXd> phase;
  for (std::size_t k = 0; k < needed_phases; ++k) {
    phase.push_back(spec.phases[k].matrix(dim));
    detail::check_spd(phase.back(), spec, "phase value");
  }
  if (spec.smoothing < 0.0) throw InvalidArgument("smoothing width must be >= 0");
  if (piecewise && !(spec.fraction > 0.0 && spec.fraction < 1.0))
    throw InvalidArgument("volume fraction must lie in (0, 1)");

  const double w = spec.smoothing;
  const double f = spec.fraction;
  switch (spec.kind) {
    case PresetKind::constant:
      for (std::size_t p = 0; p < npts; ++p) put(p, phase[0]);
      break;
    case PresetKind::laminate: {
      if (spec.axis < 0 || spec.axis >= dim) throw InvalidArgument("laminate axis out of range");
      if (std::abs(f * n - std::round(f * n)) > 1e-9)
        throw InvalidArgument("volume fraction is not representable on the grid");
      for (std::size_t p = 0; p < npts; ++p) {
        const double x = point(p)[static_cast<std::size_t>(spec.axis)];
        const double d = x >= f ? std::min(x - f, 1.0 - x) : -std::min(f - x, x);
        const double th = detail::blend_weight(d * n, w);
        put(p, (1.0 - th) * phase[0] + th * phase[1]);
      }
      break;
    }
    case PresetKind::checkerboard: {
      if (std::abs(f - 0.5) > 1e-12) throw InvalidArgument("checkerboard requires fraction 1/2");
      for (std::size_t p = 0; p < npts; ++p) {
        const auto y = point(p);
        double prod = 1.0;
        for (int d = 0; d < dim; ++d) {
          const double x = y[static_cast<std::size_t>(d)];
          const double dist = std::min({x, std::abs(x - 0.5), 1.0 - x}) * n;
          const double e = x < 0.5 ? dist : -dist;
          prod *= w > 0.0 ? std::clamp(2.0 * e / w, -1.0, 1.0) : (e > 0 ? 1.0 : -1.0);
        }
        const double th = 0.5 * (1.0 - prod);
        put(p, (1.0 - th) * phase[0] + th * phase[1]);
      }
      break;
    }
    case PresetKind::disk_inclusion: {
      const double r = dim == 2 ? std::sqrt(f / std::numbers::pi) : 0.5 * f;
      if (dim == 2 && r >= 0.5) throw InvalidArgument("disk inclusion does not fit in the cell");
      for (std::size_t p = 0; p < npts; ++p) {
        const auto y = point(p);
        const double dist = dim == 2 ? std::hypot(y[0] - 0.5, y[1] - 0.5) : std::abs(y[0] - 0.5);
        const double th = detail::blend_weight((r - dist) * n, w);
        put(p, (1.0 - th) * phase[0] + th * phase[1]);
      }
      break;
    }
    case PresetKind::trig_smooth: {
      for (std::size_t p = 0; p < npts; ++p) {
        const auto y = point(p);
        double s = spec.trig_offset;
        for (const auto& t : spec.terms) {
          double v = t.amplitude;
          for (int d = 0; d < dim; ++d)
            v *= detail::trig_eval(t.fn[static_cast<std::size_t>(d)],
                                   two_pi * t.freq[static_cast<std::size_t>(d)] * y[static_cast<std::size_t>(d)]);
          s += v;
        }
        const Eigen::MatrixXd m = s * Eigen::MatrixXd::Identity(dim, dim);
        detail::check_spd(m, spec, "trig-smooth sample");
        put(p, m);
      }
      break;
    }
    case PresetKind::tabulated: {
      if (spec.table.size() != npts * nn)
        throw InvalidArgument("tabulated values: expected " + std::to_string(npts * nn) +
                              " entries, got " + std::to_string(spec.table.size()));
      for (std::size_t p = 0; p < npts; ++p) {
        Eigen::MatrixXd m(dim, dim);
        for (int i = 0; i < dim; ++i)
          for (int j = 0; j < dim; ++j) m(i, j) = spec.table[p * nn + static_cast<std::size_t>(i * dim + j)];
        detail::check_spd(m, spec, "tabulated value");
        put(p, m);
      }
      break;
    }
  }

  double lo = std::numeric_limits<double>::infinity();
  double hi = 0.0;
  for (std::size_t p = 0; p < npts; ++p) {
    const double a00 = comp[0][p];
    auto [l, h] = dim == 1 ? sym_eig_range(1, a00) : sym_eig_range(2, a00, comp[1][p], comp[3][p]);
    lo = std::min(lo, l);
    hi = std::max(hi, h);
  }
  return {grid, std::move(comp), spec.alpha.value_or(lo), spec.beta.value_or(hi)};
}

/// Reads a tabulated field: one grid point per line, N*N comma-separated entries.
inline std::vector<double> read_table_csv(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw InvalidArgument("cannot open table '" + path + "'");
  std::vector<double> values;
  std::string line;
  while (std::getline(in, line)) {
    if (line.empty() || line[0] == '#') continue;
    std::stringstream ss(line);
    std::string cell;
    while (std::getline(ss, cell, ',')) {
      try {
        values.push_back(std::stod(cell));
      } catch (const std::exception&) {
        throw InvalidArgument("bad number '" + cell + "' in " + path);
      }
    }
  }
  return values;
}

struct ValidationReport {
  double min_eig = 0.0;
  double max_eig = 0.0;
  std::size_t failing_points = 0;
  bool pass = false;
};

inline ValidationReport validate_ellipticity(const CoefficientField& field, double alpha,
                                             double beta) {
  ValidationReport r;
  r.min_eig = std::numeric_limits<double>::infinity();
  r.max_eig = -std::numeric_limits<double>::infinity();
  for (std::size_t p = 0; p < field.grid().size(); ++p) {
    auto [lo, hi] = field.eig_range(p);
    r.min_eig = std::min(r.min_eig, lo);
    r.max_eig = std::max(r.max_eig, hi);
    if (lo < alpha || std::max(std::abs(lo), std::abs(hi)) > beta) ++r.failing_points;
  }
  r.pass = r.failing_points == 0;
  return r;
}

/// Positive rational scale factor p/q in lowest terms.
struct Rational {
  long p = 1;
  long q = 1;

  double value() const { return static_cast<double>(p) / static_cast<double>(q); }
  bool operator==(const Rational&) const = default;

  static Rational make(long p, long q) {
    if (p <= 0 || q <= 0) throw InvalidArgument("scale factor must be a positive rational");
    const long g = std::gcd(p, q);
    return {p / g, q / g};
  }

  /// Recovers p/q with q <= max_den from a double, or throws.
  static Rational from_double(double x, long max_den = 64) {
    if (!(x > 0.0) || !std::isfinite(x)) throw InvalidArgument("scale factor must be positive");
    for (long q = 1; q <= max_den; ++q) {
      const double pq = x * static_cast<double>(q);
      const double pr = std::round(pq);
      if (std::abs(pq - pr) <= 1e-12 * std::max(1.0, pq)) return make(static_cast<long>(pr), q);
    }
    throw InvalidArgument("scale factor is irrational or has too large a denominator");
  }

  /// Accepts "p/q" or a decimal.
  static Rational parse(const std::string& s) {
    const auto slash = s.find('/');
    try {
      if (slash == std::string::npos) return from_double(std::stod(s));
      return make(std::stol(s.substr(0, slash)), std::stol(s.substr(slash + 1)));
    } catch (const Error&) {
      throw;
    } catch (const std::exception&) {
      throw InvalidArgument("cannot parse scale factor '" + s + "'");
    }
  }

  std::string str() const { return q == 1 ? std::to_string(p) : std::to_string(p) + "/" + std::to_string(q); }
};

inline constexpr long max_resample_denominator = 64;
inline constexpr std::size_t max_refined_points = std::size_t{1} << 22;

/// Returns y -> g(t*y + offset) on the same grid.
///
/// Grid values are read as cell averages of a piecewise-constant function.
/// Each output cell takes the exact average of g over its image, computed on
/// the least common refinement (q*n points per axis for t = p/q). Indices wrap
/// periodically. `offset` is in units of the source period and must be a
/// multiple of 1/q. In 2D `offset1` shifts the second axis (default: same as offset).
template <typename T>
std::vector<T> resample_periodic(std::span<const T> g, const Grid& grid, Rational t,
                                 Rational offset = {0, 1}, std::optional<Rational> offset1 = std::nullopt) {
  if (g.size() != grid.size()) throw GridMismatch("resample: data does not match grid");
  if (t.p <= 0 || t.q <= 0) throw InvalidArgument("scale factor must be positive");
  if (t.q > max_resample_denominator) throw InvalidArgument("scale factor denominator unsupported");
  const long n = grid.n;
  const long refined = t.q * n;
  if (static_cast<std::size_t>(refined) > max_refined_points)
    throw InvalidArgument("resolution not refinable for this scale factor");
  // Offset in refined cells: p_off * q n / q_off.
  auto to_shift = [&](const Rational& o) {
    const long num = o.p * refined;
    if (o.p != 0 && num % o.q != 0) throw InvalidArgument("offset not representable on the refinement grid");
    return o.p == 0 ? 0L : num / o.q;
  };
  const long shift0 = to_shift(offset);
  const long shift1 = grid.dim == 2 ? to_shift(offset1.value_or(offset)) : 0L;
  if (t.p == 1 && t.q == 1 && shift0 == 0 && shift1 == 0) return {g.begin(), g.end()};

  auto source_index = [&](long refined_index, long shift) {
    long r = ((refined_index + shift) % refined + refined) % refined;
    return static_cast<int>(r / t.q);
  };
  std::vector<T> out(g.size());
  const double inv = 1.0 / static_cast<double>(t.p);
  if (grid.dim == 1) {
    for (long j = 0; j < n; ++j) {
      T acc{};
      for (long s = 0; s < t.p; ++s) acc += g[static_cast<std::size_t>(source_index(t.p * j + s, shift0))];
      out[static_cast<std::size_t>(j)] = acc * inv;
    }
  } else {
    for (long j0 = 0; j0 < n; ++j0)
      for (long j1 = 0; j1 < n; ++j1) {
        T acc{};
        for (long s0 = 0; s0 < t.p; ++s0) {
          const int i0 = source_index(t.p * j0 + s0, shift0);
          for (long s1 = 0; s1 < t.p; ++s1)
            acc += g[grid.linear(i0, source_index(t.p * j1 + s1, shift1))];
        }
        out[grid.linear(static_cast<int>(j0), static_cast<int>(j1))] = acc * (inv * inv);
      }
  }
  return out;
}

template <typename T>
std::vector<T> resample_periodic(const std::vector<T>& g, const Grid& grid, Rational t,
                                 Rational offset = {0, 1}, std::optional<Rational> offset1 = std::nullopt) {
  return resample_periodic(std::span<const T>(g), grid, t, offset, offset1);
}

}  // namespace bloch_homog

#endif  // BLOCH_HOMOG_MICROSTRUCTURE_HPP
