#ifndef BLOCH_HOMOG_TENSORS_HPP
#define BLOCH_HOMOG_TENSORS_HPP

#include <Eigen/Dense>

#include <string>
#include <vector>

#include "cell_solver.hpp"
#include "common.hpp"
#include "microstructure.hpp"

namespace bloch_homog {

enum class Provenance {
  Astar,
  Bstar,
  BsharpEnergy,
  BsharpFlux,
  BsharpPerturbation,
  BsharpTwoscaleT,
  BsharpTwoscaleS,
  HessianLambda1,
  HessianMu1,
  HessianNu1,
};

inline std::string to_string(Provenance p) {
  switch (p) {
    case Provenance::Astar: return "Astar";
    case Provenance::Bstar: return "Bstar";
    case Provenance::BsharpEnergy: return "Bsharp-energy";
    case Provenance::BsharpFlux: return "Bsharp-flux";
    case Provenance::BsharpPerturbation: return "Bsharp-perturbation";
    case Provenance::BsharpTwoscaleT: return "Bsharp-twoscale-t";
    case Provenance::BsharpTwoscaleS: return "Bsharp-twoscale-s";
    case Provenance::HessianLambda1: return "hessian-lambda1";
    case Provenance::HessianMu1: return "hessian-mu1";
    case Provenance::HessianNu1: return "hessian-nu1";
  }
  return "unknown";
}

/// N x N effective tensor. `asymmetry` is max |M - M^T| before symmetrization.
struct HomogTensor {
  Eigen::MatrixXd matrix;
  Provenance provenance = Provenance::Astar;
  int n = 0;
  double tol = 0.0;
  double asymmetry = 0.0;

  int dim() const { return static_cast<int>(matrix.rows()); }
  double operator()(int i, int j) const { return matrix(i, j); }
};

inline HomogTensor make_tensor(const Eigen::MatrixXd& raw, Provenance prov, int n, double tol) {
  HomogTensor t;
  t.asymmetry = (raw - raw.transpose()).cwiseAbs().maxCoeff();
  t.matrix = 0.5 * (raw + raw.transpose());
  t.provenance = prov;
  t.n = n;
  t.tol = tol;
  return t;
}

inline double min_eig_sym(const Eigen::MatrixXd& m) {
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(0.5 * (m + m.transpose()), Eigen::EigenvaluesOnly);
  return es.eigenvalues().minCoeff();
}

using Components = std::vector<std::vector<double>>;

namespace detail {

inline Components quad_components(const CoefficientField& f, const CorrectorSet& set) {
  if (f.grid() != set.grid) throw GridMismatch("field and correctors live on different grids");
  return f.interpolated(set.quad_grid.n);
}

// Shifted gradients (grad w_k + e_k) of a set, or plain gradients.
inline std::vector<std::vector<RealField>> gradients(const CorrectorSet& set, bool shifted) {
  std::vector<std::vector<RealField>> out;
  for (int k = 0; k < set.dim(); ++k) {
    auto g = set[k].gradient;
    if (shifted)
      for (auto& x : g[static_cast<std::size_t>(k)]) x += 1.0;
    out.push_back(std::move(g));
  }
  return out;
}

// mean_q C(q) G2_j(q) . G1_k(q) for all (j,k).
inline Eigen::MatrixXd energy_matrix(const Components& coeff,
                                     const std::vector<std::vector<RealField>>& g1,
                                     const std::vector<std::vector<RealField>>& g2) {
  const int dim = static_cast<int>(g1.size());
  const std::size_t npts = g1[0][0].size();
  Eigen::MatrixXd m(dim, dim);
  for (int j = 0; j < dim; ++j)
    for (int k = 0; k < dim; ++k) {
      double s = 0.0;
      for (int i = 0; i < dim; ++i)
        for (int l = 0; l < dim; ++l) {
          const auto& c = coeff[static_cast<std::size_t>(i * dim + l)];
          const auto& a = g2[static_cast<std::size_t>(j)][static_cast<std::size_t>(i)];
          const auto& b = g1[static_cast<std::size_t>(k)][static_cast<std::size_t>(l)];
          for (std::size_t q = 0; q < npts; ++q) s += c[q] * a[q] * b[q];
        }
      m(j, k) = s / static_cast<double>(npts);
    }
  return m;
}

}  // namespace detail

/// a*_kl = int_Y A (grad chi_k + e_k) . (grad chi_l + e_l). With B and its own
/// correctors this is B*.
inline HomogTensor assemble_homogenized(const CoefficientField& field, const CorrectorSet& correctors,
                                        Provenance prov = Provenance::Astar) {
  const auto c = detail::quad_components(field, correctors);
  const auto g = detail::gradients(correctors, true);
  return make_tensor(detail::energy_matrix(c, g, g), prov, field.n(), correctors.tol);
}

/// b#_jk = int_Y B (grad chi_k + e_k) . (grad chi_j + e_j) with chi the A-correctors.
inline HomogTensor assemble_bsharp_energy(const CoefficientField& fieldB, const CorrectorSet& chi) {
  const auto c = detail::quad_components(fieldB, chi);
  const auto g = detail::gradients(chi, true);
  return make_tensor(detail::energy_matrix(c, g, g), Provenance::BsharpEnergy, fieldB.n(), chi.tol);
}

struct BsharpFlux {
  HomogTensor tensor;
  /// Column k is the cell average of A grad psi_k - B(grad chi_k + e_k).
  Eigen::MatrixXd flux_average;
};

/// B# e_k = int_Y [B(grad chi_k + e_k) - A grad psi_k].
inline BsharpFlux assemble_bsharp_flux(const CoefficientField& fieldA, const CoefficientField& fieldB,
                                       const CorrectorSet& chi, const CorrectorSet& psi) {
  if (!chi.compatible(psi)) throw GridMismatch("chi and psi were solved on different grids");
  for (const auto& f : psi.fields)
    if (f.residual > psi.tol * (1.0 + 1e-9)) throw ConvergenceError("psi residual above tolerance (stale solve)");
  const auto ca = detail::quad_components(fieldA, chi);
  const auto cb = detail::quad_components(fieldB, chi);
  const int dim = chi.dim();
  const std::size_t npts = chi.quad_grid.size();
  Eigen::MatrixXd varsigma(dim, dim);
  for (int k = 0; k < dim; ++k)
    for (int j = 0; j < dim; ++j) {
      double s = 0.0;
      for (int l = 0; l < dim; ++l) {
        const auto& a = ca[static_cast<std::size_t>(j * dim + l)];
        const auto& b = cb[static_cast<std::size_t>(j * dim + l)];
        const auto& gp = psi[k].gradient[static_cast<std::size_t>(l)];
        for (std::size_t q = 0; q < npts; ++q)
          s += a[q] * gp[q] - b[q] * chi.shifted_gradient(k, l, q);
      }
      varsigma(j, k) = s / static_cast<double>(npts);
    }
  return {make_tensor(-varsigma, Provenance::BsharpFlux, fieldA.n(), chi.tol), varsigma};
}

/// b#_jk = b*_jk + int_Y B grad(chi_k - zeta_k) . grad(chi_j - zeta_j).
inline HomogTensor assemble_bsharp_perturbation(const CoefficientField& fieldB, const CorrectorSet& chi,
                                                const CorrectorSet& zeta, const HomogTensor& bstar) {
  if (!chi.compatible(zeta)) throw GridMismatch("chi and zeta were solved on different grids");
  const auto c = detail::quad_components(fieldB, chi);
  auto d = detail::gradients(chi, false);
  const auto z = detail::gradients(zeta, false);
  for (std::size_t k = 0; k < d.size(); ++k)
    for (std::size_t i = 0; i < d[k].size(); ++i)
      for (std::size_t q = 0; q < d[k][i].size(); ++q) d[k][i][q] -= z[k][i][q];
  const Eigen::MatrixXd m = bstar.matrix + detail::energy_matrix(c, d, d);
  return make_tensor(m, Provenance::BsharpPerturbation, fieldB.n(), chi.tol);
}

enum class TwoscaleMode { t_ratio, s_ratio };

/// Two-scale B#: A is Y1-periodic, B is Y2-periodic, with eps1 = t eps2
/// (t-mode: B sampled as b(t y)) or eps2 = s eps1 (s-mode: gradients of chi
/// composed as grad chi(s y)). For factor p/q the average runs over the common
/// period q, realized as q^N shifted resamplings.
inline HomogTensor assemble_bsharp_twoscale(const CoefficientField& fieldA, const CoefficientField& fieldB,
                                            const CorrectorSet& chi, TwoscaleMode mode, Rational factor) {
  if (fieldA.grid() != fieldB.grid()) throw GridMismatch("twoscale: A and B must share a grid");
  const auto cb = detail::quad_components(fieldB, chi);
  const Grid qg = chi.quad_grid;
  const int dim = chi.dim();
  Eigen::MatrixXd acc = Eigen::MatrixXd::Zero(dim, dim);
  const long shifts = dim == 2 ? factor.q * factor.q : factor.q;
  for (long r = 0; r < shifts; ++r) {
    const Rational offset{(factor.p * (r % factor.q)) % factor.q, factor.q};
    const Rational offset1{(factor.p * (r / factor.q)) % factor.q, factor.q};
    if (mode == TwoscaleMode::t_ratio) {
      Components shifted;
      for (const auto& c : cb) shifted.push_back(resample_periodic(c, qg, factor, offset, offset1));
      const auto g = detail::gradients(chi, true);
      acc += detail::energy_matrix(shifted, g, g);
    } else {
      std::vector<std::vector<RealField>> g;
      for (int k = 0; k < dim; ++k) {
        std::vector<RealField> gk;
        for (int i = 0; i < dim; ++i) {
          auto v = resample_periodic(chi[k].gradient[static_cast<std::size_t>(i)], qg, factor, offset, offset1);
          if (i == k)
            for (auto& x : v) x += 1.0;
          gk.push_back(std::move(v));
        }
        g.push_back(std::move(gk));
      }
      acc += detail::energy_matrix(cb, g, g);
    }
  }
  acc /= static_cast<double>(shifts);
  return make_tensor(acc,
                     mode == TwoscaleMode::t_ratio ? Provenance::BsharpTwoscaleT : Provenance::BsharpTwoscaleS,
                     fieldA.n(), chi.tol);
}

/// Builds both fields from their presets, solves the A-correctors and assembles.
inline HomogTensor assemble_bsharp_twoscale(const PresetSpec& specA, const PresetSpec& specB, int dim,
                                            TwoscaleMode mode, Rational factor, int resolution,
                                            const SolverConfig& cfg) {
  const auto a = build_field(specA, dim, resolution);
  const auto b = build_field(specB, dim, resolution);
  const auto chi = solve_correctors(a, cfg);
  return assemble_bsharp_twoscale(a, b, chi, mode, factor);
}

struct BoundLink {
  std::string name;
  double min_eig = 0.0;
  bool pass = false;
};

/// Chain b1 I <= inv(mean B^-1) <= B* <= B# <= (b2/a1) A* <= (b2/a1) mean A <= b2 (a2/a1) I.
struct BoundsReport {
  Eigen::MatrixXd b_lower;
  Eigen::MatrixXd a_mean;
  std::vector<BoundLink> links;
  bool pass = false;
};

inline constexpr double psd_tolerance = 1e-8;

inline BoundsReport check_bounds(const CoefficientField& fieldA, const CoefficientField& fieldB,
                                 const HomogTensor& astar, const HomogTensor& bstar,
                                 const HomogTensor& bsharp, double a1, double a2, double b1, double b2) {
  const int dim = fieldA.dim();
  BoundsReport r;
  const Eigen::MatrixXd minv = fieldB.mean_inverse();
  if (std::abs(minv.determinant()) < 1e-300) throw InvalidArgument("mean of B^-1 is singular");
  r.b_lower = minv.inverse();
  r.a_mean = fieldA.mean();
  const Eigen::MatrixXd id = Eigen::MatrixXd::Identity(dim, dim);
  const double c = b2 / a1;
  const std::vector<std::pair<std::string, Eigen::MatrixXd>> chain = {
      {"b1*I", b1 * id},
      {"Bunder", r.b_lower},
      {"Bstar", bstar.matrix},
      {"Bsharp", bsharp.matrix},
      {"(b2/a1)*Astar", c * astar.matrix},
      {"(b2/a1)*Abar", c * r.a_mean},
      {"b2*(a2/a1)*I", b2 * (a2 / a1) * id},
  };
  r.pass = true;
  for (std::size_t i = 0; i + 1 < chain.size(); ++i) {
    BoundLink link;
    link.name = chain[i].first + " <= " + chain[i + 1].first;
    link.min_eig = min_eig_sym(chain[i + 1].second - chain[i].second);
    link.pass = link.min_eig >= -psd_tolerance;
    r.pass = r.pass && link.pass;
    r.links.push_back(std::move(link));
  }
  return r;
}

/// Gradient of sum_k lambda_k w_k.
inline std::vector<RealField> combine_gradients(const CorrectorSet& set, const Eigen::VectorXd& lambda) {
  std::vector<RealField> g(static_cast<std::size_t>(set.dim()), RealField(set.quad_grid.size(), 0.0));
  for (int k = 0; k < set.dim(); ++k)
    for (int i = 0; i < set.dim(); ++i)
      for (std::size_t q = 0; q < g[static_cast<std::size_t>(i)].size(); ++q)
        g[static_cast<std::size_t>(i)][q] += lambda(k) * set[k].gradient[static_cast<std::size_t>(i)][q];
  return g;
}

struct LagrangianValue {
  double value = 0.0;
  double cross_term = 0.0;
};

/// L(w1, w2) = b(w1 + lambda.y, w1 + lambda.y) + a(w1 + lambda.y, w2), given
/// the gradients of w1 and w2 on the quadrature grid.
inline LagrangianValue lagrangian_value(const Components& coeffA, const Components& coeffB,
                                        const Eigen::VectorXd& lambda, const std::vector<RealField>& grad_w1,
                                        const std::vector<RealField>& grad_w2) {
  const int dim = static_cast<int>(grad_w1.size());
  const std::size_t npts = grad_w1[0].size();
  if (grad_w2.size() != grad_w1.size() || grad_w2[0].size() != npts || coeffA[0].size() != npts ||
      coeffB[0].size() != npts)
    throw GridMismatch("lagrangian: inputs live on different grids");
  double bb = 0.0, ab = 0.0;
  for (std::size_t q = 0; q < npts; ++q)
    for (int i = 0; i < dim; ++i)
      for (int l = 0; l < dim; ++l) {
        const auto il = static_cast<std::size_t>(i * dim + l);
        const double gi = grad_w1[static_cast<std::size_t>(i)][q] + lambda(i);
        const double gl = grad_w1[static_cast<std::size_t>(l)][q] + lambda(l);
        bb += coeffB[il][q] * gl * gi;
        ab += coeffA[il][q] * gl * grad_w2[static_cast<std::size_t>(i)][q];
      }
  bb /= static_cast<double>(npts);
  ab /= static_cast<double>(npts);
  return {bb + ab, ab};
}

/// Evaluates the Lagrangian at (chi_lambda, psi_lambda) built from solved correctors.
inline LagrangianValue lagrangian_value(const CoefficientField& fieldA, const CoefficientField& fieldB,
                                        const Eigen::VectorXd& lambda, const CorrectorSet& chi,
                                        const CorrectorSet& psi) {
  if (!chi.compatible(psi)) throw GridMismatch("chi and psi were solved on different grids");
  return lagrangian_value(detail::quad_components(fieldA, chi), detail::quad_components(fieldB, chi), lambda,
                          combine_gradients(chi, lambda), combine_gradients(psi, lambda));
}

/// int_Y C (grad w + lambda) . (grad w + lambda) for a trial gradient field.
inline double cell_energy(const Components& coeff, const Eigen::VectorXd& lambda,
                          const std::vector<RealField>& grad_w) {
  const int dim = static_cast<int>(grad_w.size());
  const std::size_t npts = grad_w[0].size();
  double s = 0.0;
  for (std::size_t q = 0; q < npts; ++q)
    for (int i = 0; i < dim; ++i)
      for (int l = 0; l < dim; ++l)
        s += coeff[static_cast<std::size_t>(i * dim + l)][q] * (grad_w[static_cast<std::size_t>(i)][q] + lambda(i)) *
             (grad_w[static_cast<std::size_t>(l)][q] + lambda(l));
  return s / static_cast<double>(npts);
}

}  // namespace bloch_homog

#endif  // BLOCH_HOMOG_TENSORS_HPP
