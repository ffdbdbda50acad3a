#include <gtest/gtest.h>

#include <bloch_homog/bloch.hpp>

#include <random>

#include "oracles.hpp"

using namespace bloch_homog;

namespace {

constexpr double pi = std::numbers::pi;

SolverConfig tight() {
  SolverConfig c;
  c.tol = 1e-12;
  return c;
}

CoefficientField smooth_1d(int n) {
  return build_field(PresetSpec::trig(2.0, {TrigTerm{1.0, {TrigFn::sin, TrigFn::cos}, {1, 0}}}), 1, n);
}

CoefficientField smooth_2d(int n) {
  return build_field(PresetSpec::trig(2.0, {TrigTerm{1.0, {TrigFn::sin, TrigFn::sin}, {1, 1}}}), 2, n);
}

}  // namespace

TEST(Mode, IdentityDispersion) {
  const auto f = build_field(PresetSpec::constant(1.0), 2, 16);
  BlochSolver s(f, tight());
  for (const Vec eta : {Vec{0.3, 0.0}, Vec{-0.5, 1.2}, Vec{2.0, -1.0}}) {
    const auto m = s.mode(eta);
    EXPECT_NEAR(m.eigenvalue, eta[0] * eta[0] + eta[1] * eta[1], 1e-12);
    for (const auto& v : m.vector) EXPECT_NEAR(std::abs(v - cplx{1.0, 0.0}), 0.0, 1e-10);
  }
}

TEST(Mode, MatchesDenseGalerkinOracle) {
  const int n = 32;
  const auto f = smooth_1d(n);
  BlochSolver s(f, tight());
  for (double eta : {0.0, 0.25, 1.0, 2.5}) {
    const auto want = oracle::bloch_1d([](double y) { return 2.0 + std::sin(2 * pi * y); }, n, eta);
    EXPECT_NEAR(s.mode(Vec{eta, 0.0}).eigenvalue, want(0), 1e-10 * std::max(1.0, want(0)));
  }
}

TEST(Mode, SymmetricAndNonnegative) {
  const auto f = smooth_2d(32);
  BlochSolver s(f, tight());
  for (const Vec eta : {Vec{0.4, 0.1}, Vec{1.5, -0.7}}) {
    const double l1 = s.mode(eta).eigenvalue, l2 = s.mode(Vec{-eta[0], -eta[1]}).eigenvalue;
    EXPECT_NEAR(l1, l2, 1e-10);
    EXPECT_GE(l1, 0.0);
  }
}

TEST(Mode, PhaseConvention) {
  const auto f = smooth_2d(32);
  const auto m = smallest_bloch_mode(f, Vec{0.7, 0.2}, tight());
  cplx mean{};
  double nrm = 0.0;
  for (const auto& v : m.vector) {
    mean += v;
    nrm += std::norm(v);
  }
  mean /= static_cast<double>(m.vector.size());
  EXPECT_NEAR(mean.imag(), 0.0, 1e-12);
  EXPECT_GT(mean.real(), 0.0);
  EXPECT_NEAR(nrm / static_cast<double>(m.vector.size()), 1.0, 1e-12);
  EXPECT_LE(m.residual, 1e-8);
  ASSERT_TRUE(m.second_estimate.has_value());
  EXPECT_GT(*m.second_estimate, m.eigenvalue);
  EXPECT_FALSE(m.near_degenerate);
}

TEST(Mode, SharpLaminateAtHighResolution) {
  // The shifted solves bottom out near roundoff here rather than at tol.
  const auto f = build_field(PresetSpec::two_phase(PresetKind::laminate, 1, 4), 1, 512);
  const BlochSolver s(f, tight());
  const double eta = 1e-2;
  const auto m = s.mode({eta, 0.0});
  const double astar = assemble_homogenized(f, solve_correctors(f, tight())).matrix(0, 0);
  EXPECT_NEAR(m.eigenvalue / (eta * eta), astar, 1e-3 * astar);
  EXPECT_NEAR(s.mode({0.0, 0.0}).eigenvalue, 0.0, 1e-12);
}

TEST(Mode, RejectsEtaOutsideDualCell) {
  const auto f = smooth_1d(16);
  EXPECT_THROW(smallest_bloch_mode(f, Vec{4.0, 0.0}, tight()), InvalidArgument);
  SolverConfig fd = tight();
  fd.mode = Discretization::fd_harmonic;
  EXPECT_THROW(BlochSolver(f, fd), InvalidArgument);
}

TEST(Nu1, GroundStateAndIdentity) {
  const auto a = build_field(PresetSpec::constant(1.0), 2, 16);
  const auto b = build_field(PresetSpec::constant(2.5), 2, 16);
  const auto m0 = smallest_bloch_mode(a, Vec{0.0, 0.0}, tight());
  EXPECT_NEAR(nu1(b, m0), 0.0, 1e-14);
  const Vec eta{0.4, -0.3};
  EXPECT_NEAR(nu1(b, smallest_bloch_mode(a, eta, tight())), 2.5 * 0.25, 1e-12);
}

TEST(Nu1, SecondOrderExpansionIn1d) {
  const auto a = build_field(PresetSpec::two_phase(PresetKind::laminate, 1, 4, 0.5, 2.0), 1, 128);
  const auto b = build_field(PresetSpec::two_phase(PresetKind::laminate, 2, 1, 0.5, 2.0), 1, 128);
  const auto chi = solve_correctors(a, tight());
  const double bsharp = assemble_bsharp_energy(b, chi).matrix(0, 0);
  const double eta = 0.01;
  EXPECT_NEAR(nu1(b, smallest_bloch_mode(a, Vec{eta, 0.0}, tight())) / (eta * eta), bsharp, 0.02 * bsharp);
  EXPECT_NEAR(bsharp, 2.64, 0.1);
}

TEST(Hessian, QuadraticIsExact) {
  const EtaMap f = [](const Vec& e) { return e[0] * e[0] + e[1] * e[1] + 0.5 * e[0] * e[1]; };
  const auto h = hessian_at_zero(f, 2, 1e-3);
  EXPECT_NEAR(h.matrix(0, 0), 1.0, 1e-9);
  EXPECT_NEAR(h.matrix(1, 1), 1.0, 1e-9);
  EXPECT_NEAR(h.matrix(0, 1), 0.25, 1e-9);
  EXPECT_EQ(hessian_stencil(2, 1e-3).size(), 8u);
  EXPECT_EQ(hessian_stencil(1, 1e-3).size(), 2u);
  EXPECT_THROW(hessian_at_zero(f, 2, 0.0), InvalidArgument);
}

TEST(Hessian, ConstantFieldLambda) {
  const auto f = build_field(PresetSpec::constant(2.0), 2, 8);
  BlochSolver s(f, tight());
  const auto h = hessian_at_zero([&](const Vec& e) { return s.mode(e).eigenvalue; }, 2, 1e-3);
  EXPECT_LE((h.matrix - 2.0 * Eigen::Matrix2d::Identity()).norm(), 1e-8);
}

TEST(Spectral, HessiansReproduceAssembledTensors) {
  const auto a = smooth_2d(32);
  const auto b = build_field(PresetSpec::trig(3.0, {TrigTerm{1.0, {TrigFn::cos, TrigFn::cos}, {0, 1}}}), 2, 32);
  const auto chi = solve_correctors(a, tight());
  const auto zeta = solve_correctors(b, tight(), CorrectorKind::zeta);
  const auto sr = spectral_representation(a, b, tight(), 1e-3);
  const auto astar = assemble_homogenized(a, chi).matrix;
  const auto bstar = assemble_homogenized(b, zeta, Provenance::Bstar).matrix;
  const auto bsharp = assemble_bsharp_energy(b, chi).matrix;
  EXPECT_LE((sr.astar.matrix - astar).norm() / astar.norm(), 1e-3);
  EXPECT_LE((sr.bstar.matrix - bstar).norm() / bstar.norm(), 1e-3);
  EXPECT_LE((sr.bsharp.matrix - bsharp).norm() / bsharp.norm(), 1e-3);
}

TEST(Spectral, GroundStateDerivatives) {
  const auto a = smooth_2d(32);
  const auto b = build_field(PresetSpec::trig(3.0, {TrigTerm{1.0, {TrigFn::cos, TrigFn::cos}, {0, 1}}}), 2, 32);
  BlochSolver s(a, tight());
  const ShiftedOperator opB(b, false);
  const auto m0 = s.mode(Vec{0.0, 0.0});
  EXPECT_LE(std::abs(m0.eigenvalue), 1e-12);
  EXPECT_LE(std::abs(nu1(opB, m0)), 1e-12);
  const EtaMap lam = [&](const Vec& e) { return s.mode(e).eigenvalue; };
  const EtaMap nu = [&](const Vec& e) { return nu1(opB, s.mode(e)); };
  EXPECT_LE(gradient_at_zero(lam, 2, 1e-3).cwiseAbs().maxCoeff(), 1e-8);
  EXPECT_LE(gradient_at_zero(nu, 2, 1e-3).cwiseAbs().maxCoeff(), 1e-8);
  const auto chi = solve_correctors(a, tight());
  for (int k = 0; k < 2; ++k) {
    const double e1 = eigenvector_derivative_error(s, chi[k], k, 1e-2);
    const double e2 = eigenvector_derivative_error(s, chi[k], k, 5e-3);
    EXPECT_GE(e1 / e2, 1.5);
    EXPECT_LE(e1 / e2, 2.5);
  }
}

TEST(Transform, IdentityFieldIsFourier) {
  const auto f = build_field(PresetSpec::constant(1.0), 1, 8);
  const int M = 4;
  // g = 1: only band 1 at xi = 0 carries weight.
  const auto one = sample_global(f.grid(), M, [](const Vec&) { return cplx{1.0, 0.0}; });
  const auto d = bloch_decompose(f, one, M);
  for (std::size_t i = 0; i < d.xi.size(); ++i)
    for (Eigen::Index m = 0; m < d.coefficients[i].size(); ++m) {
      const double want = (d.xi[i][0] == 0.0 && m == 0) ? 1.0 : 0.0;
      EXPECT_NEAR(std::abs(d.coefficients[i](m)), want, 1e-12);
    }
  // A plane wave exp(2 pi i k x) lands in the band whose wave number unfolds to k.
  const int k = 5;
  const auto w = sample_global(f.grid(), M, [&](const Vec& x) { return std::polar(1.0, 2 * pi * k * x[0]); });
  const auto dw = bloch_decompose(f, w, M);
  double total = 0.0;
  for (const auto& c : dw.coefficients) total += c.cwiseAbs().maxCoeff();
  EXPECT_NEAR(total, 1.0, 1e-12);
}

TEST(Transform, ParsevalAndInverse) {
  const auto f = smooth_1d(16);
  const int M = 8;
  std::mt19937 rng(11);
  std::normal_distribution<double> nd;
  ComplexField g(global_grid(f.grid(), M).size());
  for (auto& x : g) {
    const double re = nd(rng);
    x = cplx{re, nd(rng)};
  }
  const auto d = bloch_decompose(f, g, M);
  EXPECT_LE(d.parseval_residual, 1e-10);
  const auto back = bloch_reconstruct(d);
  double err = 0.0;
  for (std::size_t i = 0; i < g.size(); ++i) err = std::max(err, std::abs(back[i] - g[i]));
  EXPECT_LE(err, 1e-10);
}

TEST(Transform, TwoDimensionalParseval) {
  const auto f = smooth_2d(8);
  const int M = 2;
  std::mt19937 rng(2);
  std::normal_distribution<double> nd;
  ComplexField g(global_grid(f.grid(), M).size());
  for (auto& x : g) x = cplx{nd(rng), 0.0};
  const auto d = bloch_decompose(f, g, M);
  EXPECT_LE(d.parseval_residual, 1e-10);
  const auto back = bloch_reconstruct(d);
  for (std::size_t i = 0; i < g.size(); ++i) EXPECT_NEAR(std::abs(back[i] - g[i]), 0.0, 1e-10);
}

TEST(Transform, SingleCoefficientMatchesFullDecomposition) {
  const auto f = smooth_1d(16);
  const int M = 4;
  const auto g = sample_global(f.grid(), M, [](const Vec& x) { return cplx{std::cos(2 * pi * x[0]), x[0]}; });
  const auto d = bloch_decompose(f, g, M);
  for (std::size_t i = 0; i < d.xi.size(); ++i)
    for (int m : {0, 3})
      EXPECT_NEAR(std::abs(bloch_coefficient(f, g, M, m, d.xi[i]) - d.coefficients[i](m)), 0.0, 1e-13);
  EXPECT_THROW(bloch_coefficient(f, g, M, 16, d.xi[0]), InvalidArgument);
  EXPECT_THROW(bloch_coefficient(f, g, M, 0, Vec{0.5, 0.0}), InvalidArgument);
}

TEST(Transform, FirstBandDominance) {
  const auto id = build_field(PresetSpec::constant(1.0), 1, 16);
  const auto sine = [](const Vec& x) { return cplx{std::sin(2 * pi * x[0]), 0.0}; };
  for (const auto& r : first_band_dominance(id, sine, {8, 16}).rows) EXPECT_LE(r.error, 1e-12);
  const auto t = first_band_dominance(smooth_1d(16), sine, {8, 16, 32, 64});
  EXPECT_GE(t.slope, 0.9);
  for (std::size_t i = 1; i < t.rows.size(); ++i) EXPECT_LT(t.rows[i].error, t.rows[i - 1].error);
}

TEST(Transform, HigherBandFunctionDoesNotDecay) {
  // A band-2 Bloch wave at every xi has no band-1 content.
  const auto f = smooth_1d(16);
  const int M = 8;
  ShiftedOperator op(f, false);
  const Grid global = global_grid(f.grid(), M);
  ComplexField g(global.size(), cplx{});
  for (int k = -M / 2; k < M - M / 2; ++k) {
    const double xi = 2 * pi * k;
    const auto basis = dense_bloch_basis(op, Vec{xi / M, 0.0});
    for (std::size_t J = 0; J < global.size(); ++J)
      g[J] += basis.vectors(static_cast<Eigen::Index>(J % 16), 1) * std::polar(1.0, xi * global.coord(static_cast<int>(J)));
  }
  const auto d = bloch_decompose(f, g, M);
  const auto first = bloch_reconstruct(d, 1);
  double rem = 0.0, nrm = 0.0;
  for (std::size_t i = 0; i < g.size(); ++i) {
    rem += std::norm(g[i] - first[i]);
    nrm += std::norm(g[i]);
  }
  EXPECT_NEAR(std::sqrt(rem / nrm), 1.0, 1e-10);
}

TEST(Transform, BlochVersusFourier) {
  const auto bump = [](const Vec& x) { return cplx{std::pow(std::sin(pi * x[0]), 2), 0.0}; };
  const auto id = build_field(PresetSpec::constant(1.0), 1, 16);
  for (const auto& r : bloch_vs_fourier(id, bump, {8, 16}).rows) EXPECT_LE(r.error, 1e-12);
  const auto zero = bloch_vs_fourier(smooth_1d(16), [](const Vec&) { return cplx{}; }, {8, 16});
  for (const auto& r : zero.rows) EXPECT_EQ(r.error, 0.0);
  const auto t = bloch_vs_fourier(smooth_1d(16), bump, {8, 16, 32, 64});
  EXPECT_GE(t.slope, 0.9);
  EXPECT_THROW(bloch_vs_fourier(id, bump, {4}, 3), InvalidArgument);
}
