#include <gtest/gtest.h>

#include <bloch_homog/homogenize1d.hpp>
#include <bloch_homog/tensors.hpp>

#include "oracles.hpp"

using namespace bloch_homog;

namespace {

double step(double y, double lo, double hi) { return y - std::floor(y) < 0.5 ? lo : hi; }

const PiecewiseProfile a14 = PiecewiseProfile::two_phase(1, 4);
const PiecewiseProfile b21 = PiecewiseProfile::two_phase(2, 1);

}  // namespace

TEST(Limits, TwoPhaseValues) {
  const auto l = analytic_1d_limits(a14, b21);
  EXPECT_NEAR(l.astar, 1.6, 1e-14);
  EXPECT_NEAR(l.bstar, 4.0 / 3.0, 1e-14);
  EXPECT_NEAR(l.bsharp, 2.64, 1e-14);
  EXPECT_NEAR(analytic_1d_limits(a14, b21, Rational{2, 1}).bsharp, 2.04, 1e-14);
}

TEST(Limits, AgreeWithFineQuadrature) {
  const oracle::Fn1 a = [](double y) { return step(y, 1, 4); };
  const oracle::Fn1 b = [](double y) { return step(y, 2, 1); };
  for (const Rational t : {Rational{3, 2}, Rational{2, 3}, Rational{5, 4}}) {
    const double want = oracle::bsharp_1d_twoscale(a, b, t.p, t.q, 3 * 5 << 12);
    EXPECT_NEAR(analytic_1d_limits(a14, b21, t).bsharp, want, 1e-12);
  }
}

TEST(Limits, ConstantA) {
  const PiecewiseProfile b{{Rational{0, 1}, Rational{1, 4}, Rational{1, 2}}, {1.0, 2.0, 5.0}};
  const auto l = analytic_1d_limits(PiecewiseProfile::constant(2.0), b);
  EXPECT_NEAR(l.astar, 2.0, 1e-15);
  EXPECT_NEAR(l.bstar, 1.0 / (0.25 / 1 + 0.25 / 2 + 0.5 / 5), 1e-14);
  EXPECT_NEAR(l.bsharp, 0.25 * 1 + 0.25 * 2 + 0.5 * 5, 1e-14);
}

TEST(Limits, AgreeWithCellSolverPath) {
  SolverConfig fd;
  fd.tol = 1e-12;
  fd.mode = Discretization::fd_harmonic;
  const auto A = profile_field(a14, 512);
  const auto B = profile_field(b21, 512);
  const auto chi = solve_correctors(A, fd);
  const auto zeta = solve_correctors(B, fd, CorrectorKind::zeta);
  const auto l = analytic_1d_limits(a14, b21);
  EXPECT_NEAR(assemble_homogenized(A, chi).matrix(0, 0), l.astar, 1e-10);
  EXPECT_NEAR(assemble_homogenized(B, zeta, Provenance::Bstar).matrix(0, 0), l.bstar, 1e-10);
  EXPECT_NEAR(assemble_bsharp_energy(B, chi).matrix(0, 0), l.bsharp, 1e-10);
  EXPECT_THROW(profile_field(PiecewiseProfile::two_phase(1, 2, Rational{1, 3}), 512), InvalidArgument);
}

TEST(Profile, Validation) {
  EXPECT_THROW((PiecewiseProfile{{Rational{1, 4}}, {1.0}}.validate()), InvalidArgument);
  EXPECT_THROW((PiecewiseProfile{{Rational{0, 1}, Rational{1, 2}}, {1.0}}.validate()), InvalidArgument);
  EXPECT_THROW((PiecewiseProfile{{Rational{0, 1}}, {-1.0}}.validate()), InvalidArgument);
  EXPECT_DOUBLE_EQ(a14(0.25), 1.0);
  EXPECT_DOUBLE_EQ(a14(1.75), 4.0);
}

TEST(State, ConstantCoefficientClosedForm) {
  EpsilonProblem p{PiecewiseProfile::constant(1), PiecewiseProfile::constant(1), Rational{1, 1}, 4, 32};
  const auto s = solve_state_1d(p);
  const double h = p.h();
  for (std::size_t i = 0; i < s.u.size(); ++i) {
    const double x = static_cast<double>(i) * h;
    EXPECT_NEAR(s.u[i], 0.5 * x * (1 - x), 1e-12);
  }
  for (std::size_t i = 0; i < s.sigma.size(); ++i) EXPECT_NEAR(s.sigma[i], 0.5 - (i + 0.5) * h, 1e-12);
}

TEST(State, TwoPhaseFluxIsAffine) {
  EpsilonProblem p{a14, b21, Rational{1, 1}, 4, 32};
  const auto s = solve_state_1d(p);
  // sigma = c - x with c = int(x/a)/int(1/a).
  const oracle::Fn1 a = [](double x) { return step(4 * x, 1, 4); };
  const double c = oracle::mean([&](double x) { return x / a(x); }, 1 << 14) /
                   oracle::mean([&](double x) { return 1 / a(x); }, 1 << 14);
  for (std::size_t i = 0; i < s.sigma.size(); ++i) EXPECT_NEAR(s.sigma[i], c - (i + 0.5) * p.h(), 1e-10);
}

TEST(State, ZeroSource) {
  EpsilonProblem p{a14, b21, Rational{1, 1}, 4, 32, [](double) { return 0.0; }};
  for (double u : solve_state_1d(p).u) EXPECT_EQ(u, 0.0);
  const auto ad = solve_adjoint_1d(p, solve_state_1d(p));
  for (double v : ad.p) EXPECT_EQ(v, 0.0);
  EXPECT_EQ(ad.flux, 0.0);
}

TEST(Adjoint, FluxIsConstant) {
  for (const Rational t : {Rational{1, 1}, Rational{2, 1}}) {
    EpsilonProblem p{a14, b21, t, 16, 32};
    const auto ad = solve_adjoint_1d(p, solve_state_1d(p));
    EXPECT_LE(ad.z_deviation, 1e-12);
    EXPECT_LE(ad.boundary_residual, 1e-12);
  }
}

TEST(Adjoint, ProportionalCoefficients) {
  // b = c a: a p' - c a u' is constant and both vanish at the ends, so p = c u.
  const PiecewiseProfile b = PiecewiseProfile::two_phase(3, 12);
  EpsilonProblem p{a14, b, Rational{1, 1}, 8, 32};
  const auto s = solve_state_1d(p);
  const auto ad = solve_adjoint_1d(p, s);
  for (std::size_t i = 0; i < s.u.size(); ++i) EXPECT_NEAR(ad.p[i], 3.0 * s.u[i], 1e-12);
  EXPECT_NEAR(ad.flux, 0.0, 1e-12);
}

TEST(Problem, Validation) {
  EXPECT_THROW((EpsilonProblem{a14, b21, Rational{1, 1}, 4, 16}.validate()), InvalidArgument);
  EXPECT_THROW((EpsilonProblem{PiecewiseProfile::two_phase(1, 4, Rational{1, 3}), b21, Rational{1, 1}, 4, 32}.validate()),
               InvalidArgument);
  EXPECT_THROW((EpsilonProblem{a14, b21, Rational{5, 1}, 4, 32}.validate()), InvalidArgument);
  EXPECT_NO_THROW((EpsilonProblem{a14, b21, Rational{1, 2}, 4, 32}.validate()));
  EpsilonProblem p{a14, b21, Rational{1, 1}, 4, 32};
  EXPECT_THROW(solve_adjoint_1d(p, StateSolution{std::vector<double>(3), {}}), GridMismatch);
}

TEST(Convergence, NoOscillationIsExact) {
  const auto t = flux_convergence(PiecewiseProfile::constant(1), PiecewiseProfile::constant(1), Rational{1, 1},
                                  {8, 16, 32, 64});
  for (const auto& r : t.rows) {
    EXPECT_LE(r.err_u, 1e-10);
    EXPECT_LE(r.err_sigma, 1e-10);
    EXPECT_LE(r.err_z, 1e-10);
  }
}

TEST(Convergence, FluxRatesAndNegativeControl) {
  const auto t = flux_convergence(a14, b21, Rational{1, 1}, {8, 16, 32, 64, 128});
  EXPECT_GE(t.slope_sigma, 0.9);
  EXPECT_GE(t.slope_z, 0.9);
  const auto& last = t.rows.back();
  EXPECT_GE(last.err_z_control, 10.0 * last.err_z);
  // The control error stays bounded away from zero.
  EXPECT_NEAR(last.err_z_control / t.rows.front().err_z_control, 1.0, 0.15);
  for (const auto& r : t.rows) EXPECT_LE(r.z_deviation, 1e-12);
}

TEST(Convergence, EnergyIntegralConverges) {
  const auto t = flux_convergence(a14, b21, Rational{2, 1}, {8, 16, 32, 64});
  for (std::size_t i = 1; i < t.rows.size(); ++i) EXPECT_LT(t.rows[i].energy_error, t.rows[i - 1].energy_error);
  EXPECT_GT(t.slope_energy, 0.9);
  EXPECT_NEAR(t.limits.bsharp, 2.04, 1e-14);
}

TEST(Convergence, CsvLayout) {
  const auto t = flux_convergence(a14, b21, Rational{1, 1}, {8, 16, 32, 64});
  const std::string path = ::testing::TempDir() + "convergence.csv";
  t.write_csv(path);
  std::ifstream in(path);
  std::string line;
  int count = 0;
  std::getline(in, line);
  EXPECT_EQ(line, "eps,errU,errSigma,errZ");
  while (std::getline(in, line)) ++count;
  EXPECT_EQ(count, 4);
}
