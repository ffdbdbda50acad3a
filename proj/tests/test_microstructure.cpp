#include <gtest/gtest.h>

#include <bloch_homog/microstructure.hpp>

#include <cstdio>
#include <fstream>
#include <random>

using namespace bloch_homog;

namespace {

std::size_t index_of(const Grid& g, double y0, double y1 = 0.0) {
  const int i = static_cast<int>(y0 * g.n);
  const int j = static_cast<int>(y1 * g.n);
  return g.dim == 1 ? g.linear(i) : g.linear(i, j);
}

}  // namespace

TEST(Presets, ConstantIsScaledIdentity) {
  const auto f = build_field(PresetSpec::constant(1.0), 2, 8);
  for (std::size_t p = 0; p < f.grid().size(); ++p) EXPECT_TRUE(f.at(p).isApprox(Eigen::Matrix2d::Identity()));
}

TEST(Presets, LaminatePhasesAlongFirstAxis) {
  const auto f = build_field(PresetSpec::two_phase(PresetKind::laminate, 1, 4), 2, 8);
  EXPECT_DOUBLE_EQ(f(index_of(f.grid(), 0.0625, 0.0625), 0, 0), 1.0);
  EXPECT_DOUBLE_EQ(f(index_of(f.grid(), 0.5625, 0.0625), 0, 0), 4.0);
  EXPECT_DOUBLE_EQ(f(index_of(f.grid(), 0.5625, 0.9), 1, 1), 4.0);
  EXPECT_DOUBLE_EQ(f(index_of(f.grid(), 0.5625, 0.9), 0, 1), 0.0);
}

TEST(Presets, LaminateAlongSecondAxis) {
  const auto f = build_field(PresetSpec::two_phase(PresetKind::laminate, 1, 4, 0.5, 0.0, 1), 2, 8);
  EXPECT_DOUBLE_EQ(f(index_of(f.grid(), 0.5625, 0.0625), 0, 0), 1.0);
  EXPECT_DOUBLE_EQ(f(index_of(f.grid(), 0.0625, 0.5625), 0, 0), 4.0);
}

TEST(Presets, Checkerboard) {
  const auto f = build_field(PresetSpec::two_phase(PresetKind::checkerboard, 1, 4), 2, 8);
  EXPECT_DOUBLE_EQ(f(index_of(f.grid(), 0.0625, 0.0625), 0, 0), 1.0);
  EXPECT_DOUBLE_EQ(f(index_of(f.grid(), 0.5625, 0.0625), 0, 0), 4.0);
  EXPECT_DOUBLE_EQ(f(index_of(f.grid(), 0.5625, 0.5625), 0, 0), 1.0);
}

TEST(Presets, DiskInclusionVolumeFraction) {
  const int n = 256;
  const auto f = build_field(PresetSpec::two_phase(PresetKind::disk_inclusion, 1, 5, 0.3), 2, n);
  double inside = 0.0;
  for (std::size_t p = 0; p < f.grid().size(); ++p) inside += f(p, 0, 0) == 5.0 ? 1.0 : 0.0;
  EXPECT_NEAR(inside / static_cast<double>(f.grid().size()), 0.3, 5e-3);
  EXPECT_DOUBLE_EQ(f(index_of(f.grid(), 0.5, 0.5), 0, 0), 5.0);
  EXPECT_DOUBLE_EQ(f(index_of(f.grid(), 0.01, 0.01), 0, 0), 1.0);
}

TEST(Presets, SmoothingBlendsConvexly) {
  const auto sharp = build_field(PresetSpec::two_phase(PresetKind::laminate, 1, 4), 1, 64);
  const auto soft = build_field(PresetSpec::two_phase(PresetKind::laminate, 1, 4, 0.5, 4.0), 1, 64);
  bool intermediate = false;
  for (std::size_t p = 0; p < soft.grid().size(); ++p) {
    EXPECT_GE(soft(p, 0, 0), 1.0);
    EXPECT_LE(soft(p, 0, 0), 4.0);
    intermediate = intermediate || (soft(p, 0, 0) > 1.0 && soft(p, 0, 0) < 4.0);
  }
  EXPECT_TRUE(intermediate);
  EXPECT_NEAR(soft.mean()(0, 0), sharp.mean()(0, 0), 1e-12);
}

TEST(Presets, TrigSmoothMatchesFormula) {
  const auto f = build_field(PresetSpec::trig(2.0, {TrigTerm{1.0, {TrigFn::sin, TrigFn::sin}, {1, 1}}}), 2, 16);
  for (int i = 0; i < 16; ++i)
    for (int j = 0; j < 16; ++j) {
      const double y0 = (i + 0.5) / 16, y1 = (j + 0.5) / 16;
      const double want = 2.0 + std::sin(2 * std::numbers::pi * y0) * std::sin(2 * std::numbers::pi * y1);
      EXPECT_NEAR(f(f.grid().linear(i, j), 0, 0), want, 1e-14);
      EXPECT_NEAR(f(f.grid().linear(i, j), 1, 1), want, 1e-14);
    }
}

TEST(Presets, MatrixPhase) {
  PresetSpec s = PresetSpec::two_phase(PresetKind::laminate, 1, 1);
  s.phases = {Phase{{2.0, 0.5, 0.5, 1.0}}, Phase::scalar(3.0)};
  const auto f = build_field(s, 2, 8);
  EXPECT_DOUBLE_EQ(f(0, 0, 1), 0.5);
  EXPECT_DOUBLE_EQ(f(0, 1, 0), 0.5);
  EXPECT_DOUBLE_EQ(f(f.grid().linear(7, 0), 0, 0), 3.0);
}

TEST(Presets, TabulatedRoundTrip) {
  const std::string path = ::testing::TempDir() + "table.csv";
  {
    std::ofstream out(path);
    for (int j = 0; j < 4; ++j) out << 1.0 + j << "\n";
  }
  PresetSpec s;
  s.kind = PresetKind::tabulated;
  s.table = read_table_csv(path);
  const auto f = build_field(s, 1, 4);
  for (int j = 0; j < 4; ++j) EXPECT_DOUBLE_EQ(f(static_cast<std::size_t>(j), 0, 0), 1.0 + j);
  EXPECT_THROW(build_field(s, 1, 8), InvalidArgument);
}

TEST(Presets, RejectsInvalidInput) {
  EXPECT_THROW(build_field(PresetSpec::constant(1.0), 2, 7), InvalidArgument);
  EXPECT_THROW(build_field(PresetSpec::constant(1.0), 2, 2), InvalidArgument);
  EXPECT_THROW(build_field(PresetSpec::constant(-1.0), 1, 8), InvalidArgument);
  EXPECT_THROW(build_field(PresetSpec::two_phase(PresetKind::laminate, 1, 4, 1.5), 1, 8), InvalidArgument);
  EXPECT_THROW(build_field(PresetSpec::two_phase(PresetKind::checkerboard, 1, 4, 0.3), 2, 8), InvalidArgument);
  EXPECT_THROW(parse_preset_kind("stripes"), InvalidArgument);
}

TEST(Field, RejectsAsymmetricMatrices) {
  std::vector<std::vector<double>> comp(4, std::vector<double>(16, 1.0));
  comp[1][3] = 0.5;
  EXPECT_THROW(CoefficientField(Grid{2, 4}, comp, 1.0, 1.0), InvalidArgument);
}

TEST(Ellipticity, Reports) {
  const auto c = build_field(PresetSpec::constant(1.0), 2, 8);
  const auto r1 = validate_ellipticity(c, 1.0, 1.0);
  EXPECT_TRUE(r1.pass);
  EXPECT_DOUBLE_EQ(r1.min_eig, 1.0);
  EXPECT_DOUBLE_EQ(r1.max_eig, 1.0);

  const auto lam = build_field(PresetSpec::two_phase(PresetKind::laminate, 1, 4), 2, 8);
  const auto r2 = validate_ellipticity(lam, 1.0, 4.0);
  EXPECT_TRUE(r2.pass);
  EXPECT_DOUBLE_EQ(r2.min_eig, 1.0);
  EXPECT_DOUBLE_EQ(r2.max_eig, 4.0);
  const auto r3 = validate_ellipticity(lam, 2.0, 4.0);
  EXPECT_FALSE(r3.pass);
  EXPECT_EQ(r3.failing_points, 32u);
}

TEST(Rational, Parsing) {
  EXPECT_EQ(Rational::parse("3/2"), (Rational{3, 2}));
  EXPECT_EQ(Rational::parse("4/2"), (Rational{2, 1}));
  EXPECT_EQ(Rational::parse("0.25"), (Rational{1, 4}));
  EXPECT_EQ(Rational::parse("2"), (Rational{2, 1}));
  EXPECT_THROW(Rational::parse("0"), InvalidArgument);
  EXPECT_THROW(Rational::parse("abc"), InvalidArgument);
  EXPECT_THROW(Rational::from_double(std::numbers::pi), InvalidArgument);
}

TEST(Resample, IdentityAtOne) {
  const Grid g{1, 8};
  const std::vector<double> v{1, 2, 3, 4, 5, 6, 7, 8};
  EXPECT_EQ(resample_periodic(v, g, Rational{1, 1}), v);
}

TEST(Resample, IntegerFactorCompressesPeriod) {
  const Grid g{1, 8};
  const std::vector<double> v{1, 1, 1, 1, 4, 4, 4, 4};
  const std::vector<double> want{1, 1, 4, 4, 1, 1, 4, 4};
  const auto r = resample_periodic(v, g, Rational{2, 1});
  for (std::size_t i = 0; i < r.size(); ++i) EXPECT_DOUBLE_EQ(r[i], want[i]);
}

TEST(Resample, FractionalFactorStretches) {
  const Grid g{1, 8};
  const std::vector<double> v{1, 1, 1, 1, 4, 4, 4, 4};
  const auto r0 = resample_periodic(v, g, Rational{1, 2});
  for (double x : r0) EXPECT_DOUBLE_EQ(x, 1.0);
  const auto r1 = resample_periodic(v, g, Rational{1, 2}, Rational{1, 2});
  for (double x : r1) EXPECT_DOUBLE_EQ(x, 4.0);
}

TEST(Resample, ShiftedCopiesPreserveTheMean) {
  std::mt19937 rng(3);
  std::uniform_real_distribution<double> u(0.5, 2.0);
  const Grid g{2, 8};
  std::vector<double> v(g.size());
  for (auto& x : v) x = u(rng);
  const double m = std::accumulate(v.begin(), v.end(), 0.0) / static_cast<double>(v.size());
  for (const Rational t : {Rational{3, 2}, Rational{2, 3}, Rational{5, 4}}) {
    double s = 0.0;
    for (long r0 = 0; r0 < t.q; ++r0)
      for (long r1 = 0; r1 < t.q; ++r1) {
        const auto w = resample_periodic(v, g, t, Rational{(t.p * r0) % t.q, t.q}, Rational{(t.p * r1) % t.q, t.q});
        s += std::accumulate(w.begin(), w.end(), 0.0) / static_cast<double>(w.size());
      }
    EXPECT_NEAR(s / static_cast<double>(t.q * t.q), m, 1e-14);
  }
}

TEST(Resample, RejectsLargeDenominators) {
  const Grid g{1, 8};
  const std::vector<double> v(8, 1.0);
  EXPECT_THROW(resample_periodic(v, g, Rational{1, 65}), InvalidArgument);
  EXPECT_THROW(resample_periodic(std::vector<double>(4, 1.0), g, Rational{1, 1}), GridMismatch);
}
