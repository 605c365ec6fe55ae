#include <cmath>
#include <map>
#include <numbers>
#include <sstream>

#include <gtest/gtest.h>

#include "kkstab/internal.hpp"

using namespace kkstab;

namespace {
constexpr double kTwoPi = 2.0 * std::numbers::pi;
}

TEST(Spectrum, CircleOfLength2Pi) {
  auto spec = lichnerowicz_spectrum(FlatTorus::cube(1, kTwoPi), 4.5);
  std::vector<double> lam;
  for (const auto& e : spec.entries) {
    lam.push_back(e.lambda);
    EXPECT_EQ(e.multiplicity, 1);
  }
  ASSERT_EQ(lam.size(), 5u);
  const std::vector<double> expected = {0, 1, 1, 4, 4};
  for (int i = 0; i < 5; ++i) EXPECT_NEAR(lam[i], expected[i], 1e-12);
  EXPECT_FALSE(spec.only_zero_mode);
}

TEST(Spectrum, UnitSquareTorusLowestPositive) {
  auto spec = lichnerowicz_spectrum(FlatTorus::cube(2, 1.0), 50.0);
  auto g = spec.grouped();
  ASSERT_GE(g.size(), 2u);
  EXPECT_EQ(g[0].lambda, 0.0);
  EXPECT_EQ(g[0].multiplicity, 3);
  EXPECT_NEAR(g[1].lambda, 4 * std::numbers::pi * std::numbers::pi, 1e-12);
  EXPECT_NEAR(g[1].lambda, 39.478, 1e-3);
  EXPECT_EQ(g[1].multiplicity, 4 * 3);
}

TEST(Spectrum, ZeroModeMultiplicityIsComponentCount) {
  for (int d = 1; d <= 4; ++d) {
    auto spec = lichnerowicz_spectrum(FlatTorus::cube(d, 3.0), 1.0);
    EXPECT_EQ(spec.lambda_min(), 0.0);
    EXPECT_EQ(spec.grouped()[0].multiplicity, d * (d + 1) / 2);
    EXPECT_TRUE(spec.only_zero_mode);
  }
}

TEST(Spectrum, CutoffErrors) {
  EXPECT_THROW(lichnerowicz_spectrum(FlatTorus::cube(1, 1.0), 0.0), std::invalid_argument);
  SpectralData data(2, {{5.0, 2, "a"}});
  EXPECT_THROW(lichnerowicz_spectrum(data, 1.0), SpectrumError);
  EXPECT_NO_THROW(lichnerowicz_spectrum(data, 5.0));
}

TEST(Spectrum, AnisotropicTorusAgainstDirectSum) {
  FlatTorus torus(2, {1.0, 2.5});
  const double cutoff = 300.0;
  auto spec = lichnerowicz_spectrum(torus, cutoff);
  std::map<long long, int> oracle;
  for (int a = -20; a <= 20; ++a)
    for (int b = -20; b <= 20; ++b) {
      const double lam = std::pow(kTwoPi * a / 1.0, 2) + std::pow(kTwoPi * b / 2.5, 2);
      if (lam <= cutoff) oracle[std::llround(lam * 1e6)] += 3;
    }
  std::map<long long, int> got;
  for (const auto& e : spec.entries) got[std::llround(e.lambda * 1e6)] += e.multiplicity;
  EXPECT_EQ(got, oracle);
}

TEST(Stability, Examples) {
  auto r = is_linearly_stable(FlatTorus::cube(3, 2.0));
  EXPECT_TRUE(r.stable);
  EXPECT_EQ(r.lambda_min, 0.0);
  auto bad = is_linearly_stable(SpectralData(2, {{2.0, 5, ""}, {-0.3, 1, ""}}));
  EXPECT_FALSE(bad.stable);
  EXPECT_DOUBLE_EQ(bad.lambda_min, -0.3);
  EXPECT_TRUE(is_linearly_stable(SpectralData(2, {{-1e-12, 1, ""}})).stable);
}

TEST(Stability, ProductOfTwoTori) {
  auto a = lichnerowicz_spectrum(FlatTorus::cube(1, 1.0), 200.0);
  auto b = lichnerowicz_spectrum(FlatTorus::cube(2, 3.0), 200.0);
  auto prod = product_spectrum(a, 1, b, 2, 200.0);
  EXPECT_EQ(prod.d, 3);
  auto r = is_linearly_stable(prod);
  EXPECT_TRUE(r.stable);
  EXPECT_EQ(r.lambda_min, 0.0);
  EXPECT_TRUE(std::is_sorted(prod.modes.begin(), prod.modes.end(),
                             [](const auto& x, const auto& y) { return x.lambda < y.lambda; }));
}

TEST(Stability, ScalingInvariance) {
  for (double c : {0.1, 1.0, 7.0}) {
    EXPECT_TRUE(is_linearly_stable(FlatTorus(2, {c, 2 * c})).stable);
    SpectralData neg(1, {{-0.5 / (c * c), 1, ""}, {1.0 / (c * c), 2, ""}});
    EXPECT_FALSE(is_linearly_stable(neg).stable);
  }
}

TEST(SpectrumFile, RoundTrip) {
  std::istringstream in(
      "# comment\n"
      "\n"
      "internal-spectrum v1 d=6\n"
      "0 3 zero   # trailing comment\n"
      "2.5 4\n"
      "1.25 1 mid\n");
  auto data = parse_spectral_data(in, "mem");
  EXPECT_EQ(data.d, 6);
  ASSERT_EQ(data.modes.size(), 3u);
  EXPECT_DOUBLE_EQ(data.modes[1].lambda, 1.25);
  EXPECT_EQ(data.modes[1].label, "mid");
  std::ostringstream out;
  write_spectral_data(out, data);
  std::istringstream again(out.str());
  auto back = parse_spectral_data(again);
  ASSERT_EQ(back.modes.size(), 3u);
  for (int i = 0; i < 3; ++i) {
    EXPECT_EQ(back.modes[i].lambda, data.modes[i].lambda);
    EXPECT_EQ(back.modes[i].multiplicity, data.modes[i].multiplicity);
  }
}

TEST(SpectrumFile, MalformedLinesCarryLineNumbers) {
  struct Case {
    const char* text;
    int line;
  };
  const Case cases[] = {
      {"internal-spectrum v2 d=1\n0 1\n", 1},
      {"internal-spectrum v1 d=1\n0 1\nabc 2\n", 3},
      {"internal-spectrum v1 d=1\n\n0 0\n", 3},
      {"internal-spectrum v1 d=1\n0 1.5\n", 2},
      {"internal-spectrum v1 d=1\n0\n", 2},
      {"internal-spectrum v1 d=1\n0 1 a b\n", 2},
      {"0 1\n", 1},
      {"# only a comment\n", 1},
      {"internal-spectrum v1 d=1\n", 1},
  };
  for (const auto& c : cases) {
    std::istringstream in(c.text);
    try {
      parse_spectral_data(in, "f.spec");
      ADD_FAILURE() << "accepted: " << c.text;
    } catch (const SpectrumParseError& e) {
      EXPECT_EQ(e.line(), c.line) << c.text;
      EXPECT_NE(std::string(e.what()).find("f.spec:"), std::string::npos);
    }
  }
}

TEST(TorusField, ParsevalAgainstGridQuadrature) {
  FlatTorus torus(2, {1.0, 1.7});
  for (std::uint64_t seed : {1u, 2u, 3u}) {
    auto u = random_torus_field(torus, 3, seed);
    const double coef = u.coefficient_norm2();
    EXPECT_NEAR(grid_l2_norm2(u, 12), coef, 1e-10 * coef);
  }
}

TEST(TorusField, HalfSpaceWavevectorsCount) {
  EXPECT_EQ(half_space_wavevectors(1, 3).size(), 4u);
  EXPECT_EQ(half_space_wavevectors(2, 2).size(), 13u);
}

TEST(Elliptic, ConstantTensor) {
  FlatTorus torus = FlatTorus::cube(2, 1.0);
  TorusTensorField u;
  u.torus = torus;
  u.modes.push_back({{0, 0}, {1.0, -2.0, 0.5}, {0.0, 0.0, 0.0}});
  auto n = elliptic_norms(u, 2, 8, 100.0);
  EXPECT_NEAR(n.h_norm, n.l2_norm, 1e-12);
  EXPECT_NEAR(n.lap_norm, 0.0, 1e-12);
  EXPECT_NEAR(n.l2_norm, std::sqrt(5.25), 1e-12);
}

TEST(Elliptic, SingleModeClosedForm) {
  FlatTorus torus = FlatTorus::cube(1, 2.0);
  TorusTensorField u;
  u.torus = torus;
  u.modes.push_back({{2}, {0.0}, {1.5}});
  const double lam = std::pow(kTwoPi * 2 / 2.0, 2);
  for (int ell = 1; ell <= 3; ++ell) {
    auto n = elliptic_norms(u, ell, 16, 1e6);
    double w = 0.0;
    for (int j = 0; j <= 2 * ell; ++j) w += std::pow(lam, j);
    EXPECT_NEAR(n.h_norm, std::sqrt(w) * 1.5, 1e-9 * n.h_norm);
    EXPECT_NEAR(n.lap_norm, std::pow(lam, ell) * 1.5, 1e-9 * n.lap_norm);
  }
}

TEST(Elliptic, RandomDrawsStableUnderRefinement) {
  FlatTorus torus = FlatTorus::cube(2, 1.0);
  auto coarse = elliptic_equivalence_check(torus, 2, 100, 2, 8, 1e4, 99);
  auto fine = elliptic_equivalence_check(torus, 2, 100, 2, 16, 1e4, 99);
  EXPECT_TRUE(std::isfinite(coarse.constant));
  EXPECT_LE(coarse.max_upper_ratio, 1.0 + 1e-12);
  EXPECT_LE(fine.max_upper_ratio, 1.0 + 1e-12);
  EXPECT_NEAR(fine.constant / coarse.constant, 1.0, 0.05);
  // Uniform bound sum_{j<=2l} lam^j <= (2l+1)(1 + lam^{2l}).
  EXPECT_LE(coarse.constant, std::sqrt(5.0));
}

TEST(Elliptic, EnergyAboveCutoffRejected) {
  FlatTorus torus = FlatTorus::cube(1, 1.0);
  auto u = random_torus_field(torus, 3, 5);
  EXPECT_THROW(elliptic_norms(u, 1, 16, 50.0), SpectrumError);
  EXPECT_THROW(elliptic_norms(u, 1, 6, 1e6), SpectrumError);
}
