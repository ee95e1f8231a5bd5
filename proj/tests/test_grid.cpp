#include <cmath>
#include <cstring>
#include <filesystem>
#include <random>

#include <gtest/gtest.h>

#include "cbvf/cbf.hpp"
#include "cbvf/errors.hpp"
#include "cbvf/field_io.hpp"
#include "cbvf/grid.hpp"

using namespace cbvf;

namespace {

Vec vec(std::initializer_list<double> v) {
  Vec out(static_cast<Eigen::Index>(v.size()));
  Eigen::Index i = 0;
  for (double x : v) out[i++] = x;
  return out;
}

Grid line(double lo, double hi, std::size_t n) { return Grid({lo}, {hi}, {n}, {false}); }

}  // namespace

TEST(Grid, LayoutIsRowMajorWithLastAxisFastest) {
  const Grid g({0, 0}, {1, 2}, {3, 5}, {false, false});
  EXPECT_EQ(g.size(), 15u);
  EXPECT_EQ(g.stride(1), 1u);
  EXPECT_EQ(g.stride(0), 5u);
  std::size_t idx[2];
  g.unravel(7, idx);
  EXPECT_EQ(idx[0], 1u);
  EXPECT_EQ(idx[1], 2u);
  EXPECT_EQ(g.ravel(idx), 7u);
  EXPECT_DOUBLE_EQ(g.node(7)[0], 0.5);
  EXPECT_DOUBLE_EQ(g.node(7)[1], 1.0);
}

TEST(Grid, PeriodicAxisExcludesUpperEndpoint) {
  const Grid g({0}, {2 * M_PI}, {8}, {true});
  EXPECT_DOUBLE_EQ(g.spacing(0), 2 * M_PI / 8);
  EXPECT_EQ(g.neighbor(7, 0, 1), 0u);
  EXPECT_EQ(g.neighbor(0, 0, -1), 7u);
  const Grid h = line(0, 1, 4);
  EXPECT_EQ(h.neighbor(3, 0, 1), Grid::npos);
}

TEST(Grid, RejectsBadConstruction) {
  EXPECT_THROW(Grid({0}, {0}, {3}, {false}), ConfigError);
  EXPECT_THROW(Grid({0}, {1}, {1}, {false}), ConfigError);
  EXPECT_THROW(Grid({0, 0}, {1}, {3}, {false}), ConfigError);
}

TEST(Sample, ConstantFunction) {
  const Grid g({-1, -1}, {1, 1}, {4, 5}, {false, false});
  const ValueField f = sample(g, [](const Vec&) { return 1.0; });
  EXPECT_EQ(f.time, 0.0);
  for (double v : f.values) EXPECT_EQ(v, 1.0);
}

TEST(Sample, LinearFunctionOnThreeNodes) {
  const ValueField f = sample(line(0, 1, 3), [](const Vec& x) { return x[0]; });
  ASSERT_EQ(f.values.size(), 3u);
  EXPECT_EQ(f.values[0], 0.0);
  EXPECT_EQ(f.values[1], 0.5);
  EXPECT_EQ(f.values[2], 1.0);
}

TEST(Sample, AccCandidateSpotChecks) {
  const AccParams p;
  const Grid g({0, 0}, {30, 120}, {101, 101}, {false, false});
  const ValueField f = sample(g, acc_analytic_cbf(p).evaluate);
  for (std::size_t flat : {0u, 517u, 5100u, 7777u, 10200u}) {
    const Vec x = g.node(flat);
    const double expected = x[1] - p.look_ahead * x[0] -
                            (p.lead_speed - x[0]) * (p.lead_speed - x[0]) / (2 * p.cd * p.gravity);
    EXPECT_NEAR(f.values[flat], expected, 1e-12 * (1 + std::abs(expected)));
  }
}

TEST(Sample, NonFiniteFunctionThrows) {
  EXPECT_THROW(sample(line(0, 1, 3), [](const Vec&) { return NAN; }), NonFiniteError);
}

TEST(Interpolate, ExactAtEveryNode) {
  const Grid g({-1, 0, 0}, {1, 2, 2 * M_PI}, {5, 4, 6}, {false, false, true});
  std::mt19937_64 rng(1);
  std::uniform_real_distribution<double> u(-3, 3);
  std::vector<double> values(g.size());
  for (double& v : values) v = u(rng);
  const ValueField f(g, values);
  for (std::size_t i = 0; i < g.size(); ++i) EXPECT_EQ(interpolate(f, g.node(i)), values[i]);
}

TEST(Interpolate, LinearInOneDimension) {
  const ValueField f(line(0, 1, 2), {0.0, 1.0});
  EXPECT_DOUBLE_EQ(interpolate(f, vec({0.25})), 0.25);
}

TEST(Interpolate, BoundedByCellCorners) {
  const Grid g({0, 0}, {1, 1}, {6, 6}, {false, false});
  std::mt19937_64 rng(2);
  std::uniform_real_distribution<double> u(-1, 1);
  std::uniform_real_distribution<double> pos(0, 1);
  std::vector<double> values(g.size());
  for (double& v : values) v = u(rng);
  const ValueField f(g, values);
  for (int trial = 0; trial < 1000; ++trial) {
    const Vec x = vec({pos(rng), pos(rng)});
    const CellLocation c = locate(g, x);
    double lo = INFINITY, hi = -INFINITY;
    for (int a = 0; a < 2; ++a) {
      for (int b = 0; b < 2; ++b) {
        const std::size_t idx[2] = {a ? c.upper[0] : c.lower[0], b ? c.upper[1] : c.lower[1]};
        lo = std::min(lo, values[g.ravel(idx)]);
        hi = std::max(hi, values[g.ravel(idx)]);
      }
    }
    const double v = interpolate(f, x);
    EXPECT_GE(v, lo - 1e-15);
    EXPECT_LE(v, hi + 1e-15);
  }
}

TEST(Interpolate, PeriodicWrap) {
  const Grid g({0}, {2 * M_PI}, {64}, {true});
  const ValueField f = sample(g, [](const Vec& x) { return std::sin(x[0]); });
  for (double theta : {0.3, 1.7, 6.1}) {
    const double base = interpolate(f, vec({theta}));
    for (int k : {-2, -1, 1, 3}) {
      const double shifted = interpolate(f, vec({theta + 2 * M_PI * k}));
      EXPECT_NEAR(shifted, base, 1e-12 * std::max(1.0, std::abs(base)));
    }
  }
}

TEST(Interpolate, OutsideNonPeriodicAxisThrows) {
  const ValueField f(line(0, 1, 3), {0, 1, 2});
  EXPECT_THROW(interpolate(f, vec({1.5})), OutOfDomainError);
  try {
    interpolate(f, vec({-0.5}));
  } catch (const OutOfDomainError& e) {
    EXPECT_EQ(e.axis(), 0u);
  }
}

TEST(Gradient, AffineFieldIsExact) {
  const ValueField f = sample(line(0, 1, 201), [](const Vec& x) { return 3 * x[0]; });
  for (double x : {0.1, 0.33, 0.5, 0.77}) EXPECT_NEAR(gradient_at(f, vec({x}))[0], 3.0, 1e-9);
}

TEST(Gradient, QuadraticAtInteriorNode) {
  const ValueField f = sample(line(0, 1, 11), [](const Vec& x) { return x[0] * x[0]; });
  EXPECT_NEAR(gradient_at(f, vec({0.5}))[0], 1.0, 0.1 * 0.1);
}

TEST(Gradient, ConstantFieldIsZero) {
  const Grid g({0, 0}, {1, 1}, {5, 5}, {false, false});
  const ValueField f = sample(g, [](const Vec&) { return 4.0; });
  EXPECT_EQ(gradient_at(f, vec({0.3, 0.6})).norm(), 0.0);
}

TEST(Gradient, SecondOrderConvergence) {
  const auto fn = [](const Vec& x) { return std::sin(x[0]) * std::cos(2 * x[1]); };
  const Vec q = vec({0.4, 0.3});
  const Vec exact = vec({std::cos(0.4) * std::cos(0.6), -2 * std::sin(0.4) * std::sin(0.6)});
  double errors[2];
  for (int level = 0; level < 2; ++level) {
    const std::size_t n = level == 0 ? 21 : 41;
    const Grid g({0, 0}, {1, 1}, {n, n}, {false, false});
    const ValueField f = sample(g, fn);
    // Query at a node shared by both grids.
    errors[level] = (gradient_at(f, q) - exact).norm();
  }
  const double ratio = errors[0] / errors[1];
  EXPECT_GT(ratio, 2.0);
  EXPECT_LT(ratio, 8.0);
}

TEST(UpwindGradients, LinearField) {
  const ValueField f = sample(line(0, 1, 11), [](const Vec& x) { return 2 * x[0]; });
  const UpwindGradients g = upwind_gradients(f);
  for (std::size_t i = 1; i + 1 < 11; ++i) {
    EXPECT_NEAR(g.left[i], 2.0, 1e-12);
    EXPECT_NEAR(g.right[i], 2.0, 1e-12);
  }
}

TEST(UpwindGradients, StepFieldIsOneSided) {
  const ValueField f(line(0, 1, 5), {0, 0, 1, 1, 1});
  const UpwindGradients g = upwind_gradients(f);
  EXPECT_NE(g.left[2], g.right[2]);
  EXPECT_TRUE(std::isfinite(g.left[2]));
  EXPECT_TRUE(std::isfinite(g.right[2]));
}

TEST(UpwindGradients, ConstantFieldIsZero) {
  const ValueField f(line(0, 1, 5), {2, 2, 2, 2, 2});
  const UpwindGradients g = upwind_gradients(f);
  for (double v : g.left) EXPECT_EQ(v, 0.0);
  for (double v : g.right) EXPECT_EQ(v, 0.0);
}

TEST(UpwindDifference, BoundaryModes) {
  const Grid g = line(0, 1, 3);
  const std::vector<double> values = {0.0, 1.0, 3.0};
  const auto linear = upwind_difference(g, values, 2, 0, Boundary::Linear);
  EXPECT_DOUBLE_EQ(linear.first, 4.0);
  EXPECT_DOUBLE_EQ(linear.second, 4.0);
  const auto constant = upwind_difference(g, values, 2, 0, Boundary::Constant);
  EXPECT_DOUBLE_EQ(constant.first, 4.0);
  EXPECT_DOUBLE_EQ(constant.second, 0.0);
}

TEST(FieldIo, BitExactRoundTrip) {
  const Grid g({-1, 0, 0}, {1, 2, 2 * M_PI}, {4, 3, 5}, {false, false, true}, {"a", "b", "c"});
  std::mt19937_64 rng(5);
  std::normal_distribution<double> n;
  std::vector<double> values(g.size());
  for (double& v : values) v = n(rng) * 1e-7;
  values[3] = -0.0;
  const ValueField f(g, values, -1.25);
  const auto dir = std::filesystem::temp_directory_path() / "cbvf_test_field_io";
  std::filesystem::remove_all(dir);
  write_field(dir, f);
  const ValueField back = read_field(dir);
  EXPECT_TRUE(back.grid.same_layout(g));
  EXPECT_EQ(back.grid.axis_names(), g.axis_names());
  EXPECT_EQ(back.time, -1.25);
  ASSERT_EQ(back.values.size(), values.size());
  EXPECT_EQ(std::memcmp(back.values.data(), values.data(), values.size() * sizeof(double)), 0);
  std::filesystem::remove_all(dir);
}
