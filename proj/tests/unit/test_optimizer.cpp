#include <gtest/gtest.h>

#include <atomic>
#include <cmath>
#include <limits>
#include <numbers>
#include <random>

#include "aost/error.hpp"
#include "aost/optimizer.hpp"

using namespace aost;

namespace {

SwarmParams box(std::size_t dims, double lo, double hi, std::uint64_t seed = 1) {
  SwarmParams p;
  p.lower.assign(dims, lo);
  p.upper.assign(dims, hi);
  p.seed = seed;
  return p;
}

AttributeSchema scene_grid() {
  return AttributeSchema({{"weather", 7, DimensionKind::kCategorical},
                          {"illumination", 7, DimensionKind::kCategorical},
                          {"background", 9, DimensionKind::kCategorical}});
}

std::vector<double> angle(double degrees) {
  const double r = degrees * std::numbers::pi / 180.0;
  return {std::sin(r), std::cos(r)};
}

const AttributeSchema& viewpoint_only() {
  static const AttributeSchema schema({{"viewpoint", 36, DimensionKind::kCircular}});
  return schema;
}

}  // namespace

TEST(Swarm, SphereConverges) {
  const auto sphere = [](std::span<const double> x) {
    double s = 0.0;
    for (double v : x) s += v * v;
    return s;
  };
  const SwarmResult r = optimize(sphere, box(2, -5.0, 5.0));
  EXPECT_LT(r.best_value, 1e-6);
}

TEST(Swarm, ConstantObjective) {
  const SwarmResult r = optimize([](std::span<const double>) { return 3.25; }, box(3, 0.0, 1.0));
  EXPECT_EQ(r.best_value, 3.25);
  ASSERT_EQ(r.history.size(), 200u);
  for (double h : r.history) EXPECT_EQ(h, 3.25);
}

TEST(Swarm, SameSeedSameResult) {
  const auto rastrigin = [](std::span<const double> x) {
    double s = 10.0 * x.size();
    for (double v : x) s += v * v - 10.0 * std::cos(2 * std::numbers::pi * v);
    return s;
  };
  const SwarmResult a = optimize(rastrigin, box(4, -5.12, 5.12, 9));
  const SwarmResult b = optimize(rastrigin, box(4, -5.12, 5.12, 9));
  EXPECT_EQ(a.best_position, b.best_position);
  EXPECT_EQ(a.best_value, b.best_value);
  EXPECT_EQ(a.history, b.history);
  SwarmParams threaded = box(4, -5.12, 5.12, 9);
  threaded.threads = 4;
  const SwarmResult c = optimize(rastrigin, threaded);
  EXPECT_EQ(a.history, c.history);
  EXPECT_EQ(a.best_position, c.best_position);
}

TEST(Swarm, HistoryNeverWorsens) {
  std::mt19937_64 gen(51);
  for (int trial = 0; trial < 5; ++trial) {
    std::vector<double> centre(5);
    for (auto& c : centre) c = std::uniform_real_distribution<double>(-3, 3)(gen);
    const auto f = [&](std::span<const double> x) {
      double s = 0.0;
      for (std::size_t i = 0; i < x.size(); ++i) s += std::abs(x[i] - centre[i]);
      return s + std::sin(3 * x[0]);
    };
    const SwarmResult r = optimize(f, box(5, -4, 4, 100 + trial));
    for (std::size_t i = 1; i < r.history.size(); ++i) EXPECT_LE(r.history[i], r.history[i - 1]);
    EXPECT_EQ(r.best_value, r.history.back());
    EXPECT_EQ(r.best_value, f(r.best_position));
  }
}

TEST(Swarm, PositionsStayInBounds) {
  std::atomic<bool> escaped{false};
  const auto f = [&](std::span<const double> x) {
    for (std::size_t i = 0; i < x.size(); ++i) {
      if (x[i] < -1.0 || x[i] > 2.0) escaped = true;
    }
    return -x[0] - x[1];  // pushes the swarm into the upper corner
  };
  SwarmParams p = box(2, -1.0, 2.0);
  p.iterations = 50;
  const SwarmResult r = optimize(f, p);
  EXPECT_FALSE(escaped);
  EXPECT_EQ(r.best_position, (std::vector<double>{2.0, 2.0}));
}

TEST(Swarm, NonFiniteEvaluationsAreNeverChosen) {
  const auto f = [](std::span<const double> x) {
    return x[0] < 0.0 ? std::numeric_limits<double>::quiet_NaN() : x[0];
  };
  const SwarmResult r = optimize(f, box(1, -1.0, 1.0));
  EXPECT_GT(r.non_finite_evaluations, 0u);
  EXPECT_TRUE(std::isfinite(r.best_value));
  EXPECT_GE(r.best_position[0], 0.0);
}

TEST(Swarm, ParameterValidation) {
  SwarmParams p = box(2, 0, 1);
  p.particles = 0;
  EXPECT_THROW(p.validate(), ValidationError);
  p = box(2, 0, 1);
  p.inertia = 1.5;
  EXPECT_THROW(p.validate(), ValidationError);
  p = box(2, 0, 1);
  p.cognitive = -0.1;
  EXPECT_THROW(p.validate(), ValidationError);
  p = box(2, 1, 1);
  EXPECT_THROW(p.validate(), ValidationError);
}

TEST(Swarm, HistoryCsv) {
  SwarmParams p = box(1, 0, 1);
  p.iterations = 3;
  const SwarmResult r = optimize([](std::span<const double>) { return 1.5; }, p);
  EXPECT_EQ(r.history_csv(), "iteration,best_value\n0,1.5\n1,1.5\n2,1.5\n");
}

TEST(Decode, ZeroAngleIsBinZero) {
  EXPECT_EQ(decode(angle(0.0), viewpoint_only()).values[0], 0);
}

TEST(Decode, CategoricalFloorAndClamp) {
  const AttributeSchema schema = scene_grid();
  EXPECT_EQ(decode(std::vector<double>{3.7, 0.2, 8.99}, schema).values,
            (std::vector<int>{3, 0, 8}));
  EXPECT_EQ(decode(std::vector<double>{7.0, -0.5, 100.0}, schema).values,
            (std::vector<int>{6, 0, 8}));
}

TEST(Decode, MidpointAngleGoesToLowerBin) {
  EXPECT_EQ(decode(angle(95.0), viewpoint_only()).values[0], 9);
  EXPECT_EQ(decode(angle(95.1), viewpoint_only()).values[0], 10);
  EXPECT_EQ(decode(angle(355.0), viewpoint_only()).values[0], 35);
  EXPECT_EQ(decode(angle(356.0), viewpoint_only()).values[0], 0);
  EXPECT_EQ(decode(angle(-10.0), viewpoint_only()).values[0], 35);
}

TEST(Decode, RelaxRoundTripsEveryConfig) {
  const AttributeSchema schema = AttributeSchema::finegpr();
  std::mt19937_64 gen(52);
  for (int trial = 0; trial < 2000; ++trial) {
    AttributeConfig c;
    for (const auto& d : schema.dimensions()) {
      c.values.push_back(static_cast<int>(gen() % static_cast<std::uint64_t>(d.cardinality)));
    }
    const auto x = relax(c, schema);
    ASSERT_EQ(x.size(), relaxed_size(schema));
    ASSERT_EQ(decode(x, schema), c);
  }
  for (int b = 0; b < 36; ++b) {
    EXPECT_EQ(decode(relax(AttributeConfig{{b}}, viewpoint_only()), viewpoint_only()).values[0], b);
  }
}

TEST(Decode, RandomPositionsDecodeToValidConfigs) {
  const AttributeSchema schema = AttributeSchema::finegpr();
  std::vector<double> lo, hi;
  relaxed_bounds(schema, lo, hi);
  ASSERT_EQ(lo.size(), 18u);  // sin/cos pair, three categoricals, 13 flags
  std::mt19937_64 gen(53);
  for (int trial = 0; trial < 500; ++trial) {
    std::vector<double> x(lo.size());
    for (std::size_t i = 0; i < x.size(); ++i) {
      x[i] = std::uniform_real_distribution<double>(lo[i], hi[i])(gen);
    }
    EXPECT_TRUE(schema.is_valid(decode(x, schema)));
  }
}

TEST(Decode, LengthMismatchThrows) {
  EXPECT_THROW(decode(std::vector<double>{1.0, 2.0}, scene_grid()), ValidationError);
}

namespace {

BoostedEnsemble grid_surrogate(std::uint64_t seed) {
  const AttributeSchema schema = scene_grid();
  std::mt19937_64 gen(seed);
  std::vector<std::pair<AttributeConfig, double>> s;
  for (int w = 0; w < 7; ++w) {
    for (int i = 0; i < 7; ++i) {
      for (int b = 0; b < 9; ++b) {
        const double y = std::abs(w - 2) + 0.5 * std::abs(i - 4) + (b == 6 ? 0.0 : 1.0) +
                         0.1 * std::uniform_real_distribution<double>(0, 1)(gen);
        s.push_back({AttributeConfig{{w, i, b}}, y});
      }
    }
  }
  return fit(s, schema, BoostingParams{});
}

}  // namespace

TEST(Search, SingleConfigReachesGridMinimum) {
  const AttributeSchema schema = scene_grid();
  const BoostedEnsemble model = grid_surrogate(54);
  double best = std::numeric_limits<double>::infinity();
  for (int w = 0; w < 7; ++w) {
    for (int i = 0; i < 7; ++i) {
      for (int b = 0; b < 9; ++b) best = std::min(best, predict(model, {{w, i, b}}, schema));
    }
  }
  int hits = 0;
  for (std::uint64_t seed = 0; seed < 20; ++seed) {
    SwarmParams p;
    p.seed = seed;
    const SearchResult r = search_attributes(model, schema, p, 1, 0.0);
    ASSERT_EQ(r.configs.size(), 1u);
    EXPECT_EQ(r.predicted[0], predict(model, r.configs[0], schema));
    hits += r.predicted[0] <= best + 0.01 * std::abs(best);
  }
  EXPECT_GE(hits, 19);
}

TEST(Search, LargePenaltyForcesDistinctConfigs) {
  const AttributeSchema schema = scene_grid();
  const BoostedEnsemble model = grid_surrogate(55);
  SwarmParams p;
  p.seed = 3;
  const SearchResult r = search_attributes(model, schema, p, 2, 10.0 * model.target_range());
  ASSERT_EQ(r.configs.size(), 2u);
  EXPECT_NE(r.configs[0], r.configs[1]);
  EXPECT_EQ(r.runs.size(), 2u);
}

TEST(Search, ConstantSurrogateIsFlaggedNonUnique) {
  const AttributeSchema schema = scene_grid();
  std::vector<std::pair<AttributeConfig, double>> s{{{{0, 0, 0}}, 1.0}, {{{1, 1, 1}}, 1.0}};
  const BoostedEnsemble model = fit(s, schema, BoostingParams{});
  const SearchResult r = search_attributes(model, schema, SwarmParams{}, 1, 0.0);
  ASSERT_EQ(r.configs.size(), 1u);
  EXPECT_TRUE(schema.is_valid(r.configs[0]));
  EXPECT_TRUE(r.non_unique_optimum[0]);
}

TEST(Search, RejectsImpossibleCounts) {
  const AttributeSchema tiny({{"a", 2, DimensionKind::kCategorical}});
  std::vector<std::pair<AttributeConfig, double>> s{{{{0}}, 1.0}, {{{1}}, 2.0}};
  const BoostedEnsemble model = fit(s, tiny, BoostingParams{});
  EXPECT_THROW(search_attributes(model, tiny, SwarmParams{}, 0, 0.0), ValidationError);
  EXPECT_THROW(search_attributes(model, tiny, SwarmParams{}, 3, 0.0), ValidationError);
  EXPECT_NO_THROW(search_attributes(model, tiny, SwarmParams{}, 2, 1.0));
}
