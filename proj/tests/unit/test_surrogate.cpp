#include <gtest/gtest.h>

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <numeric>
#include <random>

#include "aost/error.hpp"
#include "aost/surrogate.hpp"

using namespace aost;

namespace {

AttributeSchema scene_grid() {
  return AttributeSchema({{"weather", 7, DimensionKind::kCategorical},
                          {"illumination", 7, DimensionKind::kCategorical},
                          {"background", 9, DimensionKind::kCategorical}});
}

std::vector<AttributeConfig> enumerate(const AttributeSchema& schema) {
  std::vector<AttributeConfig> out{AttributeConfig{}};
  for (const auto& d : schema.dimensions()) {
    std::vector<AttributeConfig> next;
    for (const auto& c : out) {
      for (int v = 0; v < d.cardinality; ++v) {
        AttributeConfig e = c;
        e.values.push_back(v);
        next.push_back(std::move(e));
      }
    }
    out = std::move(next);
  }
  return out;
}

AttributeConfig random_config(std::mt19937_64& gen, const AttributeSchema& schema) {
  AttributeConfig c;
  for (const auto& d : schema.dimensions()) {
    c.values.push_back(static_cast<int>(gen() % static_cast<std::uint64_t>(d.cardinality)));
  }
  return c;
}

using Samples = std::vector<std::pair<AttributeConfig, double>>;

Samples weather_indicator(const AttributeSchema& schema) {
  Samples s;
  for (auto& c : enumerate(schema)) {
    const double y = c.values[0] == 0 ? 1.0 : 0.0;
    s.emplace_back(std::move(c), y);
  }
  return s;
}

double training_mse(const BoostedEnsemble& model, const Samples& samples,
                    const AttributeSchema& schema) {
  double sum = 0.0;
  for (const auto& [c, y] : samples) {
    const double e = predict(model, c, schema) - y;
    sum += e * e;
  }
  return sum / static_cast<double>(samples.size());
}

double rewalk(const BoostedEnsemble& model, const std::vector<double>& x) {
  double sum = 0.0;
  for (const auto& tree : model.trees) {
    std::size_t node = 0;
    while (tree.nodes[node].feature >= 0) {
      const auto& n = tree.nodes[node];
      node = static_cast<std::size_t>(x[static_cast<std::size_t>(n.feature)] < n.threshold ? n.left
                                                                                          : n.right);
    }
    sum += tree.nodes[node].value;
  }
  return model.base_score + model.params.learning_rate * sum;
}

}  // namespace

TEST(Encode, DefaultLayoutLength) {
  const AttributeSchema schema = AttributeSchema::finegpr();
  const EncodingLayout layout = EncodingLayout::for_schema(schema);
  EXPECT_EQ(layout.size(), 38u);
  AttributeConfig c;
  for (const auto& d : schema.dimensions()) c.values.push_back(0);
  EXPECT_EQ(encode(c, schema).size(), 38u);
}

TEST(Encode, BlockOrderAndOneHot) {
  const AttributeSchema schema = AttributeSchema::finegpr();
  AttributeConfig c;
  for (const auto& d : schema.dimensions()) c.values.push_back(d.cardinality - 1);
  c.values[*schema.index_of("weather")] = 2;
  c.values[*schema.index_of("viewpoint")] = 9;
  const auto x = encode(c, schema);
  const std::vector<double> weather(x.begin(), x.begin() + 7);
  EXPECT_EQ(weather, (std::vector<double>{0, 0, 1, 0, 0, 0, 0}));
  // illumination and background one-hots at their last category
  EXPECT_EQ(x[7 + 6], 1.0);
  EXPECT_EQ(x[14 + 8], 1.0);
  EXPECT_NEAR(x[23], 1.0, 1e-12);  // sin 90
  EXPECT_NEAR(x[24], 0.0, 1e-12);  // cos 90
  for (std::size_t i = 25; i < 38; ++i) EXPECT_EQ(x[i], 1.0);

  const EncodingLayout layout = EncodingLayout::for_schema(schema);
  const auto viewpoint = static_cast<int>(*schema.index_of("viewpoint"));
  EXPECT_EQ(layout.feature_dimension[23], viewpoint);
  EXPECT_EQ(layout.feature_dimension[24], viewpoint);
}

TEST(Encode, BlocksSumToOneAndAnglesAreUnit) {
  const AttributeSchema schema = AttributeSchema::finegpr();
  std::mt19937_64 gen(41);
  for (int trial = 0; trial < 200; ++trial) {
    const auto x = encode(random_config(gen, schema), schema);
    EXPECT_EQ(std::accumulate(x.begin(), x.begin() + 7, 0.0), 1.0);
    EXPECT_EQ(std::accumulate(x.begin() + 7, x.begin() + 14, 0.0), 1.0);
    EXPECT_EQ(std::accumulate(x.begin() + 14, x.begin() + 23, 0.0), 1.0);
    EXPECT_NEAR(x[23] * x[23] + x[24] * x[24], 1.0, 1e-9);
    for (std::size_t i = 25; i < 38; ++i) EXPECT_TRUE(x[i] == 0.0 || x[i] == 1.0);
  }
}

TEST(Encode, InvalidConfigThrows) {
  const AttributeSchema schema = scene_grid();
  EXPECT_THROW(encode(AttributeConfig{{7, 0, 0}}, schema), SchemaError);
  EXPECT_THROW(encode(AttributeConfig{{0, 0}}, schema), SchemaError);
}

TEST(Fit, ConstantTargetHasNoSplits) {
  const AttributeSchema schema = scene_grid();
  Samples s;
  std::mt19937_64 gen(42);
  for (int i = 0; i < 30; ++i) s.emplace_back(random_config(gen, schema), 2.5);
  BoostingParams params;
  params.rounds = 1;
  params.learning_rate = 1.0;
  const BoostedEnsemble model = fit(s, schema, params);
  EXPECT_FALSE(model.has_splits());
  EXPECT_EQ(model.base_score, 2.5);
  for (int i = 0; i < 20; ++i) EXPECT_EQ(predict(model, random_config(gen, schema), schema), 2.5);
}

TEST(Fit, SingleAxisTargetIsLearnedExactly) {
  const AttributeSchema schema = scene_grid();
  const Samples s = weather_indicator(schema);
  ASSERT_EQ(s.size(), 441u);
  BoostingParams params;
  params.rounds = 50;
  params.learning_rate = 0.3;
  params.max_depth = 3;
  const BoostedEnsemble model = fit(s, schema, params);
  EXPECT_LT(training_mse(model, s, schema), 1e-4);
  EXPECT_LT(model.training_mse.back(), 1e-4);
}

TEST(Fit, TrainingMseNeverIncreases) {
  const AttributeSchema full = AttributeSchema::finegpr();
  const AttributeSchema grid = scene_grid();
  std::mt19937_64 gen(43);
  std::normal_distribution<double> noise(0.0, 1.0);
  for (int dataset = 0; dataset < 12; ++dataset) {
    const AttributeSchema& schema = dataset % 2 ? full : grid;
    Samples s;
    for (int i = 0; i < 120; ++i) {
      AttributeConfig c = random_config(gen, schema);
      const double y = c.values[0] * 0.5 + c.values[1 % c.values.size()] + noise(gen);
      s.emplace_back(std::move(c), y);
    }
    BoostingParams params;
    params.rounds = 40;
    params.max_depth = 1 + dataset % 6;
    params.lambda = dataset % 3 == 0 ? 0.0 : 1.0;
    params.gamma = dataset % 4 == 0 ? 0.5 : 0.0;
    const BoostedEnsemble model = fit(s, schema, params);
    ASSERT_EQ(model.training_mse.size(), model.trees.size() + 1);
    for (std::size_t r = 1; r < model.training_mse.size(); ++r) {
      EXPECT_LE(model.training_mse[r], model.training_mse[r - 1] + 1e-12)
          << "dataset " << dataset << " round " << r;
    }
    EXPECT_NEAR(model.training_mse.back(), training_mse(model, s, schema), 1e-9);
  }
}

TEST(Fit, TreesRespectStructuralInvariants) {
  const AttributeSchema schema = AttributeSchema::finegpr();
  std::mt19937_64 gen(44);
  Samples s;
  for (int i = 0; i < 200; ++i) {
    AttributeConfig c = random_config(gen, schema);
    const double y = std::sin(c.values[0] * 0.3) + c.values[3] * 0.1;
    s.emplace_back(std::move(c), y);
  }
  BoostingParams params;
  params.max_depth = 3;
  const BoostedEnsemble model = fit(s, schema, params);
  EXPECT_EQ(static_cast<int>(model.trees.size()), params.rounds);
  for (const auto& tree : model.trees) {
    EXPECT_LE(tree.depth(), params.max_depth);
    for (const auto& n : tree.nodes) {
      if (n.feature < 0) continue;
      EXPECT_TRUE(std::isfinite(n.threshold));
      EXPECT_GT(n.gain, 0.0);
      ASSERT_GE(n.left, 0);
      ASSERT_GE(n.right, 0);
      EXPECT_LT(static_cast<std::size_t>(n.left), tree.nodes.size());
      EXPECT_LT(static_cast<std::size_t>(n.right), tree.nodes.size());
    }
  }
}

TEST(Fit, DeterministicAndOrderInvariant) {
  const AttributeSchema schema = AttributeSchema::finegpr();
  std::mt19937_64 gen(45);
  Samples s;
  for (int i = 0; i < 150; ++i) {
    AttributeConfig c = random_config(gen, schema);
    const double y = (c.values[1] == 3 ? 2.0 : 0.0) + c.values[4] + 0.01 * i;
    s.emplace_back(std::move(c), y);
  }
  const BoostedEnsemble a = fit(s, schema, BoostingParams{});
  const BoostedEnsemble b = fit(s, schema, BoostingParams{});
  EXPECT_EQ(a.to_json().dump(), b.to_json().dump());
  Samples shuffled = s;
  std::shuffle(shuffled.begin(), shuffled.end(), gen);
  const BoostedEnsemble c = fit(shuffled, schema, BoostingParams{});
  EXPECT_EQ(a.to_json().dump(), c.to_json().dump());
}

TEST(Fit, RejectsBadInput) {
  const AttributeSchema schema = scene_grid();
  Samples one{{AttributeConfig{{0, 0, 0}}, 1.0}};
  EXPECT_THROW(fit(one, schema, BoostingParams{}), ValidationError);
  Samples nan{{AttributeConfig{{0, 0, 0}}, 1.0}, {AttributeConfig{{1, 0, 0}}, std::nan("")}};
  EXPECT_THROW(fit(nan, schema, BoostingParams{}), ValidationError);
  BoostingParams bad;
  bad.learning_rate = 0.0;
  EXPECT_THROW(bad.validate(), ValidationError);
  bad.learning_rate = 1.5;
  EXPECT_THROW(bad.validate(), ValidationError);
}

TEST(Predict, EmptyEnsembleReturnsBaseScore) {
  const AttributeSchema schema = scene_grid();
  Samples s{{AttributeConfig{{0, 0, 0}}, 1.0}, {AttributeConfig{{1, 2, 3}}, 4.0}};
  BoostingParams params;
  params.rounds = 0;
  const BoostedEnsemble model = fit(s, schema, params);
  EXPECT_TRUE(model.trees.empty());
  EXPECT_EQ(predict(model, AttributeConfig{{6, 6, 8}}, schema), 2.5);
}

TEST(Predict, SingleSplitStraddlingThreshold) {
  BoostedEnsemble model;
  model.base_score = 1.0;
  model.params.learning_rate = 0.5;
  RegressionTree tree;
  tree.nodes = {TreeNode{2, 0.5, 1, 2, 0.0, 3.0}, TreeNode{-1, 0, -1, -1, -2.0, 0},
                TreeNode{-1, 0, -1, -1, 4.0, 0}};
  model.trees.push_back(tree);
  const std::vector<double> below{9, 9, 0.49}, above{-9, -9, 0.5};
  EXPECT_DOUBLE_EQ(model.predict_encoded(below), 0.0);
  EXPECT_DOUBLE_EQ(model.predict_encoded(above), 3.0);
  EXPECT_EQ(tree.depth(), 1);
}

TEST(Predict, MatchesTreeRewalk) {
  const AttributeSchema schema = AttributeSchema::finegpr();
  std::mt19937_64 gen(46);
  Samples s;
  for (int i = 0; i < 200; ++i) {
    AttributeConfig c = random_config(gen, schema);
    const double y = c.values[0] * 0.1 + (c.values[2] > 3 ? 1.0 : -1.0) + c.values[10];
    s.emplace_back(std::move(c), y);
  }
  const BoostedEnsemble model = fit(s, schema, BoostingParams{});
  for (int i = 0; i < 100; ++i) {
    const AttributeConfig c = random_config(gen, schema);
    EXPECT_NEAR(predict(model, c, schema), rewalk(model, encode(c, schema)), 1e-12);
  }
}

TEST(Importance, SingleFeatureModelGetsAllTheShare) {
  const AttributeSchema schema = scene_grid();
  BoostingParams params;
  params.rounds = 20;
  const BoostedEnsemble model = fit(weather_indicator(schema), schema, params);
  for (const auto& tree : model.trees) {
    for (const auto& n : tree.nodes) {
      if (n.feature >= 0) EXPECT_EQ(model.layout.feature_dimension[n.feature], 0);
    }
  }
  const GainReport report = feature_importance(model);
  EXPECT_EQ(report.dimension_names, (std::vector<std::string>{"weather", "illumination", "background"}));
  EXPECT_DOUBLE_EQ(report.dimension_share[0], 1.0);
  EXPECT_EQ(report.ranking().front(), "weather");
}

TEST(Importance, SharesFormADistribution) {
  const AttributeSchema schema = AttributeSchema::finegpr();
  std::mt19937_64 gen(47);
  Samples s;
  for (int i = 0; i < 150; ++i) {
    AttributeConfig c = random_config(gen, schema);
    const double y = c.values[3] * 2.0 + c.values[2] + c.values[6] * 0.5;
    s.emplace_back(std::move(c), y);
  }
  const GainReport report = feature_importance(fit(s, schema, BoostingParams{}));
  ASSERT_EQ(report.dimension_share.size(), schema.size());
  double sum = 0.0;
  for (double share : report.dimension_share) {
    EXPECT_GE(share, 0.0);
    EXPECT_LE(share, 1.0);
    sum += share;
  }
  EXPECT_NEAR(sum, 1.0, 1e-9);
  for (double g : report.feature_gain) EXPECT_GE(g, 0.0);
  const std::string csv = report.to_csv();
  EXPECT_EQ(csv.substr(0, csv.find('\n')), "dimension,gain,share");
}

TEST(Persistence, SaveLoadRoundTrip) {
  const AttributeSchema schema = AttributeSchema::finegpr();
  std::mt19937_64 gen(48);
  Samples s;
  for (int i = 0; i < 80; ++i) {
    AttributeConfig c = random_config(gen, schema);
    const double y = c.values[0] + 0.3 * c.values[5];
    s.emplace_back(std::move(c), y);
  }
  const BoostedEnsemble model = fit(s, schema, BoostingParams{});
  const auto path = std::filesystem::temp_directory_path() / "aost_test_model.json";
  save_model(path, model);
  const BoostedEnsemble back = load_model(path);
  for (int i = 0; i < 50; ++i) {
    const AttributeConfig c = random_config(gen, schema);
    EXPECT_EQ(predict(back, c, schema), predict(model, c, schema));
  }
  EXPECT_EQ(back.to_json().dump(), model.to_json().dump());
}
