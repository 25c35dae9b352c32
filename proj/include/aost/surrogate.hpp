#pragma once

#include <filesystem>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include <nlohmann/json.hpp>

#include "aost/schema.hpp"

namespace aost {

/// Where each schema dimension lands in the encoded feature vector.
/// Categorical dimensions come first as one-hot blocks (schema order), then a
/// (sin, cos) pair per circular dimension, then one 0/1 entry per binary flag.
struct EncodingLayout {
  std::vector<std::string> feature_names;
  std::vector<int> feature_dimension;  // schema dimension index per feature
  std::vector<std::string> dimension_names;

  static EncodingLayout for_schema(const AttributeSchema& schema);
  std::size_t size() const { return feature_names.size(); }
};

/// Throws SchemaError when the config does not fit the schema.
std::vector<double> encode(const AttributeConfig& config, const AttributeSchema& schema);

struct BoostingParams {
  int rounds = 100;
  double learning_rate = 0.3;  // eta
  int max_depth = 4;
  double lambda = 1.0;
  double gamma = 0.0;

  void validate() const;
};

struct TreeNode {
  int feature = -1;  // -1 marks a leaf
  double threshold = 0.0;
  int left = -1;
  int right = -1;
  double value = 0.0;  // leaf weight
  double gain = 0.0;   // split gain, internal nodes only
};

/// Binary regression tree; nodes[0] is the root. A sample goes left when
/// x[feature] < threshold.
struct RegressionTree {
  std::vector<TreeNode> nodes;

  double predict(std::span<const double> x) const;
  int depth() const;
};

struct BoostedEnsemble {
  BoostingParams params;
  double base_score = 0.0;
  std::vector<RegressionTree> trees;
  EncodingLayout layout;
  /// Training MSE before the first tree and after each round.
  std::vector<double> training_mse;
  /// Smallest and largest training target.
  double target_min = 0.0;
  double target_max = 0.0;

  double predict_encoded(std::span<const double> x) const;
  double predict(const AttributeConfig& config, const AttributeSchema& schema) const;
  double target_range() const { return target_max - target_min; }
  bool has_splits() const;

  nlohmann::json to_json() const;
  static BoostedEnsemble from_json(const nlohmann::json& doc);
};

/// Exact-greedy squared-error boosting on an already encoded design matrix.
/// Rows are put into a canonical order first, so the result does not depend
/// on the order samples are given in. Throws ValidationError with fewer than
/// two samples, ragged rows or non-finite targets.
BoostedEnsemble fit_encoded(std::span<const std::vector<double>> rows,
                            std::span<const double> targets, const BoostingParams& params,
                            EncodingLayout layout = {});

BoostedEnsemble fit(std::span<const std::pair<AttributeConfig, double>> samples,
                    const AttributeSchema& schema, const BoostingParams& params);

double predict(const BoostedEnsemble& model, const AttributeConfig& config,
               const AttributeSchema& schema);

struct GainReport {
  std::vector<std::string> feature_names;
  std::vector<double> feature_gain;
  std::vector<std::string> dimension_names;
  std::vector<double> dimension_gain;
  std::vector<double> dimension_share;  // sums to 1 when any split exists

  /// Dimension names ordered by decreasing share (ties by schema order).
  std::vector<std::string> ranking() const;
  std::string to_csv() const;
};

GainReport feature_importance(const BoostedEnsemble& model);

void save_model(const std::filesystem::path& path, const BoostedEnsemble& model);
BoostedEnsemble load_model(const std::filesystem::path& path);

}  // namespace aost
