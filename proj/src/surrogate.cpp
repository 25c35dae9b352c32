#include "aost/surrogate.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <numeric>
#include <sstream>

#include "aost/error.hpp"
#include "aost/format.hpp"

namespace aost {

EncodingLayout EncodingLayout::for_schema(const AttributeSchema& schema) {
  EncodingLayout layout;
  for (const auto& d : schema.dimensions()) layout.dimension_names.push_back(d.name);
  for (std::size_t d = 0; d < schema.size(); ++d) {
    if (schema[d].kind != DimensionKind::kCategorical) continue;
    for (int v = 0; v < schema[d].cardinality; ++v) {
      layout.feature_names.push_back(schema[d].name + "=" + std::to_string(v));
      layout.feature_dimension.push_back(static_cast<int>(d));
    }
  }
  for (std::size_t d = 0; d < schema.size(); ++d) {
    if (schema[d].kind != DimensionKind::kCircular) continue;
    layout.feature_names.push_back(schema[d].name + ".sin");
    layout.feature_dimension.push_back(static_cast<int>(d));
    layout.feature_names.push_back(schema[d].name + ".cos");
    layout.feature_dimension.push_back(static_cast<int>(d));
  }
  for (std::size_t d = 0; d < schema.size(); ++d) {
    if (schema[d].kind != DimensionKind::kBinaryFlag) continue;
    layout.feature_names.push_back(schema[d].name);
    layout.feature_dimension.push_back(static_cast<int>(d));
  }
  return layout;
}

std::vector<double> encode(const AttributeConfig& config, const AttributeSchema& schema) {
  schema.validate(config);
  std::vector<double> out;
  for (std::size_t d = 0; d < schema.size(); ++d) {
    if (schema[d].kind != DimensionKind::kCategorical) continue;
    for (int v = 0; v < schema[d].cardinality; ++v) out.push_back(v == config.values[d] ? 1.0 : 0.0);
  }
  for (std::size_t d = 0; d < schema.size(); ++d) {
    if (schema[d].kind != DimensionKind::kCircular) continue;
    const double degrees = 360.0 * config.values[d] / schema[d].cardinality;
    const double rad = degrees * std::numbers::pi / 180.0;
    out.push_back(std::sin(rad));
    out.push_back(std::cos(rad));
  }
  for (std::size_t d = 0; d < schema.size(); ++d) {
    if (schema[d].kind != DimensionKind::kBinaryFlag) continue;
    out.push_back(config.values[d] ? 1.0 : 0.0);
  }
  return out;
}

void BoostingParams::validate() const {
  if (rounds < 0) throw ValidationError("rounds must be >= 0");
  if (!(learning_rate > 0.0 && learning_rate <= 1.0)) {
    throw ValidationError("learning rate must lie in (0, 1]");
  }
  if (max_depth < 0) throw ValidationError("max_depth must be >= 0");
  if (!(lambda >= 0.0)) throw ValidationError("lambda must be >= 0");
  if (!(gamma >= 0.0)) throw ValidationError("gamma must be >= 0");
}

double RegressionTree::predict(std::span<const double> x) const {
  int idx = 0;
  while (nodes[static_cast<std::size_t>(idx)].feature >= 0) {
    const auto& n = nodes[static_cast<std::size_t>(idx)];
    idx = x[static_cast<std::size_t>(n.feature)] < n.threshold ? n.left : n.right;
  }
  return nodes[static_cast<std::size_t>(idx)].value;
}

int RegressionTree::depth() const {
  if (nodes.empty()) return 0;
  std::vector<std::pair<int, int>> stack{{0, 0}};
  int deepest = 0;
  while (!stack.empty()) {
    auto [idx, d] = stack.back();
    stack.pop_back();
    deepest = std::max(deepest, d);
    const auto& n = nodes[static_cast<std::size_t>(idx)];
    if (n.feature >= 0) {
      stack.push_back({n.left, d + 1});
      stack.push_back({n.right, d + 1});
    }
  }
  return deepest;
}

double BoostedEnsemble::predict_encoded(std::span<const double> x) const {
  double sum = 0.0;
  for (const auto& t : trees) sum += t.predict(x);
  return base_score + params.learning_rate * sum;
}

double BoostedEnsemble::predict(const AttributeConfig& config, const AttributeSchema& schema) const {
  return predict_encoded(encode(config, schema));
}

bool BoostedEnsemble::has_splits() const {
  for (const auto& t : trees) {
    if (!t.nodes.empty() && t.nodes[0].feature >= 0) return true;
  }
  return false;
}

double predict(const BoostedEnsemble& model, const AttributeConfig& config,
               const AttributeSchema& schema) {
  return model.predict(config, schema);
}

namespace {

struct SplitChoice {
  int feature = -1;
  double threshold = 0.0;
  double gain = 0.0;
};

class TreeBuilder {
 public:
  TreeBuilder(const std::vector<double>& x, std::size_t n, std::size_t d,
              const std::vector<std::vector<std::size_t>>& sorted, const BoostingParams& params)
      : x_(x), n_(n), d_(d), sorted_(sorted), params_(params), node_of_(n, 0) {}

  RegressionTree build(const std::vector<double>& grad) {
    grad_ = &grad;
    tree_ = {};
    std::fill(node_of_.begin(), node_of_.end(), 0);
    std::vector<std::size_t> all(n_);
    std::iota(all.begin(), all.end(), std::size_t{0});
    grow(all, 0);
    return std::move(tree_);
  }

 private:
  double feature(std::size_t row, std::size_t f) const { return x_[row * d_ + f]; }

  double score(double g, double h) const { return g * g / (h + params_.lambda); }

  int grow(const std::vector<std::size_t>& members, int depth) {
    const int id = static_cast<int>(tree_.nodes.size());
    tree_.nodes.push_back({});
    for (std::size_t i : members) node_of_[i] = id;

    double g_total = 0.0;
    for (std::size_t i : members) g_total += (*grad_)[i];
    const double h_total = static_cast<double>(members.size());

    SplitChoice best;
    if (depth < params_.max_depth && members.size() >= 2) best = find_split(id, g_total, h_total);

    if (best.feature < 0) {
      tree_.nodes[static_cast<std::size_t>(id)].value = -g_total / (h_total + params_.lambda);
      return id;
    }
    std::vector<std::size_t> left, right;
    for (std::size_t i : members) {
      (feature(i, static_cast<std::size_t>(best.feature)) < best.threshold ? left : right).push_back(i);
    }
    const int l = grow(left, depth + 1);
    const int r = grow(right, depth + 1);
    auto& node = tree_.nodes[static_cast<std::size_t>(id)];
    node.feature = best.feature;
    node.threshold = best.threshold;
    node.gain = best.gain;
    node.left = l;
    node.right = r;
    return id;
  }

  SplitChoice find_split(int id, double g_total, double h_total) const {
    SplitChoice best;
    const double parent = score(g_total, h_total);
    for (std::size_t f = 0; f < d_; ++f) {
      double g_left = 0.0;
      double h_left = 0.0;
      bool have_prev = false;
      double prev = 0.0;
      for (std::size_t row : sorted_[f]) {
        if (node_of_[row] != id) continue;
        const double v = feature(row, f);
        if (have_prev && v != prev) {
          const double gain = 0.5 * (score(g_left, h_left) +
                                     score(g_total - g_left, h_total - h_left) - parent) -
                              params_.gamma;
          if (gain > best.gain) {
            double threshold = prev + (v - prev) * 0.5;
            if (!(threshold > prev)) threshold = v;
            best = {static_cast<int>(f), threshold, gain};
          }
        }
        g_left += (*grad_)[row];
        h_left += 1.0;
        prev = v;
        have_prev = true;
      }
    }
    return best;
  }

  const std::vector<double>& x_;
  std::size_t n_;
  std::size_t d_;
  const std::vector<std::vector<std::size_t>>& sorted_;
  BoostingParams params_;
  std::vector<int> node_of_;
  const std::vector<double>* grad_ = nullptr;
  RegressionTree tree_;
};

double mean_squared_error(const std::vector<double>& pred, const std::vector<double>& y) {
  double sum = 0.0;
  for (std::size_t i = 0; i < y.size(); ++i) {
    const double e = pred[i] - y[i];
    sum += e * e;
  }
  return sum / static_cast<double>(y.size());
}

}  // namespace

BoostedEnsemble fit_encoded(std::span<const std::vector<double>> rows,
                            std::span<const double> targets, const BoostingParams& params,
                            EncodingLayout layout) {
  params.validate();
  if (rows.size() != targets.size()) throw ValidationError("rows and targets differ in length");
  if (rows.size() < 2) throw ValidationError("surrogate needs at least two samples");
  const std::size_t n = rows.size();
  const std::size_t d = rows[0].size();
  for (const auto& r : rows) {
    if (r.size() != d) throw ValidationError("ragged design matrix");
    for (double v : r) {
      if (!std::isfinite(v)) throw ValidationError("non-finite feature value");
    }
  }
  for (double t : targets) {
    if (!std::isfinite(t)) throw ValidationError("non-finite training target");
  }
  if (layout.feature_names.empty()) {
    for (std::size_t f = 0; f < d; ++f) {
      layout.feature_names.push_back("f" + std::to_string(f));
      layout.feature_dimension.push_back(static_cast<int>(f));
      layout.dimension_names.push_back("f" + std::to_string(f));
    }
  }
  if (layout.size() != d) throw ValidationError("encoding layout does not match design matrix");

  // Canonical sample order: lexicographic on (features, target).
  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
    if (rows[a] != rows[b]) return rows[a] < rows[b];
    return targets[a] < targets[b];
  });
  std::vector<double> x(n * d);
  std::vector<double> y(n);
  for (std::size_t i = 0; i < n; ++i) {
    std::copy(rows[order[i]].begin(), rows[order[i]].end(), x.begin() + static_cast<std::ptrdiff_t>(i * d));
    y[i] = targets[order[i]];
  }

  std::vector<std::vector<std::size_t>> sorted(d, std::vector<std::size_t>(n));
  for (std::size_t f = 0; f < d; ++f) {
    std::iota(sorted[f].begin(), sorted[f].end(), std::size_t{0});
    std::stable_sort(sorted[f].begin(), sorted[f].end(),
                     [&](std::size_t a, std::size_t b) { return x[a * d + f] < x[b * d + f]; });
  }

  BoostedEnsemble model;
  model.params = params;
  model.layout = std::move(layout);
  model.base_score = std::accumulate(y.begin(), y.end(), 0.0) / static_cast<double>(n);
  model.target_min = *std::min_element(y.begin(), y.end());
  model.target_max = *std::max_element(y.begin(), y.end());

  std::vector<double> pred(n, model.base_score);
  std::vector<double> grad(n);
  model.training_mse.push_back(mean_squared_error(pred, y));
  TreeBuilder builder(x, n, d, sorted, params);
  for (int round = 0; round < params.rounds; ++round) {
    for (std::size_t i = 0; i < n; ++i) grad[i] = pred[i] - y[i];
    RegressionTree tree = builder.build(grad);
    for (std::size_t i = 0; i < n; ++i) {
      pred[i] += params.learning_rate *
                 tree.predict(std::span<const double>(x.data() + i * d, d));
    }
    model.trees.push_back(std::move(tree));
    model.training_mse.push_back(mean_squared_error(pred, y));
  }
  return model;
}

BoostedEnsemble fit(std::span<const std::pair<AttributeConfig, double>> samples,
                    const AttributeSchema& schema, const BoostingParams& params) {
  if (samples.empty()) throw ValidationError("surrogate needs training samples");
  std::vector<std::vector<double>> rows;
  std::vector<double> targets;
  rows.reserve(samples.size());
  for (const auto& [config, target] : samples) {
    rows.push_back(encode(config, schema));
    targets.push_back(target);
  }
  return fit_encoded(rows, targets, params, EncodingLayout::for_schema(schema));
}

// Feature importance ---------------------------------------------------------

GainReport feature_importance(const BoostedEnsemble& model) {
  GainReport report;
  report.feature_names = model.layout.feature_names;
  report.dimension_names = model.layout.dimension_names;
  report.feature_gain.assign(report.feature_names.size(), 0.0);
  report.dimension_gain.assign(report.dimension_names.size(), 0.0);
  for (const auto& tree : model.trees) {
    for (const auto& node : tree.nodes) {
      if (node.feature < 0) continue;
      report.feature_gain[static_cast<std::size_t>(node.feature)] += node.gain;
    }
  }
  for (std::size_t f = 0; f < report.feature_gain.size(); ++f) {
    report.dimension_gain[static_cast<std::size_t>(model.layout.feature_dimension[f])] +=
        report.feature_gain[f];
  }
  const double total =
      std::accumulate(report.dimension_gain.begin(), report.dimension_gain.end(), 0.0);
  report.dimension_share.assign(report.dimension_gain.size(), 0.0);
  if (total > 0.0) {
    for (std::size_t i = 0; i < report.dimension_gain.size(); ++i) {
      report.dimension_share[i] = report.dimension_gain[i] / total;
    }
  }
  return report;
}

std::vector<std::string> GainReport::ranking() const {
  std::vector<std::size_t> idx(dimension_names.size());
  std::iota(idx.begin(), idx.end(), std::size_t{0});
  std::stable_sort(idx.begin(), idx.end(),
                   [&](std::size_t a, std::size_t b) { return dimension_share[a] > dimension_share[b]; });
  std::vector<std::string> out;
  for (std::size_t i : idx) out.push_back(dimension_names[i]);
  return out;
}

std::string GainReport::to_csv() const {
  std::ostringstream out;
  out << "dimension,gain,share\n";
  for (std::size_t i = 0; i < dimension_names.size(); ++i) {
    out << dimension_names[i] << ',' << format_double(dimension_gain[i]) << ','
        << format_double(dimension_share[i]) << '\n';
  }
  return out.str();
}

// Persistence ----------------------------------------------------------------

namespace {

nlohmann::ordered_json node_to_json(const RegressionTree& tree, int idx) {
  const auto& n = tree.nodes[static_cast<std::size_t>(idx)];
  nlohmann::ordered_json j;
  if (n.feature < 0) {
    j["leaf"] = n.value;
    return j;
  }
  j["feature"] = n.feature;
  j["threshold"] = n.threshold;
  j["gain"] = n.gain;
  j["left"] = node_to_json(tree, n.left);
  j["right"] = node_to_json(tree, n.right);
  return j;
}

int node_from_json(RegressionTree& tree, const nlohmann::json& j) {
  const int id = static_cast<int>(tree.nodes.size());
  tree.nodes.push_back({});
  if (j.contains("leaf")) {
    tree.nodes[static_cast<std::size_t>(id)].value = j.at("leaf").get<double>();
    return id;
  }
  TreeNode n;
  n.feature = j.at("feature").get<int>();
  n.threshold = j.at("threshold").get<double>();
  n.gain = j.at("gain").get<double>();
  n.left = node_from_json(tree, j.at("left"));
  n.right = node_from_json(tree, j.at("right"));
  tree.nodes[static_cast<std::size_t>(id)] = n;
  return id;
}

}  // namespace

nlohmann::json BoostedEnsemble::to_json() const {
  nlohmann::ordered_json doc;
  doc["params"] = {{"rounds", params.rounds},
                   {"learning_rate", params.learning_rate},
                   {"max_depth", params.max_depth},
                   {"lambda", params.lambda},
                   {"gamma", params.gamma}};
  doc["base_score"] = base_score;
  doc["target_min"] = target_min;
  doc["target_max"] = target_max;
  doc["layout"] = {{"feature_names", layout.feature_names},
                   {"feature_dimension", layout.feature_dimension},
                   {"dimension_names", layout.dimension_names}};
  doc["training_mse"] = training_mse;
  auto trees_json = nlohmann::ordered_json::array();
  for (const auto& t : trees) trees_json.push_back(node_to_json(t, 0));
  doc["trees"] = std::move(trees_json);
  return doc;
}

BoostedEnsemble BoostedEnsemble::from_json(const nlohmann::json& doc) {
  try {
    BoostedEnsemble m;
    const auto& p = doc.at("params");
    m.params.rounds = p.at("rounds").get<int>();
    m.params.learning_rate = p.at("learning_rate").get<double>();
    m.params.max_depth = p.at("max_depth").get<int>();
    m.params.lambda = p.at("lambda").get<double>();
    m.params.gamma = p.at("gamma").get<double>();
    m.base_score = doc.at("base_score").get<double>();
    m.target_min = doc.value("target_min", 0.0);
    m.target_max = doc.value("target_max", 0.0);
    const auto& l = doc.at("layout");
    m.layout.feature_names = l.at("feature_names").get<std::vector<std::string>>();
    m.layout.feature_dimension = l.at("feature_dimension").get<std::vector<int>>();
    m.layout.dimension_names = l.at("dimension_names").get<std::vector<std::string>>();
    m.training_mse = doc.value("training_mse", std::vector<double>{});
    for (const auto& t : doc.at("trees")) {
      RegressionTree tree;
      node_from_json(tree, t);
      m.trees.push_back(std::move(tree));
    }
    return m;
  } catch (const nlohmann::json::exception& e) {
    throw ValidationError(std::string("malformed model document: ") + e.what());
  }
}

void save_model(const std::filesystem::path& path, const BoostedEnsemble& model) {
  write_text_atomic(path, model.to_json().dump(1) + "\n");
}

BoostedEnsemble load_model(const std::filesystem::path& path) {
  try {
    return BoostedEnsemble::from_json(nlohmann::json::parse(read_text(path)));
  } catch (const nlohmann::json::parse_error& e) {
    throw IoError("cannot parse model " + path.string() + ": " + e.what());
  }
}

}  // namespace aost
