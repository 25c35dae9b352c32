#include "aost/schema.hpp"

#include <limits>
#include <set>
#include <sstream>

#include "aost/error.hpp"

namespace aost {

std::string_view to_string(DimensionKind kind) {
  switch (kind) {
    case DimensionKind::kCategorical:
      return "categorical";
    case DimensionKind::kCircular:
      return "circular";
    case DimensionKind::kBinaryFlag:
      return "binary-flag";
  }
  return "categorical";
}

DimensionKind dimension_kind_from_string(std::string_view text) {
  if (text == "categorical") return DimensionKind::kCategorical;
  if (text == "circular") return DimensionKind::kCircular;
  if (text == "binary-flag") return DimensionKind::kBinaryFlag;
  throw SchemaError("unknown dimension kind '" + std::string(text) + "'");
}

AttributeSchema::AttributeSchema(std::vector<Dimension> dimensions)
    : dimensions_(std::move(dimensions)) {
  if (dimensions_.empty()) throw SchemaError("schema needs at least one dimension");
  std::set<std::string> seen;
  for (const auto& d : dimensions_) {
    if (d.name.empty()) throw SchemaError("dimension with empty name");
    if (!seen.insert(d.name).second) throw SchemaError("duplicate dimension '" + d.name + "'");
    if (d.cardinality < 2) {
      throw SchemaError("dimension '" + d.name + "' has cardinality " +
                        std::to_string(d.cardinality) + " (< 2)");
    }
    if (d.kind == DimensionKind::kBinaryFlag && d.cardinality != 2) {
      throw SchemaError("binary-flag dimension '" + d.name + "' must have cardinality 2");
    }
  }
}

const std::vector<std::string>& identity_flag_names() {
  static const std::vector<std::string> names = {
      "hat",    "backpack",     "glasses", "shoulder_bag", "dress",    "long_hair", "shorts",
      "sleeves", "jacket",      "boots",   "handbag",      "umbrella", "mask"};
  return names;
}

const std::vector<std::string>& illumination_names() {
  static const std::vector<std::string> names = {"midnight", "dawn", "forenoon", "noon",
                                                 "afternoon", "dusk", "night"};
  return names;
}

const std::vector<std::string>& weather_names() {
  static const std::vector<std::string> names = {"sunny", "clouds",   "overcast", "foggy",
                                                 "neutral", "blizzard", "snowlight"};
  return names;
}

const std::vector<std::string>& background_names() {
  static const std::vector<std::string> names = {"street", "mall",   "school", "park", "mountain",
                                                 "beach",  "forest", "plaza",  "tunnel"};
  return names;
}

AttributeSchema AttributeSchema::finegpr() {
  std::vector<Dimension> dims = {
      {"viewpoint", 36, DimensionKind::kCircular},
      {"weather", 7, DimensionKind::kCategorical},
      {"illumination", 7, DimensionKind::kCategorical},
      {"background", 9, DimensionKind::kCategorical},
  };
  for (const auto& flag : identity_flag_names()) {
    dims.push_back({flag, 2, DimensionKind::kBinaryFlag});
  }
  return AttributeSchema(std::move(dims));
}

std::optional<std::size_t> AttributeSchema::index_of(std::string_view name) const {
  for (std::size_t i = 0; i < dimensions_.size(); ++i) {
    if (dimensions_[i].name == name) return i;
  }
  return std::nullopt;
}

bool AttributeSchema::is_valid(const AttributeConfig& config) const {
  if (config.values.size() != dimensions_.size()) return false;
  for (std::size_t i = 0; i < dimensions_.size(); ++i) {
    if (config.values[i] < 0 || config.values[i] >= dimensions_[i].cardinality) return false;
  }
  return true;
}

void AttributeSchema::validate(const AttributeConfig& config) const {
  if (config.values.size() != dimensions_.size()) {
    throw SchemaError("config has " + std::to_string(config.values.size()) +
                      " values, schema has " + std::to_string(dimensions_.size()) +
                      " dimensions");
  }
  for (std::size_t i = 0; i < dimensions_.size(); ++i) {
    const int v = config.values[i];
    if (v < 0 || v >= dimensions_[i].cardinality) {
      throw SchemaError("dimension '" + dimensions_[i].name + "' index " + std::to_string(v) +
                        " outside [0, " + std::to_string(dimensions_[i].cardinality) + ")");
    }
  }
}

std::uint64_t AttributeSchema::config_count() const {
  std::uint64_t count = 1;
  constexpr auto kMax = std::numeric_limits<std::uint64_t>::max();
  for (const auto& d : dimensions_) {
    const auto c = static_cast<std::uint64_t>(d.cardinality);
    if (count > kMax / c) return kMax;
    count *= c;
  }
  return count;
}

double AttributeSchema::similarity(const AttributeConfig& a, const AttributeConfig& b) const {
  std::size_t same = 0;
  for (std::size_t i = 0; i < dimensions_.size(); ++i) {
    if (a.values.at(i) == b.values.at(i)) ++same;
  }
  return static_cast<double>(same) / static_cast<double>(dimensions_.size());
}

nlohmann::json AttributeSchema::to_json() const {
  auto doc = nlohmann::json::array();
  for (const auto& d : dimensions_) {
    doc.push_back({{"name", d.name}, {"cardinality", d.cardinality}, {"kind", to_string(d.kind)}});
  }
  return doc;
}

AttributeSchema AttributeSchema::from_json(const nlohmann::json& doc) {
  if (!doc.is_array()) throw SchemaError("schema document must be a JSON array");
  std::vector<Dimension> dims;
  for (const auto& entry : doc) {
    try {
      dims.push_back({entry.at("name").get<std::string>(), entry.at("cardinality").get<int>(),
                      dimension_kind_from_string(entry.at("kind").get<std::string>())});
    } catch (const nlohmann::json::exception& e) {
      throw SchemaError(std::string("malformed schema entry: ") + e.what());
    }
  }
  return AttributeSchema(std::move(dims));
}

std::string format_config(const AttributeSchema& schema, const AttributeConfig& config) {
  std::ostringstream out;
  for (std::size_t i = 0; i < schema.size() && i < config.values.size(); ++i) {
    if (i) out << ' ';
    out << schema[i].name << '=' << config.values[i];
  }
  return out.str();
}

}  // namespace aost
