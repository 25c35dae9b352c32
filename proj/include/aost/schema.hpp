#pragma once

#include <compare>
#include <cstdint>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include <nlohmann/json.hpp>

namespace aost {

enum class DimensionKind { kCategorical, kCircular, kBinaryFlag };

std::string_view to_string(DimensionKind kind);
DimensionKind dimension_kind_from_string(std::string_view text);

struct Dimension {
  std::string name;
  int cardinality = 2;
  DimensionKind kind = DimensionKind::kCategorical;

  bool operator==(const Dimension&) const = default;
};

/// One integer index per schema dimension.
struct AttributeConfig {
  std::vector<int> values;

  auto operator<=>(const AttributeConfig&) const = default;
  bool operator==(const AttributeConfig&) const = default;
};

/// Ordered list of attribute dimensions a generator can be driven by.
class AttributeSchema {
 public:
  AttributeSchema() = default;
  /// Throws SchemaError on an empty list, duplicate names or cardinality < 2.
  explicit AttributeSchema(std::vector<Dimension> dimensions);

  /// viewpoint(36, circular), weather(7), illumination(7), background(9) and
  /// 13 identity-level binary flags.
  static AttributeSchema finegpr();

  const std::vector<Dimension>& dimensions() const { return dimensions_; }
  std::size_t size() const { return dimensions_.size(); }
  const Dimension& operator[](std::size_t i) const { return dimensions_[i]; }
  std::optional<std::size_t> index_of(std::string_view name) const;

  bool is_valid(const AttributeConfig& config) const;
  /// Throws SchemaError naming the first offending dimension.
  void validate(const AttributeConfig& config) const;

  /// Number of distinct configurations, saturating at UINT64_MAX.
  std::uint64_t config_count() const;

  /// Fraction of dimensions on which two configs agree.
  double similarity(const AttributeConfig& a, const AttributeConfig& b) const;

  nlohmann::json to_json() const;
  static AttributeSchema from_json(const nlohmann::json& doc);

  bool operator==(const AttributeSchema&) const = default;

 private:
  std::vector<Dimension> dimensions_;
};

/// Identity-level flag names of the default schema, in schema order.
const std::vector<std::string>& identity_flag_names();

/// Illumination and weather category names of the default schema.
const std::vector<std::string>& illumination_names();
const std::vector<std::string>& weather_names();
const std::vector<std::string>& background_names();

std::string format_config(const AttributeSchema& schema, const AttributeConfig& config);

}  // namespace aost
