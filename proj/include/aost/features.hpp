#pragma once

#include <cstdint>
#include <filesystem>
#include <span>
#include <vector>

#include "aost/scenegen.hpp"

namespace aost {

/// Shape of the seeded filter-bank extractor.
struct ExtractorSpec {
  std::vector<int> filters{8, 12, 16, 24, 32};  // N_l per layer
  int kernel = 3;                               // odd, square
  std::uint64_t seed = 0x5eedf11e;

  std::size_t layers() const { return filters.size(); }
  /// Throws ValidationError on an empty layer list, a non-positive filter
  /// count or an even/non-positive kernel size.
  void validate() const;
};

/// Responses of one layer: values[i * positions() + j] is filter i at
/// position j (row-major over the layer's width x height grid).
struct FeatureMap {
  int layer = 0;
  int filters = 0;
  int width = 0;
  int height = 0;
  std::vector<float> values;

  std::size_t positions() const { return static_cast<std::size_t>(width) * height; }
  float at(std::size_t i, std::size_t j) const { return values[i * positions() + j]; }
  std::span<const float> row(std::size_t i) const {
    return {values.data() + i * positions(), positions()};
  }
  bool same_shape(const FeatureMap& other) const {
    return layer == other.layer && filters == other.filters && positions() == other.positions();
  }
};

struct FeaturePyramid {
  std::vector<FeatureMap> maps;
  std::vector<double> weights;  // per-layer style weight w_l

  /// Equal weights summing to one.
  static std::vector<double> default_weights(std::size_t layers);
};

/// Symmetric N x N inner-product matrix of one layer's filter responses.
struct GramMatrix {
  int layer = 0;
  int size = 0;
  std::vector<double> entries;

  double at(std::size_t i, std::size_t j) const { return entries[i * size + j]; }
};

/// Seeded convolution weights for every layer; filter i of layer l has
/// kernel*kernel*in_channels weights ordered (channel, dy, dx).
class FilterBank {
 public:
  explicit FilterBank(const ExtractorSpec& spec);

  const ExtractorSpec& spec() const { return spec_; }
  int in_channels(std::size_t layer) const;
  std::span<const float> weights(std::size_t layer, std::size_t filter) const;
  /// Sum of absolute weights of one filter.
  double l1_norm(std::size_t layer, std::size_t filter) const;

 private:
  ExtractorSpec spec_;
  std::vector<std::vector<float>> weights_;  // per layer, filters contiguous
};

/// Layer 0 is the rectified convolution of pixel/255; layer l+1 is the
/// rectified convolution of the 2x average-pooled layer l. Zero padding keeps
/// each layer at (width / 2^l) x (height / 2^l). Filters of one layer may be
/// spread over `threads` workers; the result does not depend on it.
/// Throws ShapeError when width or height is not divisible by 2^L.
FeaturePyramid extract(const SceneImage& image, const FilterBank& bank, int threads = 1);
FeaturePyramid extract(const SceneImage& image, const ExtractorSpec& spec, int threads = 1);

/// G = F F^T, summed over positions in ascending order.
GramMatrix gram(const FeatureMap& map);

/// Binary cache: "FGPR", u16 version, u32 L, then per layer u32 (l, N_l, M_l)
/// and N_l * M_l little-endian float32 values. Maps read back are flattened
/// to width M_l, height 1.
void write_feature_cache(const std::filesystem::path& path, const FeaturePyramid& pyramid);
FeaturePyramid read_feature_cache(const std::filesystem::path& path);

inline constexpr std::uint16_t kFeatureCacheVersion = 1;

}  // namespace aost
