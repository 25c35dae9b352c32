#pragma once

#include <array>
#include <cstdint>
#include <filesystem>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "aost/rng.hpp"
#include "aost/schema.hpp"

namespace aost {

enum class Domain { kSynthetic, kTarget };

struct Provenance {
  std::optional<AttributeConfig> config;
  std::int64_t identity = 0;
  Domain domain = Domain::kSynthetic;
};

/// 8-bit RGB image, row-major, three bytes per pixel.
struct SceneImage {
  int width = 0;
  int height = 0;
  std::vector<std::uint8_t> rgb;
  Provenance provenance;

  SceneImage() = default;
  SceneImage(int w, int h) : width(w), height(h), rgb(static_cast<std::size_t>(w) * h * 3, 0) {}

  std::size_t pixel_count() const { return static_cast<std::size_t>(width) * height; }
  std::uint8_t& at(int x, int y, int c) {
    return rgb[(static_cast<std::size_t>(y) * width + x) * 3 + c];
  }
  std::uint8_t at(int x, int y, int c) const {
    return rgb[(static_cast<std::size_t>(y) * width + x) * 3 + c];
  }
};

struct RenderOptions {
  int width = 64;
  int height = 128;
};

/// Renders one person-scene image. Pure function of its arguments.
/// Dimensions are looked up by name (viewpoint, weather, illumination,
/// background and the identity flags); a schema may omit any of them, in
/// which case the neutral value is used. Throws SchemaError on an invalid
/// config.
SceneImage render(const AttributeSchema& schema, const AttributeConfig& config,
                  std::int64_t identity, std::uint64_t seed, const RenderOptions& options = {});

/// Photometric gap between synthetic renders and the target domain.
struct StyleShift {
  double gamma = 1.0;
  std::array<double, 3> channel_bias{0.0, 0.0, 0.0};
};

/// Per-channel gamma then bias, rounded and clamped to [0, 255].
void apply_style_shift(SceneImage& image, const StyleShift& shift);

/// Hidden distribution of the target domain over attribute configs.
struct TargetDistribution {
  std::vector<std::vector<double>> probabilities;  // one vector per schema dimension
  StyleShift style_shift;

  /// Throws ValidationError when the vectors do not match the schema, do not
  /// sum to 1 within 1e-9, or the shift is outside gamma in [0.5, 2] and
  /// bias in [-32, 32].
  void validate(const AttributeSchema& schema) const;

  static TargetDistribution uniform(const AttributeSchema& schema);
  /// All mass on one config.
  static TargetDistribution degenerate(const AttributeSchema& schema,
                                       const AttributeConfig& config);

  AttributeConfig sample(Rng& rng) const;
};

/// Draws n configs i.i.d. from dist, renders each and applies the style shift.
std::vector<SceneImage> sample_target_domain(const AttributeSchema& schema,
                                             const TargetDistribution& dist, std::size_t n,
                                             std::uint64_t seed, const RenderOptions& options = {},
                                             int threads = 1);

/// One catalog entry. The image is either persisted at `path` or reproduced by
/// re-rendering (config, identity, seed).
struct CatalogRecord {
  AttributeConfig config;
  std::int64_t identity = 0;
  std::uint64_t seed = 0;
  std::filesystem::path path;
};

struct SyntheticCatalog {
  AttributeSchema schema;
  RenderOptions options;
  std::vector<CatalogRecord> records;

  /// Loads the image from disk when a path is set, otherwise re-renders it.
  SceneImage load(std::size_t index) const;
  SceneImage load(const CatalogRecord& record) const;
  std::vector<AttributeConfig> distinct_configs() const;
};

/// |configs| * k records, identities assigned round-robin over
/// `identity_count` identities. When image_dir is set, every image is written
/// there as PPM and the record keeps its path; otherwise images stay virtual.
SyntheticCatalog build_catalog(const AttributeSchema& schema,
                               std::span<const AttributeConfig> configs, int images_per_config,
                               std::uint64_t seed, const RenderOptions& options = {},
                               const std::optional<std::filesystem::path>& image_dir = {},
                               std::int64_t identity_count = 0, int threads = 1);

/// Reference scale of the original dataset: identities and images per
/// identity (49 samples for each of 36 viewpoints).
inline constexpr std::int64_t kReferenceIdentities = 1150;
inline constexpr std::int64_t kReferenceImagesPerIdentity = 49 * 36;
inline constexpr std::int64_t kReferenceDatasetSize =
    kReferenceIdentities * kReferenceImagesPerIdentity;

// Persistence --------------------------------------------------------------

/// Binary PPM (P6, maxval 255).
void write_ppm(const std::filesystem::path& path, const SceneImage& image);
SceneImage read_ppm(const std::filesystem::path& path);

/// One JSON object per line: path, identity, seed and one integer field per
/// schema dimension. Relative paths are read against the file's directory;
/// records without a path are re-rendered on load.
void write_catalog_jsonl(const std::filesystem::path& path, const SyntheticCatalog& catalog);
SyntheticCatalog read_catalog_jsonl(const std::filesystem::path& path,
                                    const AttributeSchema& schema,
                                    const RenderOptions& options = {});

void write_schema_json(const std::filesystem::path& path, const AttributeSchema& schema);
AttributeSchema read_schema_json(const std::filesystem::path& path);

// Testbeds -------------------------------------------------------------------

/// A complete desk-scale experiment: schema, catalog configs and the hidden
/// target distribution.
struct Testbed {
  AttributeSchema schema;
  std::vector<AttributeConfig> catalog_configs;
  TargetDistribution target;
};

struct TestbedOptions {
  std::size_t catalog_configs = 200;
  /// Probability mass on the modal category of weather, illumination and
  /// background in the target distribution.
  double target_peak = 0.97;
  /// When set, weather and illumination are pinned to sunny noon in the
  /// catalog and the target, the target puts all background mass on one
  /// category, and the remaining dimensions of the target are uniform.
  bool background_dominant = false;
  /// The target's style shift draws gamma from [gamma_low, gamma_high] and
  /// each channel bias from [-max_bias, max_bias].
  double gamma_low = 1.25;
  double gamma_high = 1.5;
  double max_bias = 24.0;
};

/// Seeded default testbed over the full schema: `catalog_configs` distinct
/// random configs and a peaked target with a random style shift.
Testbed make_testbed(std::uint64_t seed, const TestbedOptions& options = {});

}  // namespace aost
