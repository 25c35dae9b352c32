#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <span>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "aost/distances.hpp"
#include "aost/features.hpp"
#include "aost/metrics.hpp"
#include "aost/optimizer.hpp"
#include "aost/rng.hpp"
#include "aost/scenegen.hpp"
#include "aost/surrogate.hpp"

namespace aost {

struct AostParams {
  DistanceParams distance;
  ExtractorSpec extractor;
  BoostingParams surrogate;
  SwarmParams swarm;  // bounds are derived from the schema
  std::size_t budget = 1000;
  int images_per_config = 50;
  int rounds = 1;  // outer iteration rounds n
  std::size_t reference_count = 32;
  /// Diversity penalty; negative means 0.1 x the surrogate's target range.
  double penalty = -1.0;
  std::uint64_t seed = 0;
  int threads = 1;

  /// Throws ValidationError on out-of-range values.
  void validate() const;
};

/// The optimised attribute set and how many images each config contributes.
struct SelectionPlan {
  std::vector<AttributeConfig> configs;
  std::vector<double> predicted;
  std::vector<int> counts;
  std::vector<bool> duplicate;
  std::vector<bool> non_unique_optimum;
  int images_per_config = 0;
  std::size_t budget = 0;

  double mean_predicted() const;
  nlohmann::ordered_json to_json(const AttributeSchema& schema) const;
  static SelectionPlan from_json(const nlohmann::json& doc, const AttributeSchema& schema);
};

/// Per-config training signal for the surrogate, plus the target reference
/// subset it was measured against.
struct CatalogMeasurement {
  std::vector<std::size_t> reference_indices;  // into the target list
  std::vector<DistanceSignature> references;
  std::vector<AttributeConfig> configs;
  std::vector<DistanceReport> distances;

  std::string to_csv(const AttributeSchema& schema) const;
  /// Reference indices, configs and distances; signatures are not stored.
  nlohmann::ordered_json to_json(const AttributeSchema& schema) const;
  static CatalogMeasurement from_json(const nlohmann::json& doc, const AttributeSchema& schema);
};

// Sub-seeds derived from the run seed, shared by run_aost and the stage
// commands so both paths draw the same numbers.
inline std::uint64_t reference_seed(std::uint64_t seed) { return hash_combine(seed, 0x4ef); }
inline std::uint64_t search_seed(std::uint64_t seed, int round) {
  return hash_combine(seed, 0x950, static_cast<std::uint64_t>(round));
}
inline std::uint64_t selection_seed(std::uint64_t seed) { return hash_combine(seed, 0x5e1ec7); }
inline std::uint64_t random_subset_seed(std::uint64_t seed) { return hash_combine(seed, 0x7a2d); }

/// `count` distinct indices below `population`, drawn with a seeded partial
/// shuffle and returned in ascending order.
std::vector<std::size_t> sample_indices(std::size_t population, std::size_t count,
                                        std::uint64_t seed);

/// Extracts the catalog and a seeded target reference subset and computes
/// config_distance for every distinct catalog config.
CatalogMeasurement measure_catalog(const SyntheticCatalog& catalog,
                                   std::span<const SceneImage> target, const AostParams& params);

/// Number of configs and images per config for a budget: k = budget /
/// images_per_config (floor), remainder to the best-predicted config.
std::size_t planned_config_count(std::size_t budget, int images_per_config);

/// Surrogate trained on (config, d_total) for every measured config. Throws
/// ValidationError when fewer than two distinct configs were measured.
BoostedEnsemble fit_surrogate(const CatalogMeasurement& measurement,
                              const AttributeSchema& schema, const BoostingParams& params);

/// fit_surrogate followed by plan_from_model.
SelectionPlan plan_from_measurement(const CatalogMeasurement& measurement,
                                    const AttributeSchema& schema, const AostParams& params,
                                    std::uint64_t search_seed, BoostedEnsemble* model_out = nullptr);

SelectionPlan plan_from_model(const BoostedEnsemble& model, const AttributeSchema& schema,
                              const AostParams& params, std::uint64_t search_seed);

/// `params.rounds` searches on a fixed model. Round r > 1 reseeds the swarm
/// and its plan replaces the current one only when the mean prediction
/// drops. `accepted_means`, when given, receives the accepted mean per round.
SelectionPlan optimize_rounds(const BoostedEnsemble& model, const AttributeSchema& schema,
                              const AostParams& params,
                              std::vector<double>* accepted_means = nullptr);

SelectionPlan stage1_attribute_optimization(const SyntheticCatalog& catalog,
                                            std::span<const SceneImage> target,
                                            const AostParams& params);

enum class SubsetStage { kRaw, kTransferred };

struct SubsetItem {
  AttributeConfig config;
  std::int64_t identity = 0;
  std::uint64_t seed = 0;
  std::filesystem::path path;  // empty for images that were never persisted
  bool rendered = false;       // produced by the rendering fallback
};

struct SelectedSubset {
  SubsetStage stage = SubsetStage::kRaw;
  std::vector<SubsetItem> items;
  std::vector<SceneImage> images;  // parallel to items
  std::vector<std::string> flags;

  std::string to_jsonl(const AttributeSchema& schema) const;
};

struct SelectOptions {
  bool allow_render = true;
  std::uint64_t seed = 0;
  int threads = 1;
};

/// Takes the planned count per config from the catalog (lowest identity, then
/// lowest record index), rendering extra images when the catalog is short.
/// Throws ValidationError when the budget cannot be met.
SelectedSubset select_subset(const SyntheticCatalog& catalog, const SelectionPlan& plan,
                             const SelectOptions& options = {});

/// `budget` catalog images drawn uniformly without replacement.
SelectedSubset random_subset(const SyntheticCatalog& catalog, std::size_t budget,
                             std::uint64_t seed, int threads = 1);

/// Remaps every channel of the subset to the target's per-channel mean and
/// standard deviation. A channel with zero source spread is set to the target
/// mean and flagged. Throws ValidationError unless the subset is raw and the
/// target non-empty.
SelectedSubset stage2_style_transfer(const SelectedSubset& subset,
                                     std::span<const SceneImage> target);

struct StageTiming {
  std::string stage;
  double seconds = 0.0;
};

struct AostResult {
  CatalogMeasurement measurement;
  BoostedEnsemble model;
  SelectionPlan plan;
  std::vector<double> accepted_means;  // accepted plan mean after each round
  SelectedSubset random;
  SelectedSubset selected;
  SelectedSubset transferred;
  DomainGapReport report;
  std::vector<StageTiming> timings;
};

inline const std::string kRegulationRandom = "random";
inline const std::string kRegulationAo = "AO";
inline const std::string kRegulationAoSt = "AO+ST";

/// Stage I for `rounds` rounds (later rounds reseed the search and are kept
/// only when the plan's mean prediction improves), subset selection, style
/// transfer and the three-row domain-gap report.
AostResult run_aost(const SyntheticCatalog& catalog, std::span<const SceneImage> target,
                    const AostParams& params);

}  // namespace aost
