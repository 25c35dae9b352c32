#include "aost/pipeline.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <map>
#include <numeric>
#include <sstream>

#include "aost/error.hpp"
#include "aost/format.hpp"
#include "aost/parallel.hpp"
#include "aost/rng.hpp"

namespace aost {

void AostParams::validate() const {
  distance.validate();
  extractor.validate();
  surrogate.validate();
  if (static_cast<std::size_t>(distance.content_layer) >= extractor.layers()) {
    throw ValidationError("content layer outside the extractor's layers");
  }
  if (images_per_config < 1) throw ValidationError("images_per_config must be >= 1");
  if (budget < static_cast<std::size_t>(images_per_config)) {
    throw ValidationError("budget must be at least images_per_config");
  }
  if (rounds < 1) throw ValidationError("rounds must be >= 1");
  if (reference_count < 1) throw ValidationError("reference subset size must be >= 1");
  if (swarm.particles < 1 || swarm.iterations < 1) {
    throw ValidationError("swarm needs at least one particle and one iteration");
  }
  if (!(swarm.inertia >= 0.0 && swarm.inertia <= 1.0)) throw ValidationError("inertia outside [0, 1]");
  if (!(swarm.cognitive >= 0.0 && swarm.social >= 0.0)) {
    throw ValidationError("swarm coefficients must be >= 0");
  }
}

// SelectionPlan --------------------------------------------------------------

double SelectionPlan::mean_predicted() const {
  if (predicted.empty()) return 0.0;
  return std::accumulate(predicted.begin(), predicted.end(), 0.0) /
         static_cast<double>(predicted.size());
}

nlohmann::ordered_json SelectionPlan::to_json(const AttributeSchema& schema) const {
  nlohmann::ordered_json doc;
  doc["budget"] = budget;
  doc["images_per_config"] = images_per_config;
  doc["mean_predicted"] = mean_predicted();
  auto configs_json = nlohmann::ordered_json::array();
  for (std::size_t i = 0; i < configs.size(); ++i) {
    nlohmann::ordered_json c;
    for (std::size_t d = 0; d < schema.size(); ++d) c[schema[d].name] = configs[i].values[d];
    c["predicted"] = predicted[i];
    c["count"] = counts[i];
    c["duplicate"] = static_cast<bool>(duplicate[i]);
    c["non_unique_optimum"] = static_cast<bool>(non_unique_optimum[i]);
    configs_json.push_back(std::move(c));
  }
  doc["configs"] = std::move(configs_json);
  return doc;
}

SelectionPlan SelectionPlan::from_json(const nlohmann::json& doc, const AttributeSchema& schema) {
  try {
    SelectionPlan plan;
    plan.budget = doc.at("budget").get<std::size_t>();
    plan.images_per_config = doc.at("images_per_config").get<int>();
    for (const auto& c : doc.at("configs")) {
      AttributeConfig config;
      for (const auto& d : schema.dimensions()) config.values.push_back(c.at(d.name).get<int>());
      schema.validate(config);
      plan.configs.push_back(std::move(config));
      plan.predicted.push_back(c.at("predicted").get<double>());
      plan.counts.push_back(c.at("count").get<int>());
      plan.duplicate.push_back(c.value("duplicate", false));
      plan.non_unique_optimum.push_back(c.value("non_unique_optimum", false));
    }
    return plan;
  } catch (const nlohmann::json::exception& e) {
    throw ValidationError(std::string("malformed plan document: ") + e.what());
  }
}

// Stage I --------------------------------------------------------------------

std::string CatalogMeasurement::to_csv(const AttributeSchema& schema) const {
  std::ostringstream out;
  for (const auto& d : schema.dimensions()) out << d.name << ',';
  out << "d_style,d_content,d_total\n";
  for (std::size_t i = 0; i < configs.size(); ++i) {
    for (int v : configs[i].values) out << v << ',';
    out << format_double(distances[i].d_style) << ',' << format_double(distances[i].d_content)
        << ',' << format_double(distances[i].d_total) << '\n';
  }
  return out.str();
}

nlohmann::ordered_json CatalogMeasurement::to_json(const AttributeSchema& schema) const {
  nlohmann::ordered_json doc;
  doc["reference_indices"] = reference_indices;
  auto rows = nlohmann::ordered_json::array();
  for (std::size_t i = 0; i < configs.size(); ++i) {
    nlohmann::ordered_json row;
    for (std::size_t d = 0; d < schema.size(); ++d) row[schema[d].name] = configs[i].values[d];
    row["d_style"] = distances[i].d_style;
    row["d_content"] = distances[i].d_content;
    row["d_total"] = distances[i].d_total;
    rows.push_back(std::move(row));
  }
  doc["configs"] = std::move(rows);
  return doc;
}

CatalogMeasurement CatalogMeasurement::from_json(const nlohmann::json& doc,
                                                 const AttributeSchema& schema) {
  try {
    CatalogMeasurement m;
    m.reference_indices = doc.at("reference_indices").get<std::vector<std::size_t>>();
    for (const auto& row : doc.at("configs")) {
      AttributeConfig config;
      for (const auto& d : schema.dimensions()) config.values.push_back(row.at(d.name).get<int>());
      schema.validate(config);
      m.configs.push_back(std::move(config));
      m.distances.push_back({row.at("d_style").get<double>(), row.at("d_content").get<double>(),
                             row.at("d_total").get<double>()});
    }
    return m;
  } catch (const nlohmann::json::exception& e) {
    throw ValidationError(std::string("malformed measurement document: ") + e.what());
  }
}

std::vector<std::size_t> sample_indices(std::size_t population, std::size_t count,
                                        std::uint64_t seed) {
  if (count > population) {
    throw ValidationError("cannot draw " + std::to_string(count) + " items from " +
                          std::to_string(population));
  }
  std::vector<std::size_t> pool(population);
  std::iota(pool.begin(), pool.end(), std::size_t{0});
  Rng rng(seed);
  for (std::size_t i = 0; i < count; ++i) {
    const std::size_t j = i + static_cast<std::size_t>(rng.below(population - i));
    std::swap(pool[i], pool[j]);
  }
  pool.resize(count);
  std::sort(pool.begin(), pool.end());
  return pool;
}

CatalogMeasurement measure_catalog(const SyntheticCatalog& catalog,
                                   std::span<const SceneImage> target, const AostParams& params) {
  params.validate();
  if (catalog.records.empty()) throw ValidationError("catalog is empty");
  if (target.size() < params.reference_count) {
    throw ValidationError("target has " + std::to_string(target.size()) +
                          " images, fewer than the reference subset size " +
                          std::to_string(params.reference_count));
  }
  const FilterBank bank(params.extractor);
  CatalogMeasurement m;
  m.reference_indices =
      sample_indices(target.size(), params.reference_count, reference_seed(params.seed));
  m.references.resize(m.reference_indices.size());
  parallel_for(m.references.size(), params.threads, [&](std::size_t i) {
    m.references[i] = make_signature(extract(target[m.reference_indices[i]], bank), params.distance);
  });

  std::map<AttributeConfig, std::size_t> slot;
  std::vector<std::vector<std::size_t>> members;
  for (std::size_t r = 0; r < catalog.records.size(); ++r) {
    const auto [it, inserted] = slot.try_emplace(catalog.records[r].config, m.configs.size());
    if (inserted) {
      m.configs.push_back(catalog.records[r].config);
      members.emplace_back();
    }
    members[it->second].push_back(r);
  }

  m.distances.resize(m.configs.size());
  const std::span<const DistanceSignature> refs(m.references);
  parallel_for(m.configs.size(), params.threads, [&](std::size_t c) {
    std::vector<DistanceSignature> sigs;
    sigs.reserve(members[c].size());
    for (std::size_t r : members[c]) {
      sigs.push_back(make_signature(extract(catalog.load(r), bank), params.distance));
    }
    m.distances[c] = config_distance(std::span<const DistanceSignature>(sigs), refs, params.distance);
  });
  return m;
}

std::size_t planned_config_count(std::size_t budget, int images_per_config) {
  if (images_per_config < 1) throw ValidationError("images_per_config must be >= 1");
  return std::max<std::size_t>(1, budget / static_cast<std::size_t>(images_per_config));
}

SelectionPlan plan_from_model(const BoostedEnsemble& model, const AttributeSchema& schema,
                              const AostParams& params, std::uint64_t search_seed) {
  params.validate();
  const std::size_t k = planned_config_count(params.budget, params.images_per_config);
  const double penalty = params.penalty >= 0.0 ? params.penalty : 0.1 * model.target_range();

  SwarmParams swarm = params.swarm;
  swarm.seed = search_seed;
  swarm.threads = params.threads;
  SearchResult found = search_attributes(model, schema, swarm, k, penalty);

  SelectionPlan plan;
  plan.budget = params.budget;
  plan.images_per_config = params.images_per_config;
  plan.configs = std::move(found.configs);
  plan.predicted = std::move(found.predicted);
  plan.duplicate = std::move(found.duplicate);
  plan.non_unique_optimum = std::move(found.non_unique_optimum);
  plan.counts.assign(plan.configs.size(), params.images_per_config);
  const std::size_t best = static_cast<std::size_t>(
      std::min_element(plan.predicted.begin(), plan.predicted.end()) - plan.predicted.begin());
  plan.counts[best] += static_cast<int>(params.budget - k * static_cast<std::size_t>(params.images_per_config));
  return plan;
}

BoostedEnsemble fit_surrogate(const CatalogMeasurement& measurement,
                              const AttributeSchema& schema, const BoostingParams& params) {
  if (measurement.configs.size() < 2) {
    throw ValidationError(
        "catalog holds a single distinct config; the surrogate would be constant. "
        "Enumerate the candidates directly instead.");
  }
  std::vector<std::pair<AttributeConfig, double>> samples;
  samples.reserve(measurement.configs.size());
  for (std::size_t i = 0; i < measurement.configs.size(); ++i) {
    samples.emplace_back(measurement.configs[i], measurement.distances[i].d_total);
  }
  return fit(samples, schema, params);
}

SelectionPlan plan_from_measurement(const CatalogMeasurement& measurement,
                                    const AttributeSchema& schema, const AostParams& params,
                                    std::uint64_t search_seed, BoostedEnsemble* model_out) {
  BoostedEnsemble model = fit_surrogate(measurement, schema, params.surrogate);
  SelectionPlan plan = plan_from_model(model, schema, params, search_seed);
  if (model_out) *model_out = std::move(model);
  return plan;
}

SelectionPlan optimize_rounds(const BoostedEnsemble& model, const AttributeSchema& schema,
                              const AostParams& params, std::vector<double>* accepted_means) {
  SelectionPlan best;
  for (int round = 1; round <= params.rounds; ++round) {
    SelectionPlan plan = plan_from_model(model, schema, params, search_seed(params.seed, round));
    if (round == 1 || plan.mean_predicted() < best.mean_predicted()) best = std::move(plan);
    if (accepted_means) accepted_means->push_back(best.mean_predicted());
  }
  return best;
}

SelectionPlan stage1_attribute_optimization(const SyntheticCatalog& catalog,
                                            std::span<const SceneImage> target,
                                            const AostParams& params) {
  const CatalogMeasurement m = measure_catalog(catalog, target, params);
  const BoostedEnsemble model = fit_surrogate(m, catalog.schema, params.surrogate);
  return optimize_rounds(model, catalog.schema, params);
}

// Subsets ----------------------------------------------------------------------

std::string SelectedSubset::to_jsonl(const AttributeSchema& schema) const {
  std::ostringstream out;
  for (const auto& item : items) {
    nlohmann::ordered_json row;
    row["path"] = item.path.string();
    row["identity"] = item.identity;
    row["seed"] = item.seed;
    row["stage"] = stage == SubsetStage::kRaw ? "raw" : "transferred";
    row["rendered"] = item.rendered;
    for (std::size_t d = 0; d < schema.size(); ++d) row[schema[d].name] = item.config.values[d];
    out << row.dump() << '\n';
  }
  return out.str();
}

SelectedSubset select_subset(const SyntheticCatalog& catalog, const SelectionPlan& plan,
                             const SelectOptions& options) {
  if (plan.configs.size() != plan.counts.size()) throw ValidationError("plan counts are inconsistent");
  std::map<AttributeConfig, std::vector<std::size_t>> by_config;
  for (std::size_t r = 0; r < catalog.records.size(); ++r) {
    by_config[catalog.records[r].config].push_back(r);
  }

  SelectedSubset subset;
  std::size_t extra = 0;
  for (std::size_t c = 0; c < plan.configs.size(); ++c) {
    const auto& config = plan.configs[c];
    catalog.schema.validate(config);
    std::vector<std::size_t> available;
    if (auto it = by_config.find(config); it != by_config.end()) available = it->second;
    std::stable_sort(available.begin(), available.end(), [&](std::size_t a, std::size_t b) {
      return catalog.records[a].identity < catalog.records[b].identity;
    });
    const auto wanted = static_cast<std::size_t>(plan.counts[c]);
    for (std::size_t i = 0; i < std::min(wanted, available.size()); ++i) {
      const auto& rec = catalog.records[available[i]];
      subset.items.push_back({rec.config, rec.identity, rec.seed, rec.path, false});
    }
    if (available.size() < wanted) {
      if (!options.allow_render) {
        throw ValidationError("catalog has " + std::to_string(available.size()) + " images of " +
                              format_config(catalog.schema, config) + ", plan needs " +
                              std::to_string(wanted) + " and rendering is disabled");
      }
      for (std::size_t i = available.size(); i < wanted; ++i, ++extra) {
        const auto identity =
            static_cast<std::int64_t>((catalog.records.size() + extra) % kReferenceIdentities);
        subset.items.push_back({config, identity, hash_combine(options.seed, 0x5e1, extra), {}, true});
      }
    }
  }
  if (subset.items.size() != plan.budget && plan.budget != 0) {
    throw ValidationError("selected " + std::to_string(subset.items.size()) +
                          " images for a budget of " + std::to_string(plan.budget));
  }
  subset.images.resize(subset.items.size());
  parallel_for(subset.items.size(), options.threads, [&](std::size_t i) {
    const auto& item = subset.items[i];
    subset.images[i] = item.path.empty() ? render(catalog.schema, item.config, item.identity,
                                                  item.seed, catalog.options)
                                         : catalog.load(CatalogRecord{item.config, item.identity,
                                                                      item.seed, item.path});
  });
  return subset;
}

SelectedSubset random_subset(const SyntheticCatalog& catalog, std::size_t budget,
                             std::uint64_t seed, int threads) {
  const auto picks = sample_indices(catalog.records.size(), budget, seed);
  SelectedSubset subset;
  for (std::size_t r : picks) {
    const auto& rec = catalog.records[r];
    subset.items.push_back({rec.config, rec.identity, rec.seed, rec.path, false});
  }
  subset.images.resize(picks.size());
  parallel_for(picks.size(), threads, [&](std::size_t i) { subset.images[i] = catalog.load(picks[i]); });
  return subset;
}

namespace {

struct ChannelMoments {
  std::array<double, 3> mean{};
  std::array<double, 3> stddev{};
};

ChannelMoments channel_moments(std::span<const SceneImage> images) {
  std::array<double, 3> sum{}, sum_sq{};
  double count = 0.0;
  for (const auto& img : images) {
    for (std::size_t i = 0; i < img.rgb.size(); i += 3) {
      for (int c = 0; c < 3; ++c) {
        const double v = img.rgb[i + static_cast<std::size_t>(c)];
        sum[c] += v;
        sum_sq[c] += v * v;
      }
    }
    count += static_cast<double>(img.pixel_count());
  }
  ChannelMoments m;
  for (int c = 0; c < 3; ++c) {
    m.mean[c] = sum[c] / count;
    m.stddev[c] = std::sqrt(std::max(0.0, sum_sq[c] / count - m.mean[c] * m.mean[c]));
  }
  return m;
}

}  // namespace

SelectedSubset stage2_style_transfer(const SelectedSubset& subset,
                                     std::span<const SceneImage> target) {
  if (subset.stage != SubsetStage::kRaw) throw ValidationError("style transfer expects a raw subset");
  if (target.empty()) throw ValidationError("style transfer needs a non-empty target set");
  if (subset.images.empty()) throw ValidationError("style transfer on an empty subset");
  const ChannelMoments source = channel_moments(subset.images);
  const ChannelMoments goal = channel_moments(target);

  SelectedSubset out = subset;
  out.stage = SubsetStage::kTransferred;
  static constexpr const char* kChannel[3] = {"red", "green", "blue"};
  std::array<std::array<std::uint8_t, 256>, 3> lut{};
  for (int c = 0; c < 3; ++c) {
    const bool flat = source.stddev[c] == 0.0;
    if (flat) {
      out.flags.push_back(std::string("zero source spread on ") + kChannel[c] +
                          " channel; shifted to target mean");
    }
    for (int v = 0; v < 256; ++v) {
      const double mapped =
          flat ? goal.mean[c]
               : (v - source.mean[c]) * goal.stddev[c] / source.stddev[c] + goal.mean[c];
      lut[c][v] = static_cast<std::uint8_t>(std::clamp(std::lround(mapped), 0L, 255L));
    }
  }
  for (auto& img : out.images) {
    for (std::size_t i = 0; i < img.rgb.size(); ++i) img.rgb[i] = lut[i % 3][img.rgb[i]];
  }
  return out;
}

// Full run -------------------------------------------------------------------

AostResult run_aost(const SyntheticCatalog& catalog, std::span<const SceneImage> target,
                    const AostParams& params) {
  using Clock = std::chrono::steady_clock;
  params.validate();
  AostResult result;
  auto t0 = Clock::now();
  auto lap = [&](const std::string& stage) {
    const auto now = Clock::now();
    result.timings.push_back({stage, std::chrono::duration<double>(now - t0).count()});
    t0 = now;
  };

  result.measurement = measure_catalog(catalog, target, params);
  lap("measure");

  result.model = fit_surrogate(result.measurement, catalog.schema, params.surrogate);
  result.plan = optimize_rounds(result.model, catalog.schema, params, &result.accepted_means);
  lap("optimize");

  result.selected = select_subset(catalog, result.plan,
                                  {true, selection_seed(params.seed), params.threads});
  result.random = random_subset(catalog, params.budget, random_subset_seed(params.seed),
                                params.threads);
  lap("select");

  result.transferred = stage2_style_transfer(result.selected, target);
  lap("transfer");

  EvaluationParams eval{params.distance, params.extractor, params.threads};
  std::vector<SceneImage> references;
  for (std::size_t i : result.measurement.reference_indices) references.push_back(target[i]);
  const TargetEvaluation target_eval = prepare_target(target, references, eval);
  const std::vector<RegulationSubset> subsets = {
      {kRegulationRandom, result.random.images},
      {kRegulationAo, result.selected.images},
      {kRegulationAoSt, result.transferred.images},
  };
  result.report = evaluate_regulations(subsets, target_eval, eval);
  lap("evaluate");
  return result;
}

}  // namespace aost
