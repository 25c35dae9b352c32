#pragma once

#include <cstdint>
#include <functional>
#include <span>
#include <string>
#include <vector>

#include "aost/schema.hpp"
#include "aost/surrogate.hpp"

namespace aost {

struct SwarmParams {
  int particles = 30;
  int iterations = 200;
  double inertia = 0.72;
  double cognitive = 1.49;
  double social = 1.49;
  std::vector<double> lower;
  std::vector<double> upper;
  std::uint64_t seed = 0;
  /// Workers for objective evaluation within an iteration.
  int threads = 1;

  /// Throws ValidationError on counts < 1, inertia outside [0, 1], negative
  /// coefficients or degenerate bounds.
  void validate() const;
};

struct Particle {
  std::vector<double> position;
  std::vector<double> velocity;
  std::vector<double> best_position;
  double best_value = 0.0;
};

struct SwarmResult {
  std::vector<double> best_position;
  double best_value = 0.0;
  std::vector<double> history;  // global best after each iteration
  /// Evaluations that returned a non-finite value and were scored +inf.
  std::size_t non_finite_evaluations = 0;

  std::string history_csv() const;
};

using Objective = std::function<double(std::span<const double>)>;

/// Global-best PSO with clamped positions. Random factors are drawn per
/// particle and dimension from a generator seeded by params.seed; the global
/// best is refreshed once per iteration (lowest value, then lowest particle
/// index). Deterministic for a given seed and independent of params.threads.
SwarmResult optimize(const Objective& objective, const SwarmParams& params);

/// Relaxed coordinates of a schema: one real per categorical or binary
/// dimension in [0, cardinality - eps], a (sin, cos) pair in [-1, 1]^2 per
/// circular dimension, in schema order.
std::size_t relaxed_size(const AttributeSchema& schema);
void relaxed_bounds(const AttributeSchema& schema, std::vector<double>& lower,
                    std::vector<double>& upper);

/// Floors categorical coordinates (clamped to the valid range) and maps each
/// (sin, cos) pair to the nearest angular bin, exact midpoints going to the
/// lower bin. Throws ValidationError on a length mismatch.
AttributeConfig decode(std::span<const double> position, const AttributeSchema& schema);

/// Relaxed position that decodes to `config`: index + 0.5 per categorical
/// dimension and the bin centre angle for circular ones.
std::vector<double> relax(const AttributeConfig& config, const AttributeSchema& schema);

struct SearchResult {
  std::vector<AttributeConfig> configs;
  std::vector<double> predicted;  // surrogate prediction per config
  /// The run could not produce a new config within the retry budget and its
  /// duplicate was accepted.
  std::vector<bool> duplicate;
  /// Several distinct decoded configs reached the best objective value.
  std::vector<bool> non_unique_optimum;
  std::vector<SwarmResult> runs;
};

inline constexpr int kSearchRetries = 5;

/// k sequential PSO runs over the relaxed schema. Run i minimises
/// predict(decode(x)) + penalty * sum of similarity(decode(x), c) over the
/// configs c already chosen. The best distinct configs the swarm
/// evaluated are then refined by coordinate descent over the discrete values
/// and the lowest result is kept. Throws ValidationError when k < 1 or k exceeds
/// the number of distinct configs.
SearchResult search_attributes(const BoostedEnsemble& model, const AttributeSchema& schema,
                               const SwarmParams& params, std::size_t k, double penalty);

}  // namespace aost
