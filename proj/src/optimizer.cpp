#include "aost/optimizer.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <mutex>
#include <numbers>
#include <set>
#include <sstream>

#include "aost/error.hpp"
#include "aost/format.hpp"
#include "aost/parallel.hpp"
#include "aost/rng.hpp"

namespace aost {

void SwarmParams::validate() const {
  if (particles < 1) throw ValidationError("particle count must be >= 1");
  if (iterations < 1) throw ValidationError("iteration count must be >= 1");
  if (!(inertia >= 0.0 && inertia <= 1.0)) throw ValidationError("inertia must lie in [0, 1]");
  if (!(cognitive >= 0.0) || !(social >= 0.0)) {
    throw ValidationError("cognitive and social coefficients must be >= 0");
  }
  if (lower.empty() || lower.size() != upper.size()) {
    throw ValidationError("bounds must be non-empty and of equal length");
  }
  for (std::size_t i = 0; i < lower.size(); ++i) {
    if (!(lower[i] < upper[i]) || !std::isfinite(lower[i]) || !std::isfinite(upper[i])) {
      throw ValidationError("degenerate bounds in dimension " + std::to_string(i));
    }
  }
}

std::string SwarmResult::history_csv() const {
  std::ostringstream out;
  out << "iteration,best_value\n";
  for (std::size_t i = 0; i < history.size(); ++i) {
    out << i << ',' << format_double(history[i]) << '\n';
  }
  return out.str();
}

SwarmResult optimize(const Objective& objective, const SwarmParams& params) {
  params.validate();
  const std::size_t dims = params.lower.size();
  const std::size_t count = static_cast<std::size_t>(params.particles);
  constexpr double kInf = std::numeric_limits<double>::infinity();
  Rng rng(params.seed);

  std::vector<Particle> swarm(count);
  for (auto& p : swarm) {
    p.position.resize(dims);
    p.velocity.resize(dims);
    for (std::size_t d = 0; d < dims; ++d) {
      const double span = params.upper[d] - params.lower[d];
      p.position[d] = rng.uniform(params.lower[d], params.upper[d]);
      p.velocity[d] = rng.uniform(-span, span) * 0.1;
    }
  }

  SwarmResult result;
  std::vector<double> values(count);
  auto evaluate_all = [&] {
    parallel_for(count, params.threads, [&](std::size_t i) {
      const double v = objective(swarm[i].position);
      values[i] = std::isfinite(v) ? v : kInf;
    });
    for (std::size_t i = 0; i < count; ++i) {
      if (values[i] == kInf) ++result.non_finite_evaluations;
    }
  };

  evaluate_all();
  std::size_t best = 0;
  for (std::size_t i = 0; i < count; ++i) {
    swarm[i].best_position = swarm[i].position;
    swarm[i].best_value = values[i];
    if (values[i] < values[best]) best = i;
  }
  std::vector<double> global = swarm[best].best_position;
  double global_value = swarm[best].best_value;

  result.history.reserve(static_cast<std::size_t>(params.iterations));
  for (int iter = 0; iter < params.iterations; ++iter) {
    for (auto& p : swarm) {
      for (std::size_t d = 0; d < dims; ++d) {
        const double r1 = rng.uniform();
        const double r2 = rng.uniform();
        p.velocity[d] = params.inertia * p.velocity[d] +
                        params.cognitive * r1 * (p.best_position[d] - p.position[d]) +
                        params.social * r2 * (global[d] - p.position[d]);
        p.position[d] = std::clamp(p.position[d] + p.velocity[d], params.lower[d], params.upper[d]);
      }
    }
    evaluate_all();
    for (std::size_t i = 0; i < count; ++i) {
      if (values[i] < swarm[i].best_value) {
        swarm[i].best_value = values[i];
        swarm[i].best_position = swarm[i].position;
      }
    }
    std::size_t leader = count;
    for (std::size_t i = 0; i < count; ++i) {
      if (swarm[i].best_value < global_value &&
          (leader == count || swarm[i].best_value < swarm[leader].best_value)) {
        leader = i;
      }
    }
    if (leader != count) {
      global_value = swarm[leader].best_value;
      global = swarm[leader].best_position;
    }
    result.history.push_back(global_value);
  }
  result.best_position = std::move(global);
  result.best_value = global_value;
  return result;
}

// Relaxation -----------------------------------------------------------------

namespace {
constexpr double kRelaxEpsilon = 1e-9;
}

std::size_t relaxed_size(const AttributeSchema& schema) {
  std::size_t n = 0;
  for (const auto& d : schema.dimensions()) n += d.kind == DimensionKind::kCircular ? 2 : 1;
  return n;
}

void relaxed_bounds(const AttributeSchema& schema, std::vector<double>& lower,
                    std::vector<double>& upper) {
  lower.clear();
  upper.clear();
  for (const auto& d : schema.dimensions()) {
    if (d.kind == DimensionKind::kCircular) {
      lower.insert(lower.end(), {-1.0, -1.0});
      upper.insert(upper.end(), {1.0, 1.0});
    } else {
      lower.push_back(0.0);
      upper.push_back(d.cardinality - kRelaxEpsilon);
    }
  }
}

AttributeConfig decode(std::span<const double> position, const AttributeSchema& schema) {
  if (position.size() != relaxed_size(schema)) {
    throw ValidationError("relaxed position has " + std::to_string(position.size()) +
                          " coordinates, schema needs " + std::to_string(relaxed_size(schema)));
  }
  AttributeConfig config;
  std::size_t p = 0;
  for (const auto& d : schema.dimensions()) {
    if (d.kind == DimensionKind::kCircular) {
      const double sin_v = position[p++];
      const double cos_v = position[p++];
      double degrees = std::atan2(sin_v, cos_v) * 180.0 / std::numbers::pi;
      if (degrees < 0.0) degrees += 360.0;
      const double bin_width = 360.0 / d.cardinality;
      const double x = degrees / bin_width;
      const double whole = std::floor(x);
      const double frac = x - whole;
      // Within rounding of a midpoint counts as the midpoint.
      const int bin = static_cast<int>(whole) + (frac > 0.5 + 1e-9 ? 1 : 0);
      config.values.push_back(bin % d.cardinality);
    } else {
      const double v = position[p++];
      const double floored = std::isfinite(v) ? std::floor(v) : 0.0;
      config.values.push_back(
          static_cast<int>(std::clamp(floored, 0.0, static_cast<double>(d.cardinality - 1))));
    }
  }
  return config;
}

std::vector<double> relax(const AttributeConfig& config, const AttributeSchema& schema) {
  schema.validate(config);
  std::vector<double> out;
  for (std::size_t d = 0; d < schema.size(); ++d) {
    if (schema[d].kind == DimensionKind::kCircular) {
      const double rad = 2.0 * std::numbers::pi * config.values[d] / schema[d].cardinality;
      out.push_back(std::sin(rad));
      out.push_back(std::cos(rad));
    } else {
      out.push_back(config.values[d] + 0.5);
    }
  }
  return out;
}

// Multi-config search ------------------------------------------------------

namespace {

// Tree ensembles are piecewise constant in the relaxed space, so a swarm can
// settle on a plateau one category away from a narrow minimum. Sweep every
// value of every dimension and keep strict improvements until a full pass
// changes nothing. Returns the final objective value.
double polish(AttributeConfig& config, const Objective& objective, const AttributeSchema& schema) {
  double value = objective(relax(config, schema));
  bool improved = true;
  while (improved) {
    improved = false;
    for (std::size_t d = 0; d < schema.dimensions().size(); ++d) {
      const int original = config.values[d];
      int best_index = original;
      for (int v = 0; v < schema.dimensions()[d].cardinality; ++v) {
        if (v == original) continue;
        config.values[d] = v;
        const double candidate = objective(relax(config, schema));
        if (candidate < value) {
          value = candidate;
          best_index = v;
          improved = true;
        }
      }
      config.values[d] = best_index;
    }
  }
  return value;
}

// Number of distinct low-objective configs seen by the swarm that are used as
// starting points for the polish.
constexpr std::size_t kPolishStarts = 64;

}  // namespace

SearchResult search_attributes(const BoostedEnsemble& model, const AttributeSchema& schema,
                               const SwarmParams& params, std::size_t k, double penalty) {
  if (k < 1) throw ValidationError("search needs k >= 1");
  if (k > schema.config_count()) {
    throw ValidationError("k = " + std::to_string(k) + " exceeds the " +
                          std::to_string(schema.config_count()) + " distinct configs");
  }
  if (!(penalty >= 0.0) || !std::isfinite(penalty)) {
    throw ValidationError("penalty weight must be finite and >= 0");
  }
  if (model.layout.size() != EncodingLayout::for_schema(schema).size()) {
    throw ValidationError("surrogate was trained on a different schema layout");
  }

  SwarmParams run_params = params;
  relaxed_bounds(schema, run_params.lower, run_params.upper);

  SearchResult out;
  std::set<AttributeConfig> chosen_set;
  for (std::size_t run = 0; run < k; ++run) {
    SwarmResult best_run;
    AttributeConfig config;
    bool duplicate = true;
    bool non_unique = false;
    for (int attempt = 0; attempt <= kSearchRetries; ++attempt) {
      run_params.seed = hash_combine(params.seed, run, static_cast<std::uint64_t>(attempt));
      // Decoded configs that reached the lowest objective seen so far.
      std::mutex ties_mutex;
      double tie_value = std::numeric_limits<double>::infinity();
      std::set<AttributeConfig> tied;
      // Ordered by (value, config), so the contents do not depend on the
      // order in which worker threads evaluate.
      std::set<std::pair<double, AttributeConfig>> starts;
      const Objective objective = [&](std::span<const double> x) {
        AttributeConfig c = decode(x, schema);
        double value = model.predict(c, schema);
        for (const auto& prev : out.configs) value += penalty * schema.similarity(c, prev);
        std::lock_guard lock(ties_mutex);
        starts.emplace(value, c);
        if (starts.size() > kPolishStarts) starts.erase(std::prev(starts.end()));
        if (value < tie_value) {
          tie_value = value;
          tied.clear();
          tied.insert(std::move(c));
        } else if (value == tie_value) {
          tied.insert(std::move(c));
        }
        return value;
      };
      best_run = optimize(objective, run_params);
      config = decode(best_run.best_position, schema);
      std::vector<AttributeConfig> seeds;
      for (const auto& entry : starts) seeds.push_back(entry.second);
      double best_value = best_run.best_value;
      for (AttributeConfig candidate : seeds) {
        const double value = polish(candidate, objective, schema);
        if (value < best_value) {
          best_value = value;
          config = candidate;
        }
      }
      if (best_value < best_run.best_value) {
        best_run.best_value = best_value;
        best_run.best_position = relax(config, schema);
        best_run.history.push_back(best_value);
      }
      non_unique = tied.size() > 1;
      if (!chosen_set.contains(config)) {
        duplicate = false;
        break;
      }
    }
    chosen_set.insert(config);
    out.predicted.push_back(model.predict(config, schema));
    out.configs.push_back(std::move(config));
    out.duplicate.push_back(duplicate);
    out.non_unique_optimum.push_back(non_unique);
    out.runs.push_back(std::move(best_run));
  }
  return out;
}

}  // namespace aost
