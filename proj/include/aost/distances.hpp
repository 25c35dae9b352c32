#pragma once

#include <span>
#include <vector>

#include "aost/features.hpp"

namespace aost {

struct DistanceParams {
  double alpha = 0.9;     // style weight
  double beta = 1.0;      // content weight
  int content_layer = 3;  // layer compared by the content term

  /// Throws ValidationError unless alpha, beta >= 0 and alpha + beta > 0.
  void validate() const;
};

struct DistanceReport {
  double d_style = 0.0;
  double d_content = 0.0;
  double d_total = 0.0;

  bool operator==(const DistanceReport&) const = default;
};

/// 1/2 * sum_ij (F_ij - P_ij)^2. Throws ShapeError on mismatched maps.
double content_distance(const FeatureMap& f, const FeatureMap& p);

/// sum_l w_l / (4 N_l^2 M_l^2) * sum_ij (G_ij - A_ij)^2 over all layers, with
/// Gram matrices taken from each pyramid. Throws ShapeError on mismatched
/// layer structure or weights.
double style_distance(const FeaturePyramid& a, const FeaturePyramid& b);

double total_distance(double d_style, double d_content, const DistanceParams& params);

/// The parts of a pyramid the distances read: per-layer Gram matrices plus
/// the content-layer map.
struct DistanceSignature {
  std::vector<GramMatrix> grams;
  std::vector<std::size_t> positions;  // M_l per layer
  std::vector<double> weights;
  FeatureMap content;
};

DistanceSignature make_signature(const FeaturePyramid& pyramid, const DistanceParams& params);

double style_distance(const DistanceSignature& a, const DistanceSignature& b);

/// Mean style and content distances over every (synthetic, target) pair,
/// synthetic-major, and their weighted total.
/// Throws ValidationError on an empty list.
DistanceReport config_distance(std::span<const DistanceSignature> synthetic,
                               std::span<const DistanceSignature> targets,
                               const DistanceParams& params);

DistanceReport config_distance(std::span<const FeaturePyramid> synthetic,
                               std::span<const FeaturePyramid> targets,
                               const DistanceParams& params);

/// Per-image means against the targets, before averaging over images. The
/// config-level report is the mean of these (all images see the same
/// targets).
DistanceReport image_distance(const DistanceSignature& image,
                              std::span<const DistanceSignature> targets,
                              const DistanceParams& params);

}  // namespace aost
