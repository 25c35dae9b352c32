#include "aost/distances.hpp"

#include <cmath>

#include "aost/error.hpp"

namespace aost {

void DistanceParams::validate() const {
  if (!(alpha >= 0.0) || !std::isfinite(alpha)) throw ValidationError("alpha must be >= 0");
  if (!(beta >= 0.0) || !std::isfinite(beta)) throw ValidationError("beta must be >= 0");
  if (!(alpha + beta > 0.0)) throw ValidationError("alpha + beta must be > 0");
  if (content_layer < 0) throw ValidationError("content_layer must be >= 0");
}

double content_distance(const FeatureMap& f, const FeatureMap& p) {
  if (!f.same_shape(p) || f.values.size() != p.values.size()) {
    throw ShapeError("content distance needs maps of identical shape");
  }
  double sum = 0.0;
  for (std::size_t i = 0; i < f.values.size(); ++i) {
    const double d = static_cast<double>(f.values[i]) - static_cast<double>(p.values[i]);
    sum += d * d;
  }
  return 0.5 * sum;
}

namespace {

double layer_style_term(const GramMatrix& g, const GramMatrix& a, std::size_t positions) {
  if (g.size != a.size) throw ShapeError("Gram matrices of different size");
  double sum = 0.0;
  for (std::size_t i = 0; i < g.entries.size(); ++i) {
    const double d = g.entries[i] - a.entries[i];
    sum += d * d;
  }
  const double n = g.size;
  const double m = static_cast<double>(positions);
  return sum / (4.0 * n * n * m * m);
}

void check_weights(const std::vector<double>& a, const std::vector<double>& b) {
  if (a != b) throw ShapeError("pyramids carry different layer weights");
}

}  // namespace

double style_distance(const FeaturePyramid& a, const FeaturePyramid& b) {
  if (a.maps.size() != b.maps.size()) throw ShapeError("pyramids have different layer counts");
  check_weights(a.weights, b.weights);
  if (a.weights.size() != a.maps.size()) throw ShapeError("one weight per layer required");
  double total = 0.0;
  for (std::size_t l = 0; l < a.maps.size(); ++l) {
    if (!a.maps[l].same_shape(b.maps[l])) throw ShapeError("layer shapes differ");
    total += a.weights[l] * layer_style_term(gram(a.maps[l]), gram(b.maps[l]), a.maps[l].positions());
  }
  return total;
}

double style_distance(const DistanceSignature& a, const DistanceSignature& b) {
  if (a.grams.size() != b.grams.size() || a.positions != b.positions) {
    throw ShapeError("signatures have different layer structure");
  }
  check_weights(a.weights, b.weights);
  double total = 0.0;
  for (std::size_t l = 0; l < a.grams.size(); ++l) {
    total += a.weights[l] * layer_style_term(a.grams[l], b.grams[l], a.positions[l]);
  }
  return total;
}

double total_distance(double d_style, double d_content, const DistanceParams& params) {
  return params.alpha * d_style + params.beta * d_content;
}

DistanceSignature make_signature(const FeaturePyramid& pyramid, const DistanceParams& params) {
  if (params.content_layer < 0 ||
      static_cast<std::size_t>(params.content_layer) >= pyramid.maps.size()) {
    throw ValidationError("content layer " + std::to_string(params.content_layer) +
                          " not present in a pyramid of " + std::to_string(pyramid.maps.size()) +
                          " layers");
  }
  if (pyramid.weights.size() != pyramid.maps.size()) throw ShapeError("one weight per layer required");
  DistanceSignature sig;
  for (const auto& m : pyramid.maps) {
    sig.grams.push_back(gram(m));
    sig.positions.push_back(m.positions());
  }
  sig.weights = pyramid.weights;
  sig.content = pyramid.maps[static_cast<std::size_t>(params.content_layer)];
  return sig;
}

DistanceReport image_distance(const DistanceSignature& image,
                              std::span<const DistanceSignature> targets,
                              const DistanceParams& params) {
  if (targets.empty()) throw ValidationError("no target references");
  double style = 0.0;
  double content = 0.0;
  for (const auto& t : targets) {
    style += style_distance(image, t);
    content += content_distance(image.content, t.content);
  }
  const double n = static_cast<double>(targets.size());
  DistanceReport r;
  r.d_style = style / n;
  r.d_content = content / n;
  r.d_total = total_distance(r.d_style, r.d_content, params);
  return r;
}

DistanceReport config_distance(std::span<const DistanceSignature> synthetic,
                               std::span<const DistanceSignature> targets,
                               const DistanceParams& params) {
  params.validate();
  if (synthetic.empty()) throw ValidationError("config_distance: no synthetic images");
  if (targets.empty()) throw ValidationError("config_distance: no target references");
  double style = 0.0;
  double content = 0.0;
  for (const auto& s : synthetic) {
    for (const auto& t : targets) {
      style += style_distance(s, t);
      content += content_distance(s.content, t.content);
    }
  }
  const double pairs = static_cast<double>(synthetic.size() * targets.size());
  DistanceReport r;
  r.d_style = style / pairs;
  r.d_content = content / pairs;
  r.d_total = total_distance(r.d_style, r.d_content, params);
  return r;
}

DistanceReport config_distance(std::span<const FeaturePyramid> synthetic,
                               std::span<const FeaturePyramid> targets,
                               const DistanceParams& params) {
  params.validate();
  if (synthetic.empty()) throw ValidationError("config_distance: no synthetic images");
  if (targets.empty()) throw ValidationError("config_distance: no target references");
  std::vector<DistanceSignature> s, t;
  for (const auto& p : synthetic) s.push_back(make_signature(p, params));
  for (const auto& p : targets) t.push_back(make_signature(p, params));
  return config_distance(std::span<const DistanceSignature>(s), std::span<const DistanceSignature>(t),
                         params);
}

}  // namespace aost
