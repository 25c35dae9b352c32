#include "aost/scenegen.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <map>
#include <numbers>
#include <set>
#include <sstream>

#include "aost/error.hpp"
#include "aost/parallel.hpp"

namespace aost {
namespace {

using Rgb = std::array<float, 3>;

constexpr Rgb mix(const Rgb& a, const Rgb& b, float t) {
  return {a[0] + (b[0] - a[0]) * t, a[1] + (b[1] - a[1]) * t, a[2] + (b[2] - a[2]) * t};
}

constexpr Rgb scale(const Rgb& a, float s) { return {a[0] * s, a[1] * s, a[2] * s}; }

float hash_unit(std::uint64_t seed, std::int64_t x, std::int64_t y) {
  return static_cast<float>(
      to_unit(hash_combine(seed, static_cast<std::uint64_t>(x), static_cast<std::uint64_t>(y))));
}

/// Bilinear value noise on a lattice of the given cell size, values in [0, 1).
float value_noise(std::uint64_t seed, float x, float y, float cell) {
  const float gx = x / cell;
  const float gy = y / cell;
  const auto ix = static_cast<std::int64_t>(std::floor(gx));
  const auto iy = static_cast<std::int64_t>(std::floor(gy));
  float tx = gx - static_cast<float>(ix);
  float ty = gy - static_cast<float>(iy);
  tx = tx * tx * (3.0f - 2.0f * tx);
  ty = ty * ty * (3.0f - 2.0f * ty);
  const float a = hash_unit(seed, ix, iy);
  const float b = hash_unit(seed, ix + 1, iy);
  const float c = hash_unit(seed, ix, iy + 1);
  const float d = hash_unit(seed, ix + 1, iy + 1);
  return (a + (b - a) * tx) + ((c + (d - c) * tx) - (a + (b - a) * tx)) * ty;
}

/// Attribute values resolved by dimension name, with neutral defaults for
/// dimensions the schema does not carry.
struct Knobs {
  double view_degrees = 0.0;
  int weather = 0;
  int illumination = 3;  // noon
  int background = 0;
  std::array<bool, 13> flags{};
};

Knobs resolve_knobs(const AttributeSchema& schema, const AttributeConfig& config) {
  Knobs k;
  const auto& flag_names = identity_flag_names();
  for (std::size_t d = 0; d < schema.size(); ++d) {
    const auto& dim = schema[d];
    const int v = config.values[d];
    if (dim.name == "viewpoint") {
      k.view_degrees = 360.0 * v / dim.cardinality;
    } else if (dim.name == "weather") {
      k.weather = v % 7;
    } else if (dim.name == "illumination") {
      k.illumination = v % 7;
    } else if (dim.name == "background") {
      k.background = v % 9;
    } else {
      const auto it = std::find(flag_names.begin(), flag_names.end(), dim.name);
      if (it != flag_names.end()) k.flags[static_cast<std::size_t>(it - flag_names.begin())] = v != 0;
    }
  }
  return k;
}

enum Flag {
  kHat,
  kBackpack,
  kGlasses,
  kShoulderBag,
  kDress,
  kLongHair,
  kShorts,
  kSleeves,
  kJacket,
  kBoots,
  kHandbag,
  kUmbrella,
  kMask
};

Rgb background_color(int family, int x, int y, int w, int h, std::uint64_t seed) {
  const int ox = static_cast<int>(seed % 17);
  const int oy = static_cast<int>((seed >> 8) % 13);
  const float ys = static_cast<float>(y) / static_cast<float>(h);
  const float fx = static_cast<float>(x);
  const float fy = static_cast<float>(y);
  const std::uint64_t nseed = hash_combine(seed, 0xb9);
  switch (family) {
    case 0: {  // street: facades with windows over asphalt
      if (ys > 0.62f) {
        const bool stripe = std::abs(ys - 0.8f) < 0.016f && ((x + ox) / 8) % 2 == 0;
        return stripe ? Rgb{0.92f, 0.9f, 0.78f} : Rgb{0.32f, 0.32f, 0.35f};
      }
      const bool window = (x + ox) % 10 < 6 && (y + oy) % 12 < 7;
      return window ? Rgb{0.5f, 0.62f, 0.74f} : Rgb{0.64f, 0.56f, 0.48f};
    }
    case 1: {  // mall: checker tiles and shop lights
      if (ys < 0.22f) return ((x + ox) / 6) % 3 == 0 ? Rgb{0.98f, 0.92f, 0.6f} : Rgb{0.8f, 0.78f, 0.74f};
      return ((x + ox) / 8 + (y + oy) / 8) % 2 ? Rgb{0.9f, 0.86f, 0.8f} : Rgb{0.6f, 0.5f, 0.42f};
    }
    case 2: {  // school: brick wall
      const int row = (y + oy) / 6;
      const int shift = (row % 2) * 6;
      const bool mortar = (y + oy) % 6 == 0 || (x + ox + shift) % 12 == 0;
      if (mortar) return {0.84f, 0.82f, 0.76f};
      const float n = 0.08f * hash_unit(nseed, (x + ox + shift) / 12, row);
      return {0.6f + n, 0.27f + n * 0.5f, 0.19f};
    }
    case 3: {  // park: tree canopy above grass
      const float n = value_noise(nseed, fx + ox, fy + oy, 10.0f);
      if (ys > 0.58f) return mix(Rgb{0.22f, 0.5f, 0.18f}, Rgb{0.4f, 0.66f, 0.26f}, n);
      return n > 0.45f ? mix(Rgb{0.12f, 0.36f, 0.12f}, Rgb{0.2f, 0.48f, 0.16f}, n)
                       : Rgb{0.62f, 0.78f, 0.93f};
    }
    case 4: {  // mountain: sky, snowy ridge, rock, meadow
      const float period = 24.0f;
      const float t = std::fmod(fx + static_cast<float>(ox) * 1.5f, period) / period;
      const float ridge = 0.3f * h + 0.14f * h * std::abs(2.0f * t - 1.0f);
      if (fy < ridge) return mix(Rgb{0.45f, 0.62f, 0.9f}, Rgb{0.8f, 0.87f, 0.96f}, ys / 0.45f);
      if (fy < ridge + 4.0f) return {0.93f, 0.94f, 0.96f};
      if (ys < 0.72f) return {0.43f, 0.4f, 0.38f};
      return {0.36f, 0.46f, 0.24f};
    }
    case 5: {  // beach: sky, sea with waves, sand
      if (ys < 0.34f) return {0.56f, 0.76f, 0.96f};
      if (ys < 0.54f) {
        const float wave = 0.5f + 0.5f * std::sin(0.7f * (fx + ox) + 0.9f * fy);
        return mix(Rgb{0.06f, 0.36f, 0.58f}, Rgb{0.3f, 0.6f, 0.75f}, wave * 0.6f);
      }
      const float n = value_noise(nseed, fx + ox, fy + oy, 3.0f);
      return mix(Rgb{0.84f, 0.74f, 0.5f}, Rgb{0.95f, 0.88f, 0.66f}, n);
    }
    case 6: {  // forest: dark foliage with trunks
      if ((x + ox) % 11 < 3) return {0.3f, 0.2f, 0.11f};
      const float n = value_noise(nseed, fx + ox, fy + oy, 4.0f);
      return mix(Rgb{0.05f, 0.22f, 0.08f}, Rgb{0.18f, 0.42f, 0.15f}, n);
    }
    case 7: {  // plaza: diagonal paving
      return ((x + y + ox) / 5) % 2 ? Rgb{0.8f, 0.78f, 0.73f} : Rgb{0.52f, 0.53f, 0.6f};
    }
    default: {  // tunnel: concentric rings with lamps
      const float dx = fx - 0.5f * w;
      const float dy = fy - 0.45f * h;
      const float r = std::sqrt(dx * dx + dy * dy);
      if (ys < 0.14f && (x + ox) % 16 < 4 && (y + oy) % 9 < 3) return {1.0f, 0.86f, 0.4f};
      return (static_cast<int>(r) + ox) / 6 % 2 ? Rgb{0.16f, 0.16f, 0.19f} : Rgb{0.3f, 0.28f, 0.3f};
    }
  }
}

struct Palette {
  Rgb top, bottom, skin, hair, shoes;
};

Palette identity_palette(std::int64_t identity) {
  static constexpr std::array<Rgb, 10> kTops = {{{0.8f, 0.12f, 0.12f},
                                                {0.15f, 0.3f, 0.75f},
                                                {0.95f, 0.95f, 0.92f},
                                                {0.1f, 0.1f, 0.1f},
                                                {0.2f, 0.6f, 0.25f},
                                                {0.95f, 0.8f, 0.15f},
                                                {0.55f, 0.25f, 0.6f},
                                                {0.5f, 0.5f, 0.5f},
                                                {0.95f, 0.5f, 0.1f},
                                                {0.4f, 0.75f, 0.9f}}};
  static constexpr std::array<Rgb, 8> kBottoms = {{{0.15f, 0.2f, 0.45f},
                                                  {0.08f, 0.08f, 0.08f},
                                                  {0.45f, 0.4f, 0.3f},
                                                  {0.6f, 0.6f, 0.62f},
                                                  {0.3f, 0.2f, 0.12f},
                                                  {0.85f, 0.82f, 0.75f},
                                                  {0.25f, 0.35f, 0.2f},
                                                  {0.5f, 0.1f, 0.15f}}};
  static constexpr std::array<Rgb, 5> kSkins = {{{0.96f, 0.8f, 0.69f},
                                                {0.87f, 0.68f, 0.53f},
                                                {0.72f, 0.52f, 0.38f},
                                                {0.55f, 0.38f, 0.26f},
                                                {0.36f, 0.24f, 0.16f}}};
  static constexpr std::array<Rgb, 5> kHair = {{{0.08f, 0.06f, 0.05f},
                                               {0.3f, 0.18f, 0.08f},
                                               {0.6f, 0.45f, 0.2f},
                                               {0.85f, 0.75f, 0.5f},
                                               {0.55f, 0.55f, 0.55f}}};
  const std::uint64_t h = mix64(static_cast<std::uint64_t>(identity) ^ 0x1d3a7c5eULL);
  return {kTops[h % 10], kBottoms[(h >> 8) % 8], kSkins[(h >> 16) % 5], kHair[(h >> 24) % 5],
          Rgb{0.12f, 0.1f, 0.09f}};
}

/// Paints the figure over `pixels` (float RGB, row-major).
void paint_figure(std::vector<Rgb>& pixels, int w, int h, const Knobs& k, const Palette& pal,
                  std::uint64_t seed) {
  const double theta = k.view_degrees * std::numbers::pi / 180.0;
  const auto c = static_cast<float>(std::cos(theta));
  const auto s = static_cast<float>(std::sin(theta));
  const float ac = std::abs(c);
  const float fw = static_cast<float>(w);
  const float fh = static_cast<float>(h);
  const float jitter = static_cast<float>(static_cast<int>(seed % 5) - 2);
  const float cx = 0.5f * fw + jitter;

  const float head_y = 0.16f * fh;
  const float head_r = 0.06f * fh;
  const float torso_top = 0.24f * fh;
  const float torso_bottom = 0.55f * fh;
  const float torso_hw = 0.15f * fw * (0.55f + 0.45f * ac);
  const float arm_w = 0.055f * fw;
  const float leg_bottom = 0.93f * fh;
  const float leg_hw = 0.045f * fw;
  const float leg_sep = 0.06f * fw * (0.35f + 0.65f * ac);
  const bool front = c > 0.15f;
  const bool back = c < -0.15f;

  const Rgb top = k.flags[kJacket] ? scale(pal.top, 0.55f) : pal.top;
  const Rgb arm = (k.flags[kSleeves] || k.flags[kJacket]) ? top : pal.skin;

  for (int y = 0; y < h; ++y) {
    const float fy = static_cast<float>(y) + 0.5f;
    const float shear = s * 0.12f * (fy - 0.5f * fh);
    for (int x = 0; x < w; ++x) {
      const float xr = static_cast<float>(x) + 0.5f - cx - shear;
      Rgb& px = pixels[static_cast<std::size_t>(y) * w + x];
      const float ax = std::abs(xr);

      // Umbrella canopy.
      if (k.flags[kUmbrella] && fy > 0.015f * fh && fy < 0.095f * fh) {
        const float t = (fy - 0.015f * fh) / (0.08f * fh);
        if (ax < 0.36f * fw * std::sqrt(t)) px = {0.72f, 0.1f, 0.16f};
      }
      if (k.flags[kUmbrella] && ax < 1.0f && fy >= 0.095f * fh && fy < 0.2f * fh) px = {0.1f, 0.1f, 0.1f};

      // Legs, with stride following the side component of the viewpoint.
      if (fy >= torso_bottom && fy < leg_bottom) {
        const float t = (fy - torso_bottom) / (leg_bottom - torso_bottom);
        const float stride = s * 0.05f * fw * t;
        const float l0 = std::abs(xr + leg_sep - stride);
        const float l1 = std::abs(xr - leg_sep + stride);
        if (l0 < leg_hw || l1 < leg_hw) {
          Rgb leg = pal.bottom;
          if (k.flags[kShorts] && t > 0.3f) leg = pal.skin;
          if (fy > 0.9f * fh) leg = pal.shoes;
          if (k.flags[kBoots] && fy > 0.82f * fh) leg = {0.06f, 0.05f, 0.05f};
          px = leg;
        }
        if (k.flags[kDress] && t < 0.62f && ax < torso_hw * (0.9f + 0.6f * t)) px = pal.top;
      }

      // Arms beside the torso; narrower when seen from the side.
      if (fy >= torso_top + 1.0f && fy < torso_bottom - 1.0f && ax >= torso_hw &&
          ax < torso_hw + arm_w * (0.3f + 0.7f * ac)) {
        px = arm;
      }

      // Torso.
      if (fy >= torso_top && fy < torso_bottom && ax < torso_hw) {
        px = top;
        if (k.flags[kJacket] && front && ax < 0.8f) px = {0.85f, 0.85f, 0.8f};
      }

      // Backpack: on the torso from behind, protruding from the side.
      if (k.flags[kBackpack] && fy >= 0.27f * fh && fy < 0.5f * fh) {
        if (back && ax < 0.7f * torso_hw) px = {0.2f, 0.26f, 0.14f};
        const float side = -s * xr;
        if (!back && !front && side > torso_hw * 0.6f && side < torso_hw + 0.08f * fw) {
          px = {0.2f, 0.26f, 0.14f};
        }
      }

      // Shoulder bag: strap across the torso and a bag at the hip.
      if (k.flags[kShoulderBag]) {
        const float strap = xr - (fy - torso_top) * 0.5f + torso_hw * 0.6f;
        if (std::abs(strap) < 0.9f && fy >= torso_top && fy < 0.47f * fh && ax < torso_hw) {
          px = {0.4f, 0.26f, 0.12f};
        }
        if (fy >= 0.44f * fh && fy < 0.56f * fh && xr > torso_hw - 1.0f &&
            xr < torso_hw + 0.08f * fw) {
          px = {0.46f, 0.3f, 0.15f};
        }
      }

      // Handbag held at the opposite hand.
      if (k.flags[kHandbag] && fy >= 0.5f * fh && fy < 0.6f * fh && xr < -torso_hw &&
          xr > -torso_hw - 0.09f * fw) {
        px = {0.85f, 0.2f, 0.5f};
      }

      // Head: face from the front, hair from behind and on top.
      const float dy = fy - head_y;
      const float r2 = xr * xr + dy * dy;
      if (k.flags[kLongHair] && ax < head_r * 1.05f && fy >= head_y && fy < 0.31f * fh) {
        px = pal.hair;
      }
      if (r2 < head_r * head_r) {
        Rgb head = pal.skin;
        if (back || dy < -0.35f * head_r) head = pal.hair;
        if (front && k.flags[kGlasses] && dy > -0.15f * head_r && dy < 0.15f * head_r) {
          head = {0.04f, 0.04f, 0.05f};
        }
        if (front && k.flags[kMask] && dy > 0.25f * head_r) head = {0.95f, 0.96f, 0.97f};
        px = head;
      }
      if (k.flags[kHat] && dy < -0.3f * head_r && dy > -1.25f * head_r &&
          ax < head_r * (dy < -0.9f * head_r ? 0.8f : 1.35f)) {
        px = {0.14f, 0.16f, 0.5f};
      }
    }
  }
}

struct WeatherLook {
  float desaturate;
  float fog;
  float speck;
  float noise;
};

constexpr std::array<WeatherLook, 7> kWeather = {{
    {0.0f, 0.0f, 0.0f, 0.01f},     // sunny
    {0.15f, 0.06f, 0.0f, 0.02f},   // clouds
    {0.35f, 0.18f, 0.0f, 0.03f},   // overcast
    {0.3f, 0.5f, 0.0f, 0.02f},     // foggy
    {0.08f, 0.04f, 0.0f, 0.015f},  // neutral
    {0.45f, 0.35f, 0.09f, 0.1f},   // blizzard
    {0.2f, 0.15f, 0.035f, 0.05f},  // snowlight
}};

struct IlluminationLook {
  float level;
  Rgb tint;
};

constexpr std::array<IlluminationLook, 7> kIllumination = {{
    {0.22f, {0.8f, 0.86f, 1.12f}},   // midnight
    {0.55f, {1.1f, 0.95f, 0.86f}},   // dawn
    {0.86f, {1.0f, 1.0f, 1.0f}},     // forenoon
    {1.0f, {1.03f, 1.03f, 1.0f}},    // noon
    {0.9f, {1.06f, 1.0f, 0.92f}},    // afternoon
    {0.6f, {1.15f, 0.9f, 0.76f}},    // dusk
    {0.38f, {0.85f, 0.9f, 1.15f}},   // night
}};

}  // namespace

SceneImage render(const AttributeSchema& schema, const AttributeConfig& config,
                  std::int64_t identity, std::uint64_t seed, const RenderOptions& options) {
  schema.validate(config);
  if (options.width < 1 || options.height < 1) throw ShapeError("render size must be positive");
  const int w = options.width;
  const int h = options.height;
  const Knobs knobs = resolve_knobs(schema, config);

  std::vector<Rgb> pixels(static_cast<std::size_t>(w) * h);
  for (int y = 0; y < h; ++y) {
    for (int x = 0; x < w; ++x) {
      pixels[static_cast<std::size_t>(y) * w + x] = background_color(knobs.background, x, y, w, h, seed);
    }
  }
  paint_figure(pixels, w, h, knobs, identity_palette(identity), seed);

  const WeatherLook& weather = kWeather[static_cast<std::size_t>(knobs.weather)];
  const IlluminationLook& light = kIllumination[static_cast<std::size_t>(knobs.illumination)];
  constexpr Rgb kFog{0.76f, 0.78f, 0.82f};
  const std::uint64_t speck_seed = hash_combine(seed, 0x5e);
  const std::uint64_t noise_seed = hash_combine(seed, 0x7a);

  SceneImage image(w, h);
  for (int y = 0; y < h; ++y) {
    for (int x = 0; x < w; ++x) {
      Rgb px = pixels[static_cast<std::size_t>(y) * w + x];
      const float luma = 0.299f * px[0] + 0.587f * px[1] + 0.114f * px[2];
      px = mix(px, Rgb{luma, luma, luma}, weather.desaturate);
      px = mix(px, kFog, weather.fog);
      if (weather.speck > 0.0f && hash_unit(speck_seed, x, y) < weather.speck) px = {1.0f, 1.0f, 1.0f};
      const float jitter = weather.noise * (2.0f * hash_unit(noise_seed, x, y) - 1.0f);
      for (int ch = 0; ch < 3; ++ch) {
        float v = (px[ch] + jitter) * light.level * light.tint[ch];
        v = std::clamp(v, 0.0f, 1.0f);
        image.at(x, y, ch) = static_cast<std::uint8_t>(std::lround(v * 255.0f));
      }
    }
  }
  image.provenance = {config, identity, Domain::kSynthetic};
  return image;
}

void apply_style_shift(SceneImage& image, const StyleShift& shift) {
  std::array<std::uint8_t, 256 * 3> lut{};
  for (int ch = 0; ch < 3; ++ch) {
    for (int v = 0; v < 256; ++v) {
      const double shifted = 255.0 * std::pow(v / 255.0, shift.gamma) + shift.channel_bias[ch];
      lut[ch * 256 + v] = static_cast<std::uint8_t>(std::clamp(std::lround(shifted), 0L, 255L));
    }
  }
  for (std::size_t i = 0; i < image.rgb.size(); ++i) {
    image.rgb[i] = lut[(i % 3) * 256 + image.rgb[i]];
  }
}

// TargetDistribution ---------------------------------------------------------

void TargetDistribution::validate(const AttributeSchema& schema) const {
  if (probabilities.size() != schema.size()) {
    throw ValidationError("target distribution has " + std::to_string(probabilities.size()) +
                          " dimensions, schema has " + std::to_string(schema.size()));
  }
  for (std::size_t d = 0; d < schema.size(); ++d) {
    const auto& p = probabilities[d];
    if (p.size() != static_cast<std::size_t>(schema[d].cardinality)) {
      throw ValidationError("probability vector for '" + schema[d].name + "' has wrong length");
    }
    double sum = 0.0;
    for (double v : p) {
      if (!(v >= 0.0) || !std::isfinite(v)) {
        throw ValidationError("negative or non-finite probability for '" + schema[d].name + "'");
      }
      sum += v;
    }
    if (std::abs(sum - 1.0) > 1e-9) {
      throw ValidationError("probabilities for '" + schema[d].name + "' sum to " +
                            std::to_string(sum));
    }
  }
  if (!(style_shift.gamma >= 0.5 && style_shift.gamma <= 2.0)) {
    throw ValidationError("style shift gamma outside [0.5, 2]");
  }
  for (double b : style_shift.channel_bias) {
    if (!(b >= -32.0 && b <= 32.0)) throw ValidationError("style shift bias outside [-32, 32]");
  }
}

TargetDistribution TargetDistribution::uniform(const AttributeSchema& schema) {
  TargetDistribution dist;
  for (const auto& d : schema.dimensions()) {
    dist.probabilities.emplace_back(static_cast<std::size_t>(d.cardinality), 1.0 / d.cardinality);
  }
  return dist;
}

TargetDistribution TargetDistribution::degenerate(const AttributeSchema& schema,
                                                  const AttributeConfig& config) {
  schema.validate(config);
  TargetDistribution dist;
  for (std::size_t d = 0; d < schema.size(); ++d) {
    std::vector<double> p(static_cast<std::size_t>(schema[d].cardinality), 0.0);
    p[static_cast<std::size_t>(config.values[d])] = 1.0;
    dist.probabilities.push_back(std::move(p));
  }
  return dist;
}

AttributeConfig TargetDistribution::sample(Rng& rng) const {
  AttributeConfig config;
  config.values.reserve(probabilities.size());
  for (const auto& p : probabilities) {
    const double u = rng.uniform();
    double acc = 0.0;
    int chosen = static_cast<int>(p.size()) - 1;
    for (std::size_t i = 0; i < p.size(); ++i) {
      acc += p[i];
      if (u < acc) {
        chosen = static_cast<int>(i);
        break;
      }
    }
    // Never land on a zero-probability tail category through rounding.
    while (chosen > 0 && p[static_cast<std::size_t>(chosen)] == 0.0) --chosen;
    config.values.push_back(chosen);
  }
  return config;
}

std::vector<SceneImage> sample_target_domain(const AttributeSchema& schema,
                                             const TargetDistribution& dist, std::size_t n,
                                             std::uint64_t seed, const RenderOptions& options,
                                             int threads) {
  if (n < 1) throw ValidationError("target sample size must be at least 1");
  dist.validate(schema);
  Rng rng(hash_combine(seed, 0x7a4));
  std::vector<AttributeConfig> configs;
  std::vector<std::int64_t> identities;
  configs.reserve(n);
  for (std::size_t i = 0; i < n; ++i) {
    configs.push_back(dist.sample(rng));
    identities.push_back(static_cast<std::int64_t>(rng.below(kReferenceIdentities)));
  }
  std::vector<SceneImage> images(n);
  parallel_for(n, threads, [&](std::size_t i) {
    SceneImage img = render(schema, configs[i], identities[i], hash_combine(seed, 0x1a, i), options);
    apply_style_shift(img, dist.style_shift);
    img.provenance.domain = Domain::kTarget;
    images[i] = std::move(img);
  });
  return images;
}

// Catalog --------------------------------------------------------------------

SceneImage SyntheticCatalog::load(std::size_t index) const { return load(records.at(index)); }

SceneImage SyntheticCatalog::load(const CatalogRecord& record) const {
  if (!record.path.empty()) {
    SceneImage img = read_ppm(record.path);
    img.provenance = {record.config, record.identity, Domain::kSynthetic};
    return img;
  }
  return render(schema, record.config, record.identity, record.seed, options);
}

std::vector<AttributeConfig> SyntheticCatalog::distinct_configs() const {
  std::vector<AttributeConfig> out;
  std::set<AttributeConfig> seen;
  for (const auto& r : records) {
    if (seen.insert(r.config).second) out.push_back(r.config);
  }
  return out;
}

SyntheticCatalog build_catalog(const AttributeSchema& schema,
                               std::span<const AttributeConfig> configs, int images_per_config,
                               std::uint64_t seed, const RenderOptions& options,
                               const std::optional<std::filesystem::path>& image_dir,
                               std::int64_t identity_count, int threads) {
  if (images_per_config < 1) throw ValidationError("images_per_config must be at least 1");
  for (const auto& c : configs) schema.validate(c);
  if (identity_count <= 0) identity_count = kReferenceIdentities;

  SyntheticCatalog catalog{schema, options, {}};
  const std::size_t k = static_cast<std::size_t>(images_per_config);
  catalog.records.reserve(configs.size() * k);
  for (std::size_t ci = 0; ci < configs.size(); ++ci) {
    for (std::size_t j = 0; j < k; ++j) {
      const std::size_t r = ci * k + j;
      catalog.records.push_back({configs[ci], static_cast<std::int64_t>(r) % identity_count,
                                 hash_combine(seed, 0xca7, r), {}});
    }
  }
  if (image_dir) {
    std::error_code ec;
    std::filesystem::create_directories(*image_dir, ec);
    if (ec) throw IoError("cannot create image directory " + image_dir->string() + ": " + ec.message());
    parallel_for(catalog.records.size(), threads, [&](std::size_t r) {
      auto& rec = catalog.records[r];
      char name[32];
      std::snprintf(name, sizeof(name), "img_%07zu.ppm", r);
      const auto path = *image_dir / name;
      write_ppm(path, render(schema, rec.config, rec.identity, rec.seed, options));
      rec.path = path;
    });
  }
  return catalog;
}

// Persistence ----------------------------------------------------------------

void write_ppm(const std::filesystem::path& path, const SceneImage& image) {
  if (image.rgb.size() != image.pixel_count() * 3) throw ShapeError("image buffer size mismatch");
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("cannot open " + path.string() + " for writing");
  out << "P6\n" << image.width << ' ' << image.height << "\n255\n";
  out.write(reinterpret_cast<const char*>(image.rgb.data()),
            static_cast<std::streamsize>(image.rgb.size()));
  if (!out) throw IoError("failed writing " + path.string());
}

namespace {

std::string next_ppm_token(std::istream& in) {
  std::string token;
  char ch;
  while (in.get(ch)) {
    if (ch == '#') {
      std::string ignored;
      std::getline(in, ignored);
      continue;
    }
    if (std::isspace(static_cast<unsigned char>(ch))) {
      if (!token.empty()) break;
      continue;
    }
    token.push_back(ch);
  }
  return token;
}

}  // namespace

SceneImage read_ppm(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open " + path.string());
  if (next_ppm_token(in) != "P6") throw IoError(path.string() + " is not a binary PPM (P6)");
  int w = 0, h = 0, maxval = 0;
  try {
    w = std::stoi(next_ppm_token(in));
    h = std::stoi(next_ppm_token(in));
    maxval = std::stoi(next_ppm_token(in));
  } catch (const std::exception&) {
    throw IoError("malformed PPM header in " + path.string());
  }
  if (w <= 0 || h <= 0 || maxval != 255) throw IoError("unsupported PPM geometry in " + path.string());
  SceneImage img(w, h);
  in.read(reinterpret_cast<char*>(img.rgb.data()), static_cast<std::streamsize>(img.rgb.size()));
  if (in.gcount() != static_cast<std::streamsize>(img.rgb.size())) {
    throw IoError("truncated PPM " + path.string());
  }
  return img;
}

void write_catalog_jsonl(const std::filesystem::path& path, const SyntheticCatalog& catalog) {
  std::ofstream out(path);
  if (!out) throw IoError("cannot open " + path.string() + " for writing");
  for (const auto& r : catalog.records) {
    nlohmann::ordered_json row;
    row["path"] = r.path.string();
    row["identity"] = r.identity;
    row["seed"] = r.seed;
    for (std::size_t d = 0; d < catalog.schema.size(); ++d) {
      row[catalog.schema[d].name] = r.config.values[d];
    }
    out << row.dump() << '\n';
  }
  if (!out) throw IoError("failed writing " + path.string());
}

SyntheticCatalog read_catalog_jsonl(const std::filesystem::path& path,
                                    const AttributeSchema& schema, const RenderOptions& options) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open catalog " + path.string());
  SyntheticCatalog catalog{schema, options, {}};
  std::string line;
  std::size_t line_no = 0;
  const auto base = path.parent_path();
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty()) continue;
    try {
      const auto row = nlohmann::json::parse(line);
      CatalogRecord rec;
      rec.identity = row.at("identity").get<std::int64_t>();
      rec.seed = row.value("seed", std::uint64_t{0});
      const auto p = row.value("path", std::string{});
      if (!p.empty()) {
        std::filesystem::path fp(p);
        rec.path = fp.is_relative() ? base / fp : fp;
      }
      for (const auto& d : schema.dimensions()) rec.config.values.push_back(row.at(d.name).get<int>());
      schema.validate(rec.config);
      catalog.records.push_back(std::move(rec));
    } catch (const nlohmann::json::exception& e) {
      throw IoError(path.string() + ":" + std::to_string(line_no) + ": " + e.what());
    }
  }
  return catalog;
}

void write_schema_json(const std::filesystem::path& path, const AttributeSchema& schema) {
  std::ofstream out(path);
  if (!out) throw IoError("cannot open " + path.string() + " for writing");
  out << schema.to_json().dump(2) << '\n';
}

AttributeSchema read_schema_json(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open schema " + path.string());
  try {
    return AttributeSchema::from_json(nlohmann::json::parse(in));
  } catch (const nlohmann::json::exception& e) {
    throw IoError("malformed schema " + path.string() + ": " + e.what());
  }
}

// Testbeds -------------------------------------------------------------------

namespace {

std::vector<double> peaked(int cardinality, int mode, int second, double peak) {
  std::vector<double> p(static_cast<std::size_t>(cardinality), 0.0);
  const double rest = 1.0 - peak;
  p[static_cast<std::size_t>(mode)] = peak;
  p[static_cast<std::size_t>(second)] += rest * 0.5;
  const double tail = rest * 0.5 / (cardinality - 2);
  for (int i = 0; i < cardinality; ++i) {
    if (i != mode && i != second) p[static_cast<std::size_t>(i)] = tail;
  }
  return p;
}

}  // namespace

Testbed make_testbed(std::uint64_t seed, const TestbedOptions& options) {
  Testbed bed{AttributeSchema::finegpr(), {}, {}};
  const auto& schema = bed.schema;
  Rng rng(hash_combine(seed, 0x7e57));

  // In the background-dominant bed, weather and illumination are pinned to
  // sunny noon in both domains so that the scene is what varies.
  auto pinned = [&](const Dimension& d) -> int {
    if (!options.background_dominant) return -1;
    if (d.name == "weather") return 0;
    if (d.name == "illumination") return 3;
    return -1;
  };

  std::set<AttributeConfig> seen;
  const auto wanted = std::min<std::uint64_t>(options.catalog_configs, schema.config_count());
  while (bed.catalog_configs.size() < wanted) {
    AttributeConfig c;
    for (const auto& d : schema.dimensions()) {
      const int value = static_cast<int>(rng.below(static_cast<std::uint64_t>(d.cardinality)));
      c.values.push_back(pinned(d) >= 0 ? pinned(d) : value);
    }
    if (seen.insert(c).second) bed.catalog_configs.push_back(std::move(c));
  }

  auto& target = bed.target;
  for (const auto& d : schema.dimensions()) {
    const int card = d.cardinality;
    if (d.kind == DimensionKind::kBinaryFlag) {
      const double p1 = rng.uniform(0.15, 0.85);
      target.probabilities.push_back({1.0 - p1, p1});
    } else if (d.kind == DimensionKind::kCircular) {
      target.probabilities.emplace_back(static_cast<std::size_t>(card), 1.0 / card);
    } else {
      const int mode = static_cast<int>(rng.below(static_cast<std::uint64_t>(card)));
      int second = static_cast<int>(rng.below(static_cast<std::uint64_t>(card - 1)));
      if (second >= mode) ++second;
      if (options.background_dominant) {
        const int at = d.name == "background" ? mode : pinned(d);
        std::vector<double> p(static_cast<std::size_t>(card), at >= 0 ? 0.0 : 1.0 / card);
        if (at >= 0) p[static_cast<std::size_t>(at)] = 1.0;
        target.probabilities.push_back(std::move(p));
      } else {
        target.probabilities.push_back(peaked(card, mode, second, options.target_peak));
      }
    }
  }
  target.style_shift.gamma = rng.uniform(options.gamma_low, options.gamma_high);
  for (auto& b : target.style_shift.channel_bias) b = rng.uniform(-options.max_bias, options.max_bias);
  return bed;
}

}  // namespace aost
