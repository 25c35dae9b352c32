#include "aost/features.hpp"

#include <bit>
#include <cmath>
#include <cstring>
#include <fstream>

#include "aost/error.hpp"
#include "aost/parallel.hpp"
#include "aost/rng.hpp"

namespace aost {

void ExtractorSpec::validate() const {
  if (filters.empty()) throw ValidationError("extractor needs at least one layer");
  for (int n : filters) {
    if (n < 1) throw ValidationError("every layer needs at least one filter");
  }
  if (kernel < 1 || kernel % 2 == 0) throw ValidationError("kernel size must be odd and positive");
}

std::vector<double> FeaturePyramid::default_weights(std::size_t layers) {
  return std::vector<double>(layers, layers ? 1.0 / static_cast<double>(layers) : 0.0);
}

FilterBank::FilterBank(const ExtractorSpec& spec) : spec_(spec) {
  spec_.validate();
  const int taps = spec_.kernel * spec_.kernel;
  for (std::size_t l = 0; l < spec_.layers(); ++l) {
    const int fan_in = taps * in_channels(l);
    const double scale = std::sqrt(3.0 / fan_in);
    Rng rng(hash_combine(spec_.seed, l));
    std::vector<float> w(static_cast<std::size_t>(spec_.filters[l]) * fan_in);
    for (auto& v : w) v = static_cast<float>(rng.uniform(-scale, scale));
    weights_.push_back(std::move(w));
  }
}

int FilterBank::in_channels(std::size_t layer) const {
  return layer == 0 ? 3 : spec_.filters[layer - 1];
}

std::span<const float> FilterBank::weights(std::size_t layer, std::size_t filter) const {
  const std::size_t fan_in =
      static_cast<std::size_t>(spec_.kernel) * spec_.kernel * in_channels(layer);
  return {weights_[layer].data() + filter * fan_in, fan_in};
}

double FilterBank::l1_norm(std::size_t layer, std::size_t filter) const {
  double sum = 0.0;
  for (float v : weights(layer, filter)) sum += std::abs(v);
  return sum;
}

namespace {

/// Same-size zero-padded convolution followed by rectification. `input` holds
/// `channels` planes of w x h.
void conv_relu(const std::vector<float>& input, int channels, int w, int h, const FilterBank& bank,
               std::size_t layer, std::size_t filter, float* out) {
  const int k = bank.spec().kernel;
  const int r = k / 2;
  const auto weights = bank.weights(layer, filter);
  const std::size_t plane = static_cast<std::size_t>(w) * h;
  std::fill(out, out + plane, 0.0f);
  for (int c = 0; c < channels; ++c) {
    const float* in = input.data() + static_cast<std::size_t>(c) * plane;
    for (int dy = -r; dy <= r; ++dy) {
      for (int dx = -r; dx <= r; ++dx) {
        const float wt = weights[(static_cast<std::size_t>(c) * k + (dy + r)) * k + (dx + r)];
        const int x0 = std::max(0, -dx);
        const int x1 = std::min(w, w - dx);
        const int y0 = std::max(0, -dy);
        const int y1 = std::min(h, h - dy);
        for (int y = y0; y < y1; ++y) {
          float* o = out + static_cast<std::size_t>(y) * w;
          const float* src = in + static_cast<std::size_t>(y + dy) * w + dx;
          for (int x = x0; x < x1; ++x) o[x] += wt * src[x];
        }
      }
    }
  }
  for (std::size_t i = 0; i < plane; ++i) out[i] = out[i] > 0.0f ? out[i] : 0.0f;
}

std::vector<float> avg_pool2(const std::vector<float>& input, int channels, int w, int h) {
  const int ow = w / 2;
  const int oh = h / 2;
  std::vector<float> out(static_cast<std::size_t>(channels) * ow * oh);
  for (int c = 0; c < channels; ++c) {
    const float* in = input.data() + static_cast<std::size_t>(c) * w * h;
    float* o = out.data() + static_cast<std::size_t>(c) * ow * oh;
    for (int y = 0; y < oh; ++y) {
      const float* r0 = in + static_cast<std::size_t>(2 * y) * w;
      const float* r1 = r0 + w;
      for (int x = 0; x < ow; ++x) {
        o[static_cast<std::size_t>(y) * ow + x] =
            0.25f * ((r0[2 * x] + r0[2 * x + 1]) + (r1[2 * x] + r1[2 * x + 1]));
      }
    }
  }
  return out;
}

}  // namespace

FeaturePyramid extract(const SceneImage& image, const FilterBank& bank, int threads) {
  const std::size_t layers = bank.spec().layers();
  const int divisor = 1 << layers;
  if (image.width <= 0 || image.height <= 0 || image.width % divisor != 0 ||
      image.height % divisor != 0) {
    throw ShapeError("image " + std::to_string(image.width) + "x" + std::to_string(image.height) +
                     " is not divisible by 2^" + std::to_string(layers));
  }
  if (image.rgb.size() != image.pixel_count() * 3) throw ShapeError("image buffer size mismatch");

  int w = image.width;
  int h = image.height;
  std::vector<float> input(image.pixel_count() * 3);
  for (std::size_t p = 0; p < image.pixel_count(); ++p) {
    for (std::size_t c = 0; c < 3; ++c) {
      input[c * image.pixel_count() + p] = static_cast<float>(image.rgb[p * 3 + c]) / 255.0f;
    }
  }

  FeaturePyramid pyr;
  pyr.weights = FeaturePyramid::default_weights(layers);
  int channels = 3;
  for (std::size_t l = 0; l < layers; ++l) {
    if (l > 0) {
      input = avg_pool2(input, channels, w, h);
      w /= 2;
      h /= 2;
    }
    FeatureMap map;
    map.layer = static_cast<int>(l);
    map.filters = bank.spec().filters[l];
    map.width = w;
    map.height = h;
    map.values.resize(static_cast<std::size_t>(map.filters) * map.positions());
    parallel_for(static_cast<std::size_t>(map.filters), threads, [&](std::size_t f) {
      conv_relu(input, channels, w, h, bank, l, f, map.values.data() + f * map.positions());
    });
    input = map.values;
    channels = map.filters;
    pyr.maps.push_back(std::move(map));
  }
  return pyr;
}

FeaturePyramid extract(const SceneImage& image, const ExtractorSpec& spec, int threads) {
  return extract(image, FilterBank(spec), threads);
}

GramMatrix gram(const FeatureMap& map) {
  GramMatrix g;
  g.layer = map.layer;
  g.size = map.filters;
  const std::size_t n = static_cast<std::size_t>(map.filters);
  const std::size_t m = map.positions();
  g.entries.assign(n * n, 0.0);
  for (std::size_t i = 0; i < n; ++i) {
    const float* fi = map.values.data() + i * m;
    for (std::size_t j = i; j < n; ++j) {
      const float* fj = map.values.data() + j * m;
      double sum = 0.0;
      for (std::size_t k = 0; k < m; ++k) sum += static_cast<double>(fi[k]) * fj[k];
      g.entries[i * n + j] = sum;
      g.entries[j * n + i] = sum;
    }
  }
  return g;
}

// Feature cache --------------------------------------------------------------

namespace {

static_assert(std::endian::native == std::endian::little,
              "feature cache I/O assumes a little-endian host");

template <typename T>
void put(std::ofstream& out, T value) {
  out.write(reinterpret_cast<const char*>(&value), sizeof(T));
}

template <typename T>
T get(std::ifstream& in, const std::filesystem::path& path) {
  T value{};
  in.read(reinterpret_cast<char*>(&value), sizeof(T));
  if (!in) throw IoError("truncated feature cache " + path.string());
  return value;
}

}  // namespace

void write_feature_cache(const std::filesystem::path& path, const FeaturePyramid& pyramid) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("cannot open " + path.string() + " for writing");
  out.write("FGPR", 4);
  put<std::uint16_t>(out, kFeatureCacheVersion);
  put<std::uint32_t>(out, static_cast<std::uint32_t>(pyramid.maps.size()));
  for (const auto& m : pyramid.maps) {
    put<std::uint32_t>(out, static_cast<std::uint32_t>(m.layer));
    put<std::uint32_t>(out, static_cast<std::uint32_t>(m.filters));
    put<std::uint32_t>(out, static_cast<std::uint32_t>(m.positions()));
    out.write(reinterpret_cast<const char*>(m.values.data()),
              static_cast<std::streamsize>(m.values.size() * sizeof(float)));
  }
  if (!out) throw IoError("failed writing " + path.string());
}

FeaturePyramid read_feature_cache(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open " + path.string());
  char magic[4];
  in.read(magic, 4);
  if (!in || std::memcmp(magic, "FGPR", 4) != 0) throw IoError(path.string() + ": bad magic");
  const auto version = get<std::uint16_t>(in, path);
  if (version != kFeatureCacheVersion) {
    throw IoError(path.string() + ": unsupported version " + std::to_string(version));
  }
  const auto layers = get<std::uint32_t>(in, path);
  FeaturePyramid pyr;
  for (std::uint32_t i = 0; i < layers; ++i) {
    FeatureMap m;
    m.layer = static_cast<int>(get<std::uint32_t>(in, path));
    m.filters = static_cast<int>(get<std::uint32_t>(in, path));
    const auto positions = get<std::uint32_t>(in, path);
    // The cache keeps only the position count; spatial layout is flattened.
    m.width = static_cast<int>(positions);
    m.height = 1;
    m.values.resize(static_cast<std::size_t>(m.filters) * positions);
    in.read(reinterpret_cast<char*>(m.values.data()),
            static_cast<std::streamsize>(m.values.size() * sizeof(float)));
    if (!in) throw IoError("truncated feature cache " + path.string());
    pyr.maps.push_back(std::move(m));
  }
  pyr.weights = FeaturePyramid::default_weights(pyr.maps.size());
  return pyr;
}

}  // namespace aost
