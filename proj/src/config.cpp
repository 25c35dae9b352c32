#include "aost/config.hpp"

#include <charconv>
#include <cstdlib>
#include <functional>
#include <sstream>

#include "aost/error.hpp"
#include "aost/format.hpp"

namespace aost {

std::filesystem::path RunConfig::catalog_path() const {
  return catalog.empty() ? workdir / "catalog" / "catalog.jsonl" : catalog;
}

std::filesystem::path RunConfig::target_path() const {
  return target.empty() ? workdir / "target" / "target.jsonl" : target;
}

std::filesystem::path RunConfig::schema_path() const {
  return schema.empty() ? workdir / "schema.json" : schema;
}

namespace {

std::string trim(std::string_view s) {
  const auto first = s.find_first_not_of(" \t\r");
  if (first == std::string_view::npos) return {};
  const auto last = s.find_last_not_of(" \t\r");
  return std::string(s.substr(first, last - first + 1));
}

// Value parsers return an error message, empty on success.

std::string parse_into(const std::string& text, double& out) {
  const char* begin = text.data();
  const char* end = begin + text.size();
  const auto [ptr, ec] = std::from_chars(begin, end, out);
  if (ec != std::errc() || ptr != end) return "expected a number, got '" + text + "'";
  return {};
}

template <typename Int>
std::string parse_into(const std::string& text, Int& out) {
  const char* begin = text.data();
  const char* end = begin + text.size();
  int base = 10;
  if (text.size() > 2 && text[0] == '0' && (text[1] == 'x' || text[1] == 'X')) {
    begin += 2;
    base = 16;
  }
  const auto [ptr, ec] = std::from_chars(begin, end, out, base);
  if (ec != std::errc() || ptr != end || begin == end) {
    return "expected an integer, got '" + text + "'";
  }
  return {};
}

std::string parse_into(const std::string& text, bool& out) {
  if (text == "true" || text == "1" || text == "yes" || text == "on") {
    out = true;
  } else if (text == "false" || text == "0" || text == "no" || text == "off") {
    out = false;
  } else {
    return "expected true or false, got '" + text + "'";
  }
  return {};
}

std::string parse_into(const std::string& text, std::vector<int>& out) {
  std::vector<int> values;
  std::stringstream in(text);
  std::string item;
  while (std::getline(in, item, ',')) {
    int v = 0;
    if (auto err = parse_into(trim(item), v); !err.empty()) return err;
    values.push_back(v);
  }
  if (values.empty()) return "expected a comma-separated list of integers";
  out = std::move(values);
  return {};
}

std::string to_text(double v) { return format_double(v); }
std::string to_text(bool v) { return v ? "true" : "false"; }
template <typename Int>
std::string to_text(Int v) {
  return std::to_string(v);
}
std::string to_text(const std::vector<int>& v) {
  std::string out;
  for (std::size_t i = 0; i < v.size(); ++i) out += (i ? "," : "") + std::to_string(v[i]);
  return out;
}

struct KeyBinding {
  ConfigKey doc;
  std::function<std::string(RunConfig&, const std::string&)> set;
  std::function<std::string(const RunConfig&)> get;
};

template <typename T, typename Member>
KeyBinding make_key(std::string name, std::string description, Member member,
                std::function<std::string(const T&)> check = {}) {
  KeyBinding b;
  b.doc = {name, "", std::move(description)};
  b.set = [member, check](RunConfig& c, const std::string& text) -> std::string {
    T value{};
    if (auto err = parse_into(text, value); !err.empty()) return err;
    if (check) {
      if (auto err = check(value); !err.empty()) return err;
    }
    member(c) = value;
    return {};
  };
  b.get = [member](const RunConfig& c) { return to_text(member(const_cast<RunConfig&>(c))); };
  return b;
}

KeyBinding path_key(std::string name, std::string description,
                     std::function<std::filesystem::path&(RunConfig&)> member) {
  KeyBinding b;
  b.doc = {name, "", std::move(description)};
  b.set = [member](RunConfig& c, const std::string& text) -> std::string {
    member(c) = text;
    return {};
  };
  b.get = [member](const RunConfig& c) { return member(const_cast<RunConfig&>(c)).string(); };
  return b;
}

std::function<std::string(const double&)> at_least(double lo) {
  return [lo](const double& v) {
    return v >= lo ? std::string{} : "must be >= " + format_double(lo);
  };
}

std::function<std::string(const double&)> within(double lo, double hi) {
  return [lo, hi](const double& v) {
    return v >= lo && v <= hi ? std::string{}
                              : "must lie in [" + format_double(lo) + ", " + format_double(hi) + "]";
  };
}

std::function<std::string(const int&)> int_within(int lo, int hi) {
  return [lo, hi](const int& v) {
    return v >= lo && v <= hi
               ? std::string{}
               : "must lie in [" + std::to_string(lo) + ", " + std::to_string(hi) + "]";
  };
}

std::function<std::string(const std::size_t&)> size_at_least(std::size_t lo) {
  return [lo](const std::size_t& v) {
    return v >= lo ? std::string{} : "must be >= " + std::to_string(lo);
  };
}

const std::vector<KeyBinding>& bindings() {
  static const std::vector<KeyBinding> table = [] {
    using P = RunConfig&;
    constexpr int kMaxInt = 1 << 30;
    std::vector<KeyBinding> t;
    t.push_back(path_key("workdir", "run directory; all outputs go here",
                          [](P c) -> std::filesystem::path& { return c.workdir; }));
    t.push_back(path_key("catalog", "catalog JSONL (default <workdir>/catalog/catalog.jsonl)",
                          [](P c) -> std::filesystem::path& { return c.catalog; }));
    t.push_back(path_key("target", "target image list JSONL (default <workdir>/target/target.jsonl)",
                          [](P c) -> std::filesystem::path& { return c.target; }));
    t.push_back(path_key("schema", "attribute schema JSON (default <workdir>/schema.json)",
                          [](P c) -> std::filesystem::path& { return c.schema; }));
    t.push_back(make_key<std::uint64_t>("seed", "run seed, any 64-bit integer",
                                    [](P c) -> std::uint64_t& { return c.params.seed; }));
    t.push_back(make_key<int>("threads", "worker threads, 1..256; results do not depend on it",
                          [](P c) -> int& { return c.params.threads; }, int_within(1, 256)));

    t.push_back(make_key<double>("alpha", "style weight, >= 0",
                             [](P c) -> double& { return c.params.distance.alpha; }, at_least(0)));
    t.push_back(make_key<double>("beta", "content weight, >= 0",
                             [](P c) -> double& { return c.params.distance.beta; }, at_least(0)));
    t.push_back(make_key<int>("content_layer", "layer used by the content distance, 0..layers-1",
                          [](P c) -> int& { return c.params.distance.content_layer; },
                          int_within(0, 63)));
    t.push_back(make_key<std::vector<int>>("filters", "filters per extractor layer, comma-separated, each >= 1",
                                       [](P c) -> std::vector<int>& { return c.params.extractor.filters; }));
    t.push_back(make_key<int>("kernel", "square kernel size, odd, 1..15",
                          [](P c) -> int& { return c.params.extractor.kernel; }, int_within(1, 15)));
    t.push_back(make_key<std::uint64_t>("filter_seed", "seed of the extractor's filter bank",
                                    [](P c) -> std::uint64_t& { return c.params.extractor.seed; }));

    t.push_back(make_key<int>("boost_rounds", "boosting rounds, 0..100000",
                          [](P c) -> int& { return c.params.surrogate.rounds; },
                          int_within(0, 100000)));
    t.push_back(make_key<double>("learning_rate", "shrinkage eta, (0, 1]",
                             [](P c) -> double& { return c.params.surrogate.learning_rate; },
                             [](const double& v) {
                               return v > 0.0 && v <= 1.0 ? std::string{} : "must lie in (0, 1]";
                             }));
    t.push_back(make_key<int>("max_depth", "maximum tree depth, 1..16",
                          [](P c) -> int& { return c.params.surrogate.max_depth; }, int_within(1, 16)));
    t.push_back(make_key<double>("lambda", "leaf L2 regularisation, >= 0",
                             [](P c) -> double& { return c.params.surrogate.lambda; }, at_least(0)));
    t.push_back(make_key<double>("min_split_gain", "split penalty gamma, >= 0",
                             [](P c) -> double& { return c.params.surrogate.gamma; }, at_least(0)));

    t.push_back(make_key<int>("particles", "swarm size, >= 1",
                          [](P c) -> int& { return c.params.swarm.particles; }, int_within(1, kMaxInt)));
    t.push_back(make_key<int>("iterations", "swarm iterations, >= 1",
                          [](P c) -> int& { return c.params.swarm.iterations; },
                          int_within(1, kMaxInt)));
    t.push_back(make_key<double>("inertia", "inertia weight, [0, 1]",
                             [](P c) -> double& { return c.params.swarm.inertia; }, within(0, 1)));
    t.push_back(make_key<double>("cognitive", "cognitive coefficient, >= 0",
                             [](P c) -> double& { return c.params.swarm.cognitive; }, at_least(0)));
    t.push_back(make_key<double>("social", "social coefficient, >= 0",
                             [](P c) -> double& { return c.params.swarm.social; }, at_least(0)));

    t.push_back(make_key<std::size_t>("budget", "images in the selected subset, >= 1",
                                  [](P c) -> std::size_t& { return c.params.budget; }, size_at_least(1)));
    t.push_back(make_key<int>("images_per_config", "images per selected config, >= 1",
                          [](P c) -> int& { return c.params.images_per_config; },
                          int_within(1, kMaxInt)));
    t.push_back(make_key<int>("rounds", "outer optimisation rounds, >= 1",
                          [](P c) -> int& { return c.params.rounds; }, int_within(1, kMaxInt)));
    t.push_back(make_key<std::size_t>("reference_count", "target reference subset size, >= 1",
                                  [](P c) -> std::size_t& { return c.params.reference_count; },
                                  size_at_least(1)));
    t.push_back(make_key<double>("penalty", "diversity penalty weight; negative means 0.1 x surrogate range",
                             [](P c) -> double& { return c.params.penalty; }));

    t.push_back(make_key<int>("image_width", "render width in pixels, 1..4096",
                          [](P c) -> int& { return c.render.width; }, int_within(1, 4096)));
    t.push_back(make_key<int>("image_height", "render height in pixels, 1..4096",
                          [](P c) -> int& { return c.render.height; }, int_within(1, 4096)));
    t.push_back(make_key<std::size_t>("testbed_configs", "distinct catalog configs generated by gen-testbed, >= 2",
                                  [](P c) -> std::size_t& { return c.testbed.catalog_configs; },
                                  size_at_least(2)));
    t.push_back(make_key<int>("testbed_images_per_config", "catalog images per config, >= 1",
                          [](P c) -> int& { return c.testbed_images_per_config; },
                          int_within(1, kMaxInt)));
    t.push_back(make_key<std::size_t>("target_size", "target images generated by gen-testbed, >= 2",
                                  [](P c) -> std::size_t& { return c.target_size; }, size_at_least(2)));
    t.push_back(make_key<double>("target_peak", "target mass on the modal scene category, (0, 1]",
                             [](P c) -> double& { return c.testbed.target_peak; },
                             [](const double& v) {
                               return v > 0.0 && v <= 1.0 ? std::string{} : "must lie in (0, 1]";
                             }));
    t.push_back(make_key<bool>("background_dominant", "testbed where only the background is peaked",
                           [](P c) -> bool& { return c.testbed.background_dominant; }));
    t.push_back(make_key<double>("style_gamma_low", "lower end of the target gamma draw, [0.5, 2]",
                             [](P c) -> double& { return c.testbed.gamma_low; }, within(0.5, 2.0)));
    t.push_back(make_key<double>("style_gamma_high", "upper end of the target gamma draw, [0.5, 2]",
                             [](P c) -> double& { return c.testbed.gamma_high; }, within(0.5, 2.0)));
    t.push_back(make_key<double>("style_max_bias", "largest target channel bias, [0, 32]",
                             [](P c) -> double& { return c.testbed.max_bias; }, within(0, 32)));
    t.push_back(make_key<bool>("allow_render", "render extra images when the catalog is short",
                           [](P c) -> bool& { return c.allow_render; }));

    const RunConfig defaults;
    for (auto& b : t) b.doc.default_value = b.get(defaults);
    return t;
  }();
  return table;
}

const KeyBinding* find_binding(const std::string& name) {
  for (const auto& b : bindings()) {
    if (b.doc.name == name) return &b;
  }
  return nullptr;
}

void apply_layer(RunConfig& config, const std::map<std::string, std::string>& values,
                 const std::string& origin, std::vector<std::string>& errors) {
  for (const auto& [key, value] : values) {
    const KeyBinding* b = find_binding(key);
    if (!b) {
      errors.push_back(origin + ": unknown key '" + key + "'");
      continue;
    }
    if (auto err = b->set(config, value); !err.empty()) {
      errors.push_back(origin + ": " + key + " " + err);
    }
  }
}

void check_cross_field(const RunConfig& c, std::vector<std::string>& errors) {
  const auto& p = c.params;
  if (!(p.distance.alpha + p.distance.beta > 0.0)) errors.push_back("alpha + beta must be > 0");
  if (p.budget < static_cast<std::size_t>(p.images_per_config)) {
    errors.push_back("budget (" + std::to_string(p.budget) + ") must be >= images_per_config (" +
                     std::to_string(p.images_per_config) + ")");
  }
  for (int f : p.extractor.filters) {
    if (f < 1) errors.push_back("filters entries must be >= 1");
  }
  if (p.extractor.kernel % 2 == 0) errors.push_back("kernel must be odd");
  if (static_cast<std::size_t>(p.distance.content_layer) >= p.extractor.layers()) {
    errors.push_back("content_layer must be < " + std::to_string(p.extractor.layers()) +
                     " (number of filter layers)");
  }
  if (c.testbed.gamma_low > c.testbed.gamma_high) {
    errors.push_back("style_gamma_low must be <= style_gamma_high");
  }
  const int scale = 1 << std::min<std::size_t>(p.extractor.layers(), 16);
  if (c.render.width % scale != 0 || c.render.height % scale != 0) {
    errors.push_back("image_width and image_height must be divisible by " + std::to_string(scale));
  }
}

}  // namespace

const std::vector<ConfigKey>& config_keys() {
  static const std::vector<ConfigKey> keys = [] {
    std::vector<ConfigKey> out;
    for (const auto& b : bindings()) out.push_back(b.doc);
    return out;
  }();
  return keys;
}

std::vector<std::pair<std::string, std::string>> config_snapshot(const RunConfig& config) {
  std::vector<std::pair<std::string, std::string>> out;
  for (const auto& b : bindings()) out.emplace_back(b.doc.name, b.get(config));
  return out;
}

namespace {

std::map<std::string, std::string> collect_key_values(const std::string& text,
                                                      const std::string& origin,
                                                      std::vector<std::string>& errors) {
  std::map<std::string, std::string> out;
  std::istringstream in(text);
  std::string line;
  int line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (const auto hash = line.find('#'); hash != std::string::npos) line.erase(hash);
    const std::string stripped = trim(line);
    if (stripped.empty()) continue;
    const auto eq = stripped.find('=');
    const std::string where = origin + ":" + std::to_string(line_no);
    if (eq == std::string::npos) {
      errors.push_back(where + ": expected 'key = value', got '" + stripped + "'");
      continue;
    }
    const std::string key = trim(std::string_view(stripped).substr(0, eq));
    const std::string value = trim(std::string_view(stripped).substr(eq + 1));
    if (key.empty()) {
      errors.push_back(where + ": missing key");
      continue;
    }
    if (out.contains(key)) errors.push_back(where + ": duplicate key '" + key + "'");
    out[key] = value;
  }
  return out;
}

}  // namespace

std::map<std::string, std::string> parse_key_values(const std::string& text,
                                                    const std::string& origin) {
  std::vector<std::string> errors;
  auto out = collect_key_values(text, origin, errors);
  if (!errors.empty()) {
    std::string msg = "invalid configuration:";
    for (const auto& e : errors) msg += "\n  " + e;
    throw ValidationError(msg);
  }
  return out;
}

RunConfig parse_config(const std::filesystem::path& file,
                       const std::map<std::string, std::string>& overrides, bool read_environment) {
  RunConfig config;
  std::vector<std::string> errors;

  if (read_environment) {
    std::map<std::string, std::string> env;
    for (const auto& b : bindings()) {
      std::string var = "AOST_";
      for (char ch : b.doc.name) var += static_cast<char>(std::toupper(static_cast<unsigned char>(ch)));
      if (const char* v = std::getenv(var.c_str())) env[b.doc.name] = trim(v);
    }
    apply_layer(config, env, "environment", errors);
  }

  if (!file.empty()) {
    try {
      const auto values = collect_key_values(read_text(file), file.string(), errors);
      apply_layer(config, values, file.string(), errors);
    } catch (const IoError& e) {
      errors.push_back(std::string("unreadable config file: ") + e.what());
    }
  }

  apply_layer(config, overrides, "command line", errors);
  if (errors.empty()) check_cross_field(config, errors);

  if (!errors.empty()) {
    std::string msg = "invalid configuration:";
    for (const auto& e : errors) msg += "\n  " + e;
    throw ValidationError(msg);
  }
  return config;
}

RunConfig parse_config(const std::map<std::string, std::string>& overrides, bool read_environment) {
  return parse_config(std::filesystem::path{}, overrides, read_environment);
}

}  // namespace aost
