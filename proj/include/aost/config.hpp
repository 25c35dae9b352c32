#pragma once

#include <filesystem>
#include <map>
#include <string>
#include <vector>

#include "aost/pipeline.hpp"
#include "aost/scenegen.hpp"

namespace aost {

/// Everything a command needs: pipeline parameters, testbed shape and paths.
/// Empty paths resolve under `workdir`.
struct RunConfig {
  AostParams params;
  std::filesystem::path workdir = "aost-run";
  std::filesystem::path catalog;  // default <workdir>/catalog/catalog.jsonl
  std::filesystem::path target;   // default <workdir>/target/target.jsonl
  std::filesystem::path schema;   // default <workdir>/schema.json, else the built-in schema
  RenderOptions render;
  TestbedOptions testbed;
  int testbed_images_per_config = 50;
  std::size_t target_size = 1000;
  bool allow_render = true;

  std::filesystem::path catalog_path() const;
  std::filesystem::path target_path() const;
  std::filesystem::path schema_path() const;
};

struct ConfigKey {
  std::string name;
  std::string default_value;
  std::string description;  // includes the accepted range
};

/// Every recognised key, in documentation order.
const std::vector<ConfigKey>& config_keys();

/// Current value of every key as text, in config_keys() order.
std::vector<std::pair<std::string, std::string>> config_snapshot(const RunConfig& config);

/// Layers settings by increasing precedence: defaults, `AOST_<KEY>`
/// environment variables, the config file (flat `key = value` lines, `#`
/// comments) and `overrides`. All problems (unknown keys, unparsable or
/// out-of-range values, an unreadable file) are collected and thrown together
/// as one ValidationError.
RunConfig parse_config(const std::filesystem::path& file,
                       const std::map<std::string, std::string>& overrides = {},
                       bool read_environment = true);

/// Same, without a file.
RunConfig parse_config(const std::map<std::string, std::string>& overrides = {},
                       bool read_environment = true);

/// Parses `key = value` text into an ordered map. Throws ValidationError
/// listing every malformed line.
std::map<std::string, std::string> parse_key_values(const std::string& text,
                                                    const std::string& origin);

}  // namespace aost
