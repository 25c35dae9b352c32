#include "aost/cli.hpp"

#include <chrono>
#include <cstdio>
#include <fstream>
#include <iostream>

#include <CLI11.hpp>
#include <nlohmann/json.hpp>

#include "aost/error.hpp"
#include "aost/format.hpp"
#include "aost/parallel.hpp"

namespace fs = std::filesystem;

namespace aost {

const std::vector<std::string>& command_names() {
  static const std::vector<std::string> names = {
      "gen-testbed", "extract-features", "fit-surrogate", "optimize",          "select",
      "transfer",    "evaluate",         "run-aost",      "report-importance"};
  return names;
}

namespace {

/// Exclusive ownership of a run directory for one command.
class WorkdirLock {
 public:
  explicit WorkdirLock(const fs::path& workdir) : path_(workdir / ".aost.lock") {
    fs::create_directories(workdir);
    std::FILE* f = std::fopen(path_.c_str(), "wx");
    if (!f) {
      throw Error("run directory " + workdir.string() + " is locked by another run (" +
                  path_.string() + "); remove the file if no run is active");
    }
    std::fclose(f);
  }
  ~WorkdirLock() {
    std::error_code ec;
    fs::remove(path_, ec);
  }
  WorkdirLock(const WorkdirLock&) = delete;
  WorkdirLock& operator=(const WorkdirLock&) = delete;

 private:
  fs::path path_;
};

struct Layout {
  fs::path root;
  fs::path schema() const { return root / "schema.json"; }
  fs::path features() const { return root / "features"; }
  fs::path measurement() const { return features() / "measurement.json"; }
  fs::path distances() const { return features() / "distances.csv"; }
  fs::path model() const { return root / "model.json"; }
  fs::path plan() const { return root / "plan.json"; }
  fs::path subset_dir() const { return root / "subset"; }
  fs::path subset() const { return subset_dir() / "subset.jsonl"; }
  fs::path transferred() const { return subset_dir() / "transferred.jsonl"; }
  fs::path transfer_flags() const { return subset_dir() / "transfer_flags.json"; }
  fs::path report() const { return root / "report.csv"; }
  fs::path importance() const { return root / "importance.csv"; }
  fs::path manifest() const { return root / "manifest.json"; }
};

void require(const fs::path& path, const std::string& producer) {
  if (!fs::exists(path)) {
    throw ValidationError("missing artifact " + path.string() + "; run '" + producer + "' first");
  }
}

void write_json(const fs::path& path, const nlohmann::ordered_json& doc) {
  fs::create_directories(path.parent_path());
  write_text_atomic(path, doc.dump(2) + "\n");
}

nlohmann::json read_json(const fs::path& path) {
  try {
    return nlohmann::json::parse(read_text(path));
  } catch (const nlohmann::json::exception& e) {
    throw ValidationError(path.string() + ": " + e.what());
  }
}

AttributeSchema load_schema(const RunConfig& config) {
  const fs::path path = config.schema_path();
  if (fs::exists(path)) return read_schema_json(path);
  if (!config.schema.empty()) throw ValidationError("schema file " + path.string() + " does not exist");
  return AttributeSchema::finegpr();
}

SyntheticCatalog load_catalog(const RunConfig& config, const AttributeSchema& schema) {
  require(config.catalog_path(), "gen-testbed");
  return read_catalog_jsonl(config.catalog_path(), schema, config.render);
}

std::vector<SceneImage> load_target(const RunConfig& config) {
  const fs::path list = config.target_path();
  require(list, "gen-testbed");
  std::ifstream in(list);
  if (!in) throw IoError("cannot open " + list.string());
  std::vector<fs::path> paths;
  std::string line;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    try {
      const fs::path p = nlohmann::json::parse(line).at("path").get<std::string>();
      paths.push_back(p.is_relative() ? list.parent_path() / p : p);
    } catch (const nlohmann::json::exception& e) {
      throw ValidationError(list.string() + ": " + e.what());
    }
  }
  if (paths.empty()) throw ValidationError("target list " + list.string() + " is empty");
  std::vector<SceneImage> images(paths.size());
  parallel_for(paths.size(), config.params.threads, [&](std::size_t i) {
    images[i] = read_ppm(paths[i]);
    images[i].provenance.domain = Domain::kTarget;
  });
  return images;
}

std::string image_name(const char* prefix, std::size_t index, const char* suffix) {
  char buf[64];
  std::snprintf(buf, sizeof(buf), "%s%07zu%s", prefix, index, suffix);
  return buf;
}

/// Writes the subset's images under `dir` and returns it with paths relative
/// to `dir`.
SelectedSubset persist_subset(SelectedSubset subset, const fs::path& dir, const char* suffix,
                              int threads) {
  fs::create_directories(dir);
  for (std::size_t i = 0; i < subset.items.size(); ++i) {
    subset.items[i].path = image_name("s_", i, suffix);
  }
  parallel_for(subset.items.size(), threads,
               [&](std::size_t i) { write_ppm(dir / subset.items[i].path, subset.images[i]); });
  return subset;
}

SelectedSubset read_subset(const fs::path& list, const AttributeSchema& schema, int threads) {
  std::ifstream in(list);
  if (!in) throw IoError("cannot open " + list.string());
  SelectedSubset subset;
  std::string line;
  bool first = true;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    try {
      const auto row = nlohmann::json::parse(line);
      const auto stage = row.at("stage").get<std::string>();
      const SubsetStage s = stage == "raw" ? SubsetStage::kRaw : SubsetStage::kTransferred;
      if (first) subset.stage = s;
      if (s != subset.stage) throw ValidationError(list.string() + " mixes subset stages");
      first = false;
      SubsetItem item;
      item.path = row.at("path").get<std::string>();
      item.identity = row.at("identity").get<std::int64_t>();
      item.seed = row.at("seed").get<std::uint64_t>();
      item.rendered = row.value("rendered", false);
      for (const auto& d : schema.dimensions()) item.config.values.push_back(row.at(d.name).get<int>());
      schema.validate(item.config);
      subset.items.push_back(std::move(item));
    } catch (const nlohmann::json::exception& e) {
      throw ValidationError(list.string() + ": " + e.what());
    }
  }
  subset.images.resize(subset.items.size());
  parallel_for(subset.items.size(), threads, [&](std::size_t i) {
    subset.images[i] = read_ppm(list.parent_path() / subset.items[i].path);
  });
  return subset;
}

std::string transferred_name(const fs::path& raw) {
  std::string name = raw.filename().string();
  if (name.size() > 4 && name.ends_with(".ppm")) name.resize(name.size() - 4);
  return name + ".t.ppm";
}

/// Writes the transferred images beside the raw copies.
void persist_transferred(SelectedSubset& transferred, const fs::path& dir, int threads) {
  for (auto& item : transferred.items) item.path = transferred_name(item.path);
  parallel_for(transferred.items.size(), threads, [&](std::size_t i) {
    write_ppm(dir / transferred.items[i].path, transferred.images[i]);
  });
}

std::vector<SceneImage> reference_images(std::span<const SceneImage> target,
                                         const std::vector<std::size_t>& indices) {
  std::vector<SceneImage> refs;
  refs.reserve(indices.size());
  for (std::size_t i : indices) {
    if (i >= target.size()) throw ValidationError("reference index outside the target set");
    refs.push_back(target[i]);
  }
  return refs;
}

// Commands -------------------------------------------------------------------

void cmd_gen_testbed(const RunConfig& config, const Layout& out, std::ostream& log) {
  const auto& p = config.params;
  const Testbed bed = make_testbed(p.seed, config.testbed);
  write_schema_json(out.schema(), bed.schema);

  const fs::path catalog_dir = out.root / "catalog";
  SyntheticCatalog catalog =
      build_catalog(bed.schema, bed.catalog_configs, config.testbed_images_per_config,
                    hash_combine(p.seed, 0xca7a), config.render, catalog_dir / "images", 0, p.threads);
  for (auto& r : catalog.records) r.path = fs::relative(r.path, catalog_dir);
  write_catalog_jsonl(catalog_dir / "catalog.jsonl", catalog);

  const fs::path target_dir = out.root / "target";
  fs::create_directories(target_dir / "images");
  const auto target = sample_target_domain(bed.schema, bed.target, config.target_size,
                                           hash_combine(p.seed, 0x7a6e7), config.render, p.threads);
  std::ostringstream list;
  std::ostringstream truth;
  for (std::size_t i = 0; i < target.size(); ++i) {
    const std::string name = "images/" + image_name("t_", i, ".ppm");
    write_ppm(target_dir / name, target[i]);
    list << nlohmann::ordered_json{{"path", name}}.dump() << '\n';
    nlohmann::ordered_json row{{"path", name}, {"identity", target[i].provenance.identity}};
    for (std::size_t d = 0; d < bed.schema.size(); ++d) {
      row[bed.schema[d].name] = target[i].provenance.config->values[d];
    }
    truth << row.dump() << '\n';
  }
  write_text_atomic(target_dir / "target.jsonl", list.str());
  // Ground truth for inspection only; no command reads it.
  write_text_atomic(target_dir / "truth.jsonl", truth.str());
  nlohmann::ordered_json dist;
  for (std::size_t d = 0; d < bed.schema.size(); ++d) {
    dist["probabilities"][bed.schema[d].name] = bed.target.probabilities[d];
  }
  dist["style_shift"] = {{"gamma", bed.target.style_shift.gamma},
                         {"channel_bias", bed.target.style_shift.channel_bias}};
  write_json(target_dir / "distribution.json", dist);
  log << "testbed: " << catalog.records.size() << " catalog images over "
      << bed.catalog_configs.size() << " configs, " << target.size() << " target images\n";
}

void cmd_extract_features(const RunConfig& config, const Layout& out, std::ostream& log) {
  const auto schema = load_schema(config);
  const auto catalog = load_catalog(config, schema);
  const auto target = load_target(config);
  const CatalogMeasurement m = measure_catalog(catalog, target, config.params);
  write_json(out.measurement(), m.to_json(schema));
  write_text_atomic(out.distances(), m.to_csv(schema));

  const FilterBank bank(config.params.extractor);
  const fs::path refs = out.features() / "references";
  fs::create_directories(refs);
  parallel_for(m.reference_indices.size(), config.params.threads, [&](std::size_t i) {
    const std::size_t t = m.reference_indices[i];
    write_feature_cache(refs / image_name("t_", t, ".fgpr"), extract(target[t], bank));
  });
  log << "measured " << m.configs.size() << " configs against " << m.reference_indices.size()
      << " target references\n";
}

void cmd_fit_surrogate(const RunConfig& config, const Layout& out, std::ostream& log) {
  require(out.measurement(), "extract-features");
  const auto schema = load_schema(config);
  const auto m = CatalogMeasurement::from_json(read_json(out.measurement()), schema);
  const BoostedEnsemble model = fit_surrogate(m, schema, config.params.surrogate);
  save_model(out.model(), model);
  log << "surrogate: " << model.trees.size() << " trees, training mse "
      << format_double(model.training_mse.back()) << "\n";
}

void cmd_optimize(const RunConfig& config, const Layout& out, std::ostream& log) {
  require(out.model(), "fit-surrogate");
  const auto schema = load_schema(config);
  const BoostedEnsemble model = load_model(out.model());
  const SelectionPlan plan = optimize_rounds(model, schema, config.params);
  write_json(out.plan(), plan.to_json(schema));
  log << "plan: " << plan.configs.size() << " configs, mean predicted d_total "
      << format_double(plan.mean_predicted()) << "\n";
}

void cmd_select(const RunConfig& config, const Layout& out, std::ostream& log) {
  require(out.plan(), "optimize");
  const auto schema = load_schema(config);
  const auto catalog = load_catalog(config, schema);
  const SelectionPlan plan = SelectionPlan::from_json(read_json(out.plan()), schema);
  const auto& p = config.params;
  SelectedSubset subset =
      select_subset(catalog, plan, {config.allow_render, selection_seed(p.seed), p.threads});
  subset = persist_subset(std::move(subset), out.subset_dir(), ".ppm", p.threads);
  write_text_atomic(out.subset(), subset.to_jsonl(schema));
  log << "selected " << subset.items.size() << " images into " << out.subset_dir().string() << "\n";
}

void cmd_transfer(const RunConfig& config, const Layout& out, std::ostream& log) {
  require(out.subset(), "select");
  const auto schema = load_schema(config);
  const auto subset = read_subset(out.subset(), schema, config.params.threads);
  const auto target = load_target(config);
  SelectedSubset transferred = stage2_style_transfer(subset, target);
  persist_transferred(transferred, out.subset_dir(), config.params.threads);
  write_text_atomic(out.transferred(), transferred.to_jsonl(schema));
  write_json(out.transfer_flags(), nlohmann::ordered_json{{"flags", transferred.flags}});
  log << "transferred " << transferred.items.size() << " images\n";
  for (const auto& f : transferred.flags) log << "  flag: " << f << "\n";
}

void cmd_evaluate(const RunConfig& config, const Layout& out, std::ostream& log) {
  require(out.measurement(), "extract-features");
  require(out.subset(), "select");
  require(out.transferred(), "transfer");
  const auto schema = load_schema(config);
  const auto& p = config.params;
  const auto catalog = load_catalog(config, schema);
  const auto target = load_target(config);
  const auto m = CatalogMeasurement::from_json(read_json(out.measurement()), schema);
  const auto selected = read_subset(out.subset(), schema, p.threads);
  const auto transferred = read_subset(out.transferred(), schema, p.threads);
  const auto random = random_subset(catalog, p.budget, random_subset_seed(p.seed), p.threads);

  const EvaluationParams eval{p.distance, p.extractor, p.threads};
  const auto refs = reference_images(target, m.reference_indices);
  const auto prepared = prepare_target(target, refs, eval);
  const std::vector<RegulationSubset> subsets = {{kRegulationRandom, random.images},
                                                 {kRegulationAo, selected.images},
                                                 {kRegulationAoSt, transferred.images}};
  const DomainGapReport report = evaluate_regulations(subsets, prepared, eval);
  write_text_atomic(out.report(), report.to_csv());
  log << report.to_csv();
}

void cmd_report_importance(const RunConfig&, const Layout& out, std::ostream& log) {
  require(out.model(), "fit-surrogate");
  const GainReport report = feature_importance(load_model(out.model()));
  write_text_atomic(out.importance(), report.to_csv());
  log << report.to_csv();
}

void cmd_run_aost(const RunConfig& config, const Layout& out, std::ostream& log) {
  const auto schema = load_schema(config);
  const auto& p = config.params;
  using Clock = std::chrono::steady_clock;
  const auto t0 = Clock::now();
  const auto catalog = load_catalog(config, schema);
  const auto target = load_target(config);
  const double load_seconds = std::chrono::duration<double>(Clock::now() - t0).count();

  const AostResult result = run_aost(catalog, target, p);
  const auto t1 = Clock::now();
  write_json(out.measurement(), result.measurement.to_json(schema));
  write_text_atomic(out.distances(), result.measurement.to_csv(schema));
  save_model(out.model(), result.model);
  write_json(out.plan(), result.plan.to_json(schema));
  const SelectedSubset selected = persist_subset(result.selected, out.subset_dir(), ".ppm", p.threads);
  write_text_atomic(out.subset(), selected.to_jsonl(schema));
  SelectedSubset transferred = result.transferred;
  transferred.items = selected.items;
  persist_transferred(transferred, out.subset_dir(), p.threads);
  write_text_atomic(out.transferred(), transferred.to_jsonl(schema));
  write_json(out.transfer_flags(), nlohmann::ordered_json{{"flags", transferred.flags}});
  write_text_atomic(out.report(), result.report.to_csv());
  write_text_atomic(out.importance(), feature_importance(result.model).to_csv());
  const double write_seconds = std::chrono::duration<double>(Clock::now() - t1).count();

  nlohmann::ordered_json manifest;
  manifest["tool_version"] = kToolVersion;
  manifest["command"] = "run-aost";
  manifest["seed"] = p.seed;
  nlohmann::ordered_json snapshot;
  for (const auto& [key, value] : config_snapshot(config)) snapshot[key] = value;
  manifest["config"] = std::move(snapshot);
  manifest["artifacts"] = {
      {"measurement", out.measurement().string()}, {"distances", out.distances().string()},
      {"model", out.model().string()},             {"plan", out.plan().string()},
      {"subset", out.subset().string()},           {"transferred", out.transferred().string()},
      {"report", out.report().string()},           {"importance", out.importance().string()}};
  auto timings = nlohmann::ordered_json::array();
  timings.push_back({{"stage", "load"}, {"seconds", load_seconds}});
  for (const auto& t : result.timings) timings.push_back({{"stage", t.stage}, {"seconds", t.seconds}});
  timings.push_back({{"stage", "write"}, {"seconds", write_seconds}});
  manifest["timings"] = std::move(timings);
  manifest["accepted_means"] = result.accepted_means;
  write_json(out.manifest(), manifest);
  log << result.report.to_csv();
}

}  // namespace

int dispatch(const std::string& command, const RunConfig& config, std::ostream& log,
             std::ostream& err) {
  using Handler = void (*)(const RunConfig&, const Layout&, std::ostream&);
  static const std::vector<std::pair<std::string, Handler>> handlers = {
      {"gen-testbed", cmd_gen_testbed},     {"extract-features", cmd_extract_features},
      {"fit-surrogate", cmd_fit_surrogate}, {"optimize", cmd_optimize},
      {"select", cmd_select},               {"transfer", cmd_transfer},
      {"evaluate", cmd_evaluate},           {"run-aost", cmd_run_aost},
      {"report-importance", cmd_report_importance}};
  Handler handler = nullptr;
  for (const auto& [name, h] : handlers) {
    if (name == command) handler = h;
  }
  if (!handler) {
    err << "error: unknown command '" << command << "'\n";
    return kExitValidation;
  }
  try {
    const WorkdirLock lock(config.workdir);
    handler(config, Layout{config.workdir}, log);
    return kExitOk;
  } catch (const ValidationError& e) {
    err << "error: " << e.what() << "\n";
    return kExitValidation;
  } catch (const SchemaError& e) {
    err << "error: " << e.what() << "\n";
    return kExitValidation;
  } catch (const std::exception& e) {
    err << "error: " << e.what() << "\n";
    return kExitRuntime;
  }
}

int run_cli(int argc, char** argv) {
  CLI::App app{"Attribute optimisation and style transfer for synthetic data curation", "aost"};
  std::string command;
  std::string config_file;
  bool list_keys = false;
  app.add_option("command", command, "one of: gen-testbed extract-features fit-surrogate optimize "
                                     "select transfer evaluate run-aost report-importance");
  app.add_option("-c,--config", config_file, "flat key = value config file");
  app.add_flag("--list-keys", list_keys, "print every config key with its default and exit");
  app.set_version_flag("--version", kToolVersion);

  std::map<std::string, std::string> raw;
  for (const auto& key : config_keys()) {
    app.add_option("--" + key.name, raw[key.name], key.description)->group("Config keys");
  }
  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForVersion& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return kExitValidation;
  }

  if (list_keys) {
    for (const auto& key : config_keys()) {
      std::cout << key.name << " = " << key.default_value << "  # " << key.description << "\n";
    }
    return kExitOk;
  }
  if (command.empty()) {
    std::cerr << app.help();
    return kExitValidation;
  }

  std::map<std::string, std::string> overrides;
  for (const auto& key : config_keys()) {
    if (app.count("--" + key.name) > 0) overrides[key.name] = raw[key.name];
  }
  RunConfig config;
  try {
    config = parse_config(config_file, overrides);
  } catch (const ValidationError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitValidation;
  }
  return dispatch(command, config, std::cout, std::cerr);
}

}  // namespace aost
