#pragma once

// Config-driven jobs behind the command-line tool: discover, enforce,
// invariants, flow, score and generate. Each job reads a resolved JSON config
// and fills a results document; all randomness derives from the master seed.

#include <Eigen/Dense>
#include <json.hpp>

#include <chrono>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <memory>
#include <optional>
#include <sstream>
#include <string>
#include <utility>
#include <vector>

#include "symdisc/data.hpp"
#include "symdisc/discovery.hpp"
#include "symdisc/enforcement.hpp"
#include "symdisc/error.hpp"
#include "symdisc/geom.hpp"
#include "symdisc/io.hpp"
#include "symdisc/models.hpp"
#include "symdisc/scoring.hpp"

#ifndef SYMDISC_VERSION
#define SYMDISC_VERSION "0.0.0"
#endif

namespace symdisc::pipeline {

using json = nlohmann::json;

inline constexpr int kSchemaVersion = 1;

inline std::string tool_version() { return SYMDISC_VERSION; }

// ---------------------------------------------------------------------------
// Config defaults

namespace defaults {

inline json dataset(const std::string& name) {
  return {{"source", "preset"}, {"name", name}, {"path", ""}, {"seed", nullptr}};
}

inline json model() {
  return {{"kind", "mlp"},      {"expression", ""}, {"hidden", {64, 64}}, {"activation", "tanh"},
          {"degree", 4},        {"init", "zero"},   {"feature_map", json::array()},
          {"optimizer", "adam"}, {"lr", 0.01},       {"epochs", 5000}};
}

inline json training() { return {{"optimizer", "adam"}, {"lr", 0.01}, {"epochs", 5000}}; }

inline json box() { return {{"lower", json::array()}, {"upper", json::array()}}; }

inline json output() { return {{"history_stride", 100}, {"trace_csv", ""}, {"grid_csv", ""}}; }

inline json common(const std::string& command) {
  return {{"command", command}, {"preset", {{"name", ""}, {"version", 0}}}, {"seed", 0}, {"output", output()}};
}

}  // namespace defaults

inline json default_config(const std::string& command) {
  json c = defaults::common(command);
  if (command == "discover") {
    c["dataset"] = defaults::dataset("exp1-train");
    c["model"] = defaults::model();
    c["basis"] = {{"kind", "polynomial"}, {"degree", 1}, {"fields", json::array()}};
    c["discovery"] = {{"k", 1}, {"k_max", 0}, {"optimizer", "riemannian-adagrad"}, {"lr", 0.1}, {"epochs", 1000},
                      {"loss", "L1"}};
    c["ground_truth"] = {{"fields", json::array()}, {"metric", "euclidean"}};
    c["scoring"] = {{"region", "bounds"}, {"lower", json::array()}, {"upper", json::array()}, {"samples", 100000}};
  } else if (command == "enforce") {
    c["dataset"] = defaults::dataset("exp1-train");
    c["test_dataset"] = defaults::dataset("exp1-test");
    c["model"] = defaults::model();
    c["baseline_training"] = defaults::training();
    c["training"] = defaults::training();
    c["schedule"] = {{"kind", "constant"}, {"lambda", 0.5}, {"switch_epoch", 0}, {"phase_two_lr", nullptr},
                     {"reset_optimizer", false}};
    c["fields"] = json::array();
    c["fields_from"] = "";
    c["collocation"] = {{"source", "training"}, {"n", 1000}, {"radius", 1.0}};
    c["reference"] = {{"expression", ""}, {"lower", json::array()}, {"upper", json::array()}};
  } else if (command == "invariants") {
    c["field"] = json::array();
    c["degree"] = 2;
    c["domain"] = defaults::box();
    c["epsilon"] = 1e-8;
    c["B"] = 1.0;
    c["soundness_trials"] = 1000;
    c["known_invariants"] = json::array();
  } else if (command == "flow") {
    c["field"] = json::array();
    c["start"] = json::array();
    c["t_end"] = 1.0;
    c["steps"] = 1000;
    c["domain"] = defaults::box();
    c["function"] = "";
    c["grid"] = {{"lower", json::array()}, {"upper", json::array()}, {"resolution", 0}};
  } else if (command == "score") {
    c["jobs"] = json::array();
  } else if (command == "generate") {
    c["dataset"] = defaults::dataset("exp1-train");
  } else {
    throw ConfigError("command", "unknown command '" + command + "'");
  }
  return c;
}

/// Template for one entry of score.jobs.
inline json score_job_template() {
  return {{"kind", "similarity"}, {"name", ""},        {"field_a", json::array()}, {"field_b", json::array()},
          {"function", ""},       {"field", json::array()}, {"metric", "euclidean"},
          {"region", {{"kind", "box"}, {"lower", json::array()}, {"upper", json::array()}, {"dataset", defaults::dataset("")}}},
          {"samples", 100000}};
}

// ---------------------------------------------------------------------------
// Config resolution

/// Rejects keys of `value` that are absent from `tmpl`, recursing into objects.
inline void validate_keys(const json& tmpl, const json& value, const std::string& path) {
  if (!tmpl.is_object() || !value.is_object()) return;
  for (auto it = value.begin(); it != value.end(); ++it) {
    const std::string p = path.empty() ? it.key() : path + "." + it.key();
    if (!tmpl.contains(it.key())) throw ConfigError(p, "unknown key");
    validate_keys(tmpl[it.key()], it.value(), p);
  }
}

/// Deep merge of objects; any other value in `overlay` replaces the base.
inline json merge(json base, const json& overlay) {
  if (!base.is_object() || !overlay.is_object()) return overlay;
  for (auto it = overlay.begin(); it != overlay.end(); ++it) {
    base[it.key()] = base.contains(it.key()) ? merge(base[it.key()], it.value()) : it.value();
  }
  return base;
}

/// Applies "a.b.c=value"; the value is parsed as JSON and falls back to a plain string.
inline void apply_set(json& cfg, const std::string& assignment) {
  const auto eq = assignment.find('=');
  if (eq == std::string::npos || eq == 0) throw ConfigError(assignment, "--set expects key=value");
  const std::string key = assignment.substr(0, eq);
  const std::string text = assignment.substr(eq + 1);
  json value = json::parse(text, nullptr, false);
  if (value.is_discarded()) value = text;
  json* node = &cfg;
  std::stringstream ss(key);
  std::string part;
  std::vector<std::string> parts;
  while (std::getline(ss, part, '.')) parts.push_back(part);
  for (std::size_t i = 0; i + 1 < parts.size(); ++i) {
    if (!node->is_object()) throw ConfigError(key, "cannot set inside a non-object value");
    node = &(*node)[parts[i]];
  }
  (*node)[parts.back()] = value;
}

inline json read_json_file(const std::string& path) {
  std::ifstream is(path);
  if (!is) throw ConfigError(path, "cannot open file");
  json j = json::parse(is, nullptr, false);
  if (j.is_discarded()) throw ConfigError(path, "not valid JSON");
  return j;
}

inline std::string preset_dir() {
  if (const char* env = std::getenv("SYMDISC_PRESET_DIR")) return env;
#ifdef SYMDISC_PRESET_DIR
  return SYMDISC_PRESET_DIR;
#else
  return "presets";
#endif
}

inline json load_preset(const std::string& name) {
  const std::filesystem::path p = std::filesystem::path(preset_dir()) / (name + ".json");
  if (!std::filesystem::exists(p)) throw ConfigError("preset", "no preset named '" + name + "' in " + preset_dir());
  return read_json_file(p.string());
}

/// Layers: command defaults, preset, config file, then --set overrides.
/// Unknown keys at any layer raise ConfigError with the key path.
inline json resolve_config(std::string command, const std::optional<json>& preset, const std::optional<json>& file,
                           const std::vector<std::string>& sets, std::vector<std::string>* warnings = nullptr) {
  json overlay = json::object();
  for (const auto* layer : {&preset, &file}) {
    if (!*layer) continue;
    if (!(*layer)->is_object()) throw ConfigError("", "config must be a JSON object");
    overlay = merge(overlay, **layer);
  }
  for (const auto& s : sets) apply_set(overlay, s);
  if (overlay.contains("command")) {
    if (!overlay["command"].is_string()) throw ConfigError("command", "expected a string");
    const std::string c = overlay["command"].get<std::string>();
    if (!command.empty() && c != command) {
      throw ConfigError("command", "config is for '" + c + "' but '" + command + "' was requested");
    }
    command = c;
  }
  if (command.empty()) throw ConfigError("command", "no command given");
  const json base = default_config(command);
  validate_keys(base, overlay, "");
  json cfg = merge(base, overlay);
  if (command == "score") {
    const json tmpl = score_job_template();
    if (!cfg["jobs"].is_array()) throw ConfigError("jobs", "expected an array");
    for (std::size_t i = 0; i < cfg["jobs"].size(); ++i) {
      const std::string p = "jobs[" + std::to_string(i) + "]";
      validate_keys(tmpl, cfg["jobs"][i], p);
      cfg["jobs"][i] = merge(tmpl, cfg["jobs"][i]);
    }
  }
  if (command == "enforce" && !overlay.contains("schedule") && warnings) {
    warnings->push_back("no schedule section given; using constant lambda = 0.5");
  }
  return cfg;
}

// ---------------------------------------------------------------------------
// Typed access with key paths in errors

inline const json& node(const json& root, const std::string& dotted) {
  const json* n = &root;
  std::stringstream ss(dotted);
  std::string part;
  while (std::getline(ss, part, '.')) {
    if (!n->is_object() || !n->contains(part)) throw ConfigError(dotted, "missing key");
    n = &(*n)[part];
  }
  return *n;
}

inline double get_double(const json& c, const std::string& key) {
  const json& v = node(c, key);
  if (!v.is_number()) throw ConfigError(key, "expected a number");
  return v.get<double>();
}

inline int get_int(const json& c, const std::string& key) {
  const json& v = node(c, key);
  if (!v.is_number_integer()) throw ConfigError(key, "expected an integer");
  return v.get<int>();
}

inline std::uint64_t get_u64(const json& c, const std::string& key) {
  const json& v = node(c, key);
  if (!v.is_number_integer() || v.get<long long>() < 0) throw ConfigError(key, "expected a non-negative integer");
  return v.get<std::uint64_t>();
}

inline std::string get_string(const json& c, const std::string& key) {
  const json& v = node(c, key);
  if (!v.is_string()) throw ConfigError(key, "expected a string");
  return v.get<std::string>();
}

inline bool get_bool(const json& c, const std::string& key) {
  const json& v = node(c, key);
  if (!v.is_boolean()) throw ConfigError(key, "expected true or false");
  return v.get<bool>();
}

inline Box get_box(const json& c, const std::string& key) {
  Eigen::VectorXd lo = io::vector_from(node(c, key + ".lower"), key + ".lower");
  Eigen::VectorXd hi = io::vector_from(node(c, key + ".upper"), key + ".upper");
  if (lo.size() != hi.size() || lo.size() == 0) throw ConfigError(key, "lower and upper must be non-empty and equal length");
  Box b(lo, hi);
  try {
    b.validate();
  } catch (const Error& e) {
    throw ConfigError(key, e.what());
  }
  return b;
}

inline bool box_given(const json& c, const std::string& key) {
  return !node(c, key + ".lower").empty() || !node(c, key + ".upper").empty();
}

inline TrainConfig get_train_config(const json& c, const std::string& key, std::uint64_t seed) {
  TrainConfig t;
  try {
    t.optimizer = parse_optimizer_kind(get_string(c, key + ".optimizer"));
    if (node(c, key).contains("loss")) t.loss = parse_loss_kind(get_string(c, key + ".loss"));
  } catch (const ConfigError& e) {
    throw ConfigError(key, e.what());
  }
  t.lr = get_double(c, key + ".lr");
  t.epochs = get_int(c, key + ".epochs");
  t.seed = seed;
  try {
    t.validate();
  } catch (const ConfigError& e) {
    throw ConfigError(key + "." + e.path(), e.what());
  }
  return t;
}

/// Independent seed for a named stage.
inline std::uint64_t stage_seed(std::uint64_t master, const std::string& tag) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char ch : tag) {
    h ^= ch;
    h *= 0x100000001b3ULL;
  }
  return Rng(master).split(h).next_u64();
}

// ---------------------------------------------------------------------------
// Run context

struct RunContext {
  json config;
  json outputs = json::object();
  json stages = json::array();
  std::vector<std::string> warnings;
  std::string stage;      // stage currently running, for error reports
  std::string out_path;   // results file path; CSV side files are placed next to it
  std::string log_prefix = "symdisc";
  bool quiet = false;

  template <class F>
  auto run_stage(const std::string& name, F&& f) {
    stage = name;
    if (!quiet) std::fprintf(stderr, "[%s] stage %s\n", log_prefix.c_str(), name.c_str());
    const auto t0 = std::chrono::steady_clock::now();
    auto finish = [&] {
      const double dt = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
      stages.push_back({{"name", name}, {"wall_time_s", dt}});
    };
    if constexpr (std::is_void_v<decltype(f())>) {
      f();
      finish();
    } else {
      auto r = f();
      finish();
      return r;
    }
  }

  void warn(const std::string& w) {
    warnings.push_back(w);
    if (!quiet) std::fprintf(stderr, "[%s] warning: %s\n", log_prefix.c_str(), w.c_str());
  }

  std::string side_path(const std::string& configured, const std::string& suffix) const {
    if (!configured.empty()) return configured;
    if (out_path.empty()) return {};
    std::filesystem::path p(out_path);
    return (p.parent_path() / (p.stem().string() + suffix)).string();
  }
};

/// Hash over the resolved config and outputs; timings are excluded.
inline std::string reproducibility_hash(const json& config, const json& outputs) {
  return "fnv1a64:" + io::fnv1a_hex(json{{"config", config}, {"outputs", outputs}}.dump());
}

inline json results_document(const RunContext& ctx, const std::string& status, const std::string& error = {}) {
  json doc = {{"schema_version", kSchemaVersion},
              {"tool_version", tool_version()},
              {"command", ctx.config.value("command", "")},
              {"status", status},
              {"config", ctx.config},
              {"stages", ctx.stages},
              {"warnings", ctx.warnings},
              {"outputs", ctx.outputs},
              {"reproducibility_hash", reproducibility_hash(ctx.config, ctx.outputs)}};
  if (!error.empty()) doc["error"] = {{"stage", ctx.stage}, {"message", error}};
  return doc;
}

// ---------------------------------------------------------------------------
// Shared stages

inline Dataset load_dataset(const json& c, const std::string& key, std::uint64_t master) {
  const std::string source = get_string(c, key + ".source");
  Dataset d;
  if (source == "preset") {
    const json& s = node(c, key + ".seed");
    const std::uint64_t seed = s.is_null() ? stage_seed(master, key) : get_u64(c, key + ".seed");
    try {
      d = preset_dataset(get_string(c, key + ".name"), seed);
    } catch (const ConfigError& e) {
      throw ConfigError(key + ".name", e.what());
    }
  } else if (source == "csv") {
    d = read_csv(get_string(c, key + ".path"));
  } else {
    throw ConfigError(key + ".source", "expected 'preset' or 'csv'");
  }
  if (d.size() == 0) throw ConfigError(key, "dataset is empty");
  return d;
}

inline json dataset_summary(const Dataset& d) {
  return {{"generator", d.generator},
          {"seed", d.seed},
          {"size", d.size()},
          {"dimension", d.dimension()},
          {"bounds", {{"lower", io::vector_json(d.bounds.lower)}, {"upper", io::vector_json(d.bounds.upper)}}},
          {"warnings", d.warnings}};
}

struct FittedModel {
  std::shared_ptr<MLFunction> function;
  json checkpoint;
  json history;
  std::optional<FeatureMap> feature_map;
};

inline std::vector<int> mlp_sizes(const json& c, const std::string& key, std::size_t dim) {
  std::vector<int> sizes{static_cast<int>(dim)};
  const json& h = node(c, key + ".hidden");
  if (!h.is_array()) throw ConfigError(key + ".hidden", "expected an array of layer widths");
  for (const auto& w : h) {
    if (!w.is_number_integer() || w.get<int>() < 1) throw ConfigError(key + ".hidden", "layer widths must be positive integers");
    sizes.push_back(w.get<int>());
  }
  sizes.push_back(1);
  return sizes;
}

inline Activation get_activation(const json& c, const std::string& key) {
  const std::string a = get_string(c, key);
  if (a == "tanh") return Activation::Tanh;
  if (a == "identity") return Activation::Identity;
  throw ConfigError(key, "expected 'tanh' or 'identity'");
}

inline PolyModel initial_poly_model(const json& c, const std::string& key, std::size_t dim, std::uint64_t seed) {
  const int degree = get_int(c, key + ".degree");
  if (degree < 0 || degree > kDefaultDegreeCap) throw ConfigError(key + ".degree", "degree must be in [0, 8]");
  PolyModel m = PolyModel::full(dim, degree);
  const std::string init = get_string(c, key + ".init");
  if (init == "random") {
    Rng rng(seed);
    const double b = 1.0 / std::sqrt(static_cast<double>(m.weights().size()));
    Eigen::VectorXd w(m.weights().size());
    for (Eigen::Index i = 0; i < w.size(); ++i) w[i] = rng.uniform(-b, b);
    m.set_weights(w);
  } else if (init != "zero") {
    throw ConfigError(key + ".init", "expected 'zero' or 'random'");
  }
  return m;
}

inline FittedModel fit_model(const json& c, const Dataset& d, std::uint64_t seed, int stride) {
  const std::string kind = get_string(c, "model.kind");
  const std::size_t dim = d.dimension();
  FittedModel out;
  auto need_targets = [&] {
    if (!d.targets) throw ConfigError("dataset", "model kind '" + kind + "' needs targets");
  };
  if (kind == "expression") {
    auto p = std::make_shared<PolynomialFunction>(io::polynomial_from(node(c, "model.expression"), dim, "model.expression"));
    out.checkpoint = {{"kind", "expression"}, {"polynomial", to_string(p->polynomial())}};
    out.function = p;
  } else if (kind == "mlp") {
    need_targets();
    MlpSpec spec{mlp_sizes(c, "model", dim), get_activation(c, "model.activation")};
    const MlpTrainResult r = mlp_train(d.points, *d.targets, get_train_config(c, "model", seed), spec);
    out.checkpoint = io::to_json(r.model);
    out.history = io::loss_history_json(r.history, stride);
    out.function = std::make_shared<MlpModel>(r.model);
  } else if (kind == "poly") {
    need_targets();
    const PolyTrainResult r = train_with_symmetry(initial_poly_model(c, "model", dim, seed), d.points, *d.targets, {},
                                                  RegularizationSchedule::constant(0.0),
                                                  get_train_config(c, "model", seed));
    out.checkpoint = io::to_json(r.model);
    out.history = io::loss_history_json(r.history, stride);
    out.function = std::make_shared<PolyModel>(r.model);
  } else if (kind == "logistic") {
    if (!d.labels) throw ConfigError("dataset", "model kind 'logistic' needs labels");
    FeatureMap phi = io::feature_map_from(node(c, "model.feature_map"), dim, "model.feature_map");
    const LogisticFitResult r = logistic_fit(phi, d.points, *d.labels, get_train_config(c, "model", seed));
    out.checkpoint = io::to_json(r.model);
    out.checkpoint["accuracy"] = r.accuracy;
    out.history = io::scalar_history_json(r.history, stride);
    out.function = std::make_shared<LogisticFeatureModel>(r.model);
    out.feature_map = phi;
  } else {
    throw ConfigError("model.kind", "expected 'mlp', 'poly', 'logistic' or 'expression'");
  }
  return out;
}

inline double mse(const MLFunction& f, const Dataset& d) {
  if (!d.targets) throw ConfigError("dataset", "targets are required for an MSE");
  return (f.values(d.points) - *d.targets).squaredNorm() / static_cast<double>(d.size());
}

// ---------------------------------------------------------------------------
// Commands

inline void cmd_discover(RunContext& ctx) {
  const json& c = ctx.config;
  const std::uint64_t master = get_u64(c, "seed");
  const int stride = get_int(c, "output.history_stride");
  const Dataset data = ctx.run_stage("dataset", [&] { return load_dataset(c, "dataset", master); });
  for (const auto& w : data.warnings) ctx.warn(w);
  ctx.outputs["dataset"] = dataset_summary(data);

  const FittedModel model = ctx.run_stage("model", [&] { return fit_model(c, data, stage_seed(master, "model"), stride); });
  ctx.outputs["model"] = {{"checkpoint", model.checkpoint}, {"history", model.history}};
  if (data.targets) ctx.outputs["model"]["train_mse"] = mse(*model.function, data);

  const ExtendedFeatureMatrix em = ctx.run_stage("matrix", [&] {
    const std::string kind = get_string(c, "basis.kind");
    if (kind == "polynomial") {
      const int degree = get_int(c, "basis.degree");
      if (degree < 0) throw ConfigError("basis.degree", "degree must be >= 0");
      return build_extended_matrix(*model.function, data.points, VFBasis::polynomial(data.dimension(), degree),
                                   data.generator, get_string(c, "model.kind"));
    }
    if (kind == "killing") {
      auto fields = io::fields_from(node(c, "basis.fields"), "basis.fields");
      if (fields.empty()) throw ConfigError("basis.fields", "killing basis needs at least one field");
      return build_killing_matrix(*model.function, data.points, VFBasis::explicit_fields(std::move(fields), "killing"),
                                  data.generator, get_string(c, "model.kind"));
    }
    throw ConfigError("basis.kind", "expected 'polynomial' or 'killing'");
  });
  ctx.outputs["matrix"] = {{"rows", em.matrix.rows()}, {"cols", em.matrix.cols()}, {"basis", em.basis.id}};
  if (!em.degenerate_columns.empty()) ctx.warn(std::to_string(em.degenerate_columns.size()) + " degenerate matrix column(s)");

  TrainConfig dcfg = get_train_config(c, "discovery", stage_seed(master, "discovery"));
  const int k_max = get_int(c, "discovery.k_max");
  const GeneratorEstimate est = ctx.run_stage("estimate", [&] {
    if (k_max > 0) {
      ElbowResult el = select_generator_count(em, k_max, dcfg);
      ctx.outputs["elbow"] = {{"k", el.k}, {"losses", el.losses}};
      return el.estimates[static_cast<std::size_t>(el.k - 1)];
    }
    return estimate_generators(em, get_int(c, "discovery.k"), dcfg);
  });
  ctx.outputs["estimate"] = io::to_json(est);
  ctx.outputs["estimate"]["history"] = io::scalar_history_json(est.history, stride);

  ctx.run_stage("scoring", [&] {
    const std::size_t dim = data.dimension();
    const MetricTensor g = io::metric_from(node(c, "ground_truth.metric"), dim, "ground_truth.metric");
    const std::string region = get_string(c, "scoring.region");
    const int samples = get_int(c, "scoring.samples");
    const std::uint64_t sseed = stage_seed(master, "scoring");
    Box box;
    if (region == "bounds") {
      box = data.bounds.to_box();
    } else if (region == "box") {
      box = get_box(c, "scoring");
    } else if (region != "dataset") {
      throw ConfigError("scoring.region", "expected 'bounds', 'box' or 'dataset'");
    }
    auto sim = [&](const VectorField& a, const VectorField& b) {
      return region == "dataset" ? similarity(a, b, g, data.points, sseed) : similarity(a, b, g, box, samples, sseed);
    };
    const auto truth = io::fields_from(node(c, "ground_truth.fields"), "ground_truth.fields");
    json sims = json::array();
    for (std::size_t i = 0; i < est.fields.size(); ++i) {
      json row = json::array();
      for (const auto& t : truth) row.push_back(io::to_json(sim(est.fields[i], t)));
      sims.push_back(row);
    }
    ctx.outputs["similarity"] = sims;
    json scores = json::array();
    for (const auto& f : est.fields) scores.push_back(io::to_json(symmetry_score(*model.function, f, g, data.points, sseed)));
    ctx.outputs["symmetry_score"] = scores;
  });
}

inline std::vector<VectorField> enforcement_fields(const json& c) {
  auto fields = io::fields_from(node(c, "fields"), "fields");
  const std::string from = get_string(c, "fields_from");
  if (!from.empty()) {
    const json prior = read_json_file(from);
    if (!prior.contains("outputs") || !prior["outputs"].contains("estimate")) {
      throw ConfigError("fields_from", "file has no outputs.estimate section");
    }
    auto more = io::fields_from(prior["outputs"]["estimate"]["fields"], "fields_from");
    fields.insert(fields.end(), more.begin(), more.end());
  }
  if (fields.empty()) throw ConfigError("fields", "no fields given (set fields or fields_from)");
  return fields;
}

inline RegularizationSchedule get_schedule(const json& c) {
  RegularizationSchedule s;
  const std::string kind = get_string(c, "schedule.kind");
  if (kind == "constant") {
    s.kind = RegularizationSchedule::Kind::Constant;
  } else if (kind == "two-phase") {
    s.kind = RegularizationSchedule::Kind::TwoPhase;
  } else {
    throw ConfigError("schedule.kind", "expected 'constant' or 'two-phase'");
  }
  s.lambda = get_double(c, "schedule.lambda");
  s.switch_epoch = get_int(c, "schedule.switch_epoch");
  if (!node(c, "schedule.phase_two_lr").is_null()) s.phase_two_lr = get_double(c, "schedule.phase_two_lr");
  s.reset_optimizer_at_switch = get_bool(c, "schedule.reset_optimizer");
  s.validate();
  return s;
}

inline std::optional<PointSet> collocation_points(const json& c, const Dataset& train, std::uint64_t seed) {
  const std::string source = get_string(c, "collocation.source");
  if (source == "training") return std::nullopt;
  if (source == "disk") {
    if (train.dimension() != 2) throw ConfigError("collocation.source", "'disk' collocation needs 2-d data");
    const int n = get_int(c, "collocation.n");
    const double r = get_double(c, "collocation.radius");
    if (n < 1 || !(r > 0.0)) throw ConfigError("collocation", "n must be >= 1 and radius > 0");
    return gen_uniform_disk(n, r, seed).points;
  }
  if (source == "bounds") {
    const int n = get_int(c, "collocation.n");
    if (n < 1) throw ConfigError("collocation.n", "n must be >= 1");
    Rng rng(seed);
    return sample_box(train.bounds.to_box(), n, rng);
  }
  throw ConfigError("collocation.source", "expected 'training', 'disk' or 'bounds'");
}

inline void cmd_enforce(RunContext& ctx) {
  const json& c = ctx.config;
  const std::uint64_t master = get_u64(c, "seed");
  const int stride = get_int(c, "output.history_stride");
  const Dataset train = ctx.run_stage("dataset", [&] { return load_dataset(c, "dataset", master); });
  if (!train.targets) throw ConfigError("dataset", "enforcement needs targets");
  std::optional<Dataset> test;
  if (!get_string(c, "test_dataset.name").empty() || get_string(c, "test_dataset.source") == "csv") {
    test = ctx.run_stage("test_dataset", [&] { return load_dataset(c, "test_dataset", master); });
    if (test->dimension() != train.dimension()) throw ConfigError("test_dataset", "dimension differs from training data");
  }
  ctx.outputs["dataset"] = dataset_summary(train);
  if (test) ctx.outputs["test_dataset"] = dataset_summary(*test);

  const auto fields = enforcement_fields(c);
  for (const auto& f : fields)
    if (f.dimension() != train.dimension()) throw ConfigError("fields", "field dimension differs from data");
  const RegularizationSchedule schedule = get_schedule(c);
  const auto colloc = collocation_points(c, train, stage_seed(master, "collocation"));
  const std::string kind = get_string(c, "model.kind");
  const std::uint64_t mseed = stage_seed(master, "model");
  const TrainConfig base_cfg = get_train_config(c, "baseline_training", mseed);
  const TrainConfig enf_cfg = get_train_config(c, "training", mseed);

  struct Trained {
    std::shared_ptr<MLFunction> f;
    json checkpoint;
    json history;
    std::optional<Polynomial> poly;
  };
  auto train_one = [&](bool enforced) {
    const RegularizationSchedule s = enforced ? schedule : RegularizationSchedule::constant(0.0);
    const TrainConfig& tc = enforced ? enf_cfg : base_cfg;
    const std::vector<VectorField> fs = enforced ? fields : std::vector<VectorField>{};
    Trained t;
    if (kind == "mlp") {
      Rng rng(mseed);
      MlpModel init = MlpModel::initialize(mlp_sizes(c, "model", train.dimension()), get_activation(c, "model.activation"), rng);
      MlpTrainResult r = train_with_symmetry(std::move(init), train.points, *train.targets, fs, s, tc, colloc);
      t.checkpoint = io::to_json(r.model);
      t.history = io::loss_history_json(r.history, stride);
      t.f = std::make_shared<MlpModel>(std::move(r.model));
    } else if (kind == "poly") {
      PolyTrainResult r = train_with_symmetry(initial_poly_model(c, "model", train.dimension(), mseed), train.points,
                                              *train.targets, fs, s, tc, colloc);
      t.checkpoint = io::to_json(r.model);
      t.history = io::loss_history_json(r.history, stride);
      t.poly = r.model.to_polynomial();
      t.f = std::make_shared<PolyModel>(std::move(r.model));
    } else {
      throw ConfigError("model.kind", "enforcement supports 'mlp' or 'poly'");
    }
    return t;
  };

  const Trained baseline = ctx.run_stage("baseline", [&] { return train_one(false); });
  const Trained enforced = ctx.run_stage("enforced", [&] { return train_one(true); });

  ctx.run_stage("evaluate", [&] {
    const std::string ref_expr = get_string(c, "reference.expression");
    std::optional<Polynomial> ref;
    Box ref_box;
    if (!ref_expr.empty()) {
      ref = io::polynomial_from(node(c, "reference.expression"), train.dimension(), "reference.expression");
      ref_box = get_box(c, "reference");
    }
    const PointSet& sym_points = test ? test->points : train.points;
    auto report = [&](const Trained& t) {
      json r = {{"checkpoint", t.checkpoint}, {"history", t.history}, {"train_mse", mse(*t.f, train)}};
      if (test && test->targets) r["test_mse"] = mse(*t.f, *test);
      if (ref && t.poly) r["function_cosine"] = function_cosine(*t.poly, *ref, ref_box);
      json scores = json::array();
      const MetricTensor g = MetricTensor::euclidean(train.dimension());
      for (const auto& f : fields) scores.push_back(io::to_json(symmetry_score(*t.f, f, g, sym_points, master)));
      r["symmetry_score"] = scores;
      return r;
    };
    ctx.outputs["baseline"] = report(baseline);
    ctx.outputs["enforced"] = report(enforced);
    if (test && test->targets) {
      ctx.outputs["test_mse_ratio"] = ctx.outputs["enforced"]["test_mse"].get<double>() /
                                      ctx.outputs["baseline"]["test_mse"].get<double>();
    }
  });
}

inline void cmd_invariants(RunContext& ctx) {
  const json& c = ctx.config;
  const VectorField x = io::field_from(node(c, "field"), "field");
  const Box domain = get_box(c, "domain");
  if (domain.dimension() != x.dimension()) throw ConfigError("domain", "dimension differs from the field");
  const InvariantBasis basis = ctx.run_stage("basis", [&] {
    return build_invariant_basis(x, get_int(c, "degree"), domain, get_double(c, "epsilon"), get_double(c, "B"));
  });
  ctx.outputs["basis"] = io::to_json(basis);
  if (basis.features.empty()) ctx.warn("no eigenvalue fell below epsilon; raise epsilon or the degree");
  ctx.run_stage("soundness", [&] {
    ctx.outputs["soundness"] =
        io::to_json(soundness_check(basis, get_int(c, "soundness_trials"), stage_seed(get_u64(c, "seed"), "soundness")));
  });
  ctx.run_stage("completeness", [&] {
    json reports = json::array();
    const json& known = node(c, "known_invariants");
    for (std::size_t i = 0; i < known.size(); ++i) {
      const std::string key = "known_invariants[" + std::to_string(i) + "]";
      const Polynomial g = io::polynomial_from(known[i], x.dimension(), key);
      json r = io::to_json(completeness_check(basis, g));
      r["polynomial"] = to_string(g);
      reports.push_back(r);
    }
    ctx.outputs["completeness"] = reports;
  });
}

inline void write_trace_csv(const FlowTrace& t, const std::optional<Polynomial>& f, const std::string& path) {
  std::ofstream os(path);
  if (!os) throw ConfigError("output.trace_csv", "cannot open '" + path + "'");
  os << "t";
  for (Eigen::Index a = 0; a < t.points.cols(); ++a) os << ",x" << (a + 1);
  if (f) os << ",f";
  os << "\n";
  for (Eigen::Index k = 0; k < t.points.rows(); ++k) {
    const Eigen::VectorXd p = t.points.row(k).transpose();
    os << format_coefficient(t.times[static_cast<std::size_t>(k)]);
    for (Eigen::Index a = 0; a < p.size(); ++a) os << "," << format_coefficient(p[a]);
    if (f) os << "," << format_coefficient(eval(*f, p));
    os << "\n";
  }
}

inline json trace_summary(const FlowTrace& t) {
  const Eigen::VectorXd first = t.points.row(0).transpose();
  const Eigen::VectorXd last = t.points.row(t.points.rows() - 1).transpose();
  json s = {{"steps", t.points.rows() - 1},
            {"t_final", t.times.back()},
            {"final_point", io::vector_json(last)},
            {"return_distance", (last - first).norm()},
            {"left_domain", t.left_domain}};
  if (t.exit_time) s["exit_time"] = *t.exit_time;
  return s;
}

inline void cmd_flow(RunContext& ctx) {
  const json& c = ctx.config;
  const VectorField x = io::field_from(node(c, "field"), "field");
  const Eigen::VectorXd start = io::vector_from(node(c, "start"), "start");
  if (static_cast<std::size_t>(start.size()) != x.dimension()) throw ConfigError("start", "dimension differs from the field");
  std::optional<Box> domain;
  if (box_given(c, "domain")) domain = get_box(c, "domain");
  std::optional<Polynomial> f;
  if (!get_string(c, "function").empty()) f = io::polynomial_from(node(c, "function"), x.dimension(), "function");
  const std::string trace_path = ctx.side_path(get_string(c, "output.trace_csv"), ".trace.csv");
  const int steps = get_int(c, "steps");
  if (steps < 1) throw ConfigError("steps", "steps must be >= 1");
  ctx.run_stage("flow", [&] {
    try {
      const FlowTrace t = flow(x, start, get_double(c, "t_end"), steps, domain);
      ctx.outputs["trace"] = trace_summary(t);
      if (!trace_path.empty()) {
        write_trace_csv(t, f, trace_path);
        ctx.outputs["trace"]["csv"] = trace_path;
      }
    } catch (const IntegrationDiverged& e) {
      ctx.outputs["trace"] = {{"diverged", true}, {"last_valid_time", e.last_valid_time()}};
      if (e.partial_trace().points.rows() > 0) {
        ctx.outputs["trace"]["partial"] = trace_summary(e.partial_trace());
        if (!trace_path.empty()) {
          write_trace_csv(e.partial_trace(), f, trace_path);
          ctx.outputs["trace"]["csv"] = trace_path;
        }
      }
      throw;
    }
  });
  const int res = get_int(c, "grid.resolution");
  if (res > 0) {
    if (!f) throw ConfigError("function", "a value grid needs a function");
    const Box gb = get_box(c, "grid");
    if (gb.dimension() != x.dimension()) throw ConfigError("grid", "dimension differs from the field");
    const std::string grid_path = ctx.side_path(get_string(c, "output.grid_csv"), ".grid.csv");
    ctx.run_stage("grid", [&] {
      const PointSet pts = symdisc::detail::grid_points(gb, res);
      if (!grid_path.empty()) {
        std::ofstream os(grid_path);
        if (!os) throw ConfigError("output.grid_csv", "cannot open '" + grid_path + "'");
        for (Eigen::Index a = 0; a < pts.cols(); ++a) os << "x" << (a + 1) << ",";
        os << "value\n";
        for (Eigen::Index r = 0; r < pts.rows(); ++r) {
          for (Eigen::Index a = 0; a < pts.cols(); ++a) os << format_coefficient(pts(r, a)) << ",";
          os << format_coefficient(eval(*f, Eigen::VectorXd(pts.row(r).transpose()))) << "\n";
        }
      }
      ctx.outputs["grid"] = {{"points", pts.rows()}, {"csv", grid_path}};
    });
  }
}

inline void cmd_score(RunContext& ctx) {
  const json& c = ctx.config;
  const std::uint64_t master = get_u64(c, "seed");
  json results = json::array();
  const json& jobs = node(c, "jobs");
  for (std::size_t i = 0; i < jobs.size(); ++i) {
    const json& job = jobs[i];
    const std::string p = "jobs[" + std::to_string(i) + "]";
    ctx.run_stage(p, [&] {
      const std::string kind = get_string(job, "kind");
      const int samples = get_int(job, "samples");
      const std::uint64_t seed = stage_seed(master, p);
      const std::string rkind = get_string(job, "region.kind");
      std::optional<Dataset> d;
      Box box;
      if (rkind == "dataset") {
        d = load_dataset(job["region"], "dataset", master);
      } else if (rkind == "box") {
        box = get_box(job, "region");
      } else {
        throw ConfigError(p + ".region.kind", "expected 'box' or 'dataset'");
      }
      json r;
      try {
        if (kind == "similarity") {
          const VectorField a = io::field_from(node(job, "field_a"), p + ".field_a");
          const VectorField b = io::field_from(node(job, "field_b"), p + ".field_b");
          const MetricTensor g = io::metric_from(node(job, "metric"), a.dimension(), p + ".metric");
          r = io::to_json(d ? similarity(a, b, g, d->points, seed) : similarity(a, b, g, box, samples, seed));
        } else if (kind == "symmetry") {
          const VectorField x = io::field_from(node(job, "field"), p + ".field");
          const PolynomialFunction f(io::polynomial_from(node(job, "function"), x.dimension(), p + ".function"));
          const MetricTensor g = io::metric_from(node(job, "metric"), x.dimension(), p + ".metric");
          r = io::to_json(d ? symmetry_score(f, x, g, d->points, seed) : symmetry_score(f, x, g, box, samples, seed));
        } else {
          throw ConfigError(p + ".kind", "expected 'similarity' or 'symmetry'");
        }
      } catch (const DimensionError& e) {
        throw ConfigError(p, e.what());
      }
      r["name"] = get_string(job, "name");
      r["kind"] = kind;
      results.push_back(r);
    });
  }
  ctx.outputs["jobs"] = results;
}

inline void cmd_generate(RunContext& ctx) {
  const json& c = ctx.config;
  const Dataset d = ctx.run_stage("dataset", [&] { return load_dataset(c, "dataset", get_u64(c, "seed")); });
  for (const auto& w : d.warnings) ctx.warn(w);
  ctx.outputs["dataset"] = dataset_summary(d);
  const std::string path = ctx.side_path("", ".csv");
  if (!path.empty()) {
    write_csv(d, path);
    ctx.outputs["csv"] = path;
  }
}

/// Runs the command named in ctx.config; outputs accumulate in ctx.
inline void run(RunContext& ctx) {
  const std::string command = get_string(ctx.config, "command");
  if (command == "discover") return cmd_discover(ctx);
  if (command == "enforce") return cmd_enforce(ctx);
  if (command == "invariants") return cmd_invariants(ctx);
  if (command == "flow") return cmd_flow(ctx);
  if (command == "score") return cmd_score(ctx);
  if (command == "generate") return cmd_generate(ctx);
  throw ConfigError("command", "unknown command '" + command + "'");
}

/// Exit status for an exception escaping run(): 2 for configuration and input
/// errors, 3 for numeric failures.
inline int exit_code_for(const std::exception& e) {
  if (dynamic_cast<const NumericError*>(&e)) return 3;
  return 2;
}

}  // namespace symdisc::pipeline
