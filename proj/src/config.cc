#include <charconv>
#include <cmath>
#include <fstream>
#include <functional>
#include <limits>
#include <sstream>

#include "json_util.h"
#include "rxn/errors.h"
#include "rxn/hash.h"
#include "rxn/pipeline.h"

#ifndef RXN_DATA_DIR
#define RXN_DATA_DIR "data"
#endif

namespace rxn {
namespace {

using detail::json;

struct Binding {
  ConfigKey key;
  std::function<void(PipelineConfig&, const json&)> set;
  std::function<json(const PipelineConfig&)> get;
};

std::string fmt_key(const char* name) { return std::string("\"") + name + "\""; }

[[noreturn]] void bad_type(const char* name, const char* want) {
  throw ConfigError(fmt_key(name) + " must be " + want);
}

int to_int(const char* name, const json& j) {
  if (!j.is_number_integer()) bad_type(name, "an integer");
  const auto v = j.get<std::int64_t>();
  if (v < std::numeric_limits<int>::min() || v > std::numeric_limits<int>::max()) {
    throw ConfigError(fmt_key(name) + " is out of range");
  }
  return static_cast<int>(v);
}

// Accessors return a reference into the config so one lambda serves both
// directions.
template <typename Access>
Binding path_key(const char* name, const char* help, Access at) {
  return {{name, ConfigValueType::kPath, help},
          [=](PipelineConfig& c, const json& j) {
            if (!j.is_string()) bad_type(name, "a path string");
            at(c) = j.get<std::string>();
          },
          [=](const PipelineConfig& c) { return json(at(const_cast<PipelineConfig&>(c)).string()); }};
}

template <typename Access>
Binding string_key(const char* name, const char* help, Access at) {
  return {{name, ConfigValueType::kString, help},
          [=](PipelineConfig& c, const json& j) {
            if (!j.is_string()) bad_type(name, "a string");
            at(c) = j.get<std::string>();
          },
          [=](const PipelineConfig& c) { return json(at(const_cast<PipelineConfig&>(c))); }};
}

template <typename Access>
Binding bool_key(const char* name, const char* help, Access at) {
  return {{name, ConfigValueType::kBool, help},
          [=](PipelineConfig& c, const json& j) {
            if (!j.is_boolean()) bad_type(name, "true or false");
            at(c) = j.get<bool>();
          },
          [=](const PipelineConfig& c) { return json(at(const_cast<PipelineConfig&>(c))); }};
}

template <typename Access>
Binding int_key(const char* name, const char* help, Access at) {
  return {{name, ConfigValueType::kInt, help},
          [=](PipelineConfig& c, const json& j) { at(c) = to_int(name, j); },
          [=](const PipelineConfig& c) { return json(at(const_cast<PipelineConfig&>(c))); }};
}

template <typename Access>
Binding double_key(const char* name, const char* help, Access at) {
  return {{name, ConfigValueType::kDouble, help},
          [=](PipelineConfig& c, const json& j) {
            if (!j.is_number()) bad_type(name, "a number");
            at(c) = j.get<double>();
          },
          [=](const PipelineConfig& c) { return json(at(const_cast<PipelineConfig&>(c))); }};
}

#define RXN_AT(expr) [](PipelineConfig& c) -> auto& { return c.expr; }

const std::vector<Binding>& bindings() {
  static const std::vector<Binding> table = {
      path_key("detections", "detection file or directory used when no inputs are given",
               RXN_AT(detections)),
      path_key("fixtures", "mock response directory", RXN_AT(fixtures)),
      path_key("weights", "GNN weight file (random weights from seed when unset)",
               RXN_AT(weights)),
      path_key("lexicon", "reagent lexicon JSON (bundled one when unset)", RXN_AT(lexicon)),
      path_key("prompts", "prompt template directory (bundled one when unset)", RXN_AT(prompts)),
      path_key("output", "output directory", RXN_AT(output)),
      string_key("backend", "mock or live", RXN_AT(backend)),
      string_key("endpoint", "live backend URL", RXN_AT(endpoint)),
      string_key("model", "live backend model name", RXN_AT(model)),
      string_key("api_key_env", "environment variable holding the API key", RXN_AT(api_key_env)),
      int_key("max_retries", "live backend retries", RXN_AT(max_retries)),
      int_key("max_in_flight", "concurrent live requests", RXN_AT(max_in_flight)),
      int_key("timeout_s", "live request timeout in seconds", RXN_AT(timeout_s)),
      int_key("min_interval_ms", "minimum gap between live request starts", RXN_AT(min_interval_ms)),
      string_key("query", "user question given to the planner", RXN_AT(query)),
      string_key("planner", "rule or vlm", RXN_AT(planner)),
      bool_key("plan_fallback", "fall back to rule routing on an unparseable plan",
               RXN_AT(plan_fallback)),
      bool_key("refine_smiles", "ask the molecule expert to correct SMILES", RXN_AT(refine_smiles)),
      int_key("k_nn", "spatial graph neighbours", RXN_AT(reasoning.k_nn)),
      double_key("radius", "spatial graph radius, fraction of the diagonal", RXN_AT(reasoning.radius)),
      int_key("layers", "propagation layers", RXN_AT(reasoning.layers)),
      int_key("dim", "embedding width", RXN_AT(reasoning.dim)),
      double_key("beta", "fingerprint weight in the chemical score", RXN_AT(reasoning.beta)),
      double_key("tau_chem", "chemical edge threshold", RXN_AT(reasoning.tau_chem)),
      double_key("tau_cluster", "clustering threshold", RXN_AT(reasoning.tau_cluster)),
      double_key("tau_fuse", "fused edge threshold", RXN_AT(reasoning.tau_fuse)),
      double_key("alpha_space", "spatial channel weight", RXN_AT(reasoning.alpha_space)),
      double_key("alpha_chem", "chemical channel weight", RXN_AT(reasoning.alpha_chem)),
      double_key("alpha_init", "hypothesis channel weight", RXN_AT(reasoning.alpha_init)),
      int_key("exact_search_limit", "largest component solved exactly",
              RXN_AT(reasoning.exact_search_limit)),
      double_key("conservation_penalty", "score factor for unbalanced reactions",
                 RXN_AT(reasoning.conservation_penalty)),
      double_key("arrow_merge_gap", "arrow chaining gap, fraction of the diagonal",
                 RXN_AT(reasoning.arrow_merge_gap)),
      {{"s_init_mode", ConfigValueType::kString, "indicator or confidence"},
       [](PipelineConfig& c, const json& j) {
         if (j == "indicator") {
           c.reasoning.s_init_mode = SInitMode::kIndicator;
         } else if (j == "confidence") {
           c.reasoning.s_init_mode = SInitMode::kConfidence;
         } else {
           bad_type("s_init_mode", "\"indicator\" or \"confidence\"");
         }
       },
       [](const PipelineConfig& c) {
         return json(c.reasoning.s_init_mode == SInitMode::kIndicator ? "indicator" : "confidence");
       }},
      {{"seed", ConfigValueType::kInt, "seed for random GNN weights"},
       [](PipelineConfig& c, const json& j) {
         if (!j.is_number_unsigned()) bad_type("seed", "a non-negative integer");
         c.reasoning.seed = j.get<std::uint64_t>();
       },
       [](const PipelineConfig& c) { return json(c.reasoning.seed); }},
      int_key("max_parallel", "concurrent combiner requests per document",
              RXN_AT(reasoning.max_parallel)),
      {{"fingerprint_width", ConfigValueType::kInt, "fingerprint bits"},
       [](PipelineConfig& c, const json& j) {
         if (!j.is_number_unsigned()) bad_type("fingerprint_width", "a positive integer");
         c.reasoning.fingerprint.width = j.get<std::size_t>();
       },
       [](const PipelineConfig& c) { return json(c.reasoning.fingerprint.width); }},
      int_key("fingerprint_path_length", "longest fingerprint path in bonds",
              RXN_AT(reasoning.fingerprint.max_path_length)),
      double_key("iou", "entity match threshold", RXN_AT(iou)),
      string_key("criterion", "hard, soft or both", RXN_AT(criterion)),
      string_key("iou_mode", "polygon or axis_hull", RXN_AT(iou_mode)),
      bool_key("per_layout", "add per-layout rows to evaluation reports", RXN_AT(per_layout)),
      int_key("workers", "documents processed concurrently", RXN_AT(workers)),
      bool_key("svg", "also write an annotated SVG per document", RXN_AT(svg)),
  };
  return table;
}

#undef RXN_AT

const Binding* find_binding(std::string_view name) {
  for (const Binding& b : bindings()) {
    if (name == b.key.name) return &b;
  }
  return nullptr;
}

json parse_object(std::string_view text, const std::string& what) {
  json j;
  try {
    j = json::parse(text);
  } catch (const json::parse_error& e) {
    throw ConfigError(what + " is not valid JSON: " + e.what());
  }
  if (!j.is_object()) throw ConfigError(what + " must be a JSON object");
  return j;
}

json flag_value(const ConfigKey& key, const std::string& raw) {
  switch (key.type) {
    case ConfigValueType::kString:
    case ConfigValueType::kPath:
      return raw;
    case ConfigValueType::kBool:
      if (raw == "true" || raw == "1" || raw == "yes" || raw == "on") return true;
      if (raw == "false" || raw == "0" || raw == "no" || raw == "off") return false;
      break;
    case ConfigValueType::kInt: {
      std::int64_t v = 0;
      const auto [end, ec] = std::from_chars(raw.data(), raw.data() + raw.size(), v);
      if (ec == std::errc() && end == raw.data() + raw.size()) {
        if (v >= 0) return static_cast<std::uint64_t>(v);
        return v;
      }
      break;
    }
    case ConfigValueType::kDouble: {
      char* end = nullptr;
      const double v = std::strtod(raw.c_str(), &end);
      if (!raw.empty() && end == raw.c_str() + raw.size() && std::isfinite(v)) return v;
      break;
    }
  }
  throw ConfigError("--" + std::string(key.name) + ": cannot read \"" + raw + "\"");
}

void check_unit(const char* name, double v) {
  if (!(v >= 0.0 && v <= 1.0)) throw ConfigError(fmt_key(name) + " must lie in [0, 1]");
}

void check_exists(const char* name, const std::filesystem::path& p) {
  if (!p.empty() && !std::filesystem::exists(p)) {
    throw ConfigError(fmt_key(name) + " refers to missing " + p.string());
  }
}

}  // namespace

std::filesystem::path default_data_dir() { return RXN_DATA_DIR; }

std::span<const ConfigKey> config_keys() {
  static const std::vector<ConfigKey> keys = [] {
    std::vector<ConfigKey> out;
    for (const Binding& b : bindings()) out.push_back(b.key);
    return out;
  }();
  return keys;
}

PipelineConfig PipelineConfig::from_json_text(std::string_view text) {
  const json j = parse_object(text, "config");
  PipelineConfig c;
  for (const auto& [name, value] : j.items()) {
    const Binding* b = find_binding(name);
    if (b == nullptr) throw ConfigError("unknown config key \"" + name + "\"");
    b->set(c, value);
  }
  return c;
}

std::string PipelineConfig::to_json_text() const {
  json j = json::object();  // std::map storage, so keys come out sorted
  for (const Binding& b : bindings()) j[b.key.name] = b.get(*this);
  return j.dump(2) + "\n";
}

std::string PipelineConfig::hash() const { return sha256_hex(to_json_text()); }

void PipelineConfig::validate() const {
  reasoning.validate();
  check_unit("iou", iou);
  if (backend != "mock" && backend != "live") throw ConfigError("\"backend\" must be mock or live");
  if (planner != "rule" && planner != "vlm") throw ConfigError("\"planner\" must be rule or vlm");
  if (criterion != "hard" && criterion != "soft" && criterion != "both") {
    throw ConfigError("\"criterion\" must be hard, soft or both");
  }
  if (iou_mode != "polygon" && iou_mode != "axis_hull") {
    throw ConfigError("\"iou_mode\" must be polygon or axis_hull");
  }
  if (workers < 1) throw ConfigError("\"workers\" must be at least 1");
  if (max_retries < 0) throw ConfigError("\"max_retries\" must be non-negative");
  if (max_in_flight < 1) throw ConfigError("\"max_in_flight\" must be at least 1");
  if (timeout_s < 1) throw ConfigError("\"timeout_s\" must be at least 1");
  if (min_interval_ms < 0) throw ConfigError("\"min_interval_ms\" must be non-negative");
  check_exists("detections", detections);
  check_exists("fixtures", fixtures);
  check_exists("weights", weights);
  check_exists("lexicon", lexicon);
  check_exists("prompts", prompts);
}

LiveBackendConfig PipelineConfig::live_backend() const {
  LiveBackendConfig live;
  live.endpoint = endpoint;
  live.model = model;
  live.api_key_env = api_key_env;
  live.max_retries = max_retries;
  live.timeout = std::chrono::seconds(timeout_s);
  live.max_in_flight = max_in_flight;
  live.min_interval = std::chrono::milliseconds(min_interval_ms);
  return live;
}

EvalOptions PipelineConfig::eval_options() const {
  EvalOptions opts;
  opts.threshold = iou;
  opts.iou_mode = iou_mode == "axis_hull" ? geom::IouMode::kAxisHull : geom::IouMode::kPolygon;
  return opts;
}

std::vector<MatchCriterion> PipelineConfig::criteria() const {
  if (criterion == "hard") return {MatchCriterion::kHard};
  if (criterion == "soft") return {MatchCriterion::kSoft};
  return {MatchCriterion::kHard, MatchCriterion::kSoft};
}

PipelineConfig load_config(const std::optional<std::filesystem::path>& file,
                           const std::map<std::string, std::string>& overrides) {
  json merged = json::object();
  if (file) {
    std::ifstream in(*file, std::ios::binary);
    if (!in) throw ConfigError("cannot read config file " + file->string());
    std::stringstream buf;
    buf << in.rdbuf();
    merged = parse_object(buf.str(), "config file " + file->string());
  }
  for (const auto& [name, raw] : overrides) {
    const Binding* b = find_binding(name);
    if (b == nullptr) throw ConfigError("unknown config key \"" + name + "\"");
    merged[name] = flag_value(b->key, raw);
  }
  PipelineConfig c = PipelineConfig::from_json_text(merged.dump());
  c.validate();
  return c;
}

}  // namespace rxn
