// Batch orchestration behind the rxnparse tool: configuration, the per-document
// parse pipeline (plan, ingest, reason, post-process, emit), run manifests and
// evaluation / rendering entry points.

#ifndef RXN_PIPELINE_H_
#define RXN_PIPELINE_H_

#include <filesystem>
#include <map>
#include <memory>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "rxn/agent.h"
#include "rxn/document.h"
#include "rxn/eval.h"
#include "rxn/planner.h"
#include "rxn/reaction.h"
#include "rxn/reasoning.h"

namespace rxn {

// The bundled data directory (prompts, lexicon).
std::filesystem::path default_data_dir();

enum class ConfigValueType { kString, kPath, kBool, kInt, kDouble };

struct ConfigKey {
  const char* name;
  ConfigValueType type;
  const char* help;
};

// Every key a config file may contain. Each is also a --<name> flag.
std::span<const ConfigKey> config_keys();

struct PipelineConfig {
  std::filesystem::path detections;  // default input when none are given
  std::filesystem::path fixtures;
  std::filesystem::path weights;
  std::filesystem::path lexicon;
  std::filesystem::path prompts;
  std::filesystem::path output = "out";

  std::string backend = "mock";  // mock | live
  std::string endpoint;
  std::string model;
  std::string api_key_env = "RXN_API_KEY";
  int max_retries = 3;
  int max_in_flight = 4;
  int timeout_s = 60;
  int min_interval_ms = 0;

  std::string query = "Parse all reactions in this diagram.";
  std::string planner = "rule";  // rule | vlm
  bool plan_fallback = true;
  bool refine_smiles = false;

  ReasoningConfig reasoning;

  double iou = kEntityIouThreshold;
  std::string criterion = "both";  // hard | soft | both
  std::string iou_mode = "polygon";
  bool per_layout = false;

  int workers = 1;
  bool svg = false;

  // Unknown keys and wrongly typed values throw ConfigError.
  static PipelineConfig from_json_text(std::string_view text);
  // Every key, sorted; the canonical form that is hashed.
  std::string to_json_text() const;
  std::string hash() const;

  // Ranges, enumerations and referenced paths. Throws ConfigError.
  void validate() const;

  LiveBackendConfig live_backend() const;
  EvalOptions eval_options() const;
  std::vector<MatchCriterion> criteria() const;
};

// File values (if a file is given) overlaid by flag values, converted by key
// type. Throws ConfigError.
PipelineConfig load_config(const std::optional<std::filesystem::path>& file,
                           const std::map<std::string, std::string>& overrides);

enum class DocumentStatus { kOk, kPartial, kFailed };
std::string_view to_string(DocumentStatus s);

struct DocumentOutcome {
  std::string source;
  std::string id;
  std::optional<LayoutClass> layout;
  DocumentStatus status = DocumentStatus::kOk;
  std::string error_class;
  std::string error;
  std::string plan;
  std::map<std::string, double> stage_ms;
  std::vector<std::string> outputs;
  std::vector<std::string> warnings;
  std::vector<Reaction> reactions;
  std::string reaction_json;  // written to <id>.json
  std::string svg;            // written to <id>.svg when enabled
};

struct RunManifest {
  std::string config_hash;
  std::string config;
  std::vector<DocumentOutcome> documents;  // input order

  std::string to_json_text() const;
  // 0 all ok, 2 some documents partial or failed, 4 every document failed.
  int exit_code() const;
};

inline constexpr int kExitOk = 0;
inline constexpr int kExitPartial = 2;
inline constexpr int kExitConfig = 3;
inline constexpr int kExitTotalFailure = 4;

// Shared state for a batch: prompts, agent client, weights, lexicon.
class Pipeline {
 public:
  // Validates the config and builds the agent client. Throws ConfigError.
  explicit Pipeline(PipelineConfig config);
  // With a caller-supplied client, or none for work that needs no agent
  // (rule planning, edge scoring); agent calls then throw PreconditionError.
  Pipeline(PipelineConfig config, std::shared_ptr<AgentClient> client);

  const PipelineConfig& config() const { return config_; }
  AgentClient& client();
  const Lexicon& lexicon() const { return lexicon_; }
  const GnnWeights& weights() const { return weights_; }

  ReactionDocument load(const std::filesystem::path& file) const;
  AgentPlan plan(const ReactionDocument& doc, std::string_view image);

  // One document end to end, without writing files. Never throws; failures
  // are reported in the outcome.
  DocumentOutcome process(const std::filesystem::path& file);

  // Processes every input (files, or directories of *.json), writes
  // <output>/<id>.json (and .svg when enabled) plus manifest.json.
  RunManifest run(const std::vector<std::filesystem::path>& inputs);

 private:
  void init();
  std::string image_bytes(const ReactionDocument& doc, const std::filesystem::path& file) const;
  void refine_molecules(ReactionDocument& doc, std::string_view image,
                        std::vector<std::string>& warnings);

  PipelineConfig config_;
  std::shared_ptr<PromptLibrary> prompts_;
  std::shared_ptr<AgentClient> client_;
  GnnWeights weights_;
  Lexicon lexicon_;
};

// Detection files named by the inputs, directories expanded to their *.json
// files in name order.
std::vector<std::filesystem::path> expand_inputs(const std::vector<std::filesystem::path>& inputs);

// Scores pred against gt under each configured criterion.
struct EvalRun {
  std::vector<MatchReport> reports;
  std::string json;
  std::string table;
};
EvalRun run_eval(const PipelineConfig& config, const std::filesystem::path& gt,
                 const std::filesystem::path& pred);

// Reaction records are resolved against the document by region; a record
// that names no entity of the document throws ReferenceError.
std::string render_records(const ReactionDocument& doc, std::span<const ReactionRecord> records);

}  // namespace rxn

#endif  // RXN_PIPELINE_H_
