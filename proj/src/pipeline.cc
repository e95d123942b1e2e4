#include "rxn/pipeline.h"

#include <algorithm>
#include <chrono>
#include <fstream>
#include <set>
#include <sstream>

#include "json_util.h"
#include "parallel.h"
#include "rxn/errors.h"
#include "rxn/svg.h"

namespace rxn {
namespace {

using detail::json;
using detail::ordered_json;

std::string read_file(const std::filesystem::path& p) {
  std::ifstream in(p, std::ios::binary);
  if (!in) throw PreconditionError("cannot read " + p.string());
  std::stringstream buf;
  buf << in.rdbuf();
  return buf.str();
}

void write_file(const std::filesystem::path& p, std::string_view text) {
  std::ofstream out(p, std::ios::binary);
  out << text;
  if (!out) throw PreconditionError("cannot write " + p.string());
}

// Ids become file names; anything outside a conservative set is replaced.
std::string file_stem(std::string_view id) {
  std::string out;
  for (char c : id) {
    const bool ok = std::isalnum(static_cast<unsigned char>(c)) || c == '-' || c == '_' || c == '.';
    out += ok ? c : '_';
  }
  if (out.empty() || out == "." || out == "..") out = "_" + out;
  return out;
}

std::optional<AgentRole> expert_for(EntityKind k) {
  switch (k) {
    case EntityKind::kMolecule:
      return AgentRole::kMoleculeExpert;
    case EntityKind::kArrow:
      return AgentRole::kArrowExpert;
    case EntityKind::kText:
    case EntityKind::kIdentifier:
      return AgentRole::kTextExpert;
  }
  return std::nullopt;
}

ordered_json residual_json(const chem::ConservationResidual& r) {
  ordered_json elements = ordered_json::object();
  for (const auto& [el, n] : r.elements.entries()) elements[el] = n;
  return {{"elements", elements}, {"charge", r.charge}};
}

}  // namespace

std::string_view to_string(DocumentStatus s) {
  switch (s) {
    case DocumentStatus::kOk:
      return "ok";
    case DocumentStatus::kPartial:
      return "partial";
    case DocumentStatus::kFailed:
      return "failed";
  }
  return "failed";
}

std::string RunManifest::to_json_text() const {
  ordered_json docs = ordered_json::array();
  std::size_t counts[3] = {0, 0, 0};
  for (const DocumentOutcome& d : documents) {
    ++counts[static_cast<int>(d.status)];
    ordered_json j;
    j["source"] = d.source;
    j["id"] = d.id;
    j["layout"] = d.layout ? ordered_json(to_string(*d.layout)) : ordered_json(nullptr);
    j["status"] = to_string(d.status);
    if (d.status == DocumentStatus::kFailed) {
      j["error_class"] = d.error_class;
      j["error"] = d.error;
    }
    if (!d.plan.empty()) j["plan"] = ordered_json::parse(d.plan);
    ordered_json stages = ordered_json::object();
    for (const auto& [stage, ms] : d.stage_ms) stages[stage] = ms;
    j["stage_ms"] = stages;
    j["outputs"] = d.outputs;
    ordered_json reactions = ordered_json::array();
    for (const Reaction& r : d.reactions) {
      ordered_json rj;
      rj["score"] = r.score;
      rj["conservation"] = to_string(r.conservation);
      if (r.residual) rj["residual"] = residual_json(*r.residual);
      rj["molecule_in_conditions"] = r.molecule_in_conditions;
      reactions.push_back(rj);
    }
    j["reactions"] = reactions;
    j["warnings"] = d.warnings;
    docs.push_back(j);
  }
  ordered_json m;
  m["config_hash"] = config_hash;
  m["config"] = config.empty() ? ordered_json::object() : ordered_json::parse(config);
  m["summary"] = {{"ok", counts[0]}, {"partial", counts[1]}, {"failed", counts[2]}};
  m["documents"] = docs;
  return m.dump(2) + "\n";
}

int RunManifest::exit_code() const {
  if (documents.empty()) return kExitOk;
  const auto failed = std::count_if(documents.begin(), documents.end(), [](const auto& d) {
    return d.status == DocumentStatus::kFailed;
  });
  if (static_cast<std::size_t>(failed) == documents.size()) return kExitTotalFailure;
  const bool all_ok = std::all_of(documents.begin(), documents.end(),
                                  [](const auto& d) { return d.status == DocumentStatus::kOk; });
  return all_ok ? kExitOk : kExitPartial;
}

Pipeline::Pipeline(PipelineConfig config) : config_(std::move(config)) {
  init();
  if (config_.backend == "live") {
    if (config_.endpoint.empty() || config_.model.empty()) {
      throw ConfigError("the live backend needs \"endpoint\" and \"model\"");
    }
    client_ = std::make_shared<LiveAgentClient>(prompts_, config_.live_backend());
  } else {
    if (config_.fixtures.empty()) throw ConfigError("the mock backend needs \"fixtures\"");
    client_ = std::make_shared<MockAgentClient>(prompts_, config_.fixtures);
  }
}

Pipeline::Pipeline(PipelineConfig config, std::shared_ptr<AgentClient> client)
    : config_(std::move(config)), client_(std::move(client)) {
  init();
}

AgentClient& Pipeline::client() {
  if (!client_) throw PreconditionError("no agent backend configured");
  return *client_;
}

void Pipeline::init() {
  if (config_.prompts.empty()) config_.prompts = default_data_dir() / "prompts";
  if (config_.lexicon.empty() && std::filesystem::exists(default_data_dir() / "lexicon.json")) {
    config_.lexicon = default_data_dir() / "lexicon.json";
  }
  config_.validate();
  prompts_ = std::make_shared<PromptLibrary>(PromptLibrary::load_dir(config_.prompts));
  if (!config_.lexicon.empty()) lexicon_ = Lexicon::load_file(config_.lexicon);
  const ReasoningConfig& r = config_.reasoning;
  if (config_.weights.empty()) {
    weights_ = GnnWeights::random(r.dim, kEdgeFeatureDim, r.layers, r.seed);
  } else {
    weights_ = GnnWeights::load_file(config_.weights.string());
    weights_.check(r.dim, kEdgeFeatureDim, r.layers);
  }
}

ReactionDocument Pipeline::load(const std::filesystem::path& file) const {
  LoadOptions opts;
  opts.id = file.stem().string();
  opts.lexicon = &lexicon_;
  return load_document(read_file(file), opts);
}

std::string Pipeline::image_bytes(const ReactionDocument& doc,
                                  const std::filesystem::path& file) const {
  if (!doc.image_ref) return {};
  const std::filesystem::path p = file.parent_path() / *doc.image_ref;
  return std::filesystem::is_regular_file(p) ? read_file(p) : std::string();
}

AgentPlan Pipeline::plan(const ReactionDocument& doc, std::string_view image) {
  const DiagramFeatures features = extract_features(doc);
  PlanningContext ctx;
  ctx.query = config_.query;
  if (config_.planner == "vlm") {
    return route_vlm(config_.query, features, ctx, client(), image, config_.plan_fallback);
  }
  return route_rule(config_.query, features, ctx);
}

// The molecule expert sees the detected molecules and may return corrected
// SMILES; an answer that does not parse leaves the detector's SMILES alone.
void Pipeline::refine_molecules(ReactionDocument& doc, std::string_view image,
                                std::vector<std::string>& warnings) {
  std::vector<std::size_t> molecules;
  for (std::size_t i = 0; i < doc.entities.size(); ++i) {
    if (doc.entities[i].kind == EntityKind::kMolecule) molecules.push_back(i);
  }
  if (molecules.empty()) return;
  const std::string response = client().request(
      AgentRole::kMoleculeExpert, {{"detections", render_cluster_graph(doc, molecules)}}, image);
  json items;
  try {
    items = json::parse(detail::strip_code_fence(response));
  } catch (const json::parse_error&) {
    warnings.push_back("molecule expert answer is not JSON; SMILES left unchanged");
    return;
  }
  if (!items.is_array()) {
    warnings.push_back("molecule expert answer is not an array; SMILES left unchanged");
    return;
  }
  for (std::size_t k = 0; k < items.size(); ++k) {
    const json& item = items[k];
    if (!item.is_object() || !item.contains("bbox") || !item.contains("smiles") ||
        !item["smiles"].is_string()) {
      warnings.push_back("molecule expert item " + std::to_string(k) + " skipped");
      continue;
    }
    geom::Region region;
    try {
      region = detail::region_from_json(item["bbox"], "/" + std::to_string(k) + "/bbox");
    } catch (const SchemaError& e) {
      warnings.push_back(std::string("molecule expert item skipped: ") + e.what());
      continue;
    }
    Entity* best = nullptr;
    double best_iou = kResolutionIou;
    for (std::size_t i : molecules) {
      const double v = geom::iou(region, doc.entities[i].region);
      if (v >= best_iou) {
        best_iou = v;
        best = &doc.entities[i];
      }
    }
    if (best == nullptr) {
      warnings.push_back("molecule expert item " + std::to_string(k) + " matches no molecule");
      continue;
    }
    const std::string smiles = item["smiles"].get<std::string>();
    auto& payload = std::get<MoleculePayload>(best->payload);
    if (payload.smiles == smiles) continue;
    try {
      payload.molecule = chem::parse_smiles(smiles);
      payload.smiles = smiles;
      payload.parse_error.reset();
    } catch (const Error& e) {
      warnings.push_back(best->id + ": refined SMILES rejected (" + e.kind() + ")");
    }
  }
}

DocumentOutcome Pipeline::process(const std::filesystem::path& file) {
  DocumentOutcome out;
  out.source = file.string();
  out.id = file.stem().string();
  auto timed = [&](const char* stage, auto&& fn) {
    const auto start = std::chrono::steady_clock::now();
    fn();
    out.stage_ms[stage] +=
        std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - start).count();
  };
  try {
    ReactionDocument doc;
    timed("ingest", [&] { doc = load(file); });
    out.id = doc.id;
    out.layout = doc.layout;
    out.warnings = doc.warnings;
    const std::string image = image_bytes(doc, file);

    AgentPlan plan;
    timed("plan", [&] { plan = this->plan(doc, image); });
    out.plan = plan_to_json(plan);

    // Entities whose expert is not in the plan are left out of reasoning.
    std::erase_if(doc.entities, [&](const Entity& e) { return !plan.contains(*expert_for(e.kind)); });

    PlanningContext ctx;
    ctx.query = config_.query;
    auto produced = [&](AgentRole role) {
      return static_cast<int>(std::count_if(doc.entities.begin(), doc.entities.end(),
                                            [&](const Entity& e) { return expert_for(e.kind) == role; }));
    };
    bool partial = false;
    for (AgentRole role : plan.steps) {
      if (role == AgentRole::kMoleculeExpert && config_.refine_smiles) {
        timed("molecule_expert", [&] { refine_molecules(doc, image, out.warnings); });
      }
      if (role == AgentRole::kReactionExpert) {
        ReasoningResult result = run_reasoning(doc, config_.reasoning, weights_, client(), image);
        for (const auto& [stage, ms] : result.stage_ms) out.stage_ms[stage] += ms;
        for (std::string& w : result.hypotheses.warnings) out.warnings.push_back(std::move(w));
        partial = !result.hypotheses.failures.empty();
        out.reactions = std::move(result.reactions);
        ctx.complete(role, static_cast<int>(out.reactions.size()));
      } else {
        ctx.complete(role, produced(role));
      }
    }

    timed("emit", [&] {
      const std::vector<ReactionRecord> records = to_records(out.reactions, doc);
      out.reaction_json = write_reaction_records(records);
      if (config_.svg) out.svg = render_svg(doc, out.reactions);
    });
    out.status = partial ? DocumentStatus::kPartial : DocumentStatus::kOk;
  } catch (const Error& e) {
    out.status = DocumentStatus::kFailed;
    out.error_class = e.kind();
    out.error = e.what();
    out.reactions.clear();
  } catch (const std::exception& e) {
    out.status = DocumentStatus::kFailed;
    out.error_class = "InternalError";
    out.error = e.what();
    out.reactions.clear();
  }
  return out;
}

std::vector<std::filesystem::path> expand_inputs(const std::vector<std::filesystem::path>& inputs) {
  std::vector<std::filesystem::path> files;
  for (const auto& in : inputs) {
    if (std::filesystem::is_directory(in)) {
      std::vector<std::filesystem::path> found;
      for (const auto& entry : std::filesystem::directory_iterator(in)) {
        if (entry.is_regular_file() && entry.path().extension() == ".json") {
          found.push_back(entry.path());
        }
      }
      std::sort(found.begin(), found.end());
      files.insert(files.end(), found.begin(), found.end());
    } else {
      files.push_back(in);
    }
  }
  return files;
}

RunManifest Pipeline::run(const std::vector<std::filesystem::path>& inputs) {
  std::vector<std::filesystem::path> files =
      expand_inputs(inputs.empty() && !config_.detections.empty()
                        ? std::vector<std::filesystem::path>{config_.detections}
                        : inputs);
  if (files.empty()) throw ConfigError("no detection files to parse");

  RunManifest manifest;
  manifest.config_hash = config_.hash();
  manifest.config = config_.to_json_text();
  manifest.documents.resize(files.size());
  detail::parallel_for(files.size(), config_.workers,
                       [&](std::size_t i) { manifest.documents[i] = process(files[i]); });

  std::filesystem::create_directories(config_.output);
  std::set<std::string> stems;
  for (DocumentOutcome& d : manifest.documents) {
    const std::string stem = file_stem(d.id);
    if (d.status != DocumentStatus::kFailed && !stems.insert(stem).second) {
      d.status = DocumentStatus::kFailed;
      d.error_class = "SchemaError";
      d.error = "another document in the batch has id \"" + d.id + "\"";
      d.reactions.clear();
    }
    if (d.status == DocumentStatus::kFailed) continue;
    const auto json_path = config_.output / (stem + ".json");
    write_file(json_path, d.reaction_json);
    d.outputs.push_back(json_path.string());
    if (config_.svg) {
      const auto svg_path = config_.output / (stem + ".svg");
      write_file(svg_path, d.svg);
      d.outputs.push_back(svg_path.string());
    }
  }
  write_file(config_.output / "manifest.json", manifest.to_json_text());
  return manifest;
}

EvalRun run_eval(const PipelineConfig& config, const std::filesystem::path& gt,
                 const std::filesystem::path& pred) {
  const auto pairs = align_documents(load_eval_input(gt), load_eval_input(pred));
  EvalRun run;
  const EvalOptions opts = config.eval_options();
  for (MatchCriterion c : config.criteria()) run.reports.push_back(score_corpus(pairs, c, opts));
  run.json = report_to_json(run.reports, opts);
  run.table = format_report_table(run.reports, config.per_layout);
  return run;
}

std::string render_records(const ReactionDocument& doc, std::span<const ReactionRecord> records) {
  std::vector<Reaction> reactions;
  for (std::size_t k = 0; k < records.size(); ++k) {
    try {
      reactions.push_back(resolve_record(records[k], doc));
    } catch (const ResolutionError& e) {
      throw ReferenceError("reaction " + std::to_string(k + 1) + ": " + e.what());
    }
  }
  return render_svg(doc, reactions);
}

}  // namespace rxn
