// rxnparse: parse reaction diagrams from detection files, evaluate parses,
// render annotations and poke at individual scores.

#include <cstdio>
#include <fstream>
#include <iostream>
#include <map>
#include <sstream>

#include <CLI11.hpp>
#include <fmt/format.h>
#include <json.hpp>

#include "rxn/chem.h"
#include "rxn/errors.h"
#include "rxn/pipeline.h"
#include "rxn/svg.h"

namespace {

using nlohmann::ordered_json;

std::string slurp(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw rxn::PreconditionError("cannot read " + path);
  std::stringstream buf;
  buf << in.rdbuf();
  return buf.str();
}

void spit(const std::string& path, std::string_view text) {
  std::ofstream out(path, std::ios::binary);
  out << text;
  if (!out) throw rxn::PreconditionError("cannot write " + path);
}

// Config file plus one --<key> flag per config key.
struct ConfigFlags {
  std::string file;
  std::map<std::string, std::string> values;

  void attach(CLI::App* app) {
    app->add_option("--config", file, "JSON config file")->check(CLI::ExistingFile);
    for (const rxn::ConfigKey& key : rxn::config_keys()) {
      app->add_option(std::string("--") + key.name, values[key.name], key.help);
    }
  }

  rxn::PipelineConfig load(const CLI::App* app) const {
    std::map<std::string, std::string> given;
    for (const auto& [name, value] : values) {
      if (app->count("--" + name) > 0) given[name] = value;
    }
    std::optional<std::filesystem::path> path;
    if (!file.empty()) path = file;
    return rxn::load_config(path, given);
  }
};

int cmd_parse(const rxn::PipelineConfig& config, const std::vector<std::string>& inputs) {
  rxn::Pipeline pipeline(config);
  const std::vector<std::filesystem::path> paths(inputs.begin(), inputs.end());
  const rxn::RunManifest manifest = pipeline.run(paths);
  for (const rxn::DocumentOutcome& d : manifest.documents) {
    if (d.status == rxn::DocumentStatus::kFailed) {
      std::cerr << fmt::format("{}: failed ({}): {}\n", d.source, d.error_class, d.error);
    } else {
      std::cout << fmt::format("{}: {} reaction(s), {}\n", d.id, d.reactions.size(),
                               rxn::to_string(d.status));
    }
  }
  std::cout << fmt::format("manifest: {}\n", (config.output / "manifest.json").string());
  return manifest.exit_code();
}

int cmd_eval(const rxn::PipelineConfig& config, const std::string& gt, const std::string& pred,
             const std::string& out) {
  const rxn::EvalRun run = rxn::run_eval(config, gt, pred);
  std::cout << run.table;
  if (!out.empty()) {
    std::filesystem::path json_path = out;
    spit(json_path.string(), run.json);
    spit(json_path.replace_extension(".txt").string(), run.table);
  }
  return rxn::kExitOk;
}

int cmd_plan(const rxn::PipelineConfig& config, const std::string& doc_path) {
  std::shared_ptr<rxn::AgentClient> none;
  std::unique_ptr<rxn::Pipeline> pipeline =
      config.planner == "vlm" ? std::make_unique<rxn::Pipeline>(config)
                              : std::make_unique<rxn::Pipeline>(config, none);
  const rxn::ReactionDocument doc = pipeline->load(doc_path);
  std::cout << rxn::plan_to_json(pipeline->plan(doc, {})) << "\n";
  return rxn::kExitOk;
}

int cmd_render(const rxn::PipelineConfig& config, const std::string& doc_path,
               const std::string& reactions_path, const std::string& out) {
  rxn::Pipeline pipeline(config, nullptr);
  const rxn::ReactionDocument doc = pipeline.load(doc_path);
  std::vector<rxn::ReactionRecord> records;
  if (!reactions_path.empty()) records = rxn::parse_reaction_records(slurp(reactions_path));
  const std::string svg = rxn::render_records(doc, records);
  if (out.empty()) {
    std::cout << svg;
  } else {
    spit(out, svg);
  }
  return rxn::kExitOk;
}

int cmd_fingerprint(const rxn::PipelineConfig& config, const std::string& smiles) {
  const rxn::chem::Molecule mol = rxn::chem::parse_smiles(smiles);
  const rxn::chem::Fingerprint fp = rxn::chem::fingerprint(mol, config.reasoning.fingerprint);
  ordered_json counts = ordered_json::object();
  const rxn::chem::ElementCounts atoms = rxn::chem::atom_count_vector(mol);
  for (const auto& [el, n] : atoms.entries()) counts[el] = n;
  ordered_json j;
  j["smiles"] = smiles;
  j["written"] = rxn::chem::write_smiles(mol);
  j["formula"] = rxn::chem::formula(atoms);
  j["atoms"] = counts;
  j["charge"] = rxn::chem::formal_charge_sum(mol);
  j["algorithm"] = fp.algorithm_tag();
  j["width"] = fp.width();
  j["popcount"] = fp.popcount();
  j["on_bits"] = fp.on_bits();
  std::cout << j.dump(2) << "\n";
  return rxn::kExitOk;
}

int cmd_score_edge(const rxn::PipelineConfig& config, const std::string& doc_path,
                   const std::string& a, const std::string& b, double s_init) {
  rxn::Pipeline pipeline(config, nullptr);
  const rxn::ReactionDocument doc = pipeline.load(doc_path);
  const auto i = doc.index_of(a);
  const auto k = doc.index_of(b);
  if (!i || !k) throw rxn::ReferenceError("unknown entity id \"" + (i ? b : a) + "\"");
  rxn::SpatialGraph spatial = rxn::build_spatial_graph(doc, config.reasoning);
  rxn::propagate(spatial, pipeline.weights(), config.reasoning.layers);
  const rxn::ChemGraph chem = rxn::build_chem_graph(doc, config.reasoning);
  const std::optional<double> s_space = spatial.score(*i, *k);
  const std::optional<double> s_chem = chem.score(*i, *k);
  const rxn::FusionWeights alpha{config.reasoning.alpha_space, config.reasoning.alpha_chem,
                                 config.reasoning.alpha_init};
  const double fused = rxn::fuse_score(alpha, s_space.value_or(rxn::kNeutralScore),
                                       s_chem.value_or(rxn::kNeutralScore), s_init);
  ordered_json j;
  j["from"] = a;
  j["to"] = b;
  j["s_space"] = s_space ? ordered_json(*s_space) : ordered_json(nullptr);
  j["s_chem"] = s_chem ? ordered_json(*s_chem) : ordered_json(nullptr);
  j["s_init"] = s_init;
  j["s_fuse"] = fused;
  j["kept"] = fused > config.reasoning.tau_fuse;
  std::cout << j.dump(2) << "\n";
  return rxn::kExitOk;
}

// Prints each combiner prompt the parse of a document would send and the
// fixture file the mock backend would read for it.
int cmd_prompt(const rxn::PipelineConfig& config, const std::string& doc_path) {
  rxn::Pipeline pipeline(config, nullptr);
  const rxn::ReactionDocument doc = pipeline.load(doc_path);
  const auto prompts = rxn::PromptLibrary::load_dir(config.prompts.empty()
                                                        ? rxn::default_data_dir() / "prompts"
                                                        : config.prompts);
  const auto clusters = rxn::cluster_entities(doc, config.reasoning);
  for (const auto& cluster : clusters) {
    if (cluster.size() < 2) continue;
    const std::string prompt = prompts.render(
        rxn::AgentRole::kReactionExpert, {{"graph", rxn::render_cluster_graph(doc, cluster)}});
    const std::string key =
        rxn::MockAgentClient::fixture_key(rxn::AgentRole::kReactionExpert, prompt, "");
    std::cout << fmt::format("== reaction_expert/{}.txt\n{}\n", key, prompt);
  }
  return rxn::kExitOk;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Reaction diagram parsing from detection files"};
  app.require_subcommand(1);

  ConfigFlags flags;
  std::vector<std::string> inputs;
  std::string gt, pred, out, doc, reactions, smiles, from, to;
  double s_init = 0.0;

  CLI::App* parse = app.add_subcommand("parse", "parse detection files into reaction JSON");
  flags.attach(parse);
  parse->add_option("inputs", inputs, "detection files or directories");

  CLI::App* eval = app.add_subcommand("eval", "score predicted reactions against ground truth");
  flags.attach(eval);
  eval->add_option("--gt", gt, "ground-truth reactions")->required();
  eval->add_option("--pred", pred, "predicted reactions")->required();
  eval->add_option("--out", out, "report JSON path; the table goes next to it as .txt");

  CLI::App* plan = app.add_subcommand("plan", "print the agent plan for a document");
  flags.attach(plan);
  plan->add_option("--doc", doc, "detection file")->required();

  CLI::App* render = app.add_subcommand("render", "draw a document and its reactions as SVG");
  flags.attach(render);
  render->add_option("--doc", doc, "detection file")->required();
  render->add_option("--reactions", reactions, "reaction JSON (entity boxes only when omitted)");
  render->add_option("--out", out, "SVG path (stdout when omitted)");

  CLI::App* fp = app.add_subcommand("fingerprint", "print counts and fingerprint of a SMILES");
  flags.attach(fp);
  fp->add_option("smiles", smiles, "SMILES string")->required();

  CLI::App* score = app.add_subcommand("score-edge", "print the channel scores of an entity pair");
  flags.attach(score);
  score->add_option("--doc", doc, "detection file")->required();
  score->add_option("--from", from, "entity id")->required();
  score->add_option("--to", to, "entity id")->required();
  score->add_option("--s_init", s_init, "hypothesis score to fuse with");

  CLI::App* prompt = app.add_subcommand("prompt", "show combiner prompts and their fixture names");
  flags.attach(prompt);
  prompt->add_option("--doc", doc, "detection file")->required();

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : rxn::kExitConfig;
  }

  CLI::App* cmd = app.get_subcommands().front();
  rxn::PipelineConfig config;
  try {
    config = flags.load(cmd);
  } catch (const rxn::Error& e) {
    std::cerr << fmt::format("{}: {}\n", e.kind(), e.what());
    return rxn::kExitConfig;
  }

  try {
    if (cmd == parse) return cmd_parse(config, inputs);
    if (cmd == eval) return cmd_eval(config, gt, pred, out);
    if (cmd == plan) return cmd_plan(config, doc);
    if (cmd == render) return cmd_render(config, doc, reactions, out);
    if (cmd == fp) return cmd_fingerprint(config, smiles);
    if (cmd == score) return cmd_score_edge(config, doc, from, to, s_init);
    if (cmd == prompt) return cmd_prompt(config, doc);
  } catch (const rxn::ConfigError& e) {
    std::cerr << fmt::format("{}: {}\n", e.kind(), e.what());
    return rxn::kExitConfig;
  } catch (const rxn::Error& e) {
    std::cerr << fmt::format("{}: {}\n", e.kind(), e.what());
    return rxn::kExitTotalFailure;
  }
  return rxn::kExitTotalFailure;
}
