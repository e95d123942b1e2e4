#include <atomic>
#include <cstdlib>
#include <filesystem>
#include <string>
#include <thread>

#include <doctest.h>
#include <json.hpp>

#include "generators.h"
#include "rxn/agent.h"
#include "rxn/document.h"
#include "rxn/errors.h"
#include "rxn/pipeline.h"
#include "rxn/reaction.h"
#include "rxn/text_normalize.h"
#include "synthetic.h"

// After the project headers: resolv.h defines _res, which Eigen uses as a name.
#include <httplib.h>

using namespace rxn;
using rxn::testing::read_text;
namespace fs = std::filesystem;

namespace {

const fs::path kData = default_data_dir();

const Lexicon& lexicon() {
  static const Lexicon lex = Lexicon::load_file(kData / "lexicon.json");
  return lex;
}

std::vector<std::string> texts(const std::vector<NormalizedToken>& tokens) {
  std::vector<std::string> out;
  for (const auto& t : tokens) out.push_back(t.text);
  return out;
}

std::string trim_newline(std::string s) {
  while (!s.empty() && (s.back() == '\n' || s.back() == '\r')) s.pop_back();
  return s;
}

fs::path scratch(const std::string& name) {
  const fs::path p = fs::temp_directory_path() / ("rxn_perception_" + name);
  fs::remove_all(p);
  fs::create_directories(p);
  return p;
}

std::string schema_pointer(const std::string& text) {
  try {
    load_document(text);
  } catch (const SchemaError& e) {
    return e.pointer();
  }
  return "<none>";
}

}  // namespace

TEST_CASE("two detections from the example diagram load with their kinds") {
  const std::string file = R"({"width": 1309, "height": 234, "entities": [
    {"id": "a", "label": "molecule", "bbox": [38, 2, 434, 234]},
    {"id": "b", "label": "arrow", "bbox": [513, 155, 880, 153, 880, 130, 513, 132]}]})";
  const ReactionDocument doc = load_document(file);
  REQUIRE(doc.entities.size() == 2);
  const Entity* a = doc.find("a");
  const Entity* b = doc.find("b");
  REQUIRE(a != nullptr);
  REQUIRE(b != nullptr);
  CHECK(a->kind == EntityKind::kMolecule);
  CHECK(std::holds_alternative<geom::AxisBox>(a->region));
  CHECK(b->kind == EntityKind::kArrow);
  CHECK(std::holds_alternative<geom::OrientedQuad>(b->region));
  CHECK(b->arrow()->direction == ArrowDirection::kForward);
}

TEST_CASE("empty entity list is a valid document") {
  const ReactionDocument doc = load_document(R"({"width": 10, "height": 10, "entities": []})");
  CHECK(doc.entities.empty());
}

TEST_CASE("schema errors carry a JSON pointer") {
  CHECK(schema_pointer(R"({"width": 10, "height": 10, "entities": [
    {"id": "x", "label": "text", "bbox": [0, 0, 1, 1]},
    {"id": "x", "label": "text", "bbox": [2, 2, 3, 3]}]})")
            .starts_with("/entities/1"));
  CHECK(schema_pointer(R"({"width": 10, "height": 10, "entities": [
    {"id": "x", "label": "text", "bbox": [0, 0, 1]}]})")
            .starts_with("/entities/0/bbox"));
  CHECK(schema_pointer(R"({"width": 10, "height": 10, "entities": [
    {"id": "x", "label": "blob", "bbox": [0, 0, 1, 1]}]})")
            .starts_with("/entities/0/label"));
  CHECK(schema_pointer(R"({"width": 10, "entities": []})") != "<none>");
  CHECK(schema_pointer("[1, 2]") != "<none>");
  CHECK_THROWS_AS(load_document("{not json"), SchemaError);
  CHECK(schema_pointer(R"({"width": 10, "height": 10, "layout": "spiral", "entities": []})")
            .starts_with("/layout"));
}

TEST_CASE("arrows are quads and everything else is an axis box") {
  const ReactionDocument doc = load_document(R"({"width": 100, "height": 100, "entities": [
    {"id": "a", "label": "arrow", "bbox": [10, 10, 50, 20]},
    {"id": "t", "label": "text", "bbox": [60, 60, 90, 60, 90, 70, 60, 70]}]})");
  CHECK(std::holds_alternative<geom::OrientedQuad>(doc.find("a")->region));
  CHECK(std::holds_alternative<geom::AxisBox>(doc.find("t")->region));
  CHECK(doc.warnings.size() == 2);
}

TEST_CASE("bad SMILES is flagged, not dropped, unless strict") {
  const std::string file = R"({"width": 100, "height": 100, "entities": [
    {"id": "m", "label": "molecule", "bbox": [0, 0, 10, 10], "smiles": "C1CC"}]})";
  const ReactionDocument doc = load_document(file);
  REQUIRE(doc.entities.size() == 1);
  const MoleculePayload* mol = doc.entities[0].molecule();
  REQUIRE(mol != nullptr);
  CHECK_FALSE(mol->parsed());
  CHECK(mol->parse_error.has_value());
  LoadOptions strict;
  strict.strict_smiles = true;
  CHECK_THROWS_AS(load_document(file, strict), PayloadError);
}

TEST_CASE("entities are sorted by centroid row then column") {
  const ReactionDocument doc = load_document(R"({"width": 100, "height": 100, "entities": [
    {"id": "low", "label": "text", "bbox": [0, 50, 10, 60]},
    {"id": "right", "label": "text", "bbox": [50, 0, 60, 10]},
    {"id": "left", "label": "text", "bbox": [0, 0, 10, 10]}]})");
  REQUIRE(doc.entities.size() == 3);
  CHECK(doc.entities[0].id == "left");
  CHECK(doc.entities[1].id == "right");
  CHECK(doc.entities[2].id == "low");
}

TEST_CASE("regions outside the diagram are clamped with a warning") {
  const ReactionDocument doc = load_document(R"({"width": 100, "height": 100, "entities": [
    {"id": "t", "label": "text", "bbox": [90, 90, 120, 110]}]})");
  const geom::AxisBox b = geom::bounding_box(doc.entities[0].region);
  CHECK(b.x_max() <= 100.0);
  CHECK(b.y_max() <= 100.0);
  CHECK_FALSE(doc.warnings.empty());
}

TEST_CASE("load, serialize, load reproduces the document") {
  LoadOptions opts;
  opts.lexicon = &lexicon();
  const ReactionDocument first =
      load_document(read_text(kData / "examples/fig15/document.json"), opts);
  REQUIRE(first.entities.size() == 11);
  const ReactionDocument second = load_document(serialize_document(first), opts);
  CHECK(first.same_as(second));
  CHECK(serialize_document(first) == serialize_document(second));

  for (const auto& synthetic : rxn::testing::synthetic_batch(12, 5)) {
    const ReactionDocument a = load_document(synthetic.detections, opts);
    const ReactionDocument b = load_document(serialize_document(a), opts);
    CHECK(a.same_as(b));
  }
}

TEST_CASE("identifier references are checked") {
  CHECK_THROWS_AS(load_document(R"({"width": 100, "height": 100, "entities": [
    {"id": "i", "label": "identifier", "bbox": [0, 0, 5, 5], "text": "1a", "molecule": "nope"}]})"),
                  SchemaError);
  const ReactionDocument doc = load_document(R"({"width": 100, "height": 100, "entities": [
    {"id": "m", "label": "molecule", "bbox": [10, 10, 30, 30], "smiles": "CCO"},
    {"id": "i", "label": "identifier", "bbox": [0, 0, 5, 5], "text": "1a", "molecule": "m"}]})");
  CHECK(doc.find("i")->identifier()->molecule_ref == std::optional<std::string>("m"));
}

TEST_CASE("synonyms map to canonical keys") {
  CHECK(texts(normalize_text("ferric chloride", lexicon())) == std::vector<std::string>{"FeCl3"});
  CHECK(texts(normalize_text("FeCI3", lexicon())) == std::vector<std::string>{"FeCl3"});
  CHECK(normalize_text("", lexicon()).empty());
  CHECK(normalize_text("   ", lexicon()).empty());
}

TEST_CASE("OCR confusions are repaired only onto lexicon keys") {
  // "CI" alone is not a reagent key, so it stays raw.
  const auto ci = normalize_text("CI", lexicon());
  REQUIRE(ci.size() == 1);
  CHECK(ci[0].text == "CI");
  CHECK(ci[0].raw);
  const auto unknown = normalize_text("XyCI9", lexicon());
  REQUIRE(unknown.size() == 1);
  CHECK(unknown[0].text == "XyCI9");
  CHECK(unknown[0].raw);
}

TEST_CASE("unicode folding") {
  CHECK(fold_unicode("FeCl₃") == "FeCl3");
  CHECK(fold_unicode("H₂O") == "H2O");
  CHECK(fold_unicode("Ｆｅ") == "Fe");
  const auto tokens = normalize_text("FeCl₃", lexicon());
  REQUIRE(tokens.size() == 1);
  CHECK(tokens[0].text == "FeCl3");
  CHECK_FALSE(tokens[0].raw);
}

TEST_CASE("normalization is idempotent") {
  const std::vector<std::string> samples = {
      "ferric chloride", "FeCI3",  "NaBH4 (1.5 equiv)", "MeOH, 0 °C, 2 h",
      "K2CO3, toluene, 80 °C", "aluminum chloride, DCM", "Pd(PPh3)4 (5 mol%)",
      "zinc chloride then FeCI3", "", "CI"};
  for (const std::string& s : samples) {
    const std::string once = join_tokens(normalize_text(s, lexicon()));
    const std::string twice = join_tokens(normalize_text(once, lexicon()));
    CHECK_MESSAGE(once == twice, s);
  }
  // Random words drawn from synonyms, canonical keys and noise.
  rxn::testing::Rng rng(17);
  const std::vector<std::string> words = {"ferric", "chloride", "FeCl3", "FeCI3", "zinc",
                                          "THF",    "in",       "0",     "C0",    "iron(III)",
                                          "°C",     ",",        "CI",    "H2O",   "NaBH4"};
  for (int trial = 0; trial < 500; ++trial) {
    std::string s;
    const int n = rxn::testing::uniform_int(rng, 0, 6);
    for (int k = 0; k < n; ++k) {
      if (k) s += ' ';
      s += words[static_cast<std::size_t>(rxn::testing::uniform_int(rng, 0, words.size() - 1))];
    }
    const std::string once = join_tokens(normalize_text(s, lexicon()));
    CHECK_MESSAGE(join_tokens(normalize_text(once, lexicon())) == once, s);
  }
}

TEST_CASE("reaction records round-trip the example output byte for byte") {
  const std::string expected = read_text(kData / "examples/fig15/expected.json");
  const auto records = parse_reaction_records(expected);
  REQUIRE(records.size() == 2);
  CHECK(records[0].reactants.size() == 1);
  CHECK(records[0].products.size() == 1);
  CHECK(records[0].conditions.size() == 2);
  CHECK(records[0].arrows.size() == 1);
  CHECK(records[1].reactants.size() == 2);
  CHECK(records[1].products.size() == 1);
  CHECK(records[1].conditions.size() == 2);
  CHECK(records[1].arrows.size() == 1);
  CHECK(trim_newline(write_reaction_records(records)) == trim_newline(expected));
}

TEST_CASE("combiner response parsing") {
  LoadOptions opts;
  opts.lexicon = &lexicon();
  const ReactionDocument doc =
      load_document(read_text(kData / "examples/fig15/document.json"), opts);

  SUBCASE("the example resolves to document ids") {
    const auto reactions =
        parse_combiner_response(read_text(kData / "examples/fig15/expected.json"), doc);
    REQUIRE(reactions.size() == 2);
    CHECK(reactions[0].reactants == std::vector<std::string>{"m1"});
    CHECK(reactions[0].products == std::vector<std::string>{"m2"});
    CHECK(reactions[0].arrows == std::vector<std::string>{"a1"});
    CHECK(reactions[0].conditions.size() == 2);
    CHECK(reactions[1].reactants.size() == 2);
    CHECK(reactions[1].products == std::vector<std::string>{"m3"});
    // Round-trip through the record form.
    const auto again = parse_combiner_response(write_reaction_records(to_records(reactions, doc)), doc);
    REQUIRE(again.size() == reactions.size());
    for (std::size_t k = 0; k < again.size(); ++k) CHECK(again[k].same_members(reactions[k]));
  }
  SUBCASE("empty array") { CHECK(parse_combiner_response("[]", doc).empty()); }
  SUBCASE("code fences are tolerated") {
    CHECK(parse_combiner_response("```json\n[]\n```", doc).empty());
  }
  SUBCASE("empty products") {
    CHECK_THROWS_AS(parse_combiner_response(R"([{"reactants": [{"label": "molecule",
      "bbox": [38, 2, 434, 234]}], "products": [], "conditions": [], "arrow": []}])", doc),
                    ConstraintError);
  }
  SUBCASE("malformed") {
    CHECK_THROWS_AS(parse_combiner_response("the reactions are", doc), ResponseFormatError);
    CHECK_THROWS_AS(parse_combiner_response(R"({"reactants": []})", doc), ResponseFormatError);
    CHECK_THROWS_AS(parse_combiner_response(R"([{"reactants": [{"label": "molecule",
      "bbox": [38, 2, 434]}], "products": [{"label": "molecule", "bbox": [912, 14, 1309, 231]}],
      "conditions": [], "arrow": []}])", doc),
                    ResponseFormatError);
  }
  SUBCASE("slightly perturbed boxes still resolve, far ones do not") {
    const auto near = parse_combiner_response(R"([{"reactants": [{"label": "molecule",
      "bbox": [40, 3, 434, 233]}], "products": [{"label": "molecule", "bbox": [912, 14, 1309, 231]}],
      "conditions": [], "arrow": []}])", doc);
    REQUIRE(near.size() == 1);
    CHECK(near[0].reactants == std::vector<std::string>{"m1"});
    CHECK_THROWS_AS(parse_combiner_response(R"([{"reactants": [{"label": "molecule",
      "bbox": [100, 2, 500, 234]}], "products": [{"label": "molecule", "bbox": [912, 14, 1309, 231]}],
      "conditions": [], "arrow": []}])", doc),
                    ResolutionError);
  }
}

TEST_CASE("prompt templates") {
  const PromptLibrary prompts = PromptLibrary::load_dir(kData / "prompts");
  for (AgentRole role : kAllAgentRoles) CHECK(prompts.has(role));
  CHECK(prompts.variables(AgentRole::kPlanner) == std::vector<std::string>{"query"});
  const std::string planner =
      prompts.render(AgentRole::kPlanner, {{"query", "Parse all reactions in this diagram."}});
  CHECK(planner.find("Parse all reactions in this diagram.") != std::string::npos);
  CHECK(planner.find("{{") == std::string::npos);
  CHECK(planner.find("Output the result strictly in valid JSON") != std::string::npos);
  CHECK_THROWS_AS(prompts.render(AgentRole::kPlanner, {}), PreconditionError);
  CHECK(prompts.text(AgentRole::kReactionExpert).find("prune and refine this graph") !=
        std::string::npos);
}

TEST_CASE("mock client replays fixtures") {
  auto prompts = std::make_shared<PromptLibrary>(PromptLibrary::load_dir(kData / "prompts"));
  const fs::path dir = scratch("mock");
  MockAgentClient client(prompts, dir);
  const PromptVars vars{{"query", "Convert the molecule to SMILES."}};
  CHECK_THROWS_AS(client.request(AgentRole::kPlanner, vars), FixtureMissing);
  // Unbound variables fail before any lookup.
  CHECK_THROWS_AS(client.request(AgentRole::kPlanner, {}), PreconditionError);

  const std::string prompt = prompts->render(AgentRole::kPlanner, vars);
  const fs::path path = client.fixture_path(AgentRole::kPlanner, prompt, "");
  fs::create_directories(path.parent_path());
  const std::string body =
      R"({"plan": {"molecule_expert": true, "arrow_expert": false, "text_expert": false, "reaction_expert": false}})";
  rxn::testing::write_text(path, body);
  const std::string a = client.request(AgentRole::kPlanner, vars);
  const std::string b = client.request(AgentRole::kPlanner, vars);
  CHECK(a == body);
  CHECK(a == b);
  // The image is part of the key.
  CHECK_THROWS_AS(client.request(AgentRole::kPlanner, vars, "png bytes"), FixtureMissing);
  CHECK(MockAgentClient::fixture_key(AgentRole::kPlanner, prompt, "") !=
        MockAgentClient::fixture_key(AgentRole::kTextExpert, prompt, ""));

  const auto log = client.log();
  REQUIRE(log.size() >= 3);
  CHECK(log.front().role == AgentRole::kPlanner);
  CHECK_FALSE(log.front().timestamp.empty());
  CHECK_FALSE(log.front().prompt_hash.empty());
  fs::remove_all(dir);
}

TEST_CASE("live client retries, fails and authenticates against a local server") {
  httplib::Server server;
  std::atomic<int> calls{0};
  std::atomic<int> failures_left{1};
  std::string seen_auth;
  std::string seen_model;
  std::mutex seen_mutex;
  server.Post("/ok", [&](const httplib::Request& req, httplib::Response& res) {
    ++calls;
    {
      std::lock_guard lock(seen_mutex);
      seen_auth = req.get_header_value("Authorization");
      seen_model = nlohmann::json::parse(req.body).value("model", "");
    }
    if (failures_left-- > 0) {
      res.status = 503;
      return;
    }
    nlohmann::json reply;
    reply["choices"] = {{{"message", {{"content", R"({"plan": {"molecule_expert": true,
      "arrow_expert": false, "text_expert": true, "reaction_expert": true}})"}}}}};
    res.set_content(reply.dump(), "application/json");
  });
  server.Post("/bad", [&](const httplib::Request&, httplib::Response& res) {
    ++calls;
    res.status = 400;
  });
  const int port = server.bind_to_any_port("127.0.0.1");
  REQUIRE(port > 0);
  std::thread thread([&] { server.listen_after_bind(); });
  server.wait_until_ready();

  auto prompts = std::make_shared<PromptLibrary>(PromptLibrary::load_dir(kData / "prompts"));
  ::setenv("RXN_TEST_KEY", "sk-test", 1);
  LiveBackendConfig config;
  config.model = "test-model";
  config.api_key_env = "RXN_TEST_KEY";
  config.backoff = std::chrono::milliseconds(1);
  config.timeout = std::chrono::seconds(5);
  const PromptVars vars{{"query", "Parse all reactions in this diagram."}};

  config.endpoint = "http://127.0.0.1:" + std::to_string(port) + "/ok";
  LiveAgentClient ok(prompts, config);
  const std::string reply = ok.request(AgentRole::kPlanner, vars);
  CHECK(nlohmann::json::parse(reply)["plan"]["text_expert"] == true);
  CHECK(calls == 2);
  {
    std::lock_guard lock(seen_mutex);
    CHECK(seen_auth == "Bearer sk-test");
    CHECK(seen_model == "test-model");
  }
  CHECK_FALSE(ok.log().empty());

  calls = 0;
  config.endpoint = "http://127.0.0.1:" + std::to_string(port) + "/bad";
  LiveAgentClient bad(prompts, config);
  CHECK_THROWS_AS(bad.request(AgentRole::kPlanner, vars), BackendUnavailable);
  CHECK(calls == 1);

  // Unbound variable: no request leaves the process.
  calls = 0;
  CHECK_THROWS_AS(bad.request(AgentRole::kPlanner, {}), PreconditionError);
  CHECK(calls == 0);

  server.stop();
  thread.join();
  ::unsetenv("RXN_TEST_KEY");

  // Nothing listening: retries run out.
  config.endpoint = "http://127.0.0.1:" + std::to_string(port) + "/ok";
  config.max_retries = 1;
  config.timeout = std::chrono::seconds(1);
  LiveAgentClient gone(prompts, config);
  CHECK_THROWS_AS(gone.request(AgentRole::kPlanner, vars), BackendUnavailable);
}
