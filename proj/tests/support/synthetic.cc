#include "synthetic.h"

#include <algorithm>
#include <array>
#include <cmath>
#include <fstream>
#include <map>
#include <random>
#include <set>
#include <sstream>

#include <json.hpp>

#include "rxn/errors.h"

namespace rxn::testing {
namespace {

using nlohmann::ordered_json;

const char* const kSmiles[] = {
    "CCO",        "CC(=O)O",    "c1ccccc1",   "CC(C)=O",  "OC(=O)c1ccccc1", "CCN",
    "C1CCCCC1",   "ClCCl",      "CC#N",       "COC",      "c1ccncc1",       "CC(=O)OC",
    "NCC(=O)O",   "CCCCBr",     "O=C1CCCCC1", "Cc1ccccc1", "CCOC(C)=O",     "OCCO",
    "CC(C)O",     "c1ccc2ccccc2c1"};

const char* const kConditions[] = {
    "NaH, THF, 0 °C", "Pd/C, H2",        "LiAlH4, Et2O",  "K2CO3, DMF, 80 °C",
    "TFA, DCM, rt",   "mCPBA, DCM",      "NaBH4, MeOH",   "FeCl3 (10 mol%)",
    "reflux, 12 h",   "Et3N, DMAP, DCM", "TBAF, THF",     "Boc2O, Et3N"};

class Builder {
 public:
  explicit Builder(std::uint64_t seed) : rng_(seed) {}

  int jitter(int span) { return std::uniform_int_distribution<int>(-span, span)(rng_); }
  bool coin() { return std::uniform_int_distribution<int>(0, 1)(rng_) == 1; }

  std::string smiles() {
    // Each molecule of a document is distinct, so no two look alike to the
    // fingerprint channel by accident.
    std::vector<std::size_t> free;
    for (std::size_t i = 0; i < std::size(kSmiles); ++i) {
      if (!used_smiles_.count(i)) free.push_back(i);
    }
    const std::size_t pick =
        free[std::uniform_int_distribution<std::size_t>(0, free.size() - 1)(rng_)];
    used_smiles_.insert(pick);
    return kSmiles[pick];
  }

  std::string condition() {
    return kConditions[std::uniform_int_distribution<std::size_t>(0, std::size(kConditions) - 1)(
        rng_)];
  }

  std::string molecule(double x, double y) {
    const double w = 150 + jitter(10);
    const double h = 110 + jitter(8);
    return add("m", EntityKind::kMolecule, {x, y, x + w, y + h}, {{"smiles", smiles()}});
  }

  std::string text(double x1, double y1, double x2, double y2) {
    return add("t", EntityKind::kText, {x1, y1, x2, y2}, {{"text", condition()}});
  }

  std::string identifier(double x1, double y1, double x2, double y2, const std::string& label,
                         const std::string& molecule) {
    return add("i", EntityKind::kIdentifier, {x1, y1, x2, y2},
               {{"text", label}, {"molecule", molecule}});
  }

  // Quad vertices run so that the tail is the midpoint of v4-v1 and the head
  // the midpoint of v2-v3.
  std::string arrow(double x1, double y1, double x2, double y2) {
    const double len = std::hypot(x2 - x1, y2 - y1);
    const double nx = -(y2 - y1) / len * 10;
    const double ny = (x2 - x1) / len * 10;
    return add("a", EntityKind::kArrow,
               {x1 + nx, y1 + ny, x2 + nx, y2 + ny, x2 - nx, y2 - ny, x1 - nx, y1 - ny},
               {{"direction", "forward"}});
  }

  double right(const std::string& id) const { return box_.at(id)[2]; }
  double bottom(const std::string& id) const { return box_.at(id)[3]; }
  double center_y(const std::string& id) const { return (box_.at(id)[1] + box_.at(id)[3]) / 2; }
  double center_x(const std::string& id) const { return (box_.at(id)[0] + box_.at(id)[2]) / 2; }

  ReactionRecord reaction(const std::vector<std::string>& reactants,
                          const std::vector<std::string>& conditions, const std::string& arrow,
                          const std::vector<std::string>& products) const {
    ReactionRecord r;
    for (const auto& id : reactants) r.reactants.push_back(regions_.at(id));
    for (const auto& id : conditions) r.conditions.push_back(regions_.at(id));
    r.arrows.push_back(regions_.at(arrow));
    for (const auto& id : products) r.products.push_back(regions_.at(id));
    return r;
  }

  std::string detections(const std::string& id, LayoutClass layout) const {
    double w = 0;
    double h = 0;
    for (const auto& [_, b] : box_) {
      w = std::max(w, b[2]);
      h = std::max(h, b[3]);
    }
    ordered_json root;
    root["id"] = id;
    root["width"] = std::ceil(w + 20);
    root["height"] = std::ceil(h + 20);
    root["layout"] = std::string(to_string(layout));
    root["entities"] = entities_;
    return root.dump(2) + "\n";
  }

 private:
  std::string add(const char* prefix, EntityKind kind, std::vector<double> coords,
                  ordered_json extra) {
    const std::string id = prefix + std::to_string(++count_[prefix]);
    ordered_json e;
    e["id"] = id;
    e["label"] = std::string(to_string(kind));
    e["bbox"] = coords;
    for (auto& [k, v] : extra.items()) e[k] = v;
    entities_.push_back(e);
    geom::Region region = coords.size() == 4
                              ? geom::Region(geom::AxisBox(coords[0], coords[1], coords[2], coords[3]))
                              : geom::Region(geom::OrientedQuad::from_flat(coords));
    const geom::AxisBox b = geom::bounding_box(region);
    box_[id] = {b.x_min(), b.y_min(), b.x_max(), b.y_max()};
    regions_[id] = LabeledRegion{kind, region};
    return id;
  }

  std::mt19937_64 rng_;
  std::set<std::size_t> used_smiles_;
  std::map<std::string, int> count_;
  ordered_json entities_ = ordered_json::array();
  std::map<std::string, std::array<double, 4>> box_;
  std::map<std::string, LabeledRegion> regions_;
};

// One drawn reaction and the id of its product, so the next step can start
// from it.
struct Step {
  ReactionRecord record;
  std::string product;
};

Step horizontal_step(Builder& b, const std::vector<std::string>& reactants, double y_mid) {
  const double x = b.right(reactants.back()) + 20;
  const std::string arrow = b.arrow(x, y_mid, x + 180, y_mid);
  std::vector<std::string> conditions = {b.text(x + 10, y_mid - 55, x + 170, y_mid - 18)};
  if (b.coin()) conditions.push_back(b.text(x + 10, y_mid + 18, x + 170, y_mid + 55));
  const std::string product = b.molecule(x + 200, y_mid - 55 + b.jitter(5));
  return {b.reaction(reactants, conditions, arrow, {product}), product};
}

Step vertical_step(Builder& b, const std::string& reactant) {
  const double x = b.center_x(reactant);
  const double y = b.bottom(reactant) + 20;
  const std::string arrow = b.arrow(x, y, x, y + 150);
  std::vector<std::string> conditions = {b.text(x + 20, y + 50, x + 180, y + 90)};
  const std::string product = b.molecule(x - 75 + b.jitter(5), y + 170);
  return {b.reaction({reactant}, conditions, arrow, {product}), product};
}

std::vector<std::string> reactant_row(Builder& b, double x, double y) {
  std::vector<std::string> ids = {b.molecule(x, y)};
  if (b.coin()) ids.push_back(b.molecule(b.right(ids[0]) + 30, y + b.jitter(5)));
  return ids;
}

SyntheticDoc make_doc(std::size_t index, LayoutClass layout, std::uint64_t seed) {
  Builder b(seed);
  SyntheticDoc doc;
  doc.id = "syn" + std::string(index < 10 ? "0" : "") + std::to_string(index);
  doc.layout = layout;
  switch (layout) {
    case LayoutClass::kSingleLine: {
      const auto reactants = reactant_row(b, 20, 20);
      b.identifier(b.center_x(reactants[0]) - 20, b.bottom(reactants[0]) + 10,
                   b.center_x(reactants[0]) + 20, b.bottom(reactants[0]) + 40, "1a", reactants[0]);
      doc.truth.push_back(horizontal_step(b, reactants, b.center_y(reactants[0])).record);
      break;
    }
    case LayoutClass::kMultipleLine: {
      for (double y : {20.0, 240.0}) {
        const auto reactants = reactant_row(b, 20, y);
        doc.truth.push_back(horizontal_step(b, reactants, b.center_y(reactants[0])).record);
      }
      break;
    }
    case LayoutClass::kTree: {
      const std::string root = b.molecule(20, 20);
      doc.truth.push_back(horizontal_step(b, {root}, b.center_y(root)).record);
      doc.truth.push_back(vertical_step(b, root).record);
      break;
    }
    case LayoutClass::kGraph: {
      const std::string first = b.molecule(20, 20);
      const Step a = horizontal_step(b, {first}, b.center_y(first));
      const Step c = horizontal_step(b, {a.product}, b.center_y(first));
      doc.truth.push_back(a.record);
      doc.truth.push_back(c.record);
      doc.truth.push_back(vertical_step(b, c.product).record);
      break;
    }
  }
  doc.detections = b.detections(doc.id, layout);
  return doc;
}

}  // namespace

std::vector<SyntheticDoc> synthetic_batch(std::size_t n, std::uint64_t seed) {
  constexpr LayoutClass kLayouts[] = {LayoutClass::kSingleLine, LayoutClass::kMultipleLine,
                                      LayoutClass::kTree, LayoutClass::kGraph};
  std::vector<SyntheticDoc> docs;
  for (std::size_t i = 0; i < n; ++i) {
    docs.push_back(make_doc(i, kLayouts[i % 4], seed * 1000003 + i));
  }
  return docs;
}

void write_combiner_fixtures(const ReactionDocument& doc, std::span<const ReactionRecord> truth,
                             const PromptLibrary& prompts, const ReasoningConfig& config,
                             const std::filesystem::path& fixtures_dir) {
  std::vector<Reaction> resolved;
  for (const ReactionRecord& r : truth) resolved.push_back(resolve_record(r, doc));
  for (const auto& cluster : cluster_entities(doc, config)) {
    if (cluster.size() < 2) continue;
    std::set<std::string> members;
    for (std::size_t i : cluster) members.insert(doc.entities[i].id);
    std::vector<ReactionRecord> answer;
    for (std::size_t k = 0; k < truth.size(); ++k) {
      const Reaction& r = resolved[k];
      bool inside = true;
      for (const auto* ids : {&r.reactants, &r.products, &r.conditions, &r.arrows}) {
        for (const std::string& id : *ids) inside = inside && members.count(id) > 0;
      }
      if (inside) answer.push_back(truth[k]);
    }
    const std::string prompt = prompts.render(AgentRole::kReactionExpert,
                                              {{"graph", render_cluster_graph(doc, cluster)}});
    const std::string key = MockAgentClient::fixture_key(AgentRole::kReactionExpert, prompt, "");
    const auto dir = fixtures_dir / std::string(to_string(AgentRole::kReactionExpert));
    std::filesystem::create_directories(dir);
    write_text(dir / (key + ".txt"), write_reaction_records(answer));
  }
}

void write_batch(const std::filesystem::path& root, std::span<const SyntheticDoc> docs,
                 const PromptLibrary& prompts, const ReasoningConfig& config) {
  std::filesystem::create_directories(root / "detections");
  std::filesystem::create_directories(root / "truth");
  ordered_json manifest;
  manifest["documents"] = ordered_json::array();
  for (const SyntheticDoc& d : docs) {
    write_text(root / "detections" / (d.id + ".json"), d.detections);
    write_text(root / "truth" / (d.id + ".json"), write_reaction_records(d.truth));
    manifest["documents"].push_back({{"id", d.id}, {"layout", std::string(to_string(d.layout))}});
    LoadOptions opts;
    opts.id = d.id;
    write_combiner_fixtures(load_document(d.detections, opts), d.truth, prompts, config,
                            root / "fixtures");
  }
  write_text(root / "truth" / "manifest.json", manifest.dump(2) + "\n");
}

std::string read_text(const std::filesystem::path& p) {
  std::ifstream in(p, std::ios::binary);
  if (!in) throw PreconditionError("cannot read " + p.string());
  std::stringstream buf;
  buf << in.rdbuf();
  return buf.str();
}

void write_text(const std::filesystem::path& p, std::string_view text) {
  std::ofstream out(p, std::ios::binary);
  out << text;
  if (!out) throw PreconditionError("cannot write " + p.string());
}

}  // namespace rxn::testing
