#include "rxn/document.h"

#include <algorithm>
#include <cmath>
#include <set>
#include <tuple>

#include "json_util.h"
#include "rxn/errors.h"

namespace rxn {
namespace {

using detail::json;
using detail::ordered_json;

constexpr std::array<std::string_view, 4> kKindNames = {"molecule", "arrow", "text",
                                                        "identifier"};
constexpr std::array<std::string_view, 3> kDirectionNames = {"forward", "reversible",
                                                             "resonance"};
constexpr std::array<std::string_view, 4> kLayoutNames = {"single_line", "multiple_line",
                                                          "tree", "graph"};

template <typename Enum, std::size_t N>
std::optional<Enum> lookup(const std::array<std::string_view, N>& names,
                           std::string_view s) {
  for (std::size_t i = 0; i < N; ++i) {
    if (names[i] == s) return static_cast<Enum>(i);
  }
  return std::nullopt;
}

const json& require(const json& obj, const char* key, const std::string& pointer) {
  auto it = obj.find(key);
  if (it == obj.end()) throw SchemaError(pointer, std::string("missing key \"") + key + "\"");
  return *it;
}

std::optional<std::string> optional_string(const json& obj, const char* key,
                                           const std::string& pointer) {
  auto it = obj.find(key);
  if (it == obj.end() || it->is_null()) return std::nullopt;
  if (!it->is_string()) {
    throw SchemaError(pointer + "/" + key, "expected a string");
  }
  return it->get<std::string>();
}

geom::Point point_from_json(const json& j, const std::string& pointer) {
  if (!j.is_array() || j.size() != 2 || !j[0].is_number() || !j[1].is_number()) {
    throw SchemaError(pointer, "expected [x, y]");
  }
  return {j[0].get<double>(), j[1].get<double>()};
}

geom::Point clamp_point(geom::Point p, const geom::AxisBox& b) {
  return {std::clamp(p.x, b.x_min(), b.x_max()), std::clamp(p.y, b.y_min(), b.y_max())};
}

// Returns the region clamped into the diagram, or nullopt when already inside.
std::optional<geom::Region> clamp_region(const geom::Region& r, const geom::AxisBox& b) {
  if (const auto* box = std::get_if<geom::AxisBox>(&r)) {
    if (b.contains({box->x_min(), box->y_min()}) && b.contains({box->x_max(), box->y_max()})) {
      return std::nullopt;
    }
    const geom::Point lo = clamp_point({box->x_min(), box->y_min()}, b);
    const geom::Point hi = clamp_point({box->x_max(), box->y_max()}, b);
    return geom::AxisBox(lo.x, lo.y, hi.x, hi.y);
  }
  const auto& quad = std::get<geom::OrientedQuad>(r);
  bool inside = true;
  std::array<geom::Point, 4> v = quad.vertices();
  for (geom::Point& p : v) {
    inside = inside && b.contains(p);
    p = clamp_point(p, b);
  }
  if (inside) return std::nullopt;
  return geom::OrientedQuad(v);
}

geom::OrientedQuad quad_from_box(const geom::AxisBox& b) {
  // v1 -> v2 runs left to right along the bottom edge, matching the arrow
  // anchor convention.
  return geom::OrientedQuad(std::array<geom::Point, 4>{
      geom::Point{b.x_min(), b.y_max()}, geom::Point{b.x_max(), b.y_max()},
      geom::Point{b.x_max(), b.y_min()}, geom::Point{b.x_min(), b.y_min()}});
}

Entity parse_entity(const json& e, const std::string& pointer,
                    const geom::AxisBox& bounds, const LoadOptions& options,
                    std::vector<std::string>& warnings) {
  if (!e.is_object()) throw SchemaError(pointer, "entity must be an object");
  Entity entity;
  const json& id = require(e, "id", pointer);
  if (!id.is_string() || id.get<std::string>().empty()) {
    throw SchemaError(pointer + "/id", "id must be a non-empty string");
  }
  entity.id = id.get<std::string>();

  const json& label = require(e, "label", pointer);
  if (!label.is_string()) throw SchemaError(pointer + "/label", "label must be a string");
  auto kind = parse_entity_kind(label.get<std::string>());
  if (!kind) {
    throw SchemaError(pointer + "/label", "unknown label \"" + label.get<std::string>() + "\"");
  }
  entity.kind = *kind;

  geom::Region region = detail::region_from_json(require(e, "bbox", pointer), pointer + "/bbox");
  if (entity.kind == EntityKind::kArrow && !geom::is_quad(region)) {
    warnings.push_back(entity.id + ": arrow given as axis box, converted to quad");
    region = quad_from_box(std::get<geom::AxisBox>(region));
  } else if (entity.kind != EntityKind::kArrow && geom::is_quad(region)) {
    warnings.push_back(entity.id + ": non-arrow given as quad, using its bounding box");
    region = geom::bounding_box(region);
  }
  try {
    if (auto clamped = clamp_region(region, bounds)) {
      warnings.push_back(entity.id + ": region clamped to diagram bounds");
      region = *clamped;
    }
  } catch (const GeometryError& err) {
    throw SchemaError(pointer + "/bbox", std::string("region outside diagram: ") + err.what());
  }
  entity.region = region;

  switch (entity.kind) {
    case EntityKind::kMolecule: {
      MoleculePayload payload;
      payload.smiles = optional_string(e, "smiles", pointer);
      if (payload.smiles) {
        try {
          payload.molecule = chem::parse_smiles(*payload.smiles);
        } catch (const Error& err) {
          if (options.strict_smiles) {
            throw PayloadError(pointer + "/smiles: " + err.what());
          }
          payload.parse_error = err.what();
          warnings.push_back(entity.id + ": unparsed SMILES (" + err.what() + ")");
        }
      }
      entity.payload = std::move(payload);
      break;
    }
    case EntityKind::kArrow: {
      ArrowPayload payload;
      if (auto dir = optional_string(e, "direction", pointer)) {
        auto parsed = parse_arrow_direction(*dir);
        if (!parsed) throw SchemaError(pointer + "/direction", "unknown direction \"" + *dir + "\"");
        payload.direction = *parsed;
      }
      const auto& quad = std::get<geom::OrientedQuad>(entity.region);
      std::tie(payload.tail, payload.head) = default_arrow_anchors(quad);
      if (auto it = e.find("tail"); it != e.end()) {
        payload.tail = point_from_json(*it, pointer + "/tail");
      }
      if (auto it = e.find("head"); it != e.end()) {
        payload.head = point_from_json(*it, pointer + "/head");
      }
      entity.payload = payload;
      break;
    }
    case EntityKind::kText: {
      TextPayload payload;
      payload.raw = optional_string(e, "text", pointer).value_or("");
      static const Lexicon kEmpty;
      payload.tokens = normalize_text(payload.raw, options.lexicon ? *options.lexicon : kEmpty);
      entity.payload = std::move(payload);
      break;
    }
    case EntityKind::kIdentifier: {
      IdentifierPayload payload;
      payload.label = optional_string(e, "text", pointer).value_or("");
      payload.molecule_ref = optional_string(e, "molecule", pointer);
      entity.payload = std::move(payload);
      break;
    }
  }
  return entity;
}

}  // namespace

std::string_view to_string(EntityKind kind) { return kKindNames[static_cast<int>(kind)]; }
std::string_view to_string(ArrowDirection dir) {
  return kDirectionNames[static_cast<int>(dir)];
}
std::string_view to_string(LayoutClass layout) {
  return kLayoutNames[static_cast<int>(layout)];
}
std::optional<EntityKind> parse_entity_kind(std::string_view s) {
  return lookup<EntityKind>(kKindNames, s);
}
std::optional<ArrowDirection> parse_arrow_direction(std::string_view s) {
  return lookup<ArrowDirection>(kDirectionNames, s);
}
std::optional<LayoutClass> parse_layout_class(std::string_view s) {
  return lookup<LayoutClass>(kLayoutNames, s);
}

std::pair<geom::Point, geom::Point> default_arrow_anchors(const geom::OrientedQuad& quad) {
  const auto& v = quad.vertices();
  return {0.5 * (v[3] + v[0]), 0.5 * (v[1] + v[2])};
}

bool Entity::same_as(const Entity& other) const {
  if (id != other.id || kind != other.kind || region != other.region ||
      payload.index() != other.payload.index()) {
    return false;
  }
  if (const auto* m = molecule()) {
    const auto* o = other.molecule();
    return m->smiles == o->smiles && m->parsed() == o->parsed();
  }
  if (const auto* a = arrow()) {
    const auto* o = other.arrow();
    return a->direction == o->direction && a->tail == o->tail && a->head == o->head;
  }
  if (const auto* t = text()) {
    const auto* o = other.text();
    return t->raw == o->raw && t->tokens == o->tokens;
  }
  const auto* i = identifier();
  const auto* o = other.identifier();
  return i->label == o->label && i->molecule_ref == o->molecule_ref;
}

const Entity* ReactionDocument::find(std::string_view entity_id) const {
  for (const Entity& e : entities) {
    if (e.id == entity_id) return &e;
  }
  return nullptr;
}

std::optional<std::size_t> ReactionDocument::index_of(std::string_view entity_id) const {
  for (std::size_t i = 0; i < entities.size(); ++i) {
    if (entities[i].id == entity_id) return i;
  }
  return std::nullopt;
}

bool ReactionDocument::same_as(const ReactionDocument& other) const {
  if (id != other.id || image_ref != other.image_ref ||
      diagram_bounds != other.diagram_bounds || layout != other.layout ||
      entities.size() != other.entities.size()) {
    return false;
  }
  for (std::size_t i = 0; i < entities.size(); ++i) {
    if (!entities[i].same_as(other.entities[i])) return false;
  }
  return true;
}

ReactionDocument load_document(std::string_view bytes, const LoadOptions& options) {
  json root;
  try {
    root = json::parse(bytes);
  } catch (const json::exception& e) {
    throw SchemaError("", std::string("not valid JSON: ") + e.what());
  }
  if (!root.is_object()) throw SchemaError("", "detection file must be a JSON object");

  ReactionDocument doc;
  doc.id = optional_string(root, "id", "").value_or(options.id);
  doc.image_ref = optional_string(root, "image", "");
  const json& width = require(root, "width", "");
  const json& height = require(root, "height", "");
  if (!width.is_number() || !(width.get<double>() > 0)) {
    throw SchemaError("/width", "width must be a positive number");
  }
  if (!height.is_number() || !(height.get<double>() > 0)) {
    throw SchemaError("/height", "height must be a positive number");
  }
  doc.diagram_bounds = geom::AxisBox(0, 0, width.get<double>(), height.get<double>());
  if (auto layout = optional_string(root, "layout", "")) {
    doc.layout = parse_layout_class(*layout);
    if (!doc.layout) throw SchemaError("/layout", "unknown layout \"" + *layout + "\"");
  }

  const json& entities = require(root, "entities", "");
  if (!entities.is_array()) throw SchemaError("/entities", "entities must be an array");
  std::set<std::string> ids;
  for (std::size_t i = 0; i < entities.size(); ++i) {
    const std::string pointer = "/entities/" + std::to_string(i);
    Entity entity =
        parse_entity(entities[i], pointer, doc.diagram_bounds, options, doc.warnings);
    if (!ids.insert(entity.id).second) {
      throw SchemaError(pointer + "/id", "duplicate entity id \"" + entity.id + "\"");
    }
    doc.entities.push_back(std::move(entity));
  }

  for (std::size_t i = 0; i < doc.entities.size(); ++i) {
    const auto* ident = doc.entities[i].identifier();
    if (!ident || !ident->molecule_ref) continue;
    const Entity* target = doc.find(*ident->molecule_ref);
    if (!target || target->kind != EntityKind::kMolecule) {
      throw SchemaError("/entities/" + std::to_string(i) + "/molecule",
                        "identifier refers to unknown molecule \"" + *ident->molecule_ref + "\"");
    }
  }

  std::stable_sort(doc.entities.begin(), doc.entities.end(),
                   [](const Entity& a, const Entity& b) {
                     const geom::Point ca = geom::centroid(a.region);
                     const geom::Point cb = geom::centroid(b.region);
                     return std::tie(ca.y, ca.x, a.id) < std::tie(cb.y, cb.x, b.id);
                   });
  return doc;
}

std::string serialize_document(const ReactionDocument& doc) {
  ordered_json root;
  if (!doc.id.empty()) root["id"] = doc.id;
  if (doc.image_ref) root["image"] = *doc.image_ref;
  root["width"] = detail::number_json(doc.diagram_bounds.x_max());
  root["height"] = detail::number_json(doc.diagram_bounds.y_max());
  if (doc.layout) root["layout"] = std::string(to_string(*doc.layout));
  ordered_json entities = ordered_json::array();
  for (const Entity& e : doc.entities) {
    ordered_json j;
    j["id"] = e.id;
    j["label"] = std::string(to_string(e.kind));
    j["bbox"] = detail::region_to_json(e.region);
    if (const auto* m = e.molecule()) {
      if (m->smiles) j["smiles"] = *m->smiles;
    } else if (const auto* a = e.arrow()) {
      j["direction"] = std::string(to_string(a->direction));
      j["tail"] = {detail::number_json(a->tail.x), detail::number_json(a->tail.y)};
      j["head"] = {detail::number_json(a->head.x), detail::number_json(a->head.y)};
    } else if (const auto* t = e.text()) {
      j["text"] = t->raw;
    } else if (const auto* i = e.identifier()) {
      j["text"] = i->label;
      if (i->molecule_ref) j["molecule"] = *i->molecule_ref;
    }
    entities.push_back(std::move(j));
  }
  root["entities"] = std::move(entities);
  return root.dump(2) + "\n";
}

}  // namespace rxn
