#include <array>
#include <sstream>

#include "json_util.h"
#include "rxn/errors.h"
#include "rxn/reaction.h"

namespace rxn {
namespace {

using detail::json;

constexpr std::array<const char*, 4> kRoleKeys = {"reactants", "products", "conditions",
                                                  "arrow"};

std::vector<LabeledRegion> parse_role(const json& reaction, const char* key,
                                      const std::string& pointer) {
  auto it = reaction.find(key);
  if (it == reaction.end()) {
    throw ResponseFormatError(pointer + ": missing field \"" + key + "\"");
  }
  if (!it->is_array()) throw ResponseFormatError(pointer + "/" + key + ": expected an array");
  std::vector<LabeledRegion> out;
  for (std::size_t i = 0; i < it->size(); ++i) {
    const std::string at = pointer + "/" + key + "/" + std::to_string(i);
    const json& item = (*it)[i];
    if (!item.is_object()) throw ResponseFormatError(at + ": expected an object");
    auto label = item.find("label");
    if (label == item.end() || !label->is_string()) {
      throw ResponseFormatError(at + ": missing string \"label\"");
    }
    auto kind = parse_entity_kind(label->get<std::string>());
    if (!kind) throw ResponseFormatError(at + ": unknown label \"" + label->get<std::string>() + "\"");
    auto bbox = item.find("bbox");
    if (bbox == item.end()) throw ResponseFormatError(at + ": missing \"bbox\"");
    try {
      out.push_back({*kind, detail::region_from_json(*bbox, at + "/bbox")});
    } catch (const SchemaError& e) {
      throw ResponseFormatError(e.what());
    }
  }
  return out;
}

void write_role(std::ostringstream& out, const char* key,
                const std::vector<LabeledRegion>& items, bool last) {
  auto entity = [](const LabeledRegion& r) {
    std::string bbox;
    for (const auto& v : detail::region_to_json(r.region)) {
      bbox += bbox.empty() ? "[" : ", ";
      bbox += v.dump();
    }
    return "{\"label\": \"" + std::string(to_string(r.kind)) + "\", \"bbox\": " + bbox + "]}";
  };
  out << "        \"" << key << "\": ";
  if (items.empty()) {
    out << "[]";
  } else if (items.size() == 1) {
    out << "[" << entity(items[0]) << "]";
  } else {
    out << "[\n";
    for (std::size_t i = 0; i < items.size(); ++i) {
      out << "            " << entity(items[i]) << (i + 1 < items.size() ? ",\n" : "\n");
    }
    out << "        ]";
  }
  out << (last ? "\n" : ",\n");
}

}  // namespace

std::string_view to_string(ConservationStatus status) {
  switch (status) {
    case ConservationStatus::kBalanced:
      return "balanced";
    case ConservationStatus::kUnbalanced:
      return "unbalanced";
    case ConservationStatus::kUnknown:
      break;
  }
  return "unknown";
}

std::vector<ReactionRecord> parse_reaction_records(std::string_view raw) {
  json root;
  try {
    root = json::parse(detail::strip_code_fence(raw));
  } catch (const json::exception& e) {
    throw ResponseFormatError(std::string("response is not valid JSON: ") + e.what());
  }
  if (!root.is_array()) throw ResponseFormatError("response must be a JSON array");
  std::vector<ReactionRecord> records;
  for (std::size_t i = 0; i < root.size(); ++i) {
    const std::string pointer = "/" + std::to_string(i);
    const json& r = root[i];
    if (!r.is_object()) throw ResponseFormatError(pointer + ": reaction must be an object");
    ReactionRecord rec;
    rec.reactants = parse_role(r, "reactants", pointer);
    rec.products = parse_role(r, "products", pointer);
    rec.conditions = parse_role(r, "conditions", pointer);
    rec.arrows = parse_role(r, "arrow", pointer);
    for (const LabeledRegion& a : rec.arrows) {
      if (a.kind != EntityKind::kArrow) {
        throw ConstraintError(pointer + "/arrow: only arrow elements are allowed");
      }
    }
    if (rec.reactants.empty()) throw ConstraintError(pointer + ": reactants must not be empty");
    if (rec.products.empty()) throw ConstraintError(pointer + ": products must not be empty");
    if (auto c = r.find("confidence"); c != r.end()) {
      if (!c->is_number()) throw ResponseFormatError(pointer + "/confidence: expected a number");
      rec.confidence = c->get<double>();
    }
    records.push_back(std::move(rec));
  }
  return records;
}

std::string write_reaction_records(std::span<const ReactionRecord> records) {
  if (records.empty()) return "[]\n";
  std::ostringstream out;
  out << "[\n";
  for (std::size_t i = 0; i < records.size(); ++i) {
    const ReactionRecord& r = records[i];
    out << "    {\n";
    write_role(out, kRoleKeys[0], r.reactants, false);
    write_role(out, kRoleKeys[1], r.products, false);
    write_role(out, kRoleKeys[2], r.conditions, false);
    write_role(out, kRoleKeys[3], r.arrows, true);
    out << (i + 1 < records.size() ? "    },\n" : "    }\n");
  }
  out << "]\n";
  return out.str();
}

Reaction resolve_record(const ReactionRecord& record, const ReactionDocument& doc,
                        double min_iou) {
  auto resolve = [&](const LabeledRegion& item) -> std::string {
    const Entity* best = nullptr;
    double best_iou = -1.0;
    bool best_same_kind = false;
    for (const Entity& e : doc.entities) {
      const double v = geom::iou(item.region, e.region);
      if (v < min_iou) continue;
      const bool same_kind = e.kind == item.kind;
      if (best == nullptr || (same_kind && !best_same_kind) ||
          (same_kind == best_same_kind && v > best_iou)) {
        best = &e;
        best_iou = v;
        best_same_kind = same_kind;
      }
    }
    if (best == nullptr) {
      throw ResolutionError(std::string(to_string(item.kind)) + " bbox " +
                            detail::region_to_json(item.region).dump() +
                            " matches no entity at IoU >= " + std::to_string(min_iou));
    }
    return best->id;
  };
  Reaction out;
  for (const auto& r : record.reactants) out.reactants.push_back(resolve(r));
  for (const auto& r : record.products) out.products.push_back(resolve(r));
  for (const auto& r : record.conditions) out.conditions.push_back(resolve(r));
  for (const auto& r : record.arrows) out.arrows.push_back(resolve(r));
  out.score = record.confidence.value_or(1.0);
  return out;
}

std::vector<Reaction> parse_combiner_response(std::string_view raw,
                                              const ReactionDocument& doc, double min_iou) {
  std::vector<Reaction> out;
  for (const ReactionRecord& rec : parse_reaction_records(raw)) {
    out.push_back(resolve_record(rec, doc, min_iou));
  }
  return out;
}

ReactionRecord to_record(const Reaction& reaction, const ReactionDocument& doc) {
  auto convert = [&](const std::vector<std::string>& ids) {
    std::vector<LabeledRegion> out;
    for (const std::string& id : ids) {
      const Entity* e = doc.find(id);
      if (e == nullptr) throw ReferenceError("reaction refers to unknown entity \"" + id + "\"");
      out.push_back({e->kind, e->region});
    }
    return out;
  };
  ReactionRecord rec;
  rec.reactants = convert(reaction.reactants);
  rec.products = convert(reaction.products);
  rec.conditions = convert(reaction.conditions);
  rec.arrows = convert(reaction.arrows);
  return rec;
}

std::vector<ReactionRecord> to_records(std::span<const Reaction> reactions,
                                       const ReactionDocument& doc) {
  std::vector<ReactionRecord> out;
  out.reserve(reactions.size());
  for (const Reaction& r : reactions) out.push_back(to_record(r, doc));
  return out;
}

}  // namespace rxn
