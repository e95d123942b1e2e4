// Reactions in two forms: entity-id based (what reasoning produces) and
// region based (the reaction output file and the combiner agent's wire
// format, which carry only labels and bboxes).

#ifndef RXN_REACTION_H_
#define RXN_REACTION_H_

#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "rxn/chem.h"
#include "rxn/document.h"
#include "rxn/geometry.h"

namespace rxn {

enum class ConservationStatus { kUnknown, kBalanced, kUnbalanced };
std::string_view to_string(ConservationStatus status);

struct Reaction {
  std::vector<std::string> reactants;
  std::vector<std::string> products;
  std::vector<std::string> conditions;
  std::vector<std::string> arrows;
  double score = 0.0;
  ConservationStatus conservation = ConservationStatus::kUnknown;
  std::optional<chem::ConservationResidual> residual;
  bool molecule_in_conditions = false;

  bool same_members(const Reaction& other) const {
    return reactants == other.reactants && products == other.products &&
           conditions == other.conditions && arrows == other.arrows;
  }
};

struct LabeledRegion {
  EntityKind kind = EntityKind::kMolecule;
  geom::Region region;

  bool operator==(const LabeledRegion&) const = default;
};

struct ReactionRecord {
  std::vector<LabeledRegion> reactants;
  std::vector<LabeledRegion> products;
  std::vector<LabeledRegion> conditions;
  std::vector<LabeledRegion> arrows;
  std::optional<double> confidence;  // optional combiner-provided score

  bool operator==(const ReactionRecord&) const = default;
};

// Strict parse of a reaction JSON array ("reactants", "products",
// "conditions", "arrow" lists of {"label", "bbox"}). Throws
// ResponseFormatError on malformed JSON or shape, ConstraintError when a
// reaction has no reactants or no products. Markdown code fences around the
// array are tolerated.
std::vector<ReactionRecord> parse_reaction_records(std::string_view raw);

// Writes records in the reaction output layout: four-space indents, one
// entity object per line, single-entity lists inline.
std::string write_reaction_records(std::span<const ReactionRecord> records);

// Default IoU needed to resolve an echoed bbox to a document entity.
inline constexpr double kResolutionIou = 0.9;

// Maps each record entity to the document entity with the best IoU (at
// least min_iou, same kind preferred). Throws ResolutionError otherwise.
Reaction resolve_record(const ReactionRecord& record, const ReactionDocument& doc,
                        double min_iou = kResolutionIou);

// parse_reaction_records followed by resolve_record on every reaction.
std::vector<Reaction> parse_combiner_response(std::string_view raw,
                                              const ReactionDocument& doc,
                                              double min_iou = kResolutionIou);

// Region form of an id-based reaction. Throws ReferenceError on dangling ids.
ReactionRecord to_record(const Reaction& reaction, const ReactionDocument& doc);
std::vector<ReactionRecord> to_records(std::span<const Reaction> reactions,
                                       const ReactionDocument& doc);

}  // namespace rxn

#endif  // RXN_REACTION_H_
