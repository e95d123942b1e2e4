// The unified entity set produced by perception: every detected molecule,
// arrow, text block and identifier with its region and semantic payload.

#ifndef RXN_DOCUMENT_H_
#define RXN_DOCUMENT_H_

#include <optional>
#include <string>
#include <string_view>
#include <variant>
#include <vector>

#include "rxn/chem.h"
#include "rxn/geometry.h"
#include "rxn/text_normalize.h"

namespace rxn {

enum class EntityKind { kMolecule, kArrow, kText, kIdentifier };
inline constexpr int kNumEntityKinds = 4;

enum class ArrowDirection { kForward, kReversible, kResonance };
inline constexpr int kNumArrowDirections = 3;

enum class LayoutClass { kSingleLine, kMultipleLine, kTree, kGraph };

std::string_view to_string(EntityKind kind);
std::string_view to_string(ArrowDirection dir);
std::string_view to_string(LayoutClass layout);
std::optional<EntityKind> parse_entity_kind(std::string_view s);
std::optional<ArrowDirection> parse_arrow_direction(std::string_view s);
std::optional<LayoutClass> parse_layout_class(std::string_view s);

struct MoleculePayload {
  std::optional<std::string> smiles;
  std::optional<chem::Molecule> molecule;  // set iff smiles parsed
  std::optional<std::string> parse_error;

  bool parsed() const { return molecule.has_value(); }
};

struct ArrowPayload {
  ArrowDirection direction = ArrowDirection::kForward;
  geom::Point tail;
  geom::Point head;
};

struct TextPayload {
  std::string raw;
  std::vector<NormalizedToken> tokens;
};

struct IdentifierPayload {
  std::string label;
  std::optional<std::string> molecule_ref;  // id of a molecule entity
};

using Payload =
    std::variant<MoleculePayload, ArrowPayload, TextPayload, IdentifierPayload>;

struct Entity {
  std::string id;
  geom::Region region;
  EntityKind kind = EntityKind::kMolecule;
  Payload payload;

  const MoleculePayload* molecule() const { return std::get_if<MoleculePayload>(&payload); }
  const ArrowPayload* arrow() const { return std::get_if<ArrowPayload>(&payload); }
  const TextPayload* text() const { return std::get_if<TextPayload>(&payload); }
  const IdentifierPayload* identifier() const {
    return std::get_if<IdentifierPayload>(&payload);
  }

  // Field-wise comparison; molecules compare by SMILES text.
  bool same_as(const Entity& other) const;
};

struct ReactionDocument {
  std::string id;
  std::optional<std::string> image_ref;
  geom::AxisBox diagram_bounds;
  std::vector<Entity> entities;  // sorted by (y, x) of region centroid
  std::optional<LayoutClass> layout;
  std::vector<std::string> warnings;

  const Entity* find(std::string_view entity_id) const;
  std::optional<std::size_t> index_of(std::string_view entity_id) const;
  bool same_as(const ReactionDocument& other) const;
};

struct LoadOptions {
  std::string id;                     // used when the file has no "id"
  const Lexicon* lexicon = nullptr;   // text normalization; none = all raw
  bool strict_smiles = false;         // throw PayloadError instead of flagging
};

// Parses a detection file. Throws SchemaError (with a JSON pointer) for
// malformed input; unparseable SMILES are flagged on the entity unless
// options.strict_smiles is set.
ReactionDocument load_document(std::string_view bytes, const LoadOptions& options = {});

// Detection-file JSON for a document; load(serialize(doc)) reproduces doc.
std::string serialize_document(const ReactionDocument& doc);

// Tail/head convention for OBBs without explicit anchors: the detector's
// first edge runs along the shaft, so the tail is the midpoint of v4-v1 and
// the head the midpoint of v2-v3.
std::pair<geom::Point, geom::Point> default_arrow_anchors(const geom::OrientedQuad& quad);

}  // namespace rxn

#endif  // RXN_DOCUMENT_H_
