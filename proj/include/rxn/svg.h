// SVG annotation of a parsed diagram: entity boxes colored by kind, arrows
// drawn as their quads with a head chevron, and one hue-coded group per
// reaction labelled with member roles. Output is byte-stable.

#ifndef RXN_SVG_H_
#define RXN_SVG_H_

#include <span>
#include <string>

#include "rxn/document.h"
#include "rxn/reaction.h"

namespace rxn {

// Throws ReferenceError when a reaction names an entity the document lacks.
std::string render_svg(const ReactionDocument& doc, std::span<const Reaction> reactions);

}  // namespace rxn

#endif  // RXN_SVG_H_
