#include <algorithm>
#include <chrono>
#include <map>
#include <set>
#include <tuple>

#include "rxn/errors.h"
#include "rxn/reasoning.h"

namespace rxn {
namespace {

void append_unique(std::vector<std::string>& into, const std::vector<std::string>& from) {
  for (const std::string& id : from) {
    if (std::find(into.begin(), into.end(), id) == into.end()) into.push_back(id);
  }
}

bool contains(const std::vector<std::string>& v, const std::string& id) {
  return std::find(v.begin(), v.end(), id) != v.end();
}

// Reactions whose arrows belong to one chained group are a single reaction
// drawn with two arrows.
std::vector<Reaction> merge_chained(std::vector<Reaction> reactions, const ReactionDocument& doc,
                                    const ReasoningConfig& config) {
  std::map<std::string, std::size_t> group_of;
  const auto groups = chain_arrows(doc, config);
  for (std::size_t g = 0; g < groups.size(); ++g) {
    for (std::size_t a : groups[g]) group_of[doc.entities[a].id] = g;
  }
  std::vector<Reaction> out;
  std::map<std::size_t, std::size_t> slot;  // group -> index in out
  for (Reaction& r : reactions) {
    std::optional<std::size_t> group;
    for (const std::string& a : r.arrows) {
      if (auto it = group_of.find(a); it != group_of.end()) {
        group = it->second;
        break;
      }
    }
    if (!group || !slot.count(*group)) {
      if (group) slot[*group] = out.size();
      out.push_back(std::move(r));
      continue;
    }
    Reaction& into = out[slot[*group]];
    append_unique(into.products, r.products);
    std::vector<std::string> reactants = into.reactants;
    append_unique(reactants, r.reactants);
    into.reactants.clear();
    for (const std::string& id : reactants) {
      if (!contains(into.products, id)) into.reactants.push_back(id);
    }
    append_unique(into.conditions, r.conditions);
    append_unique(into.arrows, r.arrows);
    into.score += r.score;
  }
  return out;
}

std::optional<std::string> resolved_molecule(const ReactionDocument& doc, const std::string& id) {
  const Entity* e = doc.find(id);
  if (e == nullptr || e->kind != EntityKind::kIdentifier) return std::nullopt;
  const auto& ref = e->identifier()->molecule_ref;
  if (!ref || doc.find(*ref) == nullptr) return std::nullopt;
  return ref;
}

void substitute_identifiers(Reaction& r, const ReactionDocument& doc) {
  auto substitute = [&](std::vector<std::string>& side, const std::vector<std::string>& other) {
    std::vector<std::string> out;
    for (const std::string& id : side) {
      std::string use = id;
      if (auto mol = resolved_molecule(doc, id); mol && !contains(other, *mol)) use = *mol;
      if (!contains(out, use)) out.push_back(use);
    }
    side = std::move(out);
  };
  substitute(r.reactants, r.products);
  substitute(r.products, r.reactants);
  substitute(r.conditions, {});
}

void enforce_invariants(Reaction& r, const ReactionDocument& doc) {
  auto known = [&](std::vector<std::string>& ids) {
    std::vector<std::string> out;
    for (const std::string& id : ids) {
      if (doc.find(id) != nullptr && !contains(out, id)) out.push_back(id);
    }
    ids = std::move(out);
  };
  known(r.reactants);
  known(r.products);
  known(r.conditions);
  known(r.arrows);
  std::erase_if(r.arrows, [&](const std::string& id) {
    return doc.find(id)->kind != EntityKind::kArrow;
  });
  auto not_arrow = [&](const std::string& id) { return doc.find(id)->kind == EntityKind::kArrow; };
  std::erase_if(r.reactants, not_arrow);
  std::erase_if(r.products, not_arrow);
  std::erase_if(r.conditions, not_arrow);
  std::erase_if(r.products, [&](const std::string& id) { return contains(r.reactants, id); });
  std::erase_if(r.conditions, [&](const std::string& id) {
    return contains(r.reactants, id) || contains(r.products, id);
  });
}

void check_conservation(Reaction& r, const ReactionDocument& doc, double penalty) {
  auto molecules = [&](const std::vector<std::string>& ids) -> std::optional<std::vector<chem::Molecule>> {
    std::vector<chem::Molecule> out;
    for (const std::string& id : ids) {
      const MoleculePayload* m = doc.find(id)->molecule();
      if (m == nullptr || !m->parsed()) return std::nullopt;
      out.push_back(*m->molecule);
    }
    return out;
  };
  r.conservation = ConservationStatus::kUnknown;
  r.residual.reset();
  auto lhs = molecules(r.reactants);
  auto rhs = molecules(r.products);
  if (!lhs || !rhs || lhs->empty() || rhs->empty()) return;
  r.residual = chem::conservation_residual(*lhs, *rhs);
  if (r.residual->balanced()) {
    r.conservation = ConservationStatus::kBalanced;
  } else {
    r.conservation = ConservationStatus::kUnbalanced;
    r.score *= penalty;
  }
}

std::tuple<double, double> top_left(const ReactionDocument& doc, const std::string& id) {
  const geom::AxisBox b = geom::bounding_box(doc.find(id)->region);
  return {b.y_min(), b.x_min()};
}

}  // namespace

void order_reactions(std::vector<Reaction>& reactions, const ReactionDocument& doc) {
  auto member_order = [&](std::vector<std::string>& ids) {
    std::stable_sort(ids.begin(), ids.end(), [&](const std::string& a, const std::string& b) {
      return std::make_tuple(top_left(doc, a), *doc.index_of(a)) <
             std::make_tuple(top_left(doc, b), *doc.index_of(b));
    });
  };
  for (Reaction& r : reactions) {
    member_order(r.reactants);
    member_order(r.products);
    member_order(r.conditions);
    member_order(r.arrows);
  }
  auto key = [&](const Reaction& r) {
    const auto tl = r.reactants.empty() ? std::make_tuple(0.0, 0.0) : top_left(doc, r.reactants[0]);
    const std::size_t first_arrow = r.arrows.empty() ? doc.entities.size() : *doc.index_of(r.arrows[0]);
    return std::make_tuple(-r.score, tl, first_arrow, r.reactants, r.products);
  };
  std::stable_sort(reactions.begin(), reactions.end(),
                   [&](const Reaction& a, const Reaction& b) { return key(a) < key(b); });
}

std::vector<Reaction> post_process(std::vector<Reaction> reactions, const ReactionDocument& doc,
                                   const ReasoningConfig& config) {
  reactions = merge_chained(std::move(reactions), doc, config);
  std::vector<Reaction> kept;
  for (Reaction& r : reactions) {
    substitute_identifiers(r, doc);
    enforce_invariants(r, doc);
    if (r.reactants.empty() || r.products.empty()) continue;
    check_conservation(r, doc, config.conservation_penalty);
    r.molecule_in_conditions = std::any_of(r.conditions.begin(), r.conditions.end(),
                                           [&](const std::string& id) {
                                             return doc.find(id)->kind == EntityKind::kMolecule;
                                           });
    kept.push_back(std::move(r));
  }
  order_reactions(kept, doc);
  // Identical member sets can arise from merging; keep the best-scored one.
  std::vector<Reaction> out;
  for (Reaction& r : kept) {
    const bool dup = std::any_of(out.begin(), out.end(),
                                 [&](const Reaction& o) { return o.same_members(r); });
    if (!dup) out.push_back(std::move(r));
  }
  return out;
}

ReasoningResult run_reasoning(const ReactionDocument& doc, const ReasoningConfig& config,
                              const GnnWeights& weights, AgentClient& client,
                              std::string_view image) {
  config.validate();
  ReasoningResult result;
  auto timed = [&](const char* stage, auto&& fn) {
    const auto start = std::chrono::steady_clock::now();
    fn();
    result.stage_ms[stage] =
        std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - start).count();
  };
  SpatialGraph spatial;
  ChemGraph chem;
  FusedGraph fused;
  std::vector<Reaction> inferred;
  timed("spatial", [&] {
    spatial = build_spatial_graph(doc, config);
    propagate(spatial, weights, config.layers);
  });
  timed("chem", [&] { chem = build_chem_graph(doc, config); });
  timed("hypotheses", [&] {
    result.hypotheses = collect_hypotheses(cluster_entities(doc, config), client, doc, config, image);
  });
  timed("fusion", [&] {
    fused = fuse(spatial, chem, result.hypotheses,
                 {config.alpha_space, config.alpha_chem, config.alpha_init}, config.tau_fuse);
    result.fused_edges = fused.edges.size();
  });
  timed("inference", [&] { inferred = infer_reactions(fused, doc, config); });
  timed("post_process", [&] { result.reactions = post_process(std::move(inferred), doc, config); });
  return result;
}

}  // namespace rxn
