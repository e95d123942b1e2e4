#include <algorithm>
#include <map>
#include <set>
#include <tuple>

#include "json_util.h"
#include "parallel.h"
#include "rxn/errors.h"
#include "rxn/reasoning.h"

namespace rxn {

std::string_view to_string(EdgeRelation r) {
  switch (r) {
    case EdgeRelation::kReactantToCond:
      return "REL_REACTANT_TO_COND";
    case EdgeRelation::kCondToProduct:
      return "REL_COND_TO_PRODUCT";
    case EdgeRelation::kReactantToProduct:
      return "REL_REACTANT_TO_PRODUCT";
    case EdgeRelation::kNoEdge:
      return "REL_NO_EDGE";
    case EdgeRelation::kReactantToArrow:
      return "REL_REACTANT_TO_ARROW";
    case EdgeRelation::kArrowToProduct:
      return "REL_ARROW_TO_PRODUCT";
  }
  return "REL_NO_EDGE";
}

std::string render_cluster_graph(const ReactionDocument& doc,
                                 const std::vector<std::size_t>& cluster) {
  std::string out = "[\n";
  for (std::size_t k = 0; k < cluster.size(); ++k) {
    const Entity& e = doc.entities[cluster[k]];
    detail::ordered_json node;
    node["label"] = to_string(e.kind);
    node["bbox"] = detail::region_to_json(e.region);
    if (const MoleculePayload* m = e.molecule(); m && m->smiles) node["smiles"] = *m->smiles;
    if (const TextPayload* t = e.text()) node["text"] = t->raw;
    if (const IdentifierPayload* id = e.identifier()) node["text"] = id->label;
    if (const ArrowPayload* a = e.arrow()) node["direction"] = to_string(a->direction);
    out += "  " + node.dump() + (k + 1 < cluster.size() ? ",\n" : "\n");
  }
  out += "]";
  return out;
}

std::vector<HypothesisEdge> edges_from_reactions(const std::vector<Reaction>& reactions,
                                                 const ReactionDocument& doc,
                                                 const std::vector<std::size_t>& cluster,
                                                 SInitMode mode,
                                                 std::vector<std::string>& warnings) {
  const std::set<std::size_t> members(cluster.begin(), cluster.end());
  std::vector<HypothesisEdge> out;
  for (const Reaction& r : reactions) {
    const double s_init =
        mode == SInitMode::kConfidence ? std::clamp(r.score, 0.0, 1.0) : 1.0;
    auto idx = [&](const std::vector<std::string>& ids) {
      std::vector<std::size_t> v;
      for (const std::string& id : ids) v.push_back(*doc.index_of(id));
      return v;
    };
    const auto reactants = idx(r.reactants);
    const auto products = idx(r.products);
    const auto conditions = idx(r.conditions);
    const auto arrows = idx(r.arrows);
    auto emit = [&](std::size_t from, std::size_t to, EdgeRelation rel) {
      if (from == to) return;
      if (!members.count(from) || !members.count(to)) {
        warnings.push_back("dropped " + std::string(to_string(rel)) + " edge " +
                           doc.entities[from].id + " -> " + doc.entities[to].id +
                           ": endpoint outside its cluster");
        return;
      }
      out.push_back({from, to, rel, s_init});
    };
    for (std::size_t a : arrows) {
      for (std::size_t s : reactants) emit(s, a, EdgeRelation::kReactantToArrow);
      for (std::size_t p : products) emit(a, p, EdgeRelation::kArrowToProduct);
    }
    for (std::size_t c : conditions) {
      for (std::size_t s : reactants) emit(s, c, EdgeRelation::kReactantToCond);
      for (std::size_t p : products) emit(c, p, EdgeRelation::kCondToProduct);
    }
    if (arrows.empty()) {
      for (std::size_t s : reactants) {
        for (std::size_t p : products) emit(s, p, EdgeRelation::kReactantToProduct);
      }
    }
  }
  return out;
}

HypothesisGraph collect_hypotheses(const std::vector<std::vector<std::size_t>>& clusters,
                                   AgentClient& client, const ReactionDocument& doc,
                                   const ReasoningConfig& config, std::string_view image) {
  struct ClusterResult {
    std::vector<HypothesisEdge> edges;
    std::vector<std::string> warnings;
    std::optional<ClusterFailure> failure;
  };
  std::vector<ClusterResult> results(clusters.size());
  detail::parallel_for(clusters.size(), config.max_parallel, [&](std::size_t k) {
    // A lone entity cannot be both reactant and product.
    if (clusters[k].size() < 2) return;
    const std::string response = client.request(
        AgentRole::kReactionExpert, {{"graph", render_cluster_graph(doc, clusters[k])}}, image);
    ClusterResult& res = results[k];
    try {
      const std::vector<Reaction> reactions = parse_combiner_response(response, doc);
      res.edges = edges_from_reactions(reactions, doc, clusters[k], config.s_init_mode,
                                       res.warnings);
    } catch (const ResponseFormatError& e) {
      res.failure = ClusterFailure{k, e.kind(), e.what()};
    } catch (const ConstraintError& e) {
      res.failure = ClusterFailure{k, e.kind(), e.what()};
    } catch (const ResolutionError& e) {
      res.failure = ClusterFailure{k, e.kind(), e.what()};
    }
  });

  HypothesisGraph g;
  g.clusters = clusters;
  std::map<std::tuple<std::size_t, std::size_t, int>, std::size_t> seen;
  for (ClusterResult& res : results) {
    for (const HypothesisEdge& e : res.edges) {
      const auto key = std::make_tuple(e.from, e.to, static_cast<int>(e.relation));
      auto it = seen.find(key);
      if (it == seen.end()) {
        seen.emplace(key, g.edges.size());
        g.edges.push_back(e);
      } else {
        g.edges[it->second].s_init = std::max(g.edges[it->second].s_init, e.s_init);
      }
    }
    for (std::string& w : res.warnings) g.warnings.push_back(std::move(w));
    if (res.failure) {
      g.warnings.push_back("cluster " + std::to_string(res.failure->cluster) + ": " +
                           res.failure->message);
      g.failures.push_back(std::move(*res.failure));
    }
  }
  return g;
}

}  // namespace rxn
