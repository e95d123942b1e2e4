#include <cmath>
#include <map>
#include <set>

#include "rxn/errors.h"
#include "rxn/reasoning.h"

namespace rxn {

void FusionWeights::validate() const {
  if (!(space >= 0.0 && chem >= 0.0 && init >= 0.0)) {
    throw WeightError("fusion weights must be non-negative");
  }
  const double sum = space + chem + init;
  if (!(std::abs(sum - 1.0) <= 1e-9)) {
    throw WeightError("fusion weights must sum to 1, got " + std::to_string(sum));
  }
}

double fuse_score(const FusionWeights& alpha, double s_space, double s_chem, double s_init) {
  return alpha.space * s_space + alpha.chem * s_chem + alpha.init * s_init;
}

FusedGraph fuse(const SpatialGraph& spatial, const ChemGraph& chem, const HypothesisGraph& hyp,
                const FusionWeights& alpha, double tau_fuse) {
  alpha.validate();
  FusedGraph g;
  g.node_count = spatial.size();
  g.alpha = alpha;
  g.tau = tau_fuse;

  std::set<std::pair<std::size_t, std::size_t>> candidates;
  for (const auto& e : spatial.edges()) candidates.insert(e);
  for (const auto& e : chem.edges()) candidates.insert(e);
  std::map<std::pair<std::size_t, std::size_t>, std::vector<const HypothesisEdge*>> typed;
  for (const HypothesisEdge& e : hyp.edges) {
    if (e.relation == EdgeRelation::kNoEdge || e.from == e.to) continue;
    const auto key = std::make_pair(std::min(e.from, e.to), std::max(e.from, e.to));
    candidates.insert(key);
    typed[key].push_back(&e);
  }

  auto place = [&](FusedEdge edge) {
    edge.s_fuse = fuse_score(alpha, edge.s_space, edge.s_chem, edge.s_init);
    (edge.s_fuse > tau_fuse ? g.edges : g.pruned).push_back(edge);
  };
  for (const auto& [i, j] : candidates) {
    const double s_space = spatial.score(i, j).value_or(kNeutralScore);
    const double s_chem = chem.score(i, j).value_or(kNeutralScore);
    auto it = typed.find({i, j});
    if (it == typed.end()) {
      place({i, j, EdgeRelation::kNoEdge, s_space, s_chem, 0.0, 0.0});
      continue;
    }
    for (const HypothesisEdge* h : it->second) {
      place({h->from, h->to, h->relation, s_space, s_chem, h->s_init, 0.0});
    }
  }
  return g;
}

}  // namespace rxn
