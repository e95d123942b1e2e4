#include <cmath>
#include <cstdlib>
#include <numeric>

#include "rxn/reasoning.h"

namespace rxn {

double f_chem(double s_fp, double dq, double beta) {
  return beta * s_fp + (1.0 - beta) * std::exp(-dq);
}

bool ChemGraph::has_edge(std::size_t i, std::size_t j) const {
  auto s = score(i, j);
  return s && *s > tau;
}

std::optional<double> ChemGraph::score(std::size_t i, std::size_t j) const {
  auto it = pairs.find({std::min(i, j), std::max(i, j)});
  if (it == pairs.end()) return std::nullopt;
  return it->second.e_chem;
}

std::vector<std::pair<std::size_t, std::size_t>> ChemGraph::edges() const {
  std::vector<std::pair<std::size_t, std::size_t>> out;
  for (const auto& [key, p] : pairs) {
    if (p.e_chem > tau) out.push_back(key);
  }
  return out;
}

ChemGraph build_chem_graph(const ReactionDocument& doc, const ReasoningConfig& config) {
  ChemGraph g;
  g.tau = config.tau_chem;
  struct Prepared {
    std::size_t index;
    std::optional<chem::Fingerprint> fp;
    int charge = 0;
  };
  std::vector<Prepared> mols;
  for (std::size_t i = 0; i < doc.entities.size(); ++i) {
    const MoleculePayload* m = doc.entities[i].molecule();
    if (m == nullptr) continue;
    Prepared p{i, std::nullopt, 0};
    if (m->parsed()) {
      p.fp = chem::fingerprint(*m->molecule, config.fingerprint);
      p.charge = chem::formal_charge_sum(*m->molecule);
    }
    mols.push_back(std::move(p));
  }
  for (std::size_t a = 0; a < mols.size(); ++a) {
    for (std::size_t b = a + 1; b < mols.size(); ++b) {
      ChemPair pair;
      if (mols[a].fp && mols[b].fp) {
        pair.s_fp = chem::tanimoto(*mols[a].fp, *mols[b].fp);
        pair.dq = std::abs(mols[a].charge - mols[b].charge);
        pair.e_chem = std::clamp(f_chem(*pair.s_fp, *pair.dq, config.beta), 0.0, 1.0);
      }
      g.pairs[{mols[a].index, mols[b].index}] = pair;
    }
  }
  return g;
}

std::vector<std::vector<std::size_t>> cluster_entities(const ReactionDocument& doc,
                                                       const ReasoningConfig& config) {
  const std::size_t n = doc.entities.size();
  std::vector<std::size_t> parent(n);
  std::iota(parent.begin(), parent.end(), 0);
  auto find = [&](std::size_t i) {
    while (parent[i] != i) i = parent[i] = parent[parent[i]];
    return i;
  };
  const double diag = doc.diagram_bounds.diagonal();
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = i + 1; j < n; ++j) {
      const double d = geom::norm(geom::centroid(doc.entities[i].region) -
                                  geom::centroid(doc.entities[j].region));
      const double nd = diag > 0 ? d / diag : d;
      if (nd < config.tau_cluster) {
        const std::size_t ri = find(i);
        const std::size_t rj = find(j);
        if (ri != rj) parent[std::max(ri, rj)] = std::min(ri, rj);
      }
    }
  }
  // Roots are always the smallest member, so visiting indices in order lists
  // clusters by first member.
  std::vector<std::vector<std::size_t>> clusters;
  std::vector<long> slot(n, -1);
  for (std::size_t i = 0; i < n; ++i) {
    const std::size_t r = find(i);
    if (slot[r] < 0) {
      slot[r] = static_cast<long>(clusters.size());
      clusters.emplace_back();
    }
    clusters[static_cast<std::size_t>(slot[r])].push_back(i);
  }
  return clusters;
}

}  // namespace rxn
