#include <algorithm>
#include <cmath>
#include <map>
#include <numeric>
#include <set>

#include "rxn/reasoning.h"

namespace rxn {
namespace {

struct Axis {
  geom::Point tail;
  geom::Point head;
};

std::optional<Axis> arrow_axis(const Entity& e) {
  const ArrowPayload* a = e.arrow();
  if (a == nullptr) return std::nullopt;
  return Axis{a->tail, a->head};
}

geom::Point unit(geom::Point v) {
  const double n = geom::norm(v);
  return n > 0 ? (1.0 / n) * v : geom::Point{};
}

class UnionFind {
 public:
  explicit UnionFind(std::size_t n) : parent_(n) { std::iota(parent_.begin(), parent_.end(), 0); }
  std::size_t find(std::size_t i) {
    while (parent_[i] != i) i = parent_[i] = parent_[parent_[i]];
    return i;
  }
  void unite(std::size_t a, std::size_t b) {
    a = find(a);
    b = find(b);
    if (a != b) parent_[std::max(a, b)] = std::min(a, b);
  }

 private:
  std::vector<std::size_t> parent_;
};

bool is_arrow(const ReactionDocument& doc, std::size_t i) {
  return doc.entities[i].kind == EntityKind::kArrow;
}

// Side of the arrow axis an entity's centroid falls on.
Role project_role(geom::Point c, const Axis& axis) {
  const geom::Point d = axis.head - axis.tail;
  const double len = geom::norm(d);
  const double t = geom::dot(c - axis.tail, unit(d));
  if (t < 0) return Role::kReactant;
  if (t > len) return Role::kProduct;
  return Role::kCondition;
}

double induced_weight(const InferenceProblem& p, const std::vector<std::size_t>& members) {
  double s = 0.0;
  for (std::size_t a = 0; a < members.size(); ++a) {
    for (std::size_t b = a + 1; b < members.size(); ++b) s += p.weight[members[a]][members[b]];
  }
  return s;
}

std::vector<std::vector<std::size_t>> group_members(const InferenceComponent& c,
                                                    const Assignment& assignment) {
  std::vector<std::vector<std::size_t>> members(c.arrow_groups.size());
  for (std::size_t g = 0; g < c.arrow_groups.size(); ++g) {
    members[g] = c.arrow_groups[g];
    members[g].insert(members[g].end(), c.reactants[g].begin(), c.reactants[g].end());
  }
  for (std::size_t k = 0; k < c.contested.size(); ++k) {
    if (assignment[k] < 0) continue;
    members[c.options[k][static_cast<std::size_t>(assignment[k])].arrow_group].push_back(
        c.contested[k]);
  }
  for (auto& m : members) std::sort(m.begin(), m.end());
  return members;
}

}  // namespace

std::vector<std::vector<std::size_t>> chain_arrows(const ReactionDocument& doc,
                                                   const ReasoningConfig& config) {
  std::vector<std::size_t> arrows;
  for (std::size_t i = 0; i < doc.entities.size(); ++i) {
    if (arrow_axis(doc.entities[i])) arrows.push_back(i);
  }
  const double diag = doc.diagram_bounds.diagonal() > 0 ? doc.diagram_bounds.diagonal() : 1.0;
  const double max_gap = config.arrow_merge_gap * diag;

  auto blocked = [&](geom::Point from, geom::Point to) {
    for (const Entity& e : doc.entities) {
      if (e.kind == EntityKind::kArrow) continue;
      const geom::AxisBox box = geom::bounding_box(e.region);
      for (int s = 1; s <= 9; ++s) {
        if (box.contains(from + (s / 10.0) * (to - from))) return true;
      }
    }
    return false;
  };

  std::map<std::size_t, std::size_t> next;
  std::set<std::size_t> has_prev;
  for (std::size_t a : arrows) {
    const Axis ax = *arrow_axis(doc.entities[a]);
    const geom::Point ua = unit(ax.head - ax.tail);
    std::optional<std::pair<double, std::size_t>> best;
    for (std::size_t b : arrows) {
      if (b == a || has_prev.count(b)) continue;
      const Axis bx = *arrow_axis(doc.entities[b]);
      if (geom::dot(ua, unit(bx.head - bx.tail)) < 0.98) continue;
      const geom::Point gap = bx.tail - ax.head;
      const double dist = geom::norm(gap);
      if (dist > max_gap || geom::dot(gap, ua) < -max_gap) continue;
      if (std::abs(geom::cross(ua, gap)) > max_gap) continue;
      if (blocked(ax.head, bx.tail)) continue;
      if (!best || dist < best->first) best = {dist, b};
    }
    if (best) {
      next[a] = best->second;
      has_prev.insert(best->second);
    }
  }

  std::vector<std::vector<std::size_t>> groups;
  std::set<std::size_t> placed;
  auto walk = [&](std::size_t start) {
    std::vector<std::size_t> chain;
    for (std::size_t cur = start; !placed.count(cur);) {
      chain.push_back(cur);
      placed.insert(cur);
      auto it = next.find(cur);
      if (it == next.end()) break;
      cur = it->second;
    }
    if (!chain.empty()) groups.push_back(std::move(chain));
  };
  for (std::size_t a : arrows) {
    if (!has_prev.count(a)) walk(a);
  }
  for (std::size_t a : arrows) walk(a);  // cycles, if any
  std::sort(groups.begin(), groups.end(),
            [](const auto& x, const auto& y) { return *std::min_element(x.begin(), x.end()) <
                                                      *std::min_element(y.begin(), y.end()); });
  return groups;
}

InferenceProblem build_inference_problem(const FusedGraph& fused, const ReactionDocument& doc,
                                         const ReasoningConfig& config) {
  const std::size_t n = doc.entities.size();
  InferenceProblem p;
  p.node_count = n;
  p.weight.assign(n, std::vector<double>(n, 0.0));
  UnionFind uf(n);
  for (const FusedEdge& e : fused.edges) {
    p.weight[e.from][e.to] += e.s_fuse;
    if (e.from != e.to) p.weight[e.to][e.from] += e.s_fuse;
    uf.unite(e.from, e.to);
  }
  const auto groups = chain_arrows(doc, config);
  for (const auto& g : groups) {
    for (std::size_t a : g) uf.unite(g.front(), a);
  }

  // Typed evidence between an entity and an arrow group, best score first.
  auto typed_role = [&](std::size_t v, const std::vector<std::size_t>& group) {
    std::optional<std::pair<double, Role>> best;
    for (const FusedEdge& e : fused.edges) {
      Role r;
      if (e.relation == EdgeRelation::kReactantToArrow && e.from == v &&
          std::count(group.begin(), group.end(), e.to)) {
        r = Role::kReactant;
      } else if (e.relation == EdgeRelation::kArrowToProduct && e.to == v &&
                 std::count(group.begin(), group.end(), e.from)) {
        r = Role::kProduct;
      } else {
        continue;
      }
      if (!best || e.s_fuse > best->first ||
          (e.s_fuse == best->first && r == Role::kReactant)) {
        best = {e.s_fuse, r};
      }
    }
    return best ? std::optional<Role>(best->second) : std::nullopt;
  };
  auto untyped_link = [&](std::size_t v, const std::vector<std::size_t>& group) {
    return std::any_of(fused.edges.begin(), fused.edges.end(), [&](const FusedEdge& e) {
      if (e.relation != EdgeRelation::kNoEdge) return false;
      const std::size_t other = e.from == v ? e.to : (e.to == v ? e.from : n);
      return other < n && std::count(group.begin(), group.end(), other) > 0;
    });
  };

  std::map<std::size_t, std::vector<std::size_t>> by_root;
  for (std::size_t i = 0; i < n; ++i) by_root[uf.find(i)].push_back(i);
  std::map<std::size_t, std::vector<std::size_t>> groups_by_root;
  for (std::size_t g = 0; g < groups.size(); ++g) groups_by_root[uf.find(groups[g].front())].push_back(g);

  for (const auto& [root, members] : by_root) {
    auto git = groups_by_root.find(root);
    if (git == groups_by_root.end()) {
      if (members.size() > 1) p.arrowless.push_back(members);
      continue;
    }
    InferenceComponent c;
    c.members = members;
    for (std::size_t g : git->second) c.arrow_groups.push_back(groups[g]);
    const std::size_t gc = c.arrow_groups.size();

    // role[v][g]
    std::map<std::size_t, std::vector<std::optional<Role>>> role;
    for (std::size_t v : members) {
      if (is_arrow(doc, v)) continue;
      auto& rv = role[v];
      rv.assign(gc, std::nullopt);
      for (std::size_t g = 0; g < gc; ++g) {
        const auto& group = c.arrow_groups[g];
        if (auto r = typed_role(v, group)) {
          rv[g] = r;
        } else if (untyped_link(v, group)) {
          const Axis axis{arrow_axis(doc.entities[group.front()])->tail,
                          arrow_axis(doc.entities[group.back()])->head};
          rv[g] = project_role(geom::centroid(doc.entities[v].region), axis);
        }
      }
    }
    for (std::size_t v : members) {
      if (is_arrow(doc, v)) continue;
      for (std::size_t g = 0; g < gc; ++g) {
        if (role[v][g]) continue;
        for (const FusedEdge& e : fused.edges) {
          const bool via_reactant = e.relation == EdgeRelation::kReactantToCond && e.to == v &&
                                    role.count(e.from) && role[e.from][g] == Role::kReactant;
          const bool via_product = e.relation == EdgeRelation::kCondToProduct && e.from == v &&
                                   role.count(e.to) && role[e.to][g] == Role::kProduct;
          if (via_reactant || via_product) {
            role[v][g] = Role::kCondition;
            break;
          }
        }
      }
    }

    c.reactants.assign(gc, {});
    for (const auto& [v, rv] : role) {
      std::vector<RoleOption> opts;
      for (std::size_t g = 0; g < gc; ++g) {
        if (!rv[g]) continue;
        if (*rv[g] == Role::kReactant) {
          c.reactants[g].push_back(v);
        } else {
          opts.push_back({g, *rv[g]});
        }
      }
      if (!opts.empty()) {
        c.contested.push_back(v);
        c.options.push_back(std::move(opts));
      }
    }
    p.components.push_back(std::move(c));
  }
  return p;
}

double assignment_score(const InferenceProblem& problem, const InferenceComponent& component,
                        const Assignment& assignment) {
  double total = 0.0;
  for (const auto& m : group_members(component, assignment)) total += induced_weight(problem, m);
  return total;
}

Assignment solve_component(const InferenceProblem& problem, const InferenceComponent& c,
                           int exact_limit) {
  const std::size_t k_count = c.contested.size();
  const std::size_t gc = c.arrow_groups.size();
  Assignment assignment(k_count, -1);
  if (k_count == 0) return assignment;

  std::vector<std::vector<std::size_t>> members(gc);
  for (std::size_t g = 0; g < gc; ++g) {
    members[g] = c.arrow_groups[g];
    members[g].insert(members[g].end(), c.reactants[g].begin(), c.reactants[g].end());
  }
  auto gain = [&](std::size_t k, std::size_t o) {
    const std::size_t v = c.contested[k];
    double s = 0.0;
    for (std::size_t x : members[c.options[k][o].arrow_group]) s += problem.weight[v][x];
    return s;
  };

  if (c.members.size() > static_cast<std::size_t>(exact_limit)) {
    std::vector<bool> done(k_count, false);
    for (std::size_t round = 0; round < k_count; ++round) {
      std::optional<std::tuple<double, std::size_t, std::size_t>> best;
      for (std::size_t k = 0; k < k_count; ++k) {
        if (done[k]) continue;
        for (std::size_t o = 0; o < c.options[k].size(); ++o) {
          const double g = gain(k, o);
          if (!best || g > std::get<0>(*best)) best = {g, k, o};
        }
      }
      const auto [g, k, o] = *best;
      done[k] = true;
      assignment[k] = static_cast<int>(o);
      members[c.options[k][o].arrow_group].push_back(c.contested[k]);
    }
    return assignment;
  }

  // Optimistic bound per contested entity: its best option counting every
  // entity that could possibly share that reaction.
  std::vector<std::vector<std::size_t>> potential = members;
  for (std::size_t k = 0; k < k_count; ++k) {
    for (const RoleOption& o : c.options[k]) potential[o.arrow_group].push_back(c.contested[k]);
  }
  std::vector<double> suffix(k_count + 1, 0.0);
  for (std::size_t k = k_count; k-- > 0;) {
    double ub = 0.0;
    for (const RoleOption& o : c.options[k]) {
      double s = 0.0;
      for (std::size_t x : potential[o.arrow_group]) {
        if (x != c.contested[k]) s += problem.weight[c.contested[k]][x];
      }
      ub = std::max(ub, s);
    }
    suffix[k] = suffix[k + 1] + ub;
  }

  const double base = assignment_score(problem, c, assignment);
  double best_score = -1.0;
  Assignment best = assignment;
  Assignment current = assignment;
  auto dfs = [&](auto&& self, std::size_t k, double partial) -> void {
    if (base + partial + suffix[k] < best_score - 1e-9) return;
    if (k == k_count) {
      const double s = assignment_score(problem, c, current);
      if (s > best_score) {
        best_score = s;
        best = current;
      }
      return;
    }
    for (std::size_t o = 0; o < c.options[k].size(); ++o) {
      const double g = gain(k, o);
      auto& m = members[c.options[k][o].arrow_group];
      m.push_back(c.contested[k]);
      current[k] = static_cast<int>(o);
      self(self, k + 1, partial + g);
      m.pop_back();
    }
    current[k] = -1;
    self(self, k + 1, partial);
  };
  dfs(dfs, 0, 0.0);
  return best;
}

std::vector<Reaction> infer_reactions(const FusedGraph& fused, const ReactionDocument& doc,
                                      const ReasoningConfig& config) {
  const InferenceProblem p = build_inference_problem(fused, doc, config);
  auto ids = [&](const std::vector<std::size_t>& idx) {
    std::vector<std::string> out;
    for (std::size_t i : idx) out.push_back(doc.entities[i].id);
    return out;
  };
  std::vector<Reaction> out;
  for (const InferenceComponent& c : p.components) {
    const Assignment a = solve_component(p, c, config.exact_search_limit);
    std::vector<std::vector<std::size_t>> products(c.arrow_groups.size());
    std::vector<std::vector<std::size_t>> conditions(c.arrow_groups.size());
    for (std::size_t k = 0; k < c.contested.size(); ++k) {
      if (a[k] < 0) continue;
      const RoleOption& o = c.options[k][static_cast<std::size_t>(a[k])];
      (o.role == Role::kProduct ? products : conditions)[o.arrow_group].push_back(c.contested[k]);
    }
    const auto members = group_members(c, a);
    for (std::size_t g = 0; g < c.arrow_groups.size(); ++g) {
      Reaction r;
      r.reactants = ids(c.reactants[g]);
      r.products = ids(products[g]);
      r.conditions = ids(conditions[g]);
      r.arrows = ids(c.arrow_groups[g]);
      r.score = induced_weight(p, members[g]);
      out.push_back(std::move(r));
    }
  }

  for (const auto& comp : p.arrowless) {
    const std::set<std::size_t> in_comp(comp.begin(), comp.end());
    std::map<std::size_t, std::set<std::size_t>> sources;  // product -> reactants
    for (const FusedEdge& e : fused.edges) {
      if (e.relation == EdgeRelation::kReactantToProduct && in_comp.count(e.from)) {
        sources[e.to].insert(e.from);
      }
    }
    std::map<std::set<std::size_t>, std::vector<std::size_t>> grouped;
    for (const auto& [prod, srcs] : sources) grouped[srcs].push_back(prod);
    for (const auto& [srcs, prods] : grouped) {
      std::vector<std::size_t> reactants;
      for (std::size_t s : srcs) {
        if (!std::count(prods.begin(), prods.end(), s)) reactants.push_back(s);
      }
      std::set<std::size_t> conds;
      for (const FusedEdge& e : fused.edges) {
        if (e.relation == EdgeRelation::kReactantToCond && srcs.count(e.from)) conds.insert(e.to);
        if (e.relation == EdgeRelation::kCondToProduct &&
            std::count(prods.begin(), prods.end(), e.to)) {
          conds.insert(e.from);
        }
      }
      std::vector<std::size_t> conditions;
      for (std::size_t c : conds) {
        if (!srcs.count(c) && !std::count(prods.begin(), prods.end(), c)) conditions.push_back(c);
      }
      std::vector<std::size_t> all = reactants;
      all.insert(all.end(), prods.begin(), prods.end());
      all.insert(all.end(), conditions.begin(), conditions.end());
      std::sort(all.begin(), all.end());
      Reaction r;
      r.reactants = ids(reactants);
      r.products = ids(prods);
      r.conditions = ids(conditions);
      r.score = induced_weight(p, all);
      out.push_back(std::move(r));
    }
  }
  return out;
}

}  // namespace rxn
