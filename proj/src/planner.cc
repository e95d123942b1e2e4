#include "rxn/planner.h"

#include <algorithm>
#include <cctype>
#include <numeric>

#include <json.hpp>

#include "json_util.h"
#include "rxn/errors.h"

namespace rxn {
namespace {

constexpr AgentRole kCanonicalOrder[] = {AgentRole::kMoleculeExpert, AgentRole::kArrowExpert,
                                         AgentRole::kTextExpert, AgentRole::kReactionExpert};

int canonical_rank(AgentRole r) {
  for (int i = 0; i < 4; ++i) {
    if (kCanonicalOrder[i] == r) return i;
  }
  return -1;
}

std::string lowered(std::string_view s) {
  std::string out(s);
  std::transform(out.begin(), out.end(), out.begin(),
                 [](unsigned char c) { return static_cast<char>(std::tolower(c)); });
  return out;
}

bool mentions(const std::string& q, std::initializer_list<std::string_view> words) {
  return std::any_of(words.begin(), words.end(),
                     [&](std::string_view w) { return q.find(w) != std::string::npos; });
}

std::size_t find_root(std::vector<std::size_t>& parent, std::size_t i) {
  while (parent[i] != i) {
    parent[i] = parent[parent[i]];
    i = parent[i];
  }
  return i;
}

}  // namespace

int DiagramFeatures::total() const {
  return std::accumulate(kind_counts.begin(), kind_counts.end(), 0);
}

DiagramFeatures extract_features(const ReactionDocument& doc, double proximity_link) {
  DiagramFeatures f;
  const std::size_t n = doc.entities.size();
  double text_area = 0.0;
  for (const Entity& e : doc.entities) {
    ++f.kind_counts[static_cast<int>(e.kind)];
    if (const ArrowPayload* a = e.arrow()) ++f.arrow_histogram[static_cast<int>(a->direction)];
    if (e.kind == EntityKind::kText) text_area += geom::area(e.region);
  }
  const double diagram_area = doc.diagram_bounds.area();
  f.text_density = diagram_area > 0 ? text_area / diagram_area : 0.0;
  if (n == 0) return f;

  std::vector<std::size_t> parent(n);
  std::iota(parent.begin(), parent.end(), 0);
  const bool has_diagonal = doc.diagram_bounds.diagonal() > 0;
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = i + 1; j < n; ++j) {
      const double d = has_diagonal ? geom::center_distance_normalized(
                                          doc.entities[i].region, doc.entities[j].region,
                                          doc.diagram_bounds)
                                    : 0.0;
      if (d < proximity_link) parent[find_root(parent, i)] = find_root(parent, j);
    }
  }
  std::size_t components = 0;
  for (std::size_t i = 0; i < n; ++i) components += find_root(parent, i) == i ? 1 : 0;
  f.complexity = static_cast<double>(n) / static_cast<double>(components);
  return f;
}

bool AgentPlan::contains(AgentRole r) const {
  return std::find(steps.begin(), steps.end(), r) != steps.end();
}

void validate_plan(const AgentPlan& plan) {
  if (plan.steps.empty()) throw PlanParseError("plan enables no agent");
  int last = -1;
  for (AgentRole r : plan.steps) {
    const int rank = canonical_rank(r);
    if (rank < 0) throw PlanParseError("plan contains non-expert role " + std::string(to_string(r)));
    if (rank <= last) throw PlanParseError("plan roles duplicated or out of order");
    last = rank;
  }
}

AgentPlan make_plan(const std::vector<AgentRole>& roles, PlanProvenance provenance) {
  AgentPlan plan;
  plan.provenance = provenance;
  for (AgentRole r : kCanonicalOrder) {
    if (std::find(roles.begin(), roles.end(), r) != roles.end()) plan.steps.push_back(r);
  }
  return plan;
}

void PlanningContext::complete(AgentRole role, int produced_count) {
  if (!completed[role]) ++step;
  completed[role] = true;
  produced[role] = produced_count;
}

std::string plan_to_json(const AgentPlan& plan) {
  detail::ordered_json flags = detail::ordered_json::object();
  for (AgentRole r : kCanonicalOrder) flags[std::string(to_string(r))] = plan.contains(r);
  detail::ordered_json root;
  root["plan"] = flags;
  return root.dump();
}

AgentPlan plan_from_json(std::string_view text, PlanProvenance provenance) {
  detail::json root;
  try {
    root = detail::json::parse(detail::strip_code_fence(text));
  } catch (const detail::json::exception& e) {
    throw PlanParseError(std::string("plan is not valid JSON: ") + e.what());
  }
  if (!root.is_object() || root.size() != 1 || !root.contains("plan")) {
    throw PlanParseError("plan must be an object with the single key \"plan\"");
  }
  const detail::json& flags = root["plan"];
  if (!flags.is_object()) throw PlanParseError("\"plan\" must be an object");
  std::vector<AgentRole> roles;
  for (const auto& [key, value] : flags.items()) {
    auto role = parse_agent_role(key);
    if (!role || canonical_rank(*role) < 0) throw PlanParseError("unknown plan key \"" + key + "\"");
    if (!value.is_boolean()) throw PlanParseError("plan flag \"" + key + "\" must be a boolean");
    if (value.get<bool>()) roles.push_back(*role);
  }
  for (AgentRole r : kCanonicalOrder) {
    if (!flags.contains(std::string(to_string(r)))) {
      throw PlanParseError("plan is missing \"" + std::string(to_string(r)) + "\"");
    }
  }
  AgentPlan plan = make_plan(roles, provenance);
  validate_plan(plan);
  return plan;
}

// Full-extraction words win; otherwise SMILES/structure queries run only the
// molecule expert (plus the text expert when conditions or text are asked
// for); anything unrecognized gets the full plan. Roles already completed in
// ctx are dropped unless that would leave nothing to run.
AgentPlan route_rule(std::string_view query, const DiagramFeatures& /*features*/,
                     const PlanningContext& ctx) {
  const std::string q = lowered(query);
  if (q.find_first_not_of(" \t\r\n") == std::string::npos) {
    throw PreconditionError("query must not be empty");
  }
  std::vector<AgentRole> roles(std::begin(kCanonicalOrder), std::end(kCanonicalOrder));
  if (!mentions(q, {"reaction", "pathway", "parse"}) &&
      mentions(q, {"smiles", "structure only"})) {
    roles = {AgentRole::kMoleculeExpert};
    if (mentions(q, {"conditions", "text"})) roles.push_back(AgentRole::kTextExpert);
  }
  std::vector<AgentRole> remaining;
  for (AgentRole r : roles) {
    auto it = ctx.completed.find(r);
    if (it == ctx.completed.end() || !it->second) remaining.push_back(r);
  }
  if (remaining.empty()) remaining.push_back(roles.back());
  return make_plan(remaining, PlanProvenance::kRule);
}

AgentPlan route_vlm(std::string_view query, const DiagramFeatures& features,
                    const PlanningContext& ctx, AgentClient& client, std::string_view image,
                    bool fallback_to_rule) {
  if (query.find_first_not_of(" \t\r\n") == std::string_view::npos) {
    throw PreconditionError("query must not be empty");
  }
  const std::string response =
      client.request(AgentRole::kPlanner, {{"query", std::string(query)}}, image);
  try {
    return plan_from_json(response, PlanProvenance::kVlm);
  } catch (const PlanParseError&) {
    if (!fallback_to_rule) throw;
    return route_rule(query, features, ctx);
  }
}

}  // namespace rxn
