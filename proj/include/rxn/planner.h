// Agent routing: diagram features plus the user's query decide which expert
// agents run, and in what order.

#ifndef RXN_PLANNER_H_
#define RXN_PLANNER_H_

#include <array>
#include <functional>
#include <map>
#include <string>
#include <string_view>
#include <vector>

#include "rxn/agent.h"
#include "rxn/document.h"

namespace rxn {

struct DiagramFeatures {
  std::array<int, kNumEntityKinds> kind_counts{};          // indexed by EntityKind
  std::array<int, kNumArrowDirections> arrow_histogram{};  // indexed by ArrowDirection
  double complexity = 0.0;    // entities per proximity component; 0 when empty
  double text_density = 0.0;  // text area / diagram area

  int count(EntityKind k) const { return kind_counts[static_cast<int>(k)]; }
  int total() const;
  bool operator==(const DiagramFeatures&) const = default;
};

// Centroid distance (as a fraction of the diagram diagonal) below which two
// entities share a proximity component for the complexity score.
inline constexpr double kProximityLink = 0.35;

DiagramFeatures extract_features(const ReactionDocument& doc,
                                 double proximity_link = kProximityLink);

enum class PlanProvenance { kRule, kVlm };

struct AgentPlan {
  std::vector<AgentRole> steps;  // canonical order, reaction_expert last
  PlanProvenance provenance = PlanProvenance::kRule;

  bool contains(AgentRole r) const;
  bool operator==(const AgentPlan&) const = default;
};

// Throws PlanParseError when steps are empty, duplicated, contain the planner
// role, or are not in canonical order.
void validate_plan(const AgentPlan& plan);

// Builds a plan from a role set, ordering it canonically
// (molecule, arrow, text, reaction).
AgentPlan make_plan(const std::vector<AgentRole>& roles, PlanProvenance provenance);

struct PlanningContext {
  std::string query;
  std::map<AgentRole, bool> completed;
  std::map<AgentRole, int> produced;  // entities produced per role
  int step = 0;                       // == number of completed roles

  void complete(AgentRole role, int produced_count);
};

// {"plan":{"molecule_expert":...,"arrow_expert":...,"text_expert":...,"reaction_expert":...}}
std::string plan_to_json(const AgentPlan& plan);
// Accepts the four role flags in any key order. Throws PlanParseError.
AgentPlan plan_from_json(std::string_view text, PlanProvenance provenance = PlanProvenance::kVlm);

// Keyword routing; see route_rule in the implementation for the rules.
AgentPlan route_rule(std::string_view query, const DiagramFeatures& features,
                     const PlanningContext& ctx);

// Asks the planner agent and parses its answer. On PlanParseError falls back
// to route_rule when fallback_to_rule is set, otherwise rethrows.
AgentPlan route_vlm(std::string_view query, const DiagramFeatures& features,
                    const PlanningContext& ctx, AgentClient& client,
                    std::string_view image = {}, bool fallback_to_rule = false);

// Called between steps; may return a revised plan for the remaining roles.
using ReplanHook = std::function<AgentPlan(const AgentPlan& current, const PlanningContext& ctx)>;

}  // namespace rxn

#endif  // RXN_PLANNER_H_
