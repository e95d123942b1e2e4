// Reaction reasoning over a document's entity set: a message-passing spatial
// graph, a chemistry graph, per-cluster hypothesis graphs from the combiner
// agent, weighted fusion, global reaction inference and post-processing.

#ifndef RXN_REASONING_H_
#define RXN_REASONING_H_

#include <cstdint>
#include <map>
#include <optional>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include <Eigen/Dense>

#include "rxn/agent.h"
#include "rxn/chem.h"
#include "rxn/document.h"
#include "rxn/reaction.h"

namespace rxn {

enum class SInitMode { kIndicator, kConfidence };

struct ReasoningConfig {
  int k_nn = 4;
  double radius = 0.25;  // fraction of the diagram diagonal
  int layers = 2;
  int dim = 32;
  double beta = 0.7;
  double tau_chem = 0.3;
  double tau_cluster = 0.35;
  double tau_fuse = 0.45;
  double alpha_space = 0.3;
  double alpha_chem = 0.2;
  double alpha_init = 0.5;
  int exact_search_limit = 12;
  double conservation_penalty = 0.9;

  double arrow_merge_gap = 0.05;  // fraction of the diagonal
  SInitMode s_init_mode = SInitMode::kIndicator;
  std::uint64_t seed = 7;  // random GNN weights when no weights file is given
  int max_parallel = 4;    // concurrent combiner requests per document
  chem::FingerprintConfig fingerprint;

  // Throws ConfigError.
  void validate() const;
};

// ---- spatial graph -------------------------------------------------------

inline constexpr int kSketchDim = 16;
inline constexpr int kBaseFeatureDim = kNumEntityKinds + 4 + kSketchDim;  // 24
inline constexpr int kEdgeFeatureDim = 4 + kNumEntityKinds * kNumEntityKinds;  // 20

struct GnnLayer {
  Eigen::MatrixXd w1;  // dim x dim
  Eigen::MatrixXd w2;  // dim x edge_dim
};

struct GnnWeights {
  int dim = 0;
  int edge_dim = kEdgeFeatureDim;
  std::vector<GnnLayer> layers;

  // {"dim": d, "edge_dim": e, "layers": [{"W1": [[...]], "W2": [[...]]}]}.
  // Throws ConfigError on malformed files or inconsistent shapes.
  static GnnWeights from_json(std::string_view text);
  static GnnWeights load_file(const std::string& path);
  static GnnWeights random(int dim, int edge_dim, int layers, std::uint64_t seed);
  static GnnWeights zeros(int dim, int edge_dim, int layers);

  // Throws ConfigError unless shapes match (dim, edge_dim) with >= layers layers.
  void check(int expected_dim, int expected_edge_dim, int expected_layers) const;
};

struct SpatialGraph {
  std::size_t size() const { return static_cast<std::size_t>(h0.rows()); }

  Eigen::MatrixXd h0;  // n x dim initial features
  Eigen::MatrixXd h;   // n x dim after propagation
  std::vector<std::vector<std::size_t>> neighbors;  // sorted, symmetric
  std::map<std::pair<std::size_t, std::size_t>, Eigen::VectorXd> edge_features;  // directed
  std::map<std::pair<std::size_t, std::size_t>, double> s_space;  // keys i < j

  bool has_edge(std::size_t i, std::size_t j) const;
  std::optional<double> score(std::size_t i, std::size_t j) const;
  std::vector<std::pair<std::size_t, std::size_t>> edges() const;  // i < j

  // Adds an undirected edge with the given i->j feature vector; j->i gets
  // the mirrored feature.
  void add_edge(std::size_t i, std::size_t j, Eigen::VectorXd e_ij, Eigen::VectorXd e_ji);
};

Eigen::VectorXd node_features(const Entity& e, const ReactionDocument& doc, int dim,
                              const chem::FingerprintConfig& fp = {});
Eigen::VectorXd edge_features(const Entity& from, const Entity& to, const ReactionDocument& doc);

// kNN (ties broken by index) united with all pairs closer than radius.
// Throws ConfigError when dim < kBaseFeatureDim.
SpatialGraph build_spatial_graph(const ReactionDocument& doc, const ReasoningConfig& config);

// layers applications of h_i <- relu(sum_j W1 h_j + W2 e_ij), then
// s_space = (1 + cos(h_i, h_j)) / 2 on every edge, 0.5 for zero vectors.
void propagate(SpatialGraph& graph, const GnnWeights& weights, int layers);

double shifted_cosine(const Eigen::VectorXd& a, const Eigen::VectorXd& b);

// ---- chemistry graph -----------------------------------------------------

// beta * s_fp + (1 - beta) * exp(-dq)
double f_chem(double s_fp, double dq, double beta);

inline constexpr double kNeutralScore = 0.5;

struct ChemPair {
  std::optional<double> s_fp;  // absent when either SMILES is missing/unparsed
  std::optional<int> dq;
  double e_chem = kNeutralScore;
};

struct ChemGraph {
  std::map<std::pair<std::size_t, std::size_t>, ChemPair> pairs;  // all molecule pairs, i < j
  double tau = 0.3;

  bool has_edge(std::size_t i, std::size_t j) const;  // e_chem > tau
  std::optional<double> score(std::size_t i, std::size_t j) const;
  std::vector<std::pair<std::size_t, std::size_t>> edges() const;
};

ChemGraph build_chem_graph(const ReactionDocument& doc, const ReasoningConfig& config);

// ---- clustering and hypotheses ------------------------------------------

// Single-link components under normalized centroid distance < tau_cluster,
// each listed in document order, ordered by their first member.
std::vector<std::vector<std::size_t>> cluster_entities(const ReactionDocument& doc,
                                                       const ReasoningConfig& config);

enum class EdgeRelation : int {
  kReactantToCond = 0,
  kCondToProduct = 1,
  kReactantToProduct = 2,
  kNoEdge = 3,
  kReactantToArrow = 5,
  kArrowToProduct = 6,
};
inline constexpr int kNumRelations = 4;
std::string_view to_string(EdgeRelation r);

struct HypothesisEdge {
  std::size_t from = 0;
  std::size_t to = 0;
  EdgeRelation relation = EdgeRelation::kNoEdge;
  double s_init = 1.0;

  bool operator==(const HypothesisEdge&) const = default;
};

struct ClusterFailure {
  std::size_t cluster = 0;
  std::string error_class;
  std::string message;
};

struct HypothesisGraph {
  std::vector<std::vector<std::size_t>> clusters;
  std::vector<HypothesisEdge> edges;  // deduplicated, highest s_init kept
  std::vector<std::string> warnings;
  std::vector<ClusterFailure> failures;
};

// Node listing sent to the combiner for one cluster.
std::string render_cluster_graph(const ReactionDocument& doc, const std::vector<std::size_t>& cluster);

// Typed edges implied by combiner reactions; edges leaving the cluster are
// dropped with a warning.
std::vector<HypothesisEdge> edges_from_reactions(const std::vector<Reaction>& reactions,
                                                 const ReactionDocument& doc,
                                                 const std::vector<std::size_t>& cluster,
                                                 SInitMode mode,
                                                 std::vector<std::string>& warnings);

// One combiner request per cluster (up to config.max_parallel at a time).
// Malformed or unresolvable responses are recorded per cluster; backend and
// fixture errors propagate.
HypothesisGraph collect_hypotheses(const std::vector<std::vector<std::size_t>>& clusters,
                                   AgentClient& client, const ReactionDocument& doc,
                                   const ReasoningConfig& config, std::string_view image = {});

// ---- fusion ---------------------------------------------------------------

struct FusionWeights {
  double space = 0.3;
  double chem = 0.2;
  double init = 0.5;

  // Throws WeightError unless all >= 0 and the sum is 1 within 1e-9.
  void validate() const;
};

double fuse_score(const FusionWeights& alpha, double s_space, double s_chem, double s_init);

struct FusedEdge {
  std::size_t from = 0;  // for kNoEdge, from < to
  std::size_t to = 0;
  EdgeRelation relation = EdgeRelation::kNoEdge;
  double s_space = kNeutralScore;
  double s_chem = kNeutralScore;
  double s_init = 0.0;
  double s_fuse = 0.0;
};

struct FusedGraph {
  std::size_t node_count = 0;
  std::vector<FusedEdge> edges;   // s_fuse > tau
  std::vector<FusedEdge> pruned;  // s_fuse <= tau
  FusionWeights alpha;
  double tau = 0.45;
};

FusedGraph fuse(const SpatialGraph& spatial, const ChemGraph& chem, const HypothesisGraph& hyp,
                const FusionWeights& alpha, double tau_fuse);

// ---- inference ------------------------------------------------------------

enum class Role { kReactant, kProduct, kCondition };

struct RoleOption {
  std::size_t arrow_group = 0;  // index into InferenceComponent::arrow_groups
  Role role = Role::kProduct;
};

struct InferenceComponent {
  std::vector<std::size_t> members;                   // document indices, sorted
  std::vector<std::vector<std::size_t>> arrow_groups;  // chained arrows, tail to head
  std::vector<std::vector<std::size_t>> reactants;     // per group, shared
  std::vector<std::size_t> contested;                  // entities with exclusive options
  std::vector<std::vector<RoleOption>> options;        // per contested entity
};

struct InferenceProblem {
  std::size_t node_count = 0;
  std::vector<std::vector<double>> weight;  // summed retained s_fuse between node pairs
  std::vector<InferenceComponent> components;
  std::vector<std::vector<std::size_t>> arrowless;  // connected, no arrows
};

// choice[k] is an index into options[k], or -1 for "unassigned".
using Assignment = std::vector<int>;

// Groups of collinear arrows that follow each other with no entity between.
std::vector<std::vector<std::size_t>> chain_arrows(const ReactionDocument& doc,
                                                   const ReasoningConfig& config);

InferenceProblem build_inference_problem(const FusedGraph& fused, const ReactionDocument& doc,
                                         const ReasoningConfig& config);

// Sum over arrow groups of the fused weight induced among the group's members.
double assignment_score(const InferenceProblem& problem, const InferenceComponent& component,
                        const Assignment& assignment);

// Exact branch-and-bound search when the component has at most exact_limit
// members, greedy otherwise.
Assignment solve_component(const InferenceProblem& problem, const InferenceComponent& component,
                           int exact_limit);

std::vector<Reaction> infer_reactions(const FusedGraph& fused, const ReactionDocument& doc,
                                      const ReasoningConfig& config);

// ---- post-processing ------------------------------------------------------

std::vector<Reaction> post_process(std::vector<Reaction> reactions, const ReactionDocument& doc,
                                   const ReasoningConfig& config);

// Sorts members top-left first and reactions by score, highest first.
void order_reactions(std::vector<Reaction>& reactions, const ReactionDocument& doc);

// ---- full pass --------------------------------------------------------------

struct ReasoningResult {
  std::vector<Reaction> reactions;
  HypothesisGraph hypotheses;
  std::size_t fused_edges = 0;
  std::map<std::string, double> stage_ms;
};

ReasoningResult run_reasoning(const ReactionDocument& doc, const ReasoningConfig& config,
                              const GnnWeights& weights, AgentClient& client,
                              std::string_view image = {});

}  // namespace rxn

#endif  // RXN_REASONING_H_
