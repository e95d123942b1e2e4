// Box-based reaction evaluation: entity matching by IoU, hard and soft
// reaction matching, maximum set matching and precision / recall / F1.

#ifndef RXN_EVAL_H_
#define RXN_EVAL_H_

#include <filesystem>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "rxn/document.h"
#include "rxn/geometry.h"
#include "rxn/reaction.h"

namespace rxn {

enum class MatchCriterion { kHard, kSoft };
std::string_view to_string(MatchCriterion c);
std::optional<MatchCriterion> parse_match_criterion(std::string_view s);

inline constexpr double kEntityIouThreshold = 0.5;

struct EvalOptions {
  double threshold = kEntityIouThreshold;
  geom::IouMode iou_mode = geom::IouMode::kPolygon;
};

// IoU strictly greater than the threshold.
bool entities_match(const geom::Region& a, const geom::Region& b, const EvalOptions& opts = {});

// Maximum bipartite matching (Hopcroft-Karp). adjacency[l] lists the right
// vertices of left vertex l. Returns the matching size.
std::size_t max_matching_size(const std::vector<std::vector<std::size_t>>& adjacency,
                              std::size_t right_count);

// A maximum matching whose pair list is lexicographically smallest when
// sorted by (left, right).
std::vector<std::pair<std::size_t, std::size_t>> lexicographic_max_matching(
    const std::vector<std::vector<std::size_t>>& adjacency, std::size_t right_count);

// Reactants, conditions and products each match one-to-one.
bool reaction_matches_hard(const ReactionRecord& pred, const ReactionRecord& gt,
                           const EvalOptions& opts = {});
// Molecule reactants and molecule products each match one-to-one; everything
// else is ignored.
bool reaction_matches_soft(const ReactionRecord& pred, const ReactionRecord& gt,
                           const EvalOptions& opts = {});
bool reactions_match(const ReactionRecord& pred, const ReactionRecord& gt, MatchCriterion c,
                     const EvalOptions& opts = {});

struct Prf {
  double precision = 1.0;  // 1.0 when nothing was predicted
  double recall = 1.0;     // 1.0 when there is nothing to find
  double f1 = 1.0;         // 0 when precision + recall = 0
  std::size_t gt = 0;
  std::size_t pred = 0;
  std::size_t matched = 0;

  static Prf from_counts(std::size_t gt, std::size_t pred, std::size_t matched);
};

struct MatchReport {
  MatchCriterion criterion = MatchCriterion::kHard;
  Prf overall;
  std::vector<std::pair<std::size_t, std::size_t>> matched_pairs;  // (gt, pred)
  std::map<LayoutClass, Prf> per_layout;
};

MatchReport score(std::span<const ReactionRecord> gt, std::span<const ReactionRecord> pred,
                  MatchCriterion criterion, const EvalOptions& opts = {});

struct EvalDocument {
  std::string id;
  std::optional<LayoutClass> layout;
  std::vector<ReactionRecord> reactions;
};

// Micro-averaged over documents, with per-layout sub-reports keyed by the
// ground-truth layout. Throws AlignmentError when paired ids differ.
MatchReport score_corpus(std::span<const std::pair<EvalDocument, EvalDocument>> pairs,
                         MatchCriterion criterion, const EvalOptions& opts = {});

// Pairs documents by id. Throws AlignmentError when the id sets differ.
std::vector<std::pair<EvalDocument, EvalDocument>> align_documents(
    std::vector<EvalDocument> gt, std::vector<EvalDocument> pred);

// A reaction array file (document id = file stem), a
// {"documents": [{"id", "layout", "reactions"}]} file, or a directory of
// reaction array files with an optional manifest.json carrying layouts.
std::vector<EvalDocument> load_eval_input(const std::filesystem::path& path);

std::string report_to_json(const std::vector<MatchReport>& reports, const EvalOptions& opts);
// Precision / recall / F1 percentages, one column group per criterion and
// one row per layout present (after the overall row).
std::string format_report_table(const std::vector<MatchReport>& reports, bool per_layout);

}  // namespace rxn

#endif  // RXN_EVAL_H_
