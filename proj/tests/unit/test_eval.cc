#include <algorithm>
#include <filesystem>
#include <functional>
#include <numeric>
#include <string>

#include <doctest.h>
#include <json.hpp>

#include "generators.h"
#include "rxn/errors.h"
#include "rxn/eval.h"
#include "synthetic.h"

using namespace rxn;
namespace fs = std::filesystem;
using rxn::testing::EntityPool;
using rxn::testing::Rng;
using rxn::testing::uniform_int;

namespace {

LabeledRegion mol(double x0, double y0, double x1, double y1) {
  return {EntityKind::kMolecule, geom::AxisBox(x0, y0, x1, y1)};
}
LabeledRegion txt(double x0, double y0, double x1, double y1) {
  return {EntityKind::kText, geom::AxisBox(x0, y0, x1, y1)};
}
LabeledRegion arrow(double x0, double y0, double x1, double y1) {
  return {EntityKind::kArrow,
          geom::OrientedQuad({geom::Point{x0, y1}, {x1, y1}, {x1, y0}, {x0, y0}})};
}

ReactionRecord example() {
  ReactionRecord r;
  r.reactants = {mol(38, 2, 434, 234)};
  r.products = {mol(912, 14, 1309, 231)};
  r.conditions = {txt(515, 66, 855, 126), txt(577, 172, 780, 223)};
  r.arrows = {arrow(513, 130, 880, 155)};
  return r;
}

// Perfect one-to-one matching of two entity lists by trying every
// permutation (lists here are short).
bool side_matches(const std::vector<LabeledRegion>& p, const std::vector<LabeledRegion>& g,
                  bool need_kind) {
  if (p.size() != g.size()) return false;
  std::vector<std::size_t> perm(p.size());
  std::iota(perm.begin(), perm.end(), 0);
  do {
    bool ok = true;
    for (std::size_t i = 0; i < p.size() && ok; ++i) {
      const auto& a = p[i];
      const auto& b = g[perm[i]];
      ok = (!need_kind || a.kind == b.kind) && geom::iou(a.region, b.region) > 0.5;
    }
    if (ok) return true;
  } while (std::next_permutation(perm.begin(), perm.end()));
  return false;
}

std::vector<LabeledRegion> molecules(const std::vector<LabeledRegion>& side) {
  std::vector<LabeledRegion> out;
  for (const auto& e : side) {
    if (e.kind == EntityKind::kMolecule) out.push_back(e);
  }
  return out;
}

bool oracle_match(const ReactionRecord& p, const ReactionRecord& g, MatchCriterion c) {
  if (c == MatchCriterion::kHard) {
    return side_matches(p.reactants, g.reactants, true) &&
           side_matches(p.conditions, g.conditions, true) &&
           side_matches(p.products, g.products, true);
  }
  return side_matches(molecules(p.reactants), molecules(g.reactants), true) &&
         side_matches(molecules(p.products), molecules(g.products), true);
}

// Largest injective pairing between gt and pred under `ok`, by enumeration.
std::size_t brute_matching(std::size_t n_gt, std::size_t n_pred,
                           const std::function<bool(std::size_t, std::size_t)>& ok) {
  std::vector<bool> used(n_pred, false);
  std::function<std::size_t(std::size_t)> go = [&](std::size_t i) -> std::size_t {
    if (i == n_gt) return 0;
    std::size_t best = go(i + 1);
    for (std::size_t j = 0; j < n_pred; ++j) {
      if (used[j] || !ok(i, j)) continue;
      used[j] = true;
      best = std::max(best, 1 + go(i + 1));
      used[j] = false;
    }
    return best;
  };
  return go(0);
}

}  // namespace

TEST_CASE("entity matching threshold") {
  CHECK(entities_match(geom::AxisBox(0, 0, 10, 10), geom::AxisBox(0, 0, 10, 10)));
  // IoU exactly one half: 100 / 200.
  CHECK_FALSE(entities_match(geom::AxisBox(0, 0, 10, 10), geom::AxisBox(0, 0, 10, 20)));
  // Just over.
  CHECK(entities_match(geom::AxisBox(0, 0, 10, 10), geom::AxisBox(0, 0, 10, 19.9)));
  // IoU 1/3.
  CHECK_FALSE(entities_match(geom::AxisBox(0, 0, 10, 10), geom::AxisBox(5, 0, 15, 10)));
  EvalOptions loose;
  loose.threshold = 0.3;
  CHECK(entities_match(geom::AxisBox(0, 0, 10, 10), geom::AxisBox(5, 0, 15, 10), loose));
}

TEST_CASE("hard and soft reaction matching") {
  const ReactionRecord gt = example();
  CHECK(reaction_matches_hard(gt, gt));
  CHECK(reaction_matches_soft(gt, gt));

  SUBCASE("a missing condition breaks only the hard criterion") {
    ReactionRecord p = gt;
    p.conditions.pop_back();
    CHECK_FALSE(reaction_matches_hard(p, gt));
    CHECK(reaction_matches_soft(p, gt));
  }
  SUBCASE("a reactant at IoU 0.4 fails both") {
    ReactionRecord p = gt;
    // 396 wide, 232 tall, stretched to 580 tall: IoU = 232 / 580 = 0.4.
    p.reactants = {mol(38, 2, 434, 582)};
    CHECK(geom::iou(p.reactants[0].region, gt.reactants[0].region) == doctest::Approx(0.4));
    CHECK_FALSE(reaction_matches_hard(p, gt));
    CHECK_FALSE(reaction_matches_soft(p, gt));
  }
  SUBCASE("different condition boxes are fine for soft") {
    ReactionRecord p = gt;
    p.conditions = {txt(0, 0, 5, 5)};
    CHECK_FALSE(reaction_matches_hard(p, gt));
    CHECK(reaction_matches_soft(p, gt));
  }
  SUBCASE("a different product fails both") {
    ReactionRecord p = gt;
    p.products = {mol(600, 14, 900, 231)};
    CHECK_FALSE(reaction_matches_hard(p, gt));
    CHECK_FALSE(reaction_matches_soft(p, gt));
  }
  SUBCASE("an extra text reactant is ignored by soft only") {
    ReactionRecord p = gt;
    p.reactants.push_back(txt(0, 0, 30, 30));
    CHECK_FALSE(reaction_matches_hard(p, gt));
    CHECK(reaction_matches_soft(p, gt));
  }
  SUBCASE("arrows play no part") {
    ReactionRecord p = gt;
    p.arrows.clear();
    CHECK(reaction_matches_hard(p, gt));
  }
  SUBCASE("matching is one-to-one") {
    ReactionRecord g2 = gt;
    g2.reactants = {mol(0, 0, 10, 10), mol(1, 0, 11, 10)};
    ReactionRecord p = g2;
    p.reactants = {mol(0, 0, 10, 10), mol(0.5, 0, 10.5, 10)};
    CHECK(reaction_matches_hard(p, g2));
    p.reactants = {mol(0, 0, 10, 10)};
    CHECK_FALSE(reaction_matches_hard(p, g2));
  }
}

TEST_CASE("reaction predicates agree with a permutation oracle") {
  Rng rng(5);
  int hard_true = 0;
  int soft_true = 0;
  for (int trial = 0; trial < 3000; ++trial) {
    const EntityPool pool = EntityPool::make(rng, 8);
    const ReactionRecord g = rxn::testing::random_record(rng, pool);
    const ReactionRecord p = uniform_int(rng, 0, 1) ? rxn::testing::perturb(g, rng, pool)
                                                    : rxn::testing::random_record(rng, pool);
    const bool hard = reaction_matches_hard(p, g);
    const bool soft = reaction_matches_soft(p, g);
    CHECK(hard == oracle_match(p, g, MatchCriterion::kHard));
    CHECK(soft == oracle_match(p, g, MatchCriterion::kSoft));
    if (hard) CHECK(soft);
    hard_true += hard;
    soft_true += soft;
  }
  CHECK(hard_true > 100);
  CHECK(soft_true > hard_true);
}

TEST_CASE("bipartite matching") {
  CHECK(max_matching_size({}, 0) == 0);
  CHECK(max_matching_size({{0}, {0}}, 1) == 1);
  // Greedy on left 0 would take right 0 and strand left 1.
  CHECK(max_matching_size({{0, 1}, {0}}, 2) == 2);
  const auto pairs = lexicographic_max_matching({{0, 1}, {0, 1}}, 2);
  CHECK(pairs == std::vector<std::pair<std::size_t, std::size_t>>{{0, 0}, {1, 1}});
  const auto forced = lexicographic_max_matching({{0, 1}, {0}}, 2);
  CHECK(forced == std::vector<std::pair<std::size_t, std::size_t>>{{0, 1}, {1, 0}});

  Rng rng(12);
  for (int trial = 0; trial < 500; ++trial) {
    const std::size_t l = static_cast<std::size_t>(uniform_int(rng, 0, 6));
    const std::size_t r = static_cast<std::size_t>(uniform_int(rng, 0, 6));
    std::vector<std::vector<std::size_t>> adj(l);
    for (std::size_t i = 0; i < l; ++i) {
      for (std::size_t j = 0; j < r; ++j) {
        if (uniform_int(rng, 0, 2) == 0) adj[i].push_back(j);
      }
    }
    const std::size_t expect = brute_matching(l, r, [&](std::size_t i, std::size_t j) {
      return std::count(adj[i].begin(), adj[i].end(), j) > 0;
    });
    CHECK(max_matching_size(adj, r) == expect);
    const auto lex = lexicographic_max_matching(adj, r);
    CHECK(lex.size() == expect);
    std::vector<bool> used(r, false);
    for (const auto& [i, j] : lex) {
      CHECK(std::count(adj[i].begin(), adj[i].end(), j) == 1);
      CHECK_FALSE(used[j]);
      used[j] = true;
    }
    CHECK(std::is_sorted(lex.begin(), lex.end()));
  }
}

TEST_CASE("precision, recall, F1") {
  const Prf a = Prf::from_counts(2, 3, 2);
  CHECK(a.precision == doctest::Approx(2.0 / 3));
  CHECK(a.recall == doctest::Approx(1.0));
  CHECK(a.f1 == doctest::Approx(0.8));
  const Prf empty_pred = Prf::from_counts(3, 0, 0);
  CHECK(empty_pred.precision == 1.0);
  CHECK(empty_pred.recall == 0.0);
  CHECK(empty_pred.f1 == 0.0);
  const Prf nothing = Prf::from_counts(0, 0, 0);
  CHECK(nothing.precision == 1.0);
  CHECK(nothing.recall == 1.0);
  CHECK(nothing.f1 == 1.0);
  const Prf none_right = Prf::from_counts(2, 2, 0);
  CHECK(none_right.f1 == 0.0);
}

TEST_CASE("set scoring") {
  const ReactionRecord r1 = example();
  ReactionRecord r2;
  r2.reactants = {txt(246, 48, 370, 99), {EntityKind::kIdentifier, geom::AxisBox(482, 48, 540, 96)}};
  r2.products = {mol(837, 9, 1095, 132)};
  r2.conditions = {txt(597, 3, 759, 50), txt(592, 87, 767, 137)};
  const std::vector<ReactionRecord> gt = {r1, r2};

  SUBCASE("identical sets in any order") {
    const std::vector<ReactionRecord> pred = {r2, r1};
    for (MatchCriterion c : {MatchCriterion::kHard, MatchCriterion::kSoft}) {
      const MatchReport rep = score(gt, pred, c);
      CHECK(rep.overall.precision == 1.0);
      CHECK(rep.overall.recall == 1.0);
      CHECK(rep.overall.f1 == 1.0);
    }
    const MatchReport rep = score(gt, pred, MatchCriterion::kHard);
    CHECK(rep.matched_pairs == std::vector<std::pair<std::size_t, std::size_t>>{{0, 1}, {1, 0}});
  }
  SUBCASE("one extra prediction") {
    ReactionRecord extra;
    extra.reactants = {mol(0, 0, 5, 5)};
    extra.products = {mol(10, 10, 15, 15)};
    const MatchReport rep = score(gt, std::vector<ReactionRecord>{r1, extra, r2}, MatchCriterion::kHard);
    CHECK(rep.overall.matched == 2);
    CHECK(rep.overall.precision == doctest::Approx(2.0 / 3));
    CHECK(rep.overall.f1 == doctest::Approx(0.8));
  }
  SUBCASE("dropping a condition splits hard from soft") {
    ReactionRecord p1 = r1;
    p1.conditions.pop_back();
    const std::vector<ReactionRecord> pred = {p1};
    const std::vector<ReactionRecord> one = {r1};
    CHECK(score(one, pred, MatchCriterion::kHard).overall.f1 == 0.0);
    CHECK(score(one, pred, MatchCriterion::kSoft).overall.f1 == 1.0);
  }
  SUBCASE("empty prediction") {
    const MatchReport rep = score(gt, {}, MatchCriterion::kHard);
    CHECK(rep.overall.precision == 1.0);
    CHECK(rep.overall.recall == 0.0);
    CHECK(rep.overall.f1 == 0.0);
  }
}

TEST_CASE("set scoring properties") {
  Rng rng(77);
  for (int trial = 0; trial < 400; ++trial) {
    const EntityPool pool = EntityPool::make(rng, 10);
    std::vector<ReactionRecord> gt, pred;
    const int ng = uniform_int(rng, 0, 6);
    for (int i = 0; i < ng; ++i) gt.push_back(rxn::testing::random_record(rng, pool));
    for (const auto& g : gt) {
      if (uniform_int(rng, 0, 3)) pred.push_back(rxn::testing::perturb(g, rng, pool));
    }
    while (pred.size() < 6 && uniform_int(rng, 0, 2) == 0) {
      pred.push_back(rxn::testing::random_record(rng, pool));
    }
    std::shuffle(pred.begin(), pred.end(), rng);

    for (MatchCriterion c : {MatchCriterion::kHard, MatchCriterion::kSoft}) {
      const MatchReport rep = score(gt, pred, c);
      // Maximum matching against enumeration.
      const std::size_t expect = brute_matching(gt.size(), pred.size(), [&](std::size_t i, std::size_t j) {
        return oracle_match(pred[j], gt[i], c);
      });
      CHECK(rep.overall.matched == expect);
      CHECK(rep.matched_pairs.size() == expect);
      for (const auto& [g, p] : rep.matched_pairs) CHECK(reactions_match(pred[p], gt[g], c));

      // Reordering either side changes nothing.
      auto gt2 = gt;
      auto pred2 = pred;
      std::shuffle(gt2.begin(), gt2.end(), rng);
      std::shuffle(pred2.begin(), pred2.end(), rng);
      const MatchReport shuffled = score(gt2, pred2, c);
      CHECK(shuffled.overall.matched == rep.overall.matched);
      CHECK(shuffled.overall.f1 == rep.overall.f1);

      // Adding a correct prediction never lowers recall.
      if (!gt.empty()) {
        auto more = pred;
        more.push_back(gt[static_cast<std::size_t>(uniform_int(rng, 0, ng - 1))]);
        CHECK(score(gt, more, c).overall.recall >= rep.overall.recall);
      }
      // Adding a prediction that matches nothing never raises precision.
      ReactionRecord junk;
      junk.reactants = {mol(5000, 5000, 5001, 5001)};
      junk.products = {mol(6000, 6000, 6001, 6001)};
      auto worse = pred;
      worse.push_back(junk);
      CHECK(score(gt, worse, c).overall.precision <= rep.overall.precision);
    }
    CHECK(score(gt, pred, MatchCriterion::kSoft).overall.f1 >=
          score(gt, pred, MatchCriterion::kHard).overall.f1);
  }
}

TEST_CASE("corpus scoring") {
  const ReactionRecord r1 = example();
  ReactionRecord r2 = r1;
  r2.products = {mol(700, 300, 900, 500)};

  SUBCASE("micro-average over documents") {
    std::vector<std::pair<EvalDocument, EvalDocument>> pairs = {
        {{"a", LayoutClass::kSingleLine, {r1, r2}}, {"a", LayoutClass::kSingleLine, {r1, r2}}},
        {{"b", LayoutClass::kTree, {r1, r2}}, {"b", LayoutClass::kTree, {}}}};
    const MatchReport rep = score_corpus(pairs, MatchCriterion::kHard);
    CHECK(rep.overall.precision == 1.0);
    CHECK(rep.overall.recall == doctest::Approx(0.5));
    CHECK(rep.overall.f1 == doctest::Approx(2.0 / 3));
    REQUIRE(rep.per_layout.size() == 2);
    CHECK(rep.per_layout.at(LayoutClass::kSingleLine).f1 == 1.0);
    CHECK(rep.per_layout.at(LayoutClass::kTree).recall == 0.0);
  }
  SUBCASE("a single perfect document") {
    std::vector<std::pair<EvalDocument, EvalDocument>> pairs = {
        {{"a", LayoutClass::kGraph, {r1}}, {"a", std::nullopt, {r1}}}};
    const MatchReport rep = score_corpus(pairs, MatchCriterion::kSoft);
    CHECK(rep.overall.f1 == 1.0);
    REQUIRE(rep.per_layout.size() == 1);
    CHECK(rep.per_layout.at(LayoutClass::kGraph).f1 == 1.0);
  }
  SUBCASE("alignment by id") {
    std::vector<EvalDocument> gt = {{"x", std::nullopt, {r1}}, {"y", std::nullopt, {r2}}};
    std::vector<EvalDocument> pred = {{"y", std::nullopt, {r2}}, {"x", std::nullopt, {r1}}};
    const auto aligned = align_documents(gt, pred);
    REQUIRE(aligned.size() == 2);
    for (const auto& [g, p] : aligned) CHECK(g.id == p.id);
    pred[0].id = "z";
    CHECK_THROWS_AS(align_documents(gt, pred), AlignmentError);
    std::vector<std::pair<EvalDocument, EvalDocument>> bad = {{gt[0], pred[0]}};
    CHECK_THROWS_AS(score_corpus(bad, MatchCriterion::kHard), AlignmentError);
  }
}

TEST_CASE("evaluation inputs and reports") {
  const fs::path dir = fs::temp_directory_path() / "rxn_eval_inputs";
  fs::remove_all(dir);
  fs::create_directories(dir / "gt");
  const std::vector<ReactionRecord> one = {example()};
  rxn::testing::write_text(dir / "gt" / "d1.json", write_reaction_records(one));
  rxn::testing::write_text(dir / "gt" / "d2.json", "[]");
  rxn::testing::write_text(dir / "gt" / "manifest.json",
                           R"({"documents": [{"id": "d1", "layout": "tree"}]})");
  const auto docs = load_eval_input(dir / "gt");
  REQUIRE(docs.size() == 2);
  const auto d1 = std::find_if(docs.begin(), docs.end(), [](const EvalDocument& d) { return d.id == "d1"; });
  REQUIRE(d1 != docs.end());
  CHECK(d1->layout == LayoutClass::kTree);
  CHECK(d1->reactions == one);

  const auto single = load_eval_input(dir / "gt" / "d1.json");
  REQUIRE(single.size() == 1);
  CHECK(single[0].id == "d1");

  rxn::testing::write_text(dir / "bundle.json", R"({"documents": [
    {"id": "d1", "layout": "graph", "reactions": []}]})");
  const auto bundle = load_eval_input(dir / "bundle.json");
  REQUIRE(bundle.size() == 1);
  CHECK(bundle[0].layout == LayoutClass::kGraph);

  const auto pairs = align_documents(docs, docs);
  std::vector<MatchReport> reports = {score_corpus(pairs, MatchCriterion::kHard),
                                      score_corpus(pairs, MatchCriterion::kSoft)};
  const auto j = nlohmann::json::parse(report_to_json(reports, {}));
  CHECK(j.dump().find("hard") != std::string::npos);
  CHECK(j.dump().find("soft") != std::string::npos);
  const std::string table = format_report_table(reports, true);
  CHECK(table.find("100.0") != std::string::npos);
  fs::remove_all(dir);
}
