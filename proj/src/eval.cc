#include "rxn/eval.h"

#include <algorithm>
#include <fstream>
#include <limits>
#include <queue>
#include <set>
#include <sstream>

#include <fmt/format.h>

#include "json_util.h"
#include "rxn/errors.h"

namespace rxn {
namespace {

constexpr std::size_t kNil = std::numeric_limits<std::size_t>::max();

class HopcroftKarp {
 public:
  HopcroftKarp(const std::vector<std::vector<std::size_t>>& adj, std::size_t right)
      : adj_(adj), match_l_(adj.size(), kNil), match_r_(right, kNil), dist_(adj.size()) {}

  std::size_t run() {
    std::size_t size = 0;
    while (bfs()) {
      for (std::size_t l = 0; l < adj_.size(); ++l) {
        if (match_l_[l] == kNil && dfs(l)) ++size;
      }
    }
    return size;
  }

 private:
  bool bfs() {
    std::queue<std::size_t> q;
    bool found = false;
    for (std::size_t l = 0; l < adj_.size(); ++l) {
      dist_[l] = match_l_[l] == kNil ? 0 : kNil;
      if (match_l_[l] == kNil) q.push(l);
    }
    while (!q.empty()) {
      const std::size_t l = q.front();
      q.pop();
      for (std::size_t r : adj_[l]) {
        const std::size_t next = match_r_[r];
        if (next == kNil) {
          found = true;
        } else if (dist_[next] == kNil) {
          dist_[next] = dist_[l] + 1;
          q.push(next);
        }
      }
    }
    return found;
  }

  bool dfs(std::size_t l) {
    for (std::size_t r : adj_[l]) {
      const std::size_t next = match_r_[r];
      if (next == kNil || (dist_[next] == dist_[l] + 1 && dfs(next))) {
        match_l_[l] = r;
        match_r_[r] = l;
        return true;
      }
    }
    dist_[l] = kNil;
    return false;
  }

  const std::vector<std::vector<std::size_t>>& adj_;
  std::vector<std::size_t> match_l_;
  std::vector<std::size_t> match_r_;
  std::vector<std::size_t> dist_;
};

// Pairs need the same label as well as overlapping boxes, so a hard match
// restricted to molecules is itself a soft match.
bool role_matches(const std::vector<LabeledRegion>& pred, const std::vector<LabeledRegion>& gt,
                  const EvalOptions& opts) {
  if (pred.size() != gt.size()) return false;
  std::vector<std::vector<std::size_t>> adj(gt.size());
  for (std::size_t g = 0; g < gt.size(); ++g) {
    for (std::size_t p = 0; p < pred.size(); ++p) {
      if (pred[p].kind == gt[g].kind && entities_match(pred[p].region, gt[g].region, opts)) {
        adj[g].push_back(p);
      }
    }
  }
  return max_matching_size(adj, pred.size()) == gt.size();
}

std::vector<LabeledRegion> molecules_only(const std::vector<LabeledRegion>& v) {
  std::vector<LabeledRegion> out;
  for (const LabeledRegion& r : v) {
    if (r.kind == EntityKind::kMolecule) out.push_back(r);
  }
  return out;
}

std::string read_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ConfigError("cannot open " + path.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

std::optional<LayoutClass> layout_field(const detail::json& j, const std::string& where) {
  if (!j.contains("layout") || j["layout"].is_null()) return std::nullopt;
  if (!j["layout"].is_string()) throw SchemaError(where + "/layout", "layout must be a string");
  auto l = parse_layout_class(j["layout"].get<std::string>());
  if (!l) throw SchemaError(where + "/layout", "unknown layout \"" + j["layout"].get<std::string>() + "\"");
  return l;
}

detail::ordered_json prf_json(const Prf& p) {
  detail::ordered_json j;
  j["precision"] = p.precision;
  j["recall"] = p.recall;
  j["f1"] = p.f1;
  j["gt"] = p.gt;
  j["pred"] = p.pred;
  j["matched"] = p.matched;
  return j;
}

}  // namespace

std::string_view to_string(MatchCriterion c) { return c == MatchCriterion::kHard ? "hard" : "soft"; }

std::optional<MatchCriterion> parse_match_criterion(std::string_view s) {
  if (s == "hard") return MatchCriterion::kHard;
  if (s == "soft") return MatchCriterion::kSoft;
  return std::nullopt;
}

bool entities_match(const geom::Region& a, const geom::Region& b, const EvalOptions& opts) {
  return geom::iou(a, b, opts.iou_mode) > opts.threshold;
}

std::size_t max_matching_size(const std::vector<std::vector<std::size_t>>& adjacency,
                              std::size_t right_count) {
  return HopcroftKarp(adjacency, right_count).run();
}

std::vector<std::pair<std::size_t, std::size_t>> lexicographic_max_matching(
    const std::vector<std::vector<std::size_t>>& adjacency, std::size_t right_count) {
  std::vector<std::vector<std::size_t>> adj = adjacency;
  for (auto& row : adj) std::sort(row.begin(), row.end());
  std::size_t target = max_matching_size(adj, right_count);
  std::vector<std::pair<std::size_t, std::size_t>> pairs;
  std::vector<bool> right_used(right_count, false);
  // Fix pairs greedily, smallest first, keeping a maximum matching reachable.
  for (std::size_t l = 0; l < adj.size() && target > 0; ++l) {
    for (std::size_t r : adj[l]) {
      if (right_used[r]) continue;
      std::vector<std::vector<std::size_t>> rest(adj.size());
      for (std::size_t l2 = l + 1; l2 < adj.size(); ++l2) {
        for (std::size_t r2 : adj[l2]) {
          if (!right_used[r2] && r2 != r) rest[l2].push_back(r2);
        }
      }
      if (max_matching_size(rest, right_count) == target - 1) {
        pairs.emplace_back(l, r);
        right_used[r] = true;
        --target;
        break;
      }
    }
    // When no pair for l keeps the optimum, l stays unmatched.
  }
  return pairs;
}

bool reaction_matches_hard(const ReactionRecord& pred, const ReactionRecord& gt,
                           const EvalOptions& opts) {
  return role_matches(pred.reactants, gt.reactants, opts) &&
         role_matches(pred.conditions, gt.conditions, opts) &&
         role_matches(pred.products, gt.products, opts);
}

bool reaction_matches_soft(const ReactionRecord& pred, const ReactionRecord& gt,
                           const EvalOptions& opts) {
  return role_matches(molecules_only(pred.reactants), molecules_only(gt.reactants), opts) &&
         role_matches(molecules_only(pred.products), molecules_only(gt.products), opts);
}

bool reactions_match(const ReactionRecord& pred, const ReactionRecord& gt, MatchCriterion c,
                     const EvalOptions& opts) {
  return c == MatchCriterion::kHard ? reaction_matches_hard(pred, gt, opts)
                                    : reaction_matches_soft(pred, gt, opts);
}

Prf Prf::from_counts(std::size_t gt, std::size_t pred, std::size_t matched) {
  Prf p;
  p.gt = gt;
  p.pred = pred;
  p.matched = matched;
  p.precision = pred == 0 ? 1.0 : static_cast<double>(matched) / static_cast<double>(pred);
  p.recall = gt == 0 ? 1.0 : static_cast<double>(matched) / static_cast<double>(gt);
  p.f1 = p.precision + p.recall == 0.0
             ? 0.0
             : 2.0 * p.precision * p.recall / (p.precision + p.recall);
  return p;
}

MatchReport score(std::span<const ReactionRecord> gt, std::span<const ReactionRecord> pred,
                  MatchCriterion criterion, const EvalOptions& opts) {
  std::vector<std::vector<std::size_t>> adj(gt.size());
  for (std::size_t g = 0; g < gt.size(); ++g) {
    for (std::size_t p = 0; p < pred.size(); ++p) {
      if (reactions_match(pred[p], gt[g], criterion, opts)) adj[g].push_back(p);
    }
  }
  MatchReport report;
  report.criterion = criterion;
  report.matched_pairs = lexicographic_max_matching(adj, pred.size());
  report.overall = Prf::from_counts(gt.size(), pred.size(), report.matched_pairs.size());
  return report;
}

MatchReport score_corpus(std::span<const std::pair<EvalDocument, EvalDocument>> pairs,
                         MatchCriterion criterion, const EvalOptions& opts) {
  struct Counts {
    std::size_t gt = 0, pred = 0, matched = 0;
  };
  Counts total;
  std::map<LayoutClass, Counts> layouts;
  for (const auto& [g, p] : pairs) {
    if (g.id != p.id) {
      throw AlignmentError("ground truth \"" + g.id + "\" paired with prediction \"" + p.id + "\"");
    }
    const MatchReport r = score(g.reactions, p.reactions, criterion, opts);
    for (Counts* c : {&total, g.layout ? &layouts[*g.layout] : nullptr}) {
      if (c == nullptr) continue;
      c->gt += r.overall.gt;
      c->pred += r.overall.pred;
      c->matched += r.overall.matched;
    }
  }
  MatchReport report;
  report.criterion = criterion;
  report.overall = Prf::from_counts(total.gt, total.pred, total.matched);
  for (const auto& [layout, c] : layouts) {
    report.per_layout[layout] = Prf::from_counts(c.gt, c.pred, c.matched);
  }
  return report;
}

std::vector<std::pair<EvalDocument, EvalDocument>> align_documents(std::vector<EvalDocument> gt,
                                                                   std::vector<EvalDocument> pred) {
  std::map<std::string, EvalDocument*> by_id;
  for (EvalDocument& p : pred) {
    if (!by_id.emplace(p.id, &p).second) throw AlignmentError("duplicate prediction id \"" + p.id + "\"");
  }
  std::vector<std::pair<EvalDocument, EvalDocument>> out;
  std::set<std::string> seen;
  for (EvalDocument& g : gt) {
    if (!seen.insert(g.id).second) throw AlignmentError("duplicate ground-truth id \"" + g.id + "\"");
    auto it = by_id.find(g.id);
    if (it == by_id.end()) throw AlignmentError("no prediction for document \"" + g.id + "\"");
    out.emplace_back(std::move(g), std::move(*it->second));
  }
  if (out.size() != pred.size()) {
    for (const auto& [id, _] : by_id) {
      if (!seen.count(id)) throw AlignmentError("prediction \"" + id + "\" has no ground truth");
    }
  }
  return out;
}

std::vector<EvalDocument> load_eval_input(const std::filesystem::path& path) {
  namespace fs = std::filesystem;
  std::vector<EvalDocument> docs;
  if (fs::is_directory(path)) {
    std::map<std::string, std::optional<LayoutClass>> layouts;
    const fs::path manifest = path / "manifest.json";
    if (fs::is_regular_file(manifest)) {
      const detail::json m = detail::json::parse(read_file(manifest), nullptr, false);
      if (m.is_discarded() || !m.is_object()) throw SchemaError("manifest.json", "not a JSON object");
      if (m.contains("documents") && m["documents"].is_array()) {
        for (std::size_t i = 0; i < m["documents"].size(); ++i) {
          const auto& d = m["documents"][i];
          if (d.is_object() && d.contains("id") && d["id"].is_string()) {
            layouts[d["id"].get<std::string>()] =
                layout_field(d, "manifest.json/documents/" + std::to_string(i));
          }
        }
      }
    }
    std::vector<fs::path> files;
    for (const auto& entry : fs::directory_iterator(path)) {
      if (entry.is_regular_file() && entry.path().extension() == ".json" &&
          entry.path().filename() != "manifest.json") {
        files.push_back(entry.path());
      }
    }
    std::sort(files.begin(), files.end());
    for (const fs::path& f : files) {
      EvalDocument d;
      d.id = f.stem().string();
      if (auto it = layouts.find(d.id); it != layouts.end()) d.layout = it->second;
      d.reactions = parse_reaction_records(read_file(f));
      docs.push_back(std::move(d));
    }
    return docs;
  }

  const std::string text = read_file(path);
  const detail::json j = detail::json::parse(text, nullptr, false);
  if (j.is_discarded()) throw SchemaError(path.string(), "not valid JSON");
  if (j.is_array()) {
    docs.push_back({path.stem().string(), std::nullopt, parse_reaction_records(text)});
    return docs;
  }
  if (!j.is_object() || !j.contains("documents") || !j["documents"].is_array()) {
    throw SchemaError(path.string(), "expected a reaction array or {\"documents\": [...]}");
  }
  for (std::size_t i = 0; i < j["documents"].size(); ++i) {
    const auto& d = j["documents"][i];
    const std::string at = "/documents/" + std::to_string(i);
    if (!d.is_object() || !d.contains("id") || !d["id"].is_string()) {
      throw SchemaError(at, "document needs a string id");
    }
    if (!d.contains("reactions")) throw SchemaError(at, "document needs reactions");
    docs.push_back({d["id"].get<std::string>(), layout_field(d, at),
                    parse_reaction_records(d["reactions"].dump())});
  }
  return docs;
}

std::string report_to_json(const std::vector<MatchReport>& reports, const EvalOptions& opts) {
  detail::ordered_json root;
  root["iou_threshold"] = opts.threshold;
  root["iou_mode"] = opts.iou_mode == geom::IouMode::kPolygon ? "polygon" : "axis_hull";
  for (const MatchReport& r : reports) {
    detail::ordered_json j = prf_json(r.overall);
    if (!r.matched_pairs.empty()) {
      detail::ordered_json pairs = detail::ordered_json::array();
      for (const auto& [g, p] : r.matched_pairs) pairs.push_back({g, p});
      j["matched_pairs"] = pairs;
    }
    if (!r.per_layout.empty()) {
      detail::ordered_json layouts = detail::ordered_json::object();
      for (const auto& [layout, prf] : r.per_layout) layouts[std::string(to_string(layout))] = prf_json(prf);
      j["per_layout"] = layouts;
    }
    root[std::string(to_string(r.criterion))] = j;
  }
  return root.dump(2) + "\n";
}

std::string format_report_table(const std::vector<MatchReport>& reports, bool per_layout) {
  std::string out = fmt::format("{:<14}", "");
  std::string header = fmt::format("{:<14}", "Layout");
  for (const MatchReport& r : reports) {
    out += fmt::format("{:<24}", r.criterion == MatchCriterion::kHard ? "Hard Match" : "Soft Match");
    header += fmt::format("{:>7} {:>7} {:>7}   ", "P", "R", "F1");
  }
  out = out.substr(0, out.find_last_not_of(' ') + 1) + "\n";
  out += header.substr(0, header.find_last_not_of(' ') + 1) + "\n";
  auto row = [&](const std::string& name, auto&& pick) {
    std::string line = fmt::format("{:<14}", name);
    for (const MatchReport& r : reports) {
      const Prf* p = pick(r);
      if (p == nullptr) {
        line += fmt::format("{:>7} {:>7} {:>7}   ", "-", "-", "-");
      } else {
        line += fmt::format("{:>7.1f} {:>7.1f} {:>7.1f}   ", 100 * p->precision, 100 * p->recall,
                            100 * p->f1);
      }
    }
    out += line.substr(0, line.find_last_not_of(' ') + 1) + "\n";
  };
  row("overall", [](const MatchReport& r) { return &r.overall; });
  if (per_layout) {
    std::set<LayoutClass> present;
    for (const MatchReport& r : reports) {
      for (const auto& [l, _] : r.per_layout) present.insert(l);
    }
    for (LayoutClass l : present) {
      row(std::string(to_string(l)), [l](const MatchReport& r) -> const Prf* {
        auto it = r.per_layout.find(l);
        return it == r.per_layout.end() ? nullptr : &it->second;
      });
    }
  }
  return out;
}

}  // namespace rxn
