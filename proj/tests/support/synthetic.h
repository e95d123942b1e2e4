// Synthetic diagrams for end-to-end tests: detection files with known
// reactions in each layout class, and the mock combiner answers that go
// with them.

#ifndef RXN_TESTS_SUPPORT_SYNTHETIC_H_
#define RXN_TESTS_SUPPORT_SYNTHETIC_H_

#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <vector>

#include "rxn/agent.h"
#include "rxn/document.h"
#include "rxn/reaction.h"
#include "rxn/reasoning.h"

namespace rxn::testing {

struct SyntheticDoc {
  std::string id;
  LayoutClass layout = LayoutClass::kSingleLine;
  std::string detections;  // detection file text
  std::vector<ReactionRecord> truth;
};

// n documents cycling through the four layout classes.
std::vector<SyntheticDoc> synthetic_batch(std::size_t n, std::uint64_t seed);

// Writes one reaction_expert answer per cluster the pipeline will ask about:
// the true reactions whose members all fall in that cluster.
void write_combiner_fixtures(const ReactionDocument& doc, std::span<const ReactionRecord> truth,
                             const PromptLibrary& prompts, const ReasoningConfig& config,
                             const std::filesystem::path& fixtures_dir);

// <root>/detections/<id>.json, <root>/truth/<id>.json (+ manifest.json with
// layouts) and fixtures under <root>/fixtures.
void write_batch(const std::filesystem::path& root, std::span<const SyntheticDoc> docs,
                 const PromptLibrary& prompts, const ReasoningConfig& config);

std::string read_text(const std::filesystem::path& p);
void write_text(const std::filesystem::path& p, std::string_view text);

}  // namespace rxn::testing

#endif  // RXN_TESTS_SUPPORT_SYNTHETIC_H_
