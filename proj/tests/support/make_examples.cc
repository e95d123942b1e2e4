// Regenerates the mock answers under data/examples: the combiner fixture for
// the two-reaction example and a small synthetic batch.
//
//   make_examples <data/examples>

#include <iostream>

#include "rxn/pipeline.h"
#include "synthetic.h"

int main(int argc, char** argv) {
  if (argc != 2) {
    std::cerr << "usage: make_examples <examples dir>\n";
    return 2;
  }
  const std::filesystem::path root = argv[1];
  const rxn::PromptLibrary prompts =
      rxn::PromptLibrary::load_dir(rxn::default_data_dir() / "prompts");
  const rxn::ReasoningConfig config;

  const auto fig = root / "fig15";
  const auto truth = rxn::parse_reaction_records(rxn::testing::read_text(fig / "expected.json"));
  const auto doc = rxn::load_document(rxn::testing::read_text(fig / "document.json"));
  std::filesystem::remove_all(fig / "fixtures");
  rxn::testing::write_combiner_fixtures(doc, truth, prompts, config, fig / "fixtures");

  std::filesystem::remove_all(root / "synthetic");
  const auto batch = rxn::testing::synthetic_batch(8, 11);
  rxn::testing::write_batch(root / "synthetic", batch, prompts, config);
  std::cout << "wrote " << fig / "fixtures" << " and " << root / "synthetic" << "\n";
  return 0;
}
