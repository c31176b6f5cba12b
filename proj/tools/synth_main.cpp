// Writes a synthetic fixture directory usable with `topoterm --config`.

#include <iostream>

#include <CLI11.hpp>

#include "synth.hpp"

int main(int argc, char** argv) {
  CLI::App app{"Generate synthetic dialogue fixtures"};
  topoterm::synth::SynthConfig cfg;
  std::string out;
  app.add_option("output", out, "Output directory")->required();
  app.add_option("--seed", cfg.seed, "Random seed");
  app.add_option("--train-dialogues", cfg.train_dialogues);
  app.add_option("--eval-dialogues", cfg.eval_dialogues);
  app.add_option("--turns", cfg.turns_per_dialogue);
  app.add_option("--dim", cfg.dim, "Embedding dimension");
  app.add_option("--epochs", cfg.epochs);
  app.add_flag("--contextual", cfg.contextual, "Also write contextual token vectors");
  CLI11_PARSE(app, argc, argv);
  try {
    topoterm::synth::write_fixtures(cfg, out);
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  std::cout << "fixtures written to " << out << "\n";
  return 0;
}
