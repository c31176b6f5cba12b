#pragma once

#include <cstddef>
#include <filesystem>
#include <iosfwd>
#include <string>
#include <vector>

#include "topoterm/pipeline/config.hpp"

namespace topoterm {

enum class Stage { kIngest, kFeatures, kTrain, kTag, kEval, kReport };

std::string to_string(Stage s);
Stage stage_from_string(const std::string& s);
inline constexpr Stage kAllStages[] = {Stage::kIngest, Stage::kFeatures,
                                       Stage::kTrain, Stage::kTag, Stage::kEval, Stage::kReport};

struct StageOutcome {
  Stage stage = Stage::kIngest;
  bool up_to_date = false;        // stamp matched; nothing was redone
  std::size_t computations = 0;   // persistence computations (features stage)
  std::size_t cache_hits = 0;     // words served from the feature cache
  std::string summary;
};

// Artifact locations under the output directory.
struct ArtifactLayout {
  std::filesystem::path root;

  std::filesystem::path train_corpus() const { return root / "ingest" / "train.jsonl"; }
  std::filesystem::path validation_corpus() const { return root / "ingest" / "validation.jsonl"; }
  std::filesystem::path eval_corpus() const { return root / "ingest" / "eval.jsonl"; }
  std::filesystem::path words() const { return root / "ingest" / "words.txt"; }
  std::filesystem::path features() const { return root / "features" / "features.jsonl"; }
  std::filesystem::path diagrams() const { return root / "features" / "diagrams.jsonl"; }
  std::filesystem::path missing_words() const { return root / "features" / "missing.txt"; }
  std::filesystem::path mlm_scores() const { return root / "features" / "mlm_scores.tsv"; }
  std::filesystem::path checkpoint(FeatureKind k) const { return root / "models" / (to_string(k) + ".ttck"); }
  std::filesystem::path history(FeatureKind k) const { return root / "models" / (to_string(k) + ".history.json"); }
  std::filesystem::path predictions(FeatureKind k) const {
    return root / "predictions" / (to_string(k) + ".jsonl");
  }
  std::filesystem::path report_json() const { return root / "eval" / "report.json"; }
  std::filesystem::path report_text() const { return root / "eval" / "report.txt"; }
  std::filesystem::path per_domain_csv() const { return root / "eval" / "per_domain_recall.csv"; }
  std::filesystem::path overlap_csv() const { return root / "eval" / "overlap_regions.csv"; }
  std::filesystem::path stamp(Stage s) const { return root / "stamps" / (to_string(s) + ".json"); }
};

class Pipeline {
 public:
  explicit Pipeline(PipelineConfig cfg);

  const PipelineConfig& config() const { return cfg_; }
  const ArtifactLayout& layout() const { return layout_; }

  // Runs one stage. A stage whose inputs and settings hash to its stamp is
  // skipped unless `force` is set. Missing upstream artifacts raise an Error
  // naming the file and the stage that produces it.
  StageOutcome run(Stage stage, bool force, std::ostream& out);

 private:
  StageOutcome ingest();
  StageOutcome features();
  StageOutcome train();
  StageOutcome tag();
  StageOutcome eval();

  std::string stage_key(Stage s) const;
  std::vector<std::filesystem::path> stage_outputs(Stage s) const;
  void require(const std::filesystem::path& p, Stage producer) const;

  PipelineConfig cfg_;
  ArtifactLayout layout_;
};

}  // namespace topoterm
