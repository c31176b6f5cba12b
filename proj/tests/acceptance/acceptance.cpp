// Acceptance suite: one PASS/FAIL line per criterion, nonzero exit on any
// failure.

#include <chrono>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <random>
#include <sstream>

#include <spdlog/spdlog.h>

#include "batteries.hpp"
#include "gradcheck.hpp"
#include "synth.hpp"
#include "topoterm/evaluation.hpp"
#include "topoterm/pipeline/config.hpp"
#include "topoterm/pipeline/pipeline.hpp"
#include "topoterm/tagger/decode.hpp"
#include "topoterm/tagger/model.hpp"
#include "topoterm/tagger/training.hpp"

namespace fs = std::filesystem;
using namespace topoterm;

namespace {

constexpr std::uint64_t kSeed = 20240601;

struct Outcome {
  bool passed = false;
  std::string detail;
};

using Clock = std::chrono::steady_clock;

double seconds_since(Clock::time_point t0) {
  return std::chrono::duration<double>(Clock::now() - t0).count();
}

Outcome from_battery(const oracle::BatteryResult& b) { return {b.passed, b.detail}; }

Outcome persistence_equivalence() {
  auto b = oracle::persistence_battery(kSeed, 1000);
  std::ostringstream d;
  d << b.detail << ", " << b.seconds << " s (limit 60 s)";
  return {b.passed && b.seconds < 60.0, d.str()};
}

Outcome architecture_width() {
  auto m = build_model(ModelConfig::for_kind(FeatureKind::kPimage), kSeed);
  const std::size_t expected = 100 + (100 - 35 + 1) * (30 - 25 + 1);
  std::ostringstream d;
  d << "projected width " << m.projected_width() << ", expected " << expected;
  return {expected == 496 && m.projected_width() == expected, d.str()};
}

Outcome gradient_and_initial_loss() {
  std::ostringstream d;
  bool ok = true;
  std::mt19937_64 rng(kSeed);
  std::vector<TaggedSequence> balanced = {oracle::random_sequence("a", 6, rng), oracle::random_sequence("b", 3, rng)};
  std::vector<const TaggedSequence*> batch = {&balanced[0], &balanced[1]};
  for (FeatureKind k : kAllFeatureKinds) {
    auto r = oracle::gradient_check(k, kSeed);
    ok = ok && r.max_relative_error < 1e-4;
    auto m = build_model(ModelConfig::for_kind(k), kSeed);
    m.normalizer() = fit_normalizer(k, balanced);
    const double loss0 = m.batch_loss(batch, nullptr, false);
    const double gap = std::abs(loss0 - std::log(3.0));
    ok = ok && gap <= 1e-6;
    d << to_string(k) << ": max rel err " << r.max_relative_error << " over " << r.entries_checked
      << " entries, |L0 - ln3| " << gap << "; ";
  }
  return {ok, d.str()};
}

// 64 utterances whose term tokens carry MLM score 1 and all other tokens 0.
std::pair<std::vector<Utterance>, std::vector<TaggedSequence>> separable_corpus() {
  std::mt19937_64 rng(kSeed);
  std::uniform_int_distribution<int> length(6, 12);
  std::uniform_int_distribution<int> term_count(1, 2);
  std::uniform_int_distribution<int> word(0, 199);
  std::vector<Utterance> corpus;
  std::vector<TaggedSequence> data;
  for (int i = 0; i < 64; ++i) {
    Utterance u;
    u.utt_id = "toy" + std::to_string(i);
    u.dialogue_id = u.utt_id;
    const int n = length(rng);
    for (int t = 0; t < n; ++t) u.tokens.push_back("filler" + std::to_string(word(rng)));
    // Spans of one or two tokens separated by at least one filler.
    std::size_t pos = std::uniform_int_distribution<std::size_t>(0, 2)(rng);
    for (int s = 0; s < term_count(rng) && pos < u.tokens.size(); ++s) {
      std::size_t len = std::min<std::size_t>(std::uniform_int_distribution<std::size_t>(1, 2)(rng),
                                              u.tokens.size() - pos);
      for (std::size_t k = 0; k < len; ++k) u.tokens[pos + k] = "term" + std::to_string(word(rng));
      u.spans.push_back({pos, pos + len - 1, "", "toy", "value"});
      pos += len + 1 + std::uniform_int_distribution<std::size_t>(0, 3)(rng);
    }
    TaggedSequence seq;
    seq.utt_id = u.utt_id;
    seq.gold = bio_labels(u);
    for (const auto& tok : u.tokens) {
      TokenFeatures f;
      f.word = tok;
      f.mlm_score = tok.starts_with("term") ? 1.0 : 0.0;
      seq.features.push_back(std::move(f));
    }
    corpus.push_back(std::move(u));
    data.push_back(std::move(seq));
  }
  return {corpus, data};
}

Outcome toy_training() {
  const auto t0 = Clock::now();
  auto [corpus, data] = separable_corpus();
  const TermSet gold = extract_gold_terms(corpus);

  TrainingConfig cfg;
  cfg.epochs = 200;
  cfg.early_stopping = false;
  cfg.learning_rate = 1e-3;
  cfg.batch_size = 8;
  cfg.seed = kSeed;
  auto model = build_model(ModelConfig::for_kind(FeatureKind::kMlm), kSeed);

  double recall = 0.0;
  std::size_t epochs = 0;
  train(model, data, {}, cfg, [&](std::size_t epoch, const TaggerModel& m) {
    std::vector<Prediction> preds;
    for (const auto& s : data) preds.push_back(tag(m, "mlm", s.utt_id, s.features));
    recall = evaluate(predicted_terms(preds, corpus), gold).recall;
    epochs = epoch + 1;
    return recall >= 0.95;
  });
  const double secs = seconds_since(t0);
  std::ostringstream d;
  d << "training recall " << recall << " after " << epochs << " epochs, " << secs << " s (limits: 0.95, 200 epochs, 300 s)";
  return {recall >= 0.95 && epochs <= 200 && secs < 300.0, d.str()};
}

synth::SynthConfig pipeline_fixture() {
  synth::SynthConfig s;
  s.seed = kSeed;
  s.train_dialogues = 40;
  s.eval_dialogues = 100;  // 200 user utterances
  s.epochs = 2;
  s.batch_size = 16;
  s.model_kinds = {"mlm", "pimage", "codensity", "wasserstein"};
  return s;
}

PipelineConfig pipeline_config(const fs::path& fixtures, const fs::path& out, std::size_t jobs) {
  auto cfg = load_pipeline_config(fixtures / "pipeline.toml");
  cfg.paths.output_dir = out;
  cfg.paths.cache_dir = out / "cache";
  cfg.deterministic = true;
  cfg.jobs = jobs;
  cfg.seed = kSeed;
  return cfg;
}

void run_pipeline(const PipelineConfig& cfg) {
  Pipeline p(cfg);
  std::ostringstream log;
  for (Stage s : {Stage::kIngest, Stage::kFeatures, Stage::kTrain, Stage::kTag, Stage::kEval}) p.run(s, false, log);
}

Outcome union_monotonicity(const fs::path& work) {
  const fs::path fixtures = work / "fixtures";
  const auto cfg = pipeline_config(fixtures, work / "run-a", 2);
  run_pipeline(cfg);
  std::ifstream in(ArtifactLayout{cfg.paths.output_dir}.report_json());
  const auto report = nlohmann::json::parse(in);
  bool ok = report.at("union_recall_monotone").get<bool>();
  std::ostringstream d;
  d << report.at("eval_utterances") << " held-out utterances; ";
  for (const auto& [name, u] : report.at("unions").items()) {
    const double ur = u.at("metrics").at("recall").get<double>();
    d << name << " union recall " << ur << " vs";
    for (const auto& member : u.at("members")) {
      const double mr = report.at("models").at(member.get<std::string>()).at("metrics").at("recall").get<double>();
      ok = ok && ur >= mr;
      d << ' ' << member.get<std::string>() << '=' << mr;
    }
    d << "; ";
  }
  ok = ok && report.at("eval_utterances").get<int>() == 200 && report.at("models").size() >= 2;
  return {ok, d.str()};
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

Outcome determinism(const fs::path& work) {
  const fs::path fixtures = work / "fixtures";
  const auto a = pipeline_config(fixtures, work / "run-a", 2);
  const auto b = pipeline_config(fixtures, work / "run-b", 3);
  if (!fs::exists(ArtifactLayout{a.paths.output_dir}.report_json())) run_pipeline(a);
  run_pipeline(b);

  std::vector<fs::path> compared;
  for (const auto& root : {a.paths.output_dir}) {
    for (const auto& e : fs::recursive_directory_iterator(root)) {
      if (!e.is_regular_file()) continue;
      const auto rel = fs::relative(e.path(), root);
      const auto top = rel.begin()->string();
      if (top == "cache" || top == "features" || top == "models" || top == "eval" || top == "predictions") {
        compared.push_back(rel);
      }
    }
  }
  std::size_t mismatches = 0;
  std::string first;
  for (const auto& rel : compared) {
    if (slurp(a.paths.output_dir / rel) != slurp(b.paths.output_dir / rel)) {
      if (mismatches++ == 0) first = rel.string();
    }
  }
  std::size_t caches = 0, checkpoints = 0, reports = 0;
  for (const auto& rel : compared) {
    const auto top = rel.begin()->string();
    if (top == "cache" || top == "features") ++caches;
    if (rel.extension() == ".ttck") ++checkpoints;
    if (top == "eval") ++reports;
  }
  std::ostringstream d;
  d << compared.size() << " artifacts compared (" << caches << " feature/cache files, " << checkpoints
    << " checkpoints, " << reports << " report files)";
  if (mismatches) d << ", " << mismatches << " differ, first " << first;
  return {mismatches == 0 && caches > 0 && checkpoints > 0 && reports > 0, d.str()};
}

}  // namespace

int main() {
  spdlog::set_level(spdlog::level::err);
  const fs::path work = fs::temp_directory_path() / ("topoterm-acceptance-" + std::to_string(std::random_device{}()));
  fs::create_directories(work);
  synth::write_fixtures(pipeline_fixture(), work / "fixtures");

  struct Criterion {
    const char* name;
    std::function<Outcome()> run;
  };
  const std::vector<Criterion> criteria = {
      {"persistence oracle equivalence", persistence_equivalence},
      {"unit square and triangle", [] { return from_battery(oracle::square_triangle_battery()); }},
      {"MST cross-check", [] { return from_battery(oracle::mst_battery(kSeed + 1, 500)); }},
      {"Wasserstein closed form and assignment", [] { return from_battery(oracle::wasserstein_battery(kSeed + 2, 500)); }},
      {"persistence image quadrature", [] { return from_battery(oracle::image_battery(kSeed + 3, 100, 50)); }},
      {"codensity", [] { return from_battery(oracle::codensity_battery(kSeed + 4, 100)); }},
      {"architecture arithmetic", architecture_width},
      {"gradient check and initial loss", gradient_and_initial_loss},
      {"toy training", toy_training},
      {"matcher fixtures and BIO round trip", [] { return from_battery(oracle::matcher_battery(kSeed + 5, 1000)); }},
      {"union monotonicity", [&] { return union_monotonicity(work); }},
      {"determinism", [&] { return determinism(work); }},
  };

  int failures = 0;
  for (const auto& c : criteria) {
    Outcome o;
    const auto t0 = Clock::now();
    try {
      o = c.run();
    } catch (const std::exception& e) {
      o = {false, std::string("exception: ") + e.what()};
    }
    if (!o.passed) ++failures;
    std::printf("%s  %s: %s [%.1f s]\n", o.passed ? "PASS" : "FAIL", c.name, o.detail.c_str(), seconds_since(t0));
    std::fflush(stdout);
  }
  std::error_code ec;
  fs::remove_all(work, ec);
  std::printf("%d of %zu criteria failed\n", failures, criteria.size());
  return failures == 0 ? 0 : 1;
}
