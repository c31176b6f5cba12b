#include "topoterm/pipeline/pipeline.hpp"

#include <algorithm>
#include <atomic>
#include <chrono>
#include <fstream>
#include <iostream>
#include <mutex>
#include <set>
#include <sstream>
#include <thread>
#include <unordered_set>

#include <spdlog/spdlog.h>

#include "topoterm/contextual.hpp"
#include "topoterm/error.hpp"
#include "topoterm/mlm.hpp"
#include "topoterm/pipeline/hashing.hpp"
#include "topoterm/pipeline/report.hpp"
#include "topoterm/tagger/checkpoint.hpp"
#include "topoterm/tagger/decode.hpp"

namespace topoterm {

namespace fs = std::filesystem;

namespace {

// Bumped whenever an artifact format or stage semantics change.
constexpr int kPipelineVersion = 1;

std::string read_file(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  if (!in) throw Error("cannot read " + p.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

// Write to a sibling temporary and rename, so an interrupted run never
// leaves a truncated artifact behind.
void write_file(const fs::path& p, std::string_view content) {
  fs::create_directories(p.parent_path());
  fs::path tmp = p;
  tmp += ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw Error("cannot write " + tmp.string());
    out.write(content.data(), static_cast<std::streamsize>(content.size()));
    if (!out) throw Error("failed writing " + tmp.string());
  }
  fs::rename(tmp, p);
}

std::vector<std::string> read_lines(const fs::path& p) {
  std::vector<std::string> out;
  std::istringstream in(read_file(p));
  std::string line;
  while (std::getline(in, line)) {
    if (!line.empty()) out.push_back(line);
  }
  return out;
}

// Runs body(i) for i in [0, n) on up to `jobs` threads.
template <typename F>
void parallel_for(std::size_t n, std::size_t jobs, F&& body) {
  jobs = std::max<std::size_t>(1, std::min(jobs, n));
  if (jobs == 1) {
    for (std::size_t i = 0; i < n; ++i) body(i);
    return;
  }
  std::atomic<std::size_t> next{0};
  std::exception_ptr failure;
  std::mutex failure_mu;
  std::vector<std::thread> pool;
  for (std::size_t t = 0; t < jobs; ++t) {
    pool.emplace_back([&] {
      while (true) {
        const std::size_t i = next.fetch_add(1);
        if (i >= n) return;
        try {
          body(i);
        } catch (...) {
          std::lock_guard lock(failure_mu);
          if (!failure) failure = std::current_exception();
          next = n;
        }
      }
    });
  }
  for (auto& th : pool) th.join();
  if (failure) std::rethrow_exception(failure);
}

std::uint64_t model_seed(std::uint64_t base, FeatureKind kind) {
  for (std::size_t i = 0; i < std::size(kAllFeatureKinds); ++i) {
    if (kAllFeatureKinds[i] == kind) return base * 1000003ULL + i + 1;
  }
  return base;
}

std::vector<TaggedSequence> tagged_sequences(std::span<const Utterance> corpus, FeatureCache& cache,
                                             const MlmScoreTable& mlm, const ContextualStore* ctx) {
  std::vector<TaggedSequence> out;
  out.reserve(corpus.size());
  for (const auto& u : corpus) {
    out.push_back({u.utt_id, assemble_features(u, cache, mlm, ctx), bio_labels(u)});
  }
  return out;
}

}  // namespace

std::string to_string(Stage s) {
  switch (s) {
    case Stage::kIngest: return "ingest";
    case Stage::kFeatures: return "features";
    case Stage::kTrain: return "train";
    case Stage::kTag: return "tag";
    case Stage::kEval: return "eval";
    case Stage::kReport: return "report";
  }
  return "unknown";
}

Stage stage_from_string(const std::string& s) {
  for (Stage st : kAllStages) {
    if (to_string(st) == s) return st;
  }
  throw ValidationError("unknown stage '" + s + "'");
}

Pipeline::Pipeline(PipelineConfig cfg) : cfg_(std::move(cfg)), layout_{cfg_.paths.output_dir} {
  cfg_.validate();
}

void Pipeline::require(const fs::path& p, Stage producer) const {
  if (!fs::exists(p)) {
    throw Error("missing input " + p.string() + "; run the '" + to_string(producer) + "' stage first");
  }
}

std::vector<fs::path> Pipeline::stage_outputs(Stage s) const {
  const auto& L = layout_;
  switch (s) {
    case Stage::kIngest: return {L.train_corpus(), L.validation_corpus(), L.eval_corpus(), L.words()};
    case Stage::kFeatures: return {L.features(), L.diagrams(), L.missing_words(), L.mlm_scores()};
    case Stage::kTrain: {
      std::vector<fs::path> out;
      for (FeatureKind k : cfg_.model_kinds) {
        out.push_back(L.checkpoint(k));
        out.push_back(L.history(k));
      }
      return out;
    }
    case Stage::kTag: {
      std::vector<fs::path> out;
      for (FeatureKind k : cfg_.model_kinds) out.push_back(L.predictions(k));
      return out;
    }
    case Stage::kEval: return {L.report_json(), L.report_text(), L.per_domain_csv(), L.overlap_csv()};
    case Stage::kReport: return {};
  }
  return {};
}

std::string Pipeline::stage_key(Stage s) const {
  ContentHasher h;
  h.add("topoterm-stage").add(std::to_string(kPipelineVersion)).add(to_string(s));
  const auto settings = settings_json(cfg_);
  const auto& L = layout_;
  auto add_files = [&](const std::vector<fs::path>& files) {
    for (const auto& f : files) h.add_file(f);
  };
  switch (s) {
    case Stage::kIngest:
      h.add_file(cfg_.paths.train_corpus).add_file(cfg_.paths.eval_corpus);
      h.add(cfg_.paths.validation_corpus ? sha256_file(*cfg_.paths.validation_corpus) : "-");
      h.add(nlohmann::json({{"validation_fraction", settings["validation_fraction"]}}).dump());
      break;
    case Stage::kFeatures:
      h.add_file(L.words()).add_file(cfg_.paths.embeddings).add_file(cfg_.paths.probabilities);
      h.add(cfg_.paths.oov_embeddings ? sha256_file(*cfg_.paths.oov_embeddings) : "-");
      h.add(settings["features"].dump());
      break;
    case Stage::kTrain:
      add_files(stage_outputs(Stage::kFeatures));
      h.add_file(L.train_corpus()).add_file(L.validation_corpus());
      for (const auto& p : {cfg_.paths.contextual_train, cfg_.paths.contextual_validation}) {
        h.add(p ? sha256_file(*p) : "-");
      }
      h.add(settings["models"].dump()).add(settings["training"].dump()).add(settings["seed"].dump());
      break;
    case Stage::kTag:
      add_files(stage_outputs(Stage::kFeatures));
      add_files(stage_outputs(Stage::kTrain));
      h.add_file(L.eval_corpus());
      h.add(cfg_.paths.contextual_eval ? sha256_file(*cfg_.paths.contextual_eval) : "-");
      break;
    case Stage::kEval:
      add_files(stage_outputs(Stage::kTag));
      h.add_file(L.train_corpus()).add_file(L.validation_corpus()).add_file(L.eval_corpus());
      break;
    case Stage::kReport: break;
  }
  return h.hex();
}

StageOutcome Pipeline::run(Stage stage, bool force, std::ostream& out) {
  if (stage == Stage::kReport) {
    require(layout_.report_text(), Stage::kEval);
    out << read_file(layout_.report_text());
    return {Stage::kReport, false, 0, 0, "printed " + layout_.report_text().string()};
  }

  // Upstream artifacts must exist before a key can be computed.
  switch (stage) {
    case Stage::kFeatures: require(layout_.words(), Stage::kIngest); break;
    case Stage::kTrain:
      for (const auto& p : stage_outputs(Stage::kFeatures)) require(p, Stage::kFeatures);
      require(layout_.train_corpus(), Stage::kIngest);
      require(layout_.validation_corpus(), Stage::kIngest);
      break;
    case Stage::kTag:
      for (const auto& p : stage_outputs(Stage::kTrain)) require(p, Stage::kTrain);
      require(layout_.eval_corpus(), Stage::kIngest);
      break;
    case Stage::kEval:
      for (const auto& p : stage_outputs(Stage::kTag)) require(p, Stage::kTag);
      require(layout_.eval_corpus(), Stage::kIngest);
      break;
    default: break;
  }

  const std::string key = stage_key(stage);
  const fs::path stamp = layout_.stamp(stage);
  if (!force && fs::exists(stamp)) {
    try {
      const auto j = nlohmann::json::parse(read_file(stamp));
      const bool outputs_present = std::ranges::all_of(stage_outputs(stage), [](const fs::path& p) { return fs::exists(p); });
      if (j.at("version").get<int>() != kPipelineVersion) {
        spdlog::info("{}: stamp from pipeline version {}, rebuilding", to_string(stage), j.at("version").get<int>());
      } else if (j.at("key").get<std::string>() == key && outputs_present) {
        StageOutcome o{stage, true, 0, 0, "up to date"};
        out << to_string(stage) << ": up to date\n";
        return o;
      }
    } catch (const std::exception& e) {
      spdlog::info("{}: unreadable stamp ({}), rebuilding", to_string(stage), e.what());
    }
  }

  const auto t0 = std::chrono::steady_clock::now();
  StageOutcome o;
  switch (stage) {
    case Stage::kIngest: o = ingest(); break;
    case Stage::kFeatures: o = features(); break;
    case Stage::kTrain: o = train(); break;
    case Stage::kTag: o = tag(); break;
    case Stage::kEval: o = eval(); break;
    case Stage::kReport: break;
  }
  o.stage = stage;

  nlohmann::json j = {{"version", kPipelineVersion},
                      {"key", key},
                      {"computations", o.computations},
                      {"cache_hits", o.cache_hits}};
  if (!cfg_.deterministic) {
    j["seconds"] = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  }
  write_file(stamp, j.dump(2) + "\n");
  out << to_string(stage) << ": " << o.summary << "\n";
  return o;
}

// ---------------------------------------------------------------------------

StageOutcome Pipeline::ingest() {
  auto train_all = load_corpus(cfg_.paths.train_corpus);
  auto eval_all = load_corpus(cfg_.paths.eval_corpus);
  auto train = user_utterances(train_all);
  auto eval = user_utterances(eval_all);
  std::vector<Utterance> validation;
  if (cfg_.paths.validation_corpus) {
    validation = user_utterances(load_corpus(*cfg_.paths.validation_corpus));
  } else if (cfg_.validation_fraction > 0.0) {
    // Hold out the last dialogues in order of first appearance.
    std::vector<std::string> dialogues;
    std::unordered_set<std::string> seen;
    for (const auto& u : train) {
      if (seen.insert(u.dialogue_id).second) dialogues.push_back(u.dialogue_id);
    }
    const auto held = static_cast<std::size_t>(std::ceil(cfg_.validation_fraction * static_cast<double>(dialogues.size())));
    if (held >= dialogues.size()) throw ValidationError("validation_fraction leaves no training dialogues");
    std::unordered_set<std::string> held_out(dialogues.end() - static_cast<std::ptrdiff_t>(held), dialogues.end());
    std::vector<Utterance> kept;
    for (auto& u : train) (held_out.contains(u.dialogue_id) ? validation : kept).push_back(std::move(u));
    train = std::move(kept);
  }
  if (train.empty()) throw ValidationError("no user utterances in the training corpus");

  std::set<std::string> words;
  for (const auto* corpus : {&train, &validation, &eval}) {
    for (const auto& u : *corpus) words.insert(u.tokens.begin(), u.tokens.end());
  }
  fs::create_directories(layout_.train_corpus().parent_path());
  write_corpus(layout_.train_corpus(), train);
  write_corpus(layout_.validation_corpus(), validation);
  write_corpus(layout_.eval_corpus(), eval);
  std::string w;
  for (const auto& s : words) w += s + "\n";
  write_file(layout_.words(), w);

  StageOutcome o;
  o.summary = std::to_string(train.size()) + " train, " + std::to_string(validation.size()) + " validation, " +
              std::to_string(eval.size()) + " eval utterances; " + std::to_string(words.size()) + " distinct words";
  return o;
}

StageOutcome Pipeline::features() {
  const auto words = read_lines(layout_.words());
  const EmbeddingMatrix vocab = load_embeddings(cfg_.paths.embeddings);
  std::optional<EmbeddingMatrix> oov;
  if (cfg_.paths.oov_embeddings) oov = load_embeddings(*cfg_.paths.oov_embeddings);
  const FeatureExtractor extractor(vocab, oov ? &*oov : nullptr, cfg_.features);

  // Word-level cache keyed by the embedding content and feature settings; it
  // survives across output directories and process restarts.
  ContentHasher h;
  h.add("topoterm-features").add(std::to_string(kPipelineVersion)).add_file(cfg_.paths.embeddings);
  h.add(cfg_.paths.oov_embeddings ? sha256_file(*cfg_.paths.oov_embeddings) : "-");
  h.add(settings_json(cfg_)["features"].dump());
  const std::string key = h.hex();
  fs::create_directories(cfg_.paths.cache_dir);
  const fs::path feature_cache_file = cfg_.paths.cache_dir / ("features-" + key + ".jsonl");
  const fs::path diagram_cache_file = cfg_.paths.cache_dir / ("diagrams-" + key + ".jsonl");

  std::map<std::string, std::string> cached_features, cached_diagrams;  // word -> record line
  if (fs::exists(feature_cache_file) && fs::exists(diagram_cache_file)) {
    try {
      for (const auto& line : read_lines(feature_cache_file)) {
        std::string word;
        parse_feature_record(line, &word);
        cached_features[word] = line;
      }
      for (const auto& line : read_lines(diagram_cache_file)) {
        std::string word;
        parse_diagram_record(line, &word);
        cached_diagrams[word] = line;
      }
    } catch (const std::exception& e) {
      spdlog::warn("feature cache {} is unreadable ({}); rebuilding it", feature_cache_file.string(), e.what());
      cached_features.clear();
      cached_diagrams.clear();
    }
  }

  std::vector<std::string> to_compute, missing;
  std::size_t hits = 0;
  for (const auto& w : words) {
    if (cached_features.contains(w) && cached_diagrams.contains(w)) {
      ++hits;
    } else if (extractor.has_embedding(w)) {
      to_compute.push_back(w);
    } else {
      missing.push_back(w);
    }
  }

  std::vector<std::string> feature_lines(to_compute.size()), diagram_lines(to_compute.size());
  parallel_for(to_compute.size(), cfg_.jobs, [&](std::size_t i) {
    const WordComputation c = extractor.compute(to_compute[i]);
    feature_lines[i] = feature_record_json(to_compute[i], c.features);
    diagram_lines[i] = diagram_record_json(to_compute[i], c.diagram);
  });
  for (std::size_t i = 0; i < to_compute.size(); ++i) {
    cached_features[to_compute[i]] = feature_lines[i];
    cached_diagrams[to_compute[i]] = diagram_lines[i];
  }
  if (!to_compute.empty()) {
    std::string fc, dc;
    for (const auto& [w, line] : cached_features) fc += line + "\n";
    for (const auto& [w, line] : cached_diagrams) dc += line + "\n";
    write_file(feature_cache_file, fc);
    write_file(diagram_cache_file, dc);
  }

  std::string feats, diags, miss;
  for (const auto& w : words) {
    if (auto it = cached_features.find(w); it != cached_features.end()) {
      feats += it->second + "\n";
      diags += cached_diagrams.at(w) + "\n";
    }
  }
  for (const auto& w : missing) miss += w + "\n";
  if (!missing.empty()) {
    spdlog::warn("{} words have no embedding; their TDA features are zero", missing.size());
  }
  write_file(layout_.features(), feats);
  write_file(layout_.diagrams(), diags);
  write_file(layout_.missing_words(), miss);

  const auto records = load_probability_records(cfg_.paths.probabilities);
  const MlmScoreTable mlm = aggregate_mlm_scores(records);
  fs::create_directories(layout_.mlm_scores().parent_path());
  mlm.save_tsv(layout_.mlm_scores());

  StageOutcome o;
  o.computations = to_compute.size();
  o.cache_hits = hits;
  o.summary = std::to_string(to_compute.size()) + " words computed, " + std::to_string(hits) + " from cache, " +
              std::to_string(missing.size()) + " without embedding; MLM scores for " + std::to_string(mlm.size()) +
              " words";
  return o;
}

namespace {

struct FeatureInputs {
  FeatureCache cache;
  MlmScoreTable mlm;
};

FeatureInputs load_feature_inputs(const ArtifactLayout& L) {
  FeatureInputs in{FeatureCache::load(L.features()), MlmScoreTable::load_tsv(L.mlm_scores())};
  for (const auto& w : read_lines(L.missing_words())) in.cache.mark_missing(w);
  return in;
}

}  // namespace

StageOutcome Pipeline::train() {
  auto inputs = load_feature_inputs(layout_);
  const auto train_corpus = load_corpus(layout_.train_corpus());
  const auto val_corpus = load_corpus(layout_.validation_corpus());

  struct Job {
    FeatureKind kind;
    std::vector<TaggedSequence> train, validation;
  };
  std::vector<Job> jobs;
  std::vector<TaggedSequence> shared_train, shared_val;
  bool shared_built = false;
  for (FeatureKind k : cfg_.model_kinds) {
    Job j{k, {}, {}};
    if (k == FeatureKind::kContextual) {
      const auto ctx_train = ContextualStore::load(*cfg_.paths.contextual_train);
      std::optional<ContextualStore> ctx_val;
      if (cfg_.paths.contextual_validation) ctx_val = ContextualStore::load(*cfg_.paths.contextual_validation);
      j.train = tagged_sequences(train_corpus, inputs.cache, inputs.mlm, &ctx_train);
      j.validation = tagged_sequences(val_corpus, inputs.cache, inputs.mlm, ctx_val ? &*ctx_val : &ctx_train);
    } else {
      if (!shared_built) {
        shared_train = tagged_sequences(train_corpus, inputs.cache, inputs.mlm, nullptr);
        shared_val = tagged_sequences(val_corpus, inputs.cache, inputs.mlm, nullptr);
        shared_built = true;
      }
      j.train = shared_train;
      j.validation = shared_val;
    }
    jobs.push_back(std::move(j));
  }

  std::vector<std::string> summaries(jobs.size());
  parallel_for(jobs.size(), cfg_.jobs, [&](std::size_t i) {
    const FeatureKind k = jobs[i].kind;
    TrainingConfig tcfg = cfg_.training;
    tcfg.seed = model_seed(cfg_.seed, k);
    TaggerModel model = build_model(cfg_.model_config(k), tcfg.seed);
    const TrainResult r = topoterm::train(model, jobs[i].train, jobs[i].validation, tcfg);
    if (r.epochs_run == 0) model.normalizer() = fit_normalizer(k, jobs[i].train);
    fs::create_directories(layout_.checkpoint(k).parent_path());
    save_checkpoint(layout_.checkpoint(k), model, &r, &tcfg);
    write_file(layout_.history(k), to_json(r).dump(2) + "\n");
    summaries[i] = to_string(k) + " (" + std::to_string(r.epochs_run) + " epochs, best " +
                   std::to_string(r.best_epoch) + ")";
  });

  StageOutcome o;
  o.summary = "trained";
  for (const auto& s : summaries) o.summary += " " + s;
  return o;
}

StageOutcome Pipeline::tag() {
  auto inputs = load_feature_inputs(layout_);
  const auto eval_corpus = load_corpus(layout_.eval_corpus());
  std::optional<std::vector<TaggedSequence>> shared;
  std::size_t spans = 0;
  for (FeatureKind k : cfg_.model_kinds) {
    const Checkpoint ck = load_checkpoint(layout_.checkpoint(k));
    std::vector<TaggedSequence> seqs;
    if (k == FeatureKind::kContextual) {
      const auto ctx = ContextualStore::load(*cfg_.paths.contextual_eval);
      seqs = tagged_sequences(eval_corpus, inputs.cache, inputs.mlm, &ctx);
    } else {
      if (!shared) shared = tagged_sequences(eval_corpus, inputs.cache, inputs.mlm, nullptr);
      seqs = *shared;
    }
    std::vector<Prediction> preds(seqs.size());
    parallel_for(seqs.size(), cfg_.jobs, [&](std::size_t i) {
      preds[i] = topoterm::tag(ck.model, to_string(k), seqs[i].utt_id, seqs[i].features);
    });
    spans += span_count(preds);
    fs::create_directories(layout_.predictions(k).parent_path());
    write_predictions(layout_.predictions(k), preds);
  }
  StageOutcome o;
  o.summary = "tagged " + std::to_string(eval_corpus.size()) + " utterances with " +
              std::to_string(cfg_.model_kinds.size()) + " models (" + std::to_string(spans) + " spans)";
  return o;
}

StageOutcome Pipeline::eval() {
  EvaluationInputs in;
  in.eval_utterances = load_corpus(layout_.eval_corpus());
  in.gold = extract_gold_terms(in.eval_utterances);
  auto train_corpus = load_corpus(layout_.train_corpus());
  const auto val_corpus = load_corpus(layout_.validation_corpus());
  train_corpus.insert(train_corpus.end(), val_corpus.begin(), val_corpus.end());
  in.training_gold = extract_gold_terms(train_corpus);
  for (FeatureKind k : cfg_.model_kinds) {
    in.models.push_back({to_string(k), k, load_predictions(layout_.predictions(k))});
  }
  const auto report = build_report(in);
  const std::string text = render_report_text(report);
  write_file(layout_.report_json(), report.dump(2) + "\n");
  write_file(layout_.report_text(), text);
  write_file(layout_.per_domain_csv(), per_domain_csv(report));
  write_file(layout_.overlap_csv(), overlap_csv(report));
  StageOutcome o;
  o.summary = "report written to " + layout_.report_text().string();
  return o;
}

}  // namespace topoterm
