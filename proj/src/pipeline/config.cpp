#include "topoterm/pipeline/config.hpp"

#include <cstdlib>
#include <fstream>
#include <sstream>

#include <spdlog/spdlog.h>

#include "topoterm/error.hpp"
#include "topoterm/pipeline/config_file.hpp"

namespace topoterm {

namespace fs = std::filesystem;

ModelConfig PipelineConfig::model_config(FeatureKind kind) const {
  ModelConfig m = ModelConfig::for_kind(kind);
  m.max_seq_len = max_seq_len;
  m.encoder_layers = encoder_layers;
  m.dropout = dropout;
  return m;
}

void PipelineConfig::validate() const {
  auto require_file = [](const fs::path& p, const std::string& key) {
    if (p.empty()) throw ValidationError("config: paths." + key + " is required");
    if (!fs::is_regular_file(p)) {
      throw ValidationError("config: paths." + key + " = " + p.string() + " does not exist");
    }
  };
  require_file(paths.train_corpus, "train_corpus");
  require_file(paths.eval_corpus, "eval_corpus");
  require_file(paths.embeddings, "embeddings");
  require_file(paths.probabilities, "probabilities");
  if (paths.validation_corpus) require_file(*paths.validation_corpus, "validation_corpus");
  if (paths.oov_embeddings) require_file(*paths.oov_embeddings, "oov_embeddings");
  if (paths.contextual_train) require_file(*paths.contextual_train, "contextual_train");
  if (paths.contextual_validation) require_file(*paths.contextual_validation, "contextual_validation");
  if (paths.contextual_eval) require_file(*paths.contextual_eval, "contextual_eval");
  if (paths.output_dir.empty()) throw ValidationError("config: paths.output_dir is required");
  if (paths.cache_dir.empty()) throw ValidationError("config: paths.cache_dir is required");

  if (features.neighborhood_size < kCodensityOrders.back() + 1) {
    throw ValidationError("config: features.neighborhood_size must be at least " +
                          std::to_string(kCodensityOrders.back() + 1));
  }
  if (!(features.max_filtration > 0.0)) throw ValidationError("config: features.max_filtration must be positive");
  if (!(features.image.variance > 0.0)) throw ValidationError("config: features.image_variance must be positive");
  if (model_kinds.empty()) throw ValidationError("config: models.kinds is empty");
  for (FeatureKind k : model_kinds) {
    if (k == FeatureKind::kContextual && (!paths.contextual_train || !paths.contextual_eval)) {
      throw ValidationError(
          "config: the contextual model needs paths.contextual_train and paths.contextual_eval");
    }
    model_config(k).validate();
  }
  if (!(validation_fraction >= 0.0 && validation_fraction < 1.0)) {
    throw ValidationError("config: training.validation_fraction must lie in [0, 1)");
  }
  if (jobs == 0) throw ValidationError("config: jobs must be positive");
  training.validate();
}

namespace {

template <typename T>
T non_negative(std::int64_t v, const std::string& key) {
  if (v < 0) throw ValidationError("config: " + key + " must be nonnegative");
  return static_cast<T>(v);
}

}  // namespace

PipelineConfig parse_pipeline_config(std::string_view text, const fs::path& base_dir, const std::string& source) {
  const ConfigDocument doc = ConfigDocument::parse(text, source);
  PipelineConfig c;
  auto path_of = [&](const std::string& key) -> std::optional<fs::path> {
    auto s = doc.get_string("paths." + key);
    if (!s || s->empty()) return std::nullopt;
    fs::path p(*s);
    return p.is_absolute() ? p : (base_dir / p).lexically_normal();
  };
  c.paths.train_corpus = path_of("train_corpus").value_or(fs::path{});
  c.paths.eval_corpus = path_of("eval_corpus").value_or(fs::path{});
  c.paths.validation_corpus = path_of("validation_corpus");
  c.paths.embeddings = path_of("embeddings").value_or(fs::path{});
  c.paths.oov_embeddings = path_of("oov_embeddings");
  c.paths.probabilities = path_of("probabilities").value_or(fs::path{});
  c.paths.contextual_train = path_of("contextual_train");
  c.paths.contextual_validation = path_of("contextual_validation");
  c.paths.contextual_eval = path_of("contextual_eval");
  c.paths.cache_dir = path_of("cache_dir").value_or(base_dir / "cache");
  c.paths.output_dir = path_of("output_dir").value_or(base_dir / "out");
  if (const char* env = std::getenv("TOPOTERM_CACHE_DIR"); env != nullptr && *env != '\0') {
    c.paths.cache_dir = fs::path(env);
  }

  if (auto v = doc.get_int("seed")) c.seed = static_cast<std::uint64_t>(*v);
  if (auto v = doc.get_bool("deterministic")) c.deterministic = *v;
  if (auto v = doc.get_int("jobs")) c.jobs = non_negative<std::size_t>(*v, "jobs");

  if (auto v = doc.get_int("features.neighborhood_size")) {
    c.features.neighborhood_size = non_negative<std::size_t>(*v, "features.neighborhood_size");
  }
  if (auto v = doc.get_double("features.max_filtration")) c.features.max_filtration = *v;
  if (auto v = doc.get_double("features.image_variance")) c.features.image.variance = *v;

  if (auto v = doc.get_strings("models.kinds")) {
    for (const auto& s : *v) c.model_kinds.push_back(feature_kind_from_string(s));
  } else {
    c.model_kinds = {FeatureKind::kMlm, FeatureKind::kPimage, FeatureKind::kCodensity, FeatureKind::kWasserstein};
  }
  if (auto v = doc.get_int("models.max_seq_len")) c.max_seq_len = non_negative<std::size_t>(*v, "models.max_seq_len");
  if (auto v = doc.get_int("models.encoder_layers")) {
    c.encoder_layers = non_negative<std::size_t>(*v, "models.encoder_layers");
  }
  if (auto v = doc.get_double("models.dropout")) c.dropout = *v;

  auto& t = c.training;
  if (auto v = doc.get_double("training.learning_rate")) t.learning_rate = *v;
  if (auto v = doc.get_double("training.warmup_fraction")) t.warmup_fraction = *v;
  if (auto v = doc.get_int("training.epochs")) t.epochs = non_negative<std::size_t>(*v, "training.epochs");
  if (auto v = doc.get_int("training.batch_size")) t.batch_size = non_negative<std::size_t>(*v, "training.batch_size");
  if (auto v = doc.get_double("training.weight_decay")) t.weight_decay = *v;
  if (auto v = doc.get_bool("training.early_stopping")) t.early_stopping = *v;
  if (auto v = doc.get_double("training.early_stop_delta")) t.early_stop_delta = *v;
  if (auto v = doc.get_int("training.patience")) t.patience = non_negative<std::size_t>(*v, "training.patience");
  if (auto v = doc.get_double("training.validation_fraction")) c.validation_fraction = *v;

  for (const auto& k : doc.unread_keys()) spdlog::warn("{}: unknown config key '{}' ignored", source, k);
  return c;
}

PipelineConfig load_pipeline_config(const fs::path& path) {
  std::ifstream probe(path);
  if (!probe) throw Error("cannot open config file " + path.string());
  std::ostringstream ss;
  ss << probe.rdbuf();
  return parse_pipeline_config(ss.str(), fs::absolute(path).parent_path(), path.string());
}

nlohmann::json settings_json(const PipelineConfig& c) {
  nlohmann::json kinds = nlohmann::json::array();
  for (FeatureKind k : c.model_kinds) kinds.push_back(to_string(k));
  return {{"features",
           {{"neighborhood_size", c.features.neighborhood_size},
            {"max_filtration", c.features.max_filtration},
            {"image_variance", c.features.image.variance}}},
          {"models",
           {{"kinds", kinds},
            {"max_seq_len", c.max_seq_len},
            {"encoder_layers", c.encoder_layers},
            {"dropout", c.dropout}}},
          {"training", to_json(c.training)},
          {"validation_fraction", c.validation_fraction},
          {"seed", c.seed}};
}

}  // namespace topoterm
