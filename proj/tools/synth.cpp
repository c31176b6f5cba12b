#include "synth.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <random>
#include <set>

#include "topoterm/contextual.hpp"
#include "topoterm/embedding_store.hpp"
#include "topoterm/error.hpp"
#include "topoterm/mlm.hpp"
#include "topoterm/stopwords.hpp"

namespace topoterm::synth {

namespace fs = std::filesystem;

namespace {

using Rng = std::mt19937_64;

const std::vector<std::string> kFunctionWords = {
    "i", "a", "the", "to", "in", "for", "and", "is", "it", "of", "that", "with", "on", "at",
    "please", "can", "you", "would", "like", "need", "want", "find", "book", "me", "some", "there",
    "what", "any", "also", "thanks", "yes", "no", "okay", "sure", "looking", "place", "one",
    "something", "could", "help"};

const std::vector<std::pair<std::string, std::string>> kSlots = {
    {"restaurant", "food"}, {"restaurant", "pricerange"}, {"restaurant", "area"},
    {"hotel", "type"},      {"hotel", "stars"},           {"attraction", "type"},
    {"taxi", "destination"}, {"train", "day"}};

std::string make_word(Rng& rng, std::set<std::string>& taken) {
  static const std::vector<std::string> onset = {"b", "d", "f", "g", "k", "l", "m", "n", "p", "r", "s", "t", "v", "z", "ch", "sh"};
  static const std::vector<std::string> vowel = {"a", "e", "i", "o", "u", "ai", "ou"};
  std::uniform_int_distribution<std::size_t> syl(2, 3), on(0, onset.size() - 1), vo(0, vowel.size() - 1);
  while (true) {
    std::string w;
    const std::size_t n = syl(rng);
    for (std::size_t i = 0; i < n; ++i) w += onset[on(rng)] + vowel[vo(rng)];
    if (!is_stopword(w) && taken.insert(w).second) return w;
  }
}

struct Lexicon {
  std::vector<std::string> filler;  // function words first, then invented words
  struct Value {
    std::vector<std::string> tokens;
    std::size_t slot;
  };
  std::vector<Value> train_values, eval_only_values;
  std::set<std::string> value_tokens;
  std::vector<std::string> oov, unknown;
};

Lexicon make_lexicon(const SynthConfig& cfg, Rng& rng) {
  Lexicon lx;
  std::set<std::string> taken(kFunctionWords.begin(), kFunctionWords.end());
  lx.filler = kFunctionWords;
  while (lx.filler.size() < cfg.filler_words) lx.filler.push_back(make_word(rng, taken));

  std::vector<std::string> value_words;
  for (std::size_t i = 0; i < cfg.value_words; ++i) value_words.push_back(make_word(rng, taken));
  lx.value_tokens.insert(value_words.begin(), value_words.end());
  std::uniform_int_distribution<std::size_t> slot(0, kSlots.size() - 1);
  std::uniform_int_distribution<int> two(0, 3);
  // One- and two-token values; a quarter of them are reserved for evaluation.
  std::size_t i = 0;
  std::size_t made = 0;
  while (i < value_words.size()) {
    Lexicon::Value v;
    v.slot = slot(rng);
    v.tokens.push_back(value_words[i++]);
    if (i < value_words.size() && two(rng) == 0) v.tokens.push_back(value_words[i++]);
    (made++ % 4 == 3 ? lx.eval_only_values : lx.train_values).push_back(std::move(v));
  }
  for (std::size_t k = 0; k < cfg.oov_words; ++k) lx.oov.push_back(make_word(rng, taken));
  for (std::size_t k = 0; k < cfg.unknown_words; ++k) lx.unknown.push_back(make_word(rng, taken));
  return lx;
}

Utterance make_utterance(const Lexicon& lx, const std::vector<Lexicon::Value>& values, bool user,
                         std::string utt_id, std::string dialogue_id, Rng& rng) {
  Utterance u;
  u.utt_id = std::move(utt_id);
  u.dialogue_id = std::move(dialogue_id);
  u.speaker = user ? Speaker::kUser : Speaker::kSystem;
  std::uniform_int_distribution<std::size_t> len(3, 9), filler(0, lx.filler.size() - 1),
      value(0, values.size() - 1), nspans(0, 2);
  std::uniform_int_distribution<int> coin(0, 9);
  std::vector<std::string> base;
  const std::size_t n = len(rng);
  for (std::size_t i = 0; i < n; ++i) {
    // Function words dominate, as in real dialogue.
    const std::size_t idx = coin(rng) < 7 ? filler(rng) % kFunctionWords.size() : filler(rng);
    base.push_back(lx.filler[idx]);
  }
  if (coin(rng) == 0 && !lx.oov.empty()) base[0] = lx.oov[filler(rng) % lx.oov.size()];
  if (coin(rng) == 0 && !lx.unknown.empty()) base.back() = lx.unknown[filler(rng) % lx.unknown.size()];

  const std::size_t k = nspans(rng);
  std::vector<std::size_t> cuts;
  std::uniform_int_distribution<std::size_t> pos(0, base.size());
  for (std::size_t i = 0; i < k; ++i) cuts.push_back(pos(rng));
  std::sort(cuts.begin(), cuts.end());
  std::size_t c = 0;
  for (std::size_t i = 0; i <= base.size(); ++i) {
    while (c < cuts.size() && cuts[c] == i) {
      const auto& v = values[value(rng)];
      SpanAnnotation s;
      s.start = u.tokens.size();
      // Occasionally the annotated span includes a leading article.
      if (coin(rng) == 0) u.tokens.push_back("the");
      for (const auto& t : v.tokens) u.tokens.push_back(t);
      s.end = u.tokens.size() - 1;
      for (std::size_t t = s.start; t <= s.end; ++t) s.value += (t > s.start ? " " : "") + u.tokens[t];
      s.domain = kSlots[v.slot].first;
      s.slot = kSlots[v.slot].second;
      u.spans.push_back(std::move(s));
      ++c;
    }
    if (i < base.size()) u.tokens.push_back(base[i]);
  }
  return u;
}

std::vector<Utterance> make_split(const SynthConfig& cfg, const Lexicon& lx, const std::vector<Lexicon::Value>& values,
                                  const std::string& prefix, std::size_t dialogues, Rng& rng) {
  std::vector<Utterance> out;
  for (std::size_t d = 0; d < dialogues; ++d) {
    const std::string did = prefix + "-d" + std::to_string(d);
    for (std::size_t t = 0; t < cfg.turns_per_dialogue; ++t) {
      out.push_back(make_utterance(lx, values, t % 2 == 0, did + "-t" + std::to_string(t), did, rng));
    }
  }
  return out;
}

// Value words sit in a tight cluster, function words in a wide one, so the
// two classes differ in local density and loop structure.
std::vector<float> embed(bool value_word, std::size_t dim, Rng& rng) {
  std::normal_distribution<double> g(0.0, 1.0);
  std::vector<float> v(dim);
  for (std::size_t k = 0; k < dim; ++k) {
    const double center = value_word ? (k % 2 == 0 ? 2.0 : -1.0) : (k % 3 == 0 ? 1.0 : 0.0);
    const double spread = value_word ? 0.35 : 1.0;
    v[k] = static_cast<float>(center + spread * g(rng));
  }
  return v;
}

std::vector<float> contextual_vector(const std::string& word, bool value_word, std::size_t dim, Rng& rng) {
  std::uint64_t h = 1469598103934665603ULL;  // FNV-1a, stable across platforms
  for (unsigned char ch : word) h = (h ^ ch) * 1099511628211ULL;
  Rng word_rng(h);
  std::normal_distribution<double> g(0.0, 1.0);
  std::vector<float> v(dim);
  for (std::size_t k = 0; k < dim; ++k) {
    v[k] = static_cast<float>(0.5 * g(word_rng) + 0.2 * g(rng) + (value_word && k < 16 ? 1.0 : 0.0));
  }
  return v;
}

}  // namespace

SynthCorpus generate_corpus(const SynthConfig& cfg) {
  Rng rng(cfg.seed);
  const Lexicon lx = make_lexicon(cfg, rng);
  SynthCorpus c;
  c.train = make_split(cfg, lx, lx.train_values, "train", cfg.train_dialogues, rng);
  std::vector<Lexicon::Value> eval_values = lx.train_values;
  eval_values.insert(eval_values.end(), lx.eval_only_values.begin(), lx.eval_only_values.end());
  c.eval = make_split(cfg, lx, eval_values, "eval", cfg.eval_dialogues, rng);
  return c;
}

void write_fixtures(const SynthConfig& cfg, const fs::path& dir) {
  fs::create_directories(dir);
  Rng rng(cfg.seed);
  const Lexicon lx = make_lexicon(cfg, rng);
  const SynthCorpus corpus = generate_corpus(cfg);
  write_corpus(dir / "train.jsonl", corpus.train);
  write_corpus(dir / "eval.jsonl", corpus.eval);

  Rng emb_rng(cfg.seed + 101);
  EmbeddingMatrix vocab(cfg.dim), oov(cfg.dim);
  for (const auto& w : lx.filler) vocab.add(w, embed(false, cfg.dim, emb_rng));
  for (const auto& w : lx.value_tokens) vocab.add(w, embed(true, cfg.dim, emb_rng));
  for (const auto& w : lx.oov) oov.add(w, embed(false, cfg.dim, emb_rng));
  write_embeddings(dir / "embeddings.tsv", vocab);
  write_embeddings(dir / "oov.tsv", oov);

  Rng p_rng(cfg.seed + 202);
  std::uniform_real_distribution<double> low(0.02, 0.3), high(0.5, 0.98);
  std::ofstream probs(dir / "probabilities.jsonl", std::ios::binary);
  for (const auto* split : {&corpus.train, &corpus.eval}) {
    for (const auto& u : *split) {
      std::vector<double> p;
      for (const auto& t : u.tokens) p.push_back(lx.value_tokens.contains(t) ? low(p_rng) : high(p_rng));
      probs << probability_record_json(u.utt_id, u.tokens, p) << '\n';
    }
  }
  probs.close();

  std::vector<std::string> kinds = cfg.model_kinds;
  if (cfg.contextual) {
    Rng c_rng(cfg.seed + 303);
    auto store = [&](const std::vector<Utterance>& split, const fs::path& path) {
      ContextualStore s(cfg.contextual_dim);
      for (const auto& u : split) {
        std::vector<float> flat;
        for (const auto& t : u.tokens) {
          const auto v = contextual_vector(t, lx.value_tokens.contains(t), cfg.contextual_dim, c_rng);
          flat.insert(flat.end(), v.begin(), v.end());
        }
        s.add(u.utt_id, std::move(flat));
      }
      s.save(path);
    };
    store(corpus.train, dir / "contextual_train.bin");
    store(corpus.eval, dir / "contextual_eval.bin");
    if (std::find(kinds.begin(), kinds.end(), "contextual") == kinds.end()) kinds.insert(kinds.begin(), "contextual");
  }

  std::ofstream toml(dir / "pipeline.toml", std::ios::binary);
  toml << "# Desk-scale pipeline over the synthetic fixtures in this directory.\n"
       << "seed = " << cfg.seed << "\n"
       << "deterministic = true\n"
       << "jobs = 1\n\n"
       << "[paths]\n"
       << "train_corpus = \"train.jsonl\"\n"
       << "eval_corpus = \"eval.jsonl\"\n"
       << "embeddings = \"embeddings.tsv\"\n"
       << "oov_embeddings = \"oov.tsv\"\n"
       << "probabilities = \"probabilities.jsonl\"\n";
  if (cfg.contextual) {
    toml << "contextual_train = \"contextual_train.bin\"\n"
         << "contextual_eval = \"contextual_eval.bin\"\n";
  }
  toml << "cache_dir = \"cache\"\n"
       << "output_dir = \"out\"\n\n"
       << "[features]\n"
       << "neighborhood_size = 50\n"
       << "max_filtration = 1.0\n"
       << "image_variance = 0.0007\n\n"
       << "[models]\n"
       << "kinds = [";
  for (std::size_t i = 0; i < kinds.size(); ++i) toml << (i ? ", " : "") << '"' << kinds[i] << '"';
  toml << "]\n"
       << "max_seq_len = 64\n\n"
       << "[training]\n"
       << "learning_rate = " << cfg.learning_rate << "\n"
       << "epochs = " << cfg.epochs << "\n"
       << "batch_size = " << cfg.batch_size << "\n"
       << "warmup_fraction = 0.1\n"
       << "early_stop_delta = 0.005\n"
       << "validation_fraction = 0.15\n";
}

}  // namespace topoterm::synth
