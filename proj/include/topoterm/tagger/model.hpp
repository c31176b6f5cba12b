#pragma once

#include <cstddef>
#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include <json.hpp>

#include "topoterm/corpus.hpp"
#include "topoterm/features.hpp"
#include "topoterm/tagger/nn.hpp"

namespace topoterm {

enum class FeatureKind { kContextual, kMlm, kPimage, kCodensity, kWasserstein };

inline constexpr FeatureKind kAllFeatureKinds[] = {FeatureKind::kContextual, FeatureKind::kMlm,
                                                   FeatureKind::kPimage, FeatureKind::kCodensity,
                                                   FeatureKind::kWasserstein};

std::string to_string(FeatureKind kind);
FeatureKind feature_kind_from_string(const std::string& s);
bool is_tda_kind(FeatureKind kind);

// Width of the raw per-token input vector for a kind.
std::size_t raw_input_width(FeatureKind kind);

inline constexpr std::size_t kConvKernelBirth = 35;
inline constexpr std::size_t kConvKernelLifetime = 25;
inline constexpr std::size_t kPimageConvOutput =
    (kImageH1Births - kConvKernelBirth + 1) * (kImageH1Lifetimes - kConvKernelLifetime + 1);
inline constexpr std::size_t kPimageHidden = kImageH0Size + kPimageConvOutput;
static_assert(kPimageConvOutput == 396 && kPimageHidden == 496);

struct ModelConfig {
  FeatureKind feature_kind = FeatureKind::kMlm;
  std::size_t hidden_dim = 128;
  std::size_t attention_heads = 16;
  std::size_t encoder_layers = 2;
  std::size_t ffn_multiplier = 4;
  double dropout = 0.1;
  std::size_t max_seq_len = 64;

  // Hidden size and head count prescribed for each kind.
  static ModelConfig for_kind(FeatureKind kind);
  // Throws ValidationError when the configuration is inconsistent.
  void validate() const;

  friend bool operator==(const ModelConfig&, const ModelConfig&) = default;
};

nlohmann::json to_json(const ModelConfig& c);
ModelConfig model_config_from_json(const nlohmann::json& j);

// Training sequence: per-token features with gold tags.
struct TaggedSequence {
  std::string utt_id;
  std::vector<TokenFeatures> features;
  BioSequence gold;
};

// Fixed affine map applied to the raw inputs. Statistics come from the
// non-missing training tokens only; missing tokens enter as zeros after
// normalization.
struct InputNormalizer {
  std::vector<double> offset;
  std::vector<double> scale;

  bool fitted() const { return !scale.empty(); }
  friend bool operator==(const InputNormalizer&, const InputNormalizer&) = default;
};

InputNormalizer fit_normalizer(FeatureKind kind, std::span<const TaggedSequence> data);

class TaggerModel {
 public:
  using Mat = nn::Mat;

  TaggerModel() = default;

  const ModelConfig& config() const { return config_; }
  std::uint64_t seed() const { return seed_; }
  nn::ParameterStore& params() { return params_; }
  const nn::ParameterStore& params() const { return params_; }
  InputNormalizer& normalizer() { return normalizer_; }
  const InputNormalizer& normalizer() const { return normalizer_; }

  // Width of the representation entering the encoder.
  std::size_t projected_width() const;

  // Normalized input rows for up to max_seq_len tokens.
  Mat input_matrix(std::span<const TokenFeatures> tokens) const;

  struct Tape;
  // Logits (tokens x 3). With a non-null rng dropout is active.
  Mat forward(const Mat& input, nn::Rng* dropout_rng, Tape* tape) const;
  // Accumulates parameter gradients for dL/dlogits.
  void backward(const Tape& tape, const Mat& dlogits);

  // Mean token cross-entropy over the batch; accumulates gradients of that
  // mean when `accumulate` is set.
  double batch_loss(std::span<const TaggedSequence* const> batch, nn::Rng* dropout_rng, bool accumulate);

  // Eval-mode tag probabilities (tokens x 3); longer inputs are split into
  // non-overlapping windows of max_seq_len.
  Mat probabilities(std::span<const TokenFeatures> tokens) const;

  friend TaggerModel build_model(const ModelConfig& cfg, std::uint64_t seed);

 private:
  struct Block {
    nn::LayerNorm attn_norm;
    nn::MultiHeadAttention attention;
    nn::LayerNorm ffn_norm;
    nn::Linear ffn_in, ffn_out;
  };

  ModelConfig config_;
  std::uint64_t seed_ = 0;
  nn::ParameterStore params_;
  InputNormalizer normalizer_;

  // Input projection; which members are used depends on the kind.
  nn::Linear proj_first, proj_second;  // low-dim kinds: d -> h -> h; contextual: proj_first only
  nn::Conv2dValid conv;                // pimage
  std::vector<Block> blocks_;
  nn::LayerNorm final_norm_;
  nn::Linear head_dense_, head_out_;
};

struct TaggerModel::Tape {
  Mat input;
  Mat proj_pre;  // first projection (low-dim kinds) or convolution output (pimage)
  Mat proj_act;
  Mat embed_mask;
  struct BlockTape {
    nn::LayerNorm::Cache attn_norm;
    nn::MultiHeadAttention::Cache attention;
    Mat attn_mask;
    nn::LayerNorm::Cache ffn_norm;
    Mat ffn_input;
    Mat ffn_pre;
    Mat ffn_act;
    Mat ffn_mask;
  };
  std::vector<BlockTape> blocks;
  nn::LayerNorm::Cache final_norm;
  Mat head_mask_in, head_in, head_pre, head_mask_mid, head_act;
};

// Deterministic initialization from the seed. The output projection starts
// at zero so an untrained model predicts the uniform distribution.
TaggerModel build_model(const ModelConfig& cfg, std::uint64_t seed);

// Sinusoidal positional encoding rows [0, length).
nn::Mat positional_encoding(std::size_t length, std::size_t dim);

}  // namespace topoterm
