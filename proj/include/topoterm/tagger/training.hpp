#pragma once

#include <cstddef>
#include <cstdint>
#include <functional>
#include <span>
#include <vector>

#include <json.hpp>

#include "topoterm/tagger/model.hpp"

namespace topoterm {

struct TrainingConfig {
  double learning_rate = 4e-5;
  double warmup_fraction = 0.1;
  std::size_t epochs = 15;
  std::size_t batch_size = 128;
  double weight_decay = 0.01;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double adam_eps = 1e-8;
  // Stop once the last `patience` validation losses span less than delta.
  bool early_stopping = true;
  double early_stop_delta = 0.005;
  std::size_t patience = 3;
  std::uint64_t seed = 0;

  void validate() const;
};

nlohmann::json to_json(const TrainingConfig& c);

// Linear warmup over the first floor(warmup_fraction * total) steps, then
// linear decay to zero at `total`.
double learning_rate_at(const TrainingConfig& cfg, std::size_t step, std::size_t total_steps);

class AdamW {
 public:
  AdamW(const nn::ParameterStore& ps, const TrainingConfig& cfg);
  void step(nn::ParameterStore& ps, double lr);
  std::size_t steps_taken() const { return t_; }

 private:
  std::vector<nn::Mat> m_, v_;
  double beta1_, beta2_, eps_, weight_decay_;
  std::size_t t_ = 0;
};

struct TrainResult {
  std::vector<double> train_loss;  // mean batch loss per epoch
  std::vector<double> val_loss;
  std::size_t best_epoch = 0;      // 0-based; the returned model's epoch
  std::size_t epochs_run = 0;
  bool stopped_early = false;
};

nlohmann::json to_json(const TrainResult& r);

// Called after every epoch with the 0-based epoch index; returning true ends
// training.
using EpochCallback = std::function<bool(std::size_t epoch, const TaggerModel& model)>;

// Trains in place. Fits the input normalizer on `train` first. When a
// validation set is given the parameters of the epoch with the lowest
// validation loss are restored before returning.
TrainResult train(TaggerModel& model, std::span<const TaggedSequence> train,
                  std::span<const TaggedSequence> validation, const TrainingConfig& cfg,
                  const EpochCallback& on_epoch_end = {});

// Eval-mode mean token cross-entropy.
double evaluate_loss(TaggerModel& model, std::span<const TaggedSequence> data);

}  // namespace topoterm
