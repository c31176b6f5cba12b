#include "topoterm/tagger/training.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>

#include <spdlog/spdlog.h>

#include "topoterm/error.hpp"

namespace topoterm {

void TrainingConfig::validate() const {
  if (!(learning_rate > 0.0)) throw ValidationError("learning_rate must be positive");
  if (!(warmup_fraction >= 0.0 && warmup_fraction < 1.0)) {
    throw ValidationError("warmup_fraction must lie in [0, 1)");
  }
  if (batch_size == 0) throw ValidationError("batch_size must be positive");
  if (weight_decay < 0.0) throw ValidationError("weight_decay must be nonnegative");
  if (patience < 2) throw ValidationError("patience must be at least 2");
}

nlohmann::json to_json(const TrainingConfig& c) {
  return {{"learning_rate", c.learning_rate}, {"warmup_fraction", c.warmup_fraction},
          {"epochs", c.epochs},               {"batch_size", c.batch_size},
          {"weight_decay", c.weight_decay},   {"beta1", c.beta1},
          {"beta2", c.beta2},                 {"adam_eps", c.adam_eps},
          {"early_stopping", c.early_stopping}, {"early_stop_delta", c.early_stop_delta},
          {"patience", c.patience},           {"seed", c.seed}};
}

double learning_rate_at(const TrainingConfig& cfg, std::size_t step, std::size_t total) {
  if (total == 0 || step >= total) return 0.0;
  const auto warmup = static_cast<std::size_t>(std::floor(cfg.warmup_fraction * static_cast<double>(total)));
  if (step < warmup) {
    return cfg.learning_rate * static_cast<double>(step + 1) / static_cast<double>(warmup);
  }
  return cfg.learning_rate * static_cast<double>(total - step) / static_cast<double>(total - warmup);
}

AdamW::AdamW(const nn::ParameterStore& ps, const TrainingConfig& cfg)
    : beta1_(cfg.beta1), beta2_(cfg.beta2), eps_(cfg.adam_eps), weight_decay_(cfg.weight_decay) {
  for (const auto& p : ps) {
    m_.push_back(nn::Mat::Zero(p.value.rows(), p.value.cols()));
    v_.push_back(nn::Mat::Zero(p.value.rows(), p.value.cols()));
  }
}

void AdamW::step(nn::ParameterStore& ps, double lr) {
  ++t_;
  const double c1 = 1.0 - std::pow(beta1_, static_cast<double>(t_));
  const double c2 = 1.0 - std::pow(beta2_, static_cast<double>(t_));
  for (std::size_t i = 0; i < ps.size(); ++i) {
    auto& p = ps[i];
    if (p.decay && weight_decay_ > 0.0) p.value *= (1.0 - lr * weight_decay_);
    m_[i] = beta1_ * m_[i] + (1.0 - beta1_) * p.grad;
    v_[i] = beta2_ * v_[i] + (1.0 - beta2_) * p.grad.cwiseProduct(p.grad);
    p.value.array() -= lr * (m_[i].array() / c1) / ((v_[i].array() / c2).sqrt() + eps_);
  }
}

nlohmann::json to_json(const TrainResult& r) {
  return {{"train_loss", r.train_loss},
          {"val_loss", r.val_loss},
          {"best_epoch", r.best_epoch},
          {"epochs_run", r.epochs_run},
          {"stopped_early", r.stopped_early}};
}

double evaluate_loss(TaggerModel& model, std::span<const TaggedSequence> data) {
  std::size_t tokens = 0;
  double total = 0.0;
  for (const auto& s : data) {
    const std::size_t len = std::min(s.features.size(), model.config().max_seq_len);
    if (len == 0) continue;
    const TaggedSequence* one[] = {&s};
    total += model.batch_loss(one, nullptr, false) * static_cast<double>(len);
    tokens += len;
  }
  return tokens == 0 ? 0.0 : total / static_cast<double>(tokens);
}

TrainResult train(TaggerModel& model, std::span<const TaggedSequence> train_set,
                  std::span<const TaggedSequence> validation, const TrainingConfig& cfg,
                  const EpochCallback& on_epoch_end) {
  cfg.validate();
  if (train_set.empty()) throw ValidationError("training set is empty");
  if (cfg.epochs == 0) return {};
  model.normalizer() = fit_normalizer(model.config().feature_kind, train_set);

  const std::size_t batches_per_epoch = (train_set.size() + cfg.batch_size - 1) / cfg.batch_size;
  const std::size_t total_steps = batches_per_epoch * cfg.epochs;
  AdamW opt(model.params(), cfg);
  nn::Rng rng(cfg.seed);
  std::vector<std::size_t> order(train_set.size());
  std::iota(order.begin(), order.end(), std::size_t{0});

  TrainResult result;
  double best_val = std::numeric_limits<double>::infinity();
  std::vector<nn::Mat> best_params;
  std::size_t step = 0;

  for (std::size_t epoch = 0; epoch < cfg.epochs; ++epoch) {
    std::shuffle(order.begin(), order.end(), rng);
    double epoch_loss = 0.0;
    for (std::size_t b = 0; b < batches_per_epoch; ++b) {
      std::vector<const TaggedSequence*> batch;
      for (std::size_t i = b * cfg.batch_size; i < std::min(order.size(), (b + 1) * cfg.batch_size); ++i) {
        batch.push_back(&train_set[order[i]]);
      }
      model.params().zero_grad();
      const double loss = model.batch_loss(batch, &rng, true);
      if (!std::isfinite(loss)) {
        throw Error("training diverged: non-finite loss at step " + std::to_string(step) +
                    " (epoch " + std::to_string(epoch) + ")");
      }
      opt.step(model.params(), learning_rate_at(cfg, step, total_steps));
      epoch_loss += loss;
      ++step;
    }
    result.train_loss.push_back(epoch_loss / static_cast<double>(batches_per_epoch));
    result.epochs_run = epoch + 1;

    if (validation.empty()) {
      result.best_epoch = epoch;
      spdlog::debug("epoch {} train loss {:.6f}", epoch, result.train_loss.back());
      if (on_epoch_end && on_epoch_end(epoch, model)) break;
      continue;
    }
    const double val = evaluate_loss(model, validation);
    result.val_loss.push_back(val);
    spdlog::debug("epoch {} train loss {:.6f} val loss {:.6f}", epoch, result.train_loss.back(), val);
    if (val < best_val) {
      best_val = val;
      result.best_epoch = epoch;
      best_params.clear();
      for (const auto& p : model.params()) best_params.push_back(p.value);
    }
    if (on_epoch_end && on_epoch_end(epoch, model)) break;
    if (cfg.early_stopping && result.val_loss.size() >= cfg.patience) {
      const auto tail = std::span(result.val_loss).last(cfg.patience);
      const auto [lo, hi] = std::minmax_element(tail.begin(), tail.end());
      if (*hi - *lo < cfg.early_stop_delta) {
        result.stopped_early = true;
        break;
      }
    }
  }

  if (!best_params.empty()) {
    for (std::size_t i = 0; i < model.params().size(); ++i) model.params()[i].value = best_params[i];
  }
  return result;
}

}  // namespace topoterm
