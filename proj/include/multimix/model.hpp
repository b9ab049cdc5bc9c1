#pragma once

#include <array>
#include <cmath>
#include <cstring>
#include <functional>
#include <iostream>
#include <map>
#include <memory>
#include <string>
#include <vector>

#include "multimix/data.hpp"
#include "multimix/error.hpp"
#include "multimix/metrics.hpp"
#include "multimix/rng.hpp"

namespace multimix {

inline std::vector<double> softmax(const std::vector<double>& logits) {
  if (logits.empty()) fail(Errc::InvalidDistribution, "softmax of empty logits");
  double m = logits[0];
  for (double z : logits) m = std::max(m, z);
  std::vector<double> p(logits.size());
  double sum = 0.0;
  for (std::size_t i = 0; i < logits.size(); ++i) {
    p[i] = std::exp(logits[i] - m);
    sum += p[i];
  }
  for (double& v : p) v /= sum;
  return p;
}

namespace detail {

inline void check_distribution(const std::vector<double>& probs) {
  if (probs.size() < 2) fail(Errc::InvalidDistribution, "need at least 2 classes");
  double sum = 0.0;
  for (double p : probs) {
    if (!(p >= 0.0) || p > 1.0) fail(Errc::InvalidDistribution, "probability outside [0, 1]");
    sum += p;
  }
  if (std::abs(sum - 1.0) > 1e-6) fail(Errc::InvalidDistribution, "probabilities do not sum to 1");
}

inline double plogp_sum(const std::vector<double>& probs) {
  double s = 0.0;
  for (double p : probs)
    if (p > 0.0) s += p * std::log(p);
  return s;
}

}  // namespace detail

/// Cross entropy with a confidence penalty that rewards higher-entropy
/// output: L = -log p[target] + beta * sum_c p_c log p_c. beta = 0 recovers
/// plain cross entropy; the penalty term is the negated entropy.
inline double loss_conf_penalty(const std::vector<double>& probs, int target, double beta) {
  detail::check_distribution(probs);
  if (target < 0 || target >= static_cast<int>(probs.size()))
    fail(Errc::IndexOutOfRange, "target " + std::to_string(target));
  if (probs[target] <= 0.0) fail(Errc::NonFiniteLoss, "zero probability at target");
  return -std::log(probs[target]) + beta * detail::plogp_sum(probs);
}

/// Gradient of loss_conf_penalty with respect to the softmax logits:
/// dL/dz_j = (p_j - [j == target]) + beta * p_j * (log p_j - sum_c p_c log p_c).
inline std::vector<double> loss_grad_logits(const std::vector<double>& probs, int target, double beta) {
  detail::check_distribution(probs);
  if (target < 0 || target >= static_cast<int>(probs.size()))
    fail(Errc::IndexOutOfRange, "target " + std::to_string(target));
  const double ent = detail::plogp_sum(probs);
  std::vector<double> g(probs.size());
  for (std::size_t j = 0; j < probs.size(); ++j) {
    const double pj = probs[j];
    g[j] = pj - (static_cast<int>(j) == target ? 1.0 : 0.0);
    if (pj > 0.0) g[j] += beta * pj * (std::log(pj) - ent);
  }
  return g;
}

/// Class probabilities for one sample: one row per token for Tagging, a
/// single row for Pair.
struct Prediction {
  std::vector<std::vector<double>> rows;
};

/// Mean over positions of the row maximum; a single row's maximum for Pair.
/// Softmax rows keep the result inside [1/C, 1].
inline double confidence_score(const Prediction& pred) {
  if (pred.rows.empty()) fail(Errc::EmptyDataset, "confidence of empty prediction");
  double sum = 0.0;
  for (const auto& row : pred.rows) {
    detail::check_distribution(row);
    double m = row[0];
    for (double p : row) m = std::max(m, p);
    sum += m;
  }
  return sum / static_cast<double>(pred.rows.size());
}

/// Argmax per row; ties resolve to the lowest class index.
inline std::vector<int> pseudo_label(const Prediction& pred) {
  if (pred.rows.empty()) fail(Errc::EmptyDataset, "pseudo label of empty prediction");
  std::vector<int> out;
  out.reserve(pred.rows.size());
  for (const auto& row : pred.rows) {
    detail::check_distribution(row);
    int best = 0;
    for (std::size_t j = 1; j < row.size(); ++j)
      if (row[j] > row[best]) best = static_cast<int>(j);
    out.push_back(best);
  }
  return out;
}

struct TrainConfig {
  double lr = 0.1;
  int batch_size = 16;
  int epochs = 1;     // full shuffled passes when steps < 0
  long steps = -1;    // exact SGD step budget; overrides epochs when >= 0
  bool conf_penalty = false;
  double beta = 1.0;
  double max_grad_norm = 1.0;  // global L2 clip; <= 0 disables clipping
  std::uint64_t seed = 0;
};

struct Batch {
  std::vector<const Sample*> samples;
  std::vector<const std::vector<int>*> labels;
};

/// Batch loss plus the gradient before clipping, sparse over parameter
/// indices. The map is ordered so that accumulation and the SGD update walk
/// parameters in one fixed order regardless of feature hashing.
struct BatchEval {
  double loss = 0.0;
  std::map<std::size_t, double> grad;
};

/// A trainable classifier over Samples. Parameters are exposed one scalar at
/// a time so finite differencing can probe the full vector.
class TaskModel {
 public:
  virtual ~TaskModel() = default;

  virtual TaskKind kind() const = 0;
  virtual int num_classes() const = 0;
  virtual Prediction predict(const Sample& s) const = 0;
  virtual std::unique_ptr<TaskModel> clone() const = 0;

  virtual std::size_t param_count() const = 0;
  virtual double param(std::size_t i) const = 0;
  virtual void set_param(std::size_t i, double v) = 0;

  /// Mean loss over the batch and its gradient. Per-example loss averages
  /// over positions for Tagging.
  virtual BatchEval evaluate_batch(const Batch& batch, const TrainConfig& cfg) const = 0;

  virtual void save(std::ostream& out) const = 0;
  virtual void load(std::istream& in) = 0;

  /// One SGD step: clip the batch gradient to cfg.max_grad_norm (global L2
  /// norm) and subtract lr * grad. Returns the batch loss.
  double train_batch(const Batch& batch, const TrainConfig& cfg) {
    if (batch.samples.empty()) fail(Errc::EmptyDataset, "empty training batch");
    if (batch.samples.size() != batch.labels.size())
      fail(Errc::LengthMismatch, "batch samples/labels differ");
    BatchEval ev = evaluate_batch(batch, cfg);
    if (!std::isfinite(ev.loss)) fail(Errc::NonFiniteLoss, "batch loss is not finite");
    double sq = 0.0;
    for (const auto& [i, g] : ev.grad) sq += g * g;
    const double norm = std::sqrt(sq);
    const double scale = (cfg.max_grad_norm > 0.0 && norm > cfg.max_grad_norm)
                             ? cfg.max_grad_norm / norm
                             : 1.0;
    for (const auto& [i, g] : ev.grad) set_param(i, param(i) - cfg.lr * scale * g);
    return ev.loss;
  }
};

using ModelFactory = std::function<std::unique_ptr<TaskModel>(std::uint64_t seed)>;

struct TrainStats {
  std::vector<double> epoch_losses;  // mean batch loss per epoch
};

/// Trains a copy of `base` on a labeled dataset with shuffled fixed-size
/// batches. Runs cfg.epochs full passes, or exactly cfg.steps batches drawn
/// from successive shuffled passes when cfg.steps >= 0 (0 steps returns an
/// untouched copy). The input model is never mutated.
inline std::unique_ptr<TaskModel> train_model(const TaskModel& base, const LabeledDataset& ds,
                                              const TrainConfig& cfg, TrainStats* stats = nullptr) {
  if (ds.empty()) fail(Errc::EmptyDataset, "training on empty dataset");
  if (!ds.labeled()) fail(Errc::UnlabeledData, "training needs labels");
  if (cfg.batch_size <= 0) fail(Errc::ConfigInvalid, "batch_size must be positive");
  if (cfg.lr <= 0.0) fail(Errc::ConfigInvalid, "learning rate must be positive");
  if (cfg.steps < 0 && cfg.epochs <= 0) fail(Errc::ConfigInvalid, "epochs must be positive");
  ds.validate();
  auto model = base.clone();
  const std::size_t n = ds.size();
  const std::size_t per_pass = (n + static_cast<std::size_t>(cfg.batch_size) - 1) /
                               static_cast<std::size_t>(cfg.batch_size);
  long remaining = cfg.steps;
  const int passes = cfg.steps >= 0
                         ? static_cast<int>((static_cast<std::size_t>(cfg.steps) + per_pass - 1) / per_pass)
                         : cfg.epochs;
  for (int e = 0; e < passes; ++e) {
    Rng rng(derive_seed(cfg.seed, "shuffle", static_cast<std::uint64_t>(e)));
    std::vector<std::size_t> order(n);
    for (std::size_t i = 0; i < n; ++i) order[i] = i;
    for (std::size_t i = n; i > 1; --i) {
      const std::size_t j = rng.below(i);
      std::swap(order[i - 1], order[j]);
    }
    double loss_sum = 0.0;
    std::size_t batches = 0;
    for (std::size_t start = 0; start < n; start += static_cast<std::size_t>(cfg.batch_size)) {
      if (cfg.steps >= 0 && remaining-- <= 0) break;
      Batch b;
      const std::size_t end = std::min(n, start + static_cast<std::size_t>(cfg.batch_size));
      for (std::size_t i = start; i < end; ++i) {
        b.samples.push_back(&ds.samples[order[i]]);
        b.labels.push_back(&ds.labels[order[i]]);
      }
      loss_sum += model->train_batch(b, cfg);
      ++batches;
    }
    if (stats && batches > 0) stats->epoch_losses.push_back(loss_sum / static_cast<double>(batches));
  }
  return model;
}

inline double confidence_score(const TaskModel& model, const Sample& sample) {
  return confidence_score(model.predict(sample));
}

/// Mean Shannon entropy of the predictive distributions over a dataset,
/// averaged first over positions within a sample, then over samples.
inline double mean_predictive_entropy(const TaskModel& model, const LabeledDataset& ds) {
  if (ds.empty()) fail(Errc::EmptyDataset, "entropy of empty dataset");
  double total = 0.0;
  for (const auto& s : ds.samples) {
    const Prediction pred = model.predict(s);
    double per_sample = 0.0;
    for (const auto& row : pred.rows) {
      double h = 0.0;
      for (double p : row)
        if (p > 0.0) h -= p * std::log(p);
      per_sample += h;
    }
    total += per_sample / static_cast<double>(pred.rows.size());
  }
  return total / static_cast<double>(ds.size());
}

/// Warm-up stage: three models built from distinct seeds, each trained on
/// the labeled source set with the confidence penalty switched on.
inline std::vector<std::unique_ptr<TaskModel>> train_warmup(const ModelFactory& factory,
                                                            const LabeledDataset& source,
                                                            const TrainConfig& cfg,
                                                            const std::array<std::uint64_t, 3>& seeds,
                                                            std::vector<TrainStats>* stats = nullptr) {
  if (seeds[0] == seeds[1] || seeds[0] == seeds[2] || seeds[1] == seeds[2])
    fail(Errc::DuplicateSeeds, "warm-up seeds must be pairwise distinct");
  std::vector<std::unique_ptr<TaskModel>> models;
  for (std::uint64_t seed : seeds) {
    TrainConfig c = cfg;
    c.conf_penalty = true;
    c.seed = seed;
    auto fresh = factory(seed);
    TrainStats st;
    models.push_back(train_model(*fresh, source, c, &st));
    if (stats) stats->push_back(std::move(st));
  }
  return models;
}

/// Task metric on a labeled dataset: span micro F1 for Tagging, accuracy
/// for Pair.
inline double evaluate_model(const TaskModel& model, const LabeledDataset& ds) {
  if (ds.empty()) fail(Errc::EmptyDataset, "evaluating on empty dataset");
  if (!ds.labeled()) fail(Errc::UnlabeledData, "evaluation needs labels");
  if (model.kind() == TaskKind::Tagging) {
    std::vector<std::vector<int>> gold, pred;
    for (std::size_t i = 0; i < ds.size(); ++i) {
      gold.push_back(ds.labels[i]);
      pred.push_back(pseudo_label(model.predict(ds.samples[i])));
    }
    return micro_f1(gold, pred, ds.vocab).f1;
  }
  std::vector<int> gold, pred;
  for (std::size_t i = 0; i < ds.size(); ++i) {
    gold.push_back(ds.labels[i][0]);
    pred.push_back(pseudo_label(model.predict(ds.samples[i]))[0]);
  }
  return accuracy(gold, pred);
}

}  // namespace multimix
