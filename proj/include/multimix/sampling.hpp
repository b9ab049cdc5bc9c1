#pragma once

#include <cmath>
#include <vector>

#include "multimix/data.hpp"
#include "multimix/error.hpp"
#include "multimix/rng.hpp"

namespace multimix {

/// Balanced multinomial over datasets: f_i = n_i / sum n_j,
/// p_i = f_i^alpha / sum f_j^alpha. alpha = 1 is proportional, alpha = 0
/// uniform, alpha < 1 upweights small datasets.
inline std::vector<double> mixture_weights(const std::vector<std::size_t>& sizes, double alpha) {
  if (sizes.empty()) fail(Errc::EmptySizes, "no dataset sizes");
  if (alpha < 0.0) fail(Errc::ConfigInvalid, "alpha must be >= 0");
  double total = 0.0;
  for (std::size_t n : sizes) {
    if (n == 0) fail(Errc::ZeroSize, "dataset of size 0");
    total += static_cast<double>(n);
  }
  std::vector<double> p(sizes.size());
  double psum = 0.0;
  for (std::size_t i = 0; i < sizes.size(); ++i) {
    p[i] = std::pow(static_cast<double>(sizes[i]) / total, alpha);
    psum += p[i];
  }
  for (double& v : p) v /= psum;
  return p;
}

/// A (dataset index, sample index) reference into a dataset list.
struct DrawRef {
  std::size_t dataset = 0;
  std::size_t sample = 0;
};

/// Draws samples by first picking a dataset from the Eq.-3 multinomial,
/// then a member uniformly with replacement. Deterministic per seed.
class MixtureStream {
 public:
  MixtureStream(std::vector<std::size_t> sizes, double alpha, std::uint64_t seed)
      : sizes_(std::move(sizes)), weights_(mixture_weights(sizes_, alpha)), rng_(seed) {
    cumulative_.reserve(weights_.size());
    double acc = 0.0;
    for (double w : weights_) {
      acc += w;
      cumulative_.push_back(acc);
    }
    cumulative_.back() = 1.0;
  }

  const std::vector<double>& weights() const { return weights_; }

  DrawRef next() {
    const double u = rng_.uniform();
    std::size_t d = 0;
    while (d + 1 < cumulative_.size() && u >= cumulative_[d]) ++d;
    return {d, rng_.below(sizes_[d])};
  }

  std::vector<DrawRef> next_batch(std::size_t batch) {
    std::vector<DrawRef> out;
    out.reserve(batch);
    for (std::size_t i = 0; i < batch; ++i) out.push_back(next());
    return out;
  }

 private:
  std::vector<std::size_t> sizes_;
  std::vector<double> weights_;
  std::vector<double> cumulative_;
  Rng rng_;
};

/// steps batches of size batch over the given datasets.
inline std::vector<std::vector<DrawRef>> sample_stream(const std::vector<const LabeledDataset*>& datasets,
                                                       double alpha, std::size_t batch, std::size_t steps,
                                                       std::uint64_t seed) {
  if (datasets.empty()) fail(Errc::EmptySizes, "no datasets to sample");
  std::vector<std::size_t> sizes;
  for (const auto* ds : datasets) {
    if (!ds || ds->empty()) fail(Errc::EmptyDataset, "empty dataset in mixture");
    sizes.push_back(ds->size());
  }
  MixtureStream stream(sizes, alpha, seed);
  std::vector<std::vector<DrawRef>> out;
  out.reserve(steps);
  for (std::size_t s = 0; s < steps; ++s) out.push_back(stream.next_batch(batch));
  return out;
}

}  // namespace multimix
