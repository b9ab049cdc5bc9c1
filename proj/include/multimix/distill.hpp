#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <fstream>
#include <string>
#include <unordered_map>
#include <vector>

#include "multimix/data.hpp"
#include "multimix/error.hpp"
#include "multimix/model.hpp"

namespace multimix {

/// One pseudo-labeled sample with the statistics distillation ranks on.
/// goodness stays -1 until a clustering fit assigns the GMM posterior.
struct PseudoEntry {
  Sample sample;
  std::vector<int> labels;
  double p_hat = 0.0;
  double loss = 0.0;
  double goodness = -1.0;
};

struct PseudoLabeledSet {
  LabelVocab vocab;
  std::vector<PseudoEntry> entries;

  std::size_t size() const { return entries.size(); }
  bool empty() const { return entries.empty(); }

  std::vector<double> losses() const {
    std::vector<double> out;
    out.reserve(entries.size());
    for (const auto& e : entries) out.push_back(e.loss);
    return out;
  }

  LabeledDataset to_dataset() const {
    LabeledDataset ds;
    ds.vocab = vocab;
    for (const auto& e : entries) {
      ds.samples.push_back(e.sample);
      ds.labels.push_back(e.labels);
    }
    return ds;
  }
};

/// Labels every sample with the model's argmax and records confidence p_hat
/// plus the per-sample cross entropy at the pseudo label (mean over
/// positions for Tagging), the scalar the GMM later clusters.
inline PseudoLabeledSet pseudo_label_all(const TaskModel& model, const LabeledDataset& data) {
  if (data.empty()) fail(Errc::EmptyDataset, "nothing to pseudo-label");
  PseudoLabeledSet out;
  out.vocab = data.vocab;
  for (const Sample& s : data.samples) {
    const Prediction pred = model.predict(s);
    PseudoEntry e;
    e.sample = s;
    e.labels = pseudo_label(pred);
    e.p_hat = confidence_score(pred);
    double ce = 0.0;
    for (std::size_t t = 0; t < pred.rows.size(); ++t) ce -= std::log(pred.rows[t][e.labels[t]]);
    e.loss = ce / static_cast<double>(pred.rows.size());
    if (!std::isfinite(e.loss)) fail(Errc::NonFiniteLoss, s.id);
    out.entries.push_back(std::move(e));
  }
  return out;
}

/// Keeps the ceil(eta * N / 100) highest-confidence entries; ties keep
/// earlier input entries and the output preserves input order. eta = 100 is
/// the identity.
inline PseudoLabeledSet distil_confidence(const PseudoLabeledSet& set, double eta) {
  if (!(eta > 0.0) || eta > 100.0) fail(Errc::ConfigInvalid, "eta must be in (0, 100]");
  const std::size_t n = set.size();
  const auto keep = static_cast<std::size_t>(std::ceil(eta * static_cast<double>(n) / 100.0));
  std::vector<std::size_t> order(n);
  for (std::size_t i = 0; i < n; ++i) order[i] = i;
  std::stable_sort(order.begin(), order.end(),
                   [&](std::size_t a, std::size_t b) { return set.entries[a].p_hat > set.entries[b].p_hat; });
  std::vector<bool> selected(n, false);
  for (std::size_t i = 0; i < keep && i < n; ++i) selected[order[i]] = true;
  PseudoLabeledSet out;
  out.vocab = set.vocab;
  for (std::size_t i = 0; i < n; ++i)
    if (selected[i]) out.entries.push_back(set.entries[i]);
  return out;
}

/// Two-component 1-d Gaussian mixture over per-sample losses. Component g
/// (smaller mean) models the well-fit samples.
struct GmmModel {
  std::array<double, 2> pi{0.5, 0.5};
  std::array<double, 2> mu{0.0, 0.0};
  std::array<double, 2> var{1.0, 1.0};
  std::vector<double> ll_trace;
  int goodness_component = 0;
};

struct GmmConfig {
  int max_iters = 100;
  double tol = 1e-6;
  double var_floor = 1e-6;
};

namespace detail {

inline double log_normal_pdf(double x, double mu, double var) {
  const double d = x - mu;
  return -0.5 * (std::log(2.0 * 3.14159265358979323846 * var) + d * d / var);
}

}  // namespace detail

/// EM with deterministic median-split initialization: the lower half of the
/// sorted losses seeds component 0, the upper half component 1. The E step
/// works in log space; iteration stops when the log-likelihood gain drops
/// below tol.
inline GmmModel gmm_fit(const std::vector<double>& losses, const GmmConfig& cfg = {}) {
  const std::size_t n = losses.size();
  if (n < 2) fail(Errc::TooFewSamples, "GMM needs at least 2 losses");
  for (double x : losses)
    if (!std::isfinite(x)) fail(Errc::NonFiniteLoss, "non-finite loss in GMM input");

  GmmModel m;
  {
    std::vector<double> sorted = losses;
    std::sort(sorted.begin(), sorted.end());
    const std::size_t lo = (n + 1) / 2;
    auto init_half = [&](std::size_t begin, std::size_t end, int k) {
      const auto cnt = static_cast<double>(end - begin);
      double mean = 0.0;
      for (std::size_t i = begin; i < end; ++i) mean += sorted[i];
      mean /= cnt;
      double var = 0.0;
      for (std::size_t i = begin; i < end; ++i) var += (sorted[i] - mean) * (sorted[i] - mean);
      var /= cnt;
      m.pi[k] = cnt / static_cast<double>(n);
      m.mu[k] = mean;
      m.var[k] = std::max(var, cfg.var_floor);
    };
    init_half(0, lo, 0);
    init_half(lo, n, 1);
  }

  std::vector<std::array<double, 2>> resp(n);
  for (int iter = 0; iter < cfg.max_iters; ++iter) {
    // E step: responsibilities and log-likelihood under current parameters.
    double ll = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
      std::array<double, 2> lw;
      for (int k = 0; k < 2; ++k)
        lw[k] = std::log(m.pi[k]) + detail::log_normal_pdf(losses[i], m.mu[k], m.var[k]);
      const double mx = std::max(lw[0], lw[1]);
      const double lse = mx + std::log(std::exp(lw[0] - mx) + std::exp(lw[1] - mx));
      ll += lse;
      for (int k = 0; k < 2; ++k) resp[i][k] = std::exp(lw[k] - lse);
    }
    if (!std::isfinite(ll)) fail(Errc::NonFiniteLoss, "GMM log-likelihood diverged");
    const bool converged = !m.ll_trace.empty() && ll - m.ll_trace.back() < cfg.tol;
    m.ll_trace.push_back(ll);
    if (converged) break;
    // M step.
    for (int k = 0; k < 2; ++k) {
      double rsum = 0.0, xsum = 0.0;
      for (std::size_t i = 0; i < n; ++i) {
        rsum += resp[i][k];
        xsum += resp[i][k] * losses[i];
      }
      m.pi[k] = rsum / static_cast<double>(n);
      m.mu[k] = xsum / rsum;
      double vsum = 0.0;
      for (std::size_t i = 0; i < n; ++i)
        vsum += resp[i][k] * (losses[i] - m.mu[k]) * (losses[i] - m.mu[k]);
      m.var[k] = std::max(vsum / rsum, cfg.var_floor);
    }
  }
  m.goodness_component = m.mu[0] <= m.mu[1] ? 0 : 1;
  return m;
}

/// Posterior of the goodness component at the given loss.
inline double gmm_goodness(const GmmModel& m, double loss) {
  std::array<double, 2> lw;
  for (int k = 0; k < 2; ++k)
    lw[k] = std::log(m.pi[k]) + detail::log_normal_pdf(loss, m.mu[k], m.var[k]);
  const double mx = std::max(lw[0], lw[1]);
  const double lse = mx + std::log(std::exp(lw[0] - mx) + std::exp(lw[1] - mx));
  return std::exp(lw[m.goodness_component] - lse);
}

/// Keeps entries whose goodness posterior clears the threshold, preserving
/// input order and recording the posterior on every entry.
inline PseudoLabeledSet distil_clustering(const PseudoLabeledSet& set, const GmmModel& gmm, double threshold) {
  if (!(threshold > 0.0) || !(threshold < 1.0)) fail(Errc::ConfigInvalid, "threshold must be in (0, 1)");
  PseudoLabeledSet out;
  out.vocab = set.vocab;
  for (const auto& e : set.entries) {
    const double g = gmm_goodness(gmm, e.loss);
    if (g >= threshold) {
      out.entries.push_back(e);
      out.entries.back().goodness = g;
    }
  }
  return out;
}

enum class DistillMethod { Confidence, Clustering };

struct DistillConfig {
  DistillMethod method = DistillMethod::Confidence;
  std::vector<double> eta_per_epoch;  // percent (Confidence) or threshold (Clustering)
  GmmConfig gmm;
};

/// Single-model distillation: pseudo-label everything, then filter by the
/// configured method with this epoch's factor.
inline PseudoLabeledSet distil(const TaskModel& model, const LabeledDataset& data, DistillMethod method,
                               double eta, const GmmConfig& gmm_cfg = {}) {
  PseudoLabeledSet all = pseudo_label_all(model, data);
  if (method == DistillMethod::Confidence) return distil_confidence(all, eta);
  const GmmModel gmm = gmm_fit(all.losses(), gmm_cfg);
  for (auto& e : all.entries) e.goodness = gmm_goodness(gmm, e.loss);
  return distil_clustering(all, gmm, eta);
}

/// Co-guessing: entries of `a` whose sample id also appears in `b` with an
/// identical label sequence. Symmetric in membership; labels come from `a`.
inline PseudoLabeledSet agreement(const PseudoLabeledSet& a, const PseudoLabeledSet& b) {
  if (!(a.vocab == b.vocab)) fail(Errc::MismatchedVocab, "agreement over different label vocabs");
  std::unordered_map<std::string, const PseudoEntry*> by_id;
  for (const auto& e : b.entries) by_id.emplace(e.sample.id, &e);
  PseudoLabeledSet out;
  out.vocab = a.vocab;
  for (const auto& e : a.entries) {
    auto it = by_id.find(e.sample.id);
    if (it != by_id.end() && it->second->labels == e.labels) out.entries.push_back(e);
  }
  return out;
}

/// CSV of the per-sample statistics behind loss-distribution analyses.
inline void write_loss_stats(const PseudoLabeledSet& set, const std::string& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) fail(Errc::IoFailure, "cannot write " + path);
  out << "id,length,loss,p_hat,goodness\n";
  char buf[64];
  auto fmt = [&](double v) {
    std::snprintf(buf, sizeof buf, "%.17g", v);
    return std::string(buf);
  };
  for (const auto& e : set.entries)
    out << e.sample.id << ',' << e.sample.length() << ',' << fmt(e.loss) << ',' << fmt(e.p_hat) << ','
        << fmt(e.goodness) << '\n';
  if (!out) fail(Errc::IoFailure, "write failed for " + path);
}

}  // namespace multimix
