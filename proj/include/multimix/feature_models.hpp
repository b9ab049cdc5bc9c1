#pragma once

#include <algorithm>
#include <cstring>
#include <fstream>
#include <map>
#include <set>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "multimix/model.hpp"

namespace multimix {
namespace detail {

using FeatureVec = std::map<std::size_t, double>;

inline void add_feature(FeatureVec& f, std::string_view name, std::size_t dim) {
  f[static_cast<std::size_t>(fnv1a64(name) % dim)] += 1.0;
}

inline void l2_normalize(FeatureVec& f) {
  double sq = 0.0;
  for (const auto& [i, v] : f) sq += v * v;
  if (sq <= 0.0) return;
  const double inv = 1.0 / std::sqrt(sq);
  for (auto& [i, v] : f) v *= inv;
}

inline void write_u64(std::ostream& out, std::uint64_t v) {
  unsigned char b[8];
  for (int i = 0; i < 8; ++i) b[i] = static_cast<unsigned char>((v >> (8 * i)) & 0xff);
  out.write(reinterpret_cast<const char*>(b), 8);
}

inline std::uint64_t read_u64(std::istream& in) {
  unsigned char b[8];
  in.read(reinterpret_cast<char*>(b), 8);
  if (!in) fail(Errc::IoFailure, "truncated checkpoint");
  std::uint64_t v = 0;
  for (int i = 0; i < 8; ++i) v |= static_cast<std::uint64_t>(b[i]) << (8 * i);
  return v;
}

inline void write_f64(std::ostream& out, double d) {
  std::uint64_t bits;
  std::memcpy(&bits, &d, 8);
  write_u64(out, bits);
}

inline double read_f64(std::istream& in) {
  const std::uint64_t bits = read_u64(in);
  double d;
  std::memcpy(&d, &bits, 8);
  return d;
}

}  // namespace detail

/// Linear softmax over hashed sparse features. Weights live at
/// [class * dim + feature]; per-class biases follow at [classes * dim + c].
/// Subclasses supply one feature row per predicted position.
class HashedLinearModel : public TaskModel {
 public:
  HashedLinearModel(int classes, std::size_t dim, std::uint64_t seed)
      : classes_(classes), dim_(dim), params_(static_cast<std::size_t>(classes) * dim + classes, 0.0) {
    if (classes < 2) fail(Errc::ConfigInvalid, "need at least 2 classes");
    if (dim == 0) fail(Errc::ConfigInvalid, "hash dim must be positive");
    Rng rng(derive_seed(seed, "init"));
    for (double& p : params_) p = 0.01 * rng.normal();
  }

  int num_classes() const override { return classes_; }
  std::size_t hash_dim() const { return dim_; }

  std::size_t param_count() const override { return params_.size(); }
  double param(std::size_t i) const override { return params_.at(i); }
  void set_param(std::size_t i, double v) override { params_.at(i) = v; }

  Prediction predict(const Sample& s) const override {
    Prediction pred;
    for (const auto& row : featurize(s)) pred.rows.push_back(softmax(logits(row)));
    return pred;
  }

  BatchEval evaluate_batch(const Batch& batch, const TrainConfig& cfg) const override {
    if (batch.samples.empty()) fail(Errc::EmptyDataset, "empty batch");
    if (batch.samples.size() != batch.labels.size())
      fail(Errc::LengthMismatch, "batch samples/labels differ");
    const double beta = cfg.conf_penalty ? cfg.beta : 0.0;
    const double inv_n = 1.0 / static_cast<double>(batch.samples.size());
    BatchEval ev;
    for (std::size_t ex = 0; ex < batch.samples.size(); ++ex) {
      const auto rows = featurize(*batch.samples[ex]);
      const auto& lab = *batch.labels[ex];
      if (lab.size() != rows.size()) fail(Errc::LabelLengthMismatch, batch.samples[ex]->id);
      const double scale = inv_n / static_cast<double>(rows.size());
      for (std::size_t t = 0; t < rows.size(); ++t) {
        const int y = lab[t];
        if (y < 0 || y >= classes_) fail(Errc::UnknownLabel, batch.samples[ex]->id);
        const auto probs = softmax(logits(rows[t]));
        ev.loss += scale * loss_conf_penalty(probs, y, beta);
        const auto g = loss_grad_logits(probs, y, beta);
        for (int c = 0; c < classes_; ++c) {
          const double gc = scale * g[c];
          if (gc == 0.0) continue;
          ev.grad[bias_index(c)] += gc;
          for (const auto& [f, v] : rows[t]) ev.grad[weight_index(c, f)] += gc * v;
        }
      }
    }
    return ev;
  }

  void save(std::ostream& out) const override {
    out.write("MMIX", 4);
    detail::write_u64(out, 1);  // format version
    nlohmann::ordered_json header;
    header["model"] = tag();
    header["classes"] = classes_;
    header["dim"] = dim_;
    header["features"] = feature_meta();
    const std::string hs = header.dump();
    detail::write_u64(out, hs.size());
    out.write(hs.data(), static_cast<std::streamsize>(hs.size()));
    detail::write_u64(out, params_.size());
    for (double p : params_) detail::write_f64(out, p);
    if (!out) fail(Errc::IoFailure, "checkpoint write failed");
  }

  void load(std::istream& in) override {
    char magic[4];
    in.read(magic, 4);
    if (!in || std::memcmp(magic, "MMIX", 4) != 0) fail(Errc::IoFailure, "bad checkpoint magic");
    if (detail::read_u64(in) != 1) fail(Errc::IoFailure, "unsupported checkpoint version");
    const std::uint64_t hlen = detail::read_u64(in);
    std::string hs(hlen, '\0');
    in.read(hs.data(), static_cast<std::streamsize>(hlen));
    if (!in) fail(Errc::IoFailure, "truncated checkpoint header");
    const auto header = nlohmann::json::parse(hs, nullptr, false);
    if (header.is_discarded()) fail(Errc::IoFailure, "malformed checkpoint header");
    if (header.value("model", "") != tag()) fail(Errc::IoFailure, "checkpoint model tag mismatch");
    classes_ = header.at("classes").get<int>();
    dim_ = header.at("dim").get<std::size_t>();
    const std::uint64_t n = detail::read_u64(in);
    if (n != static_cast<std::uint64_t>(classes_) * dim_ + static_cast<std::uint64_t>(classes_))
      fail(Errc::IoFailure, "checkpoint parameter count mismatch");
    params_.resize(n);
    for (auto& p : params_) p = detail::read_f64(in);
  }

 protected:
  virtual std::vector<detail::FeatureVec> featurize(const Sample& s) const = 0;
  virtual const char* tag() const = 0;
  virtual nlohmann::ordered_json feature_meta() const = 0;

  std::size_t weight_index(int c, std::size_t f) const { return static_cast<std::size_t>(c) * dim_ + f; }
  std::size_t bias_index(int c) const { return static_cast<std::size_t>(classes_) * dim_ + static_cast<std::size_t>(c); }

  std::vector<double> logits(const detail::FeatureVec& feats) const {
    std::vector<double> z(classes_);
    for (int c = 0; c < classes_; ++c) {
      double acc = params_[bias_index(c)];
      for (const auto& [f, v] : feats) acc += params_[weight_index(c, f)] * v;
      z[c] = acc;
    }
    return z;
  }

  int classes_;
  std::size_t dim_;
  std::vector<double> params_;
};

/// Sentence-pair classifier: hashed unigrams and bigrams of each part,
/// shared-token indicators and a bucketed token-overlap ratio.
class LinearSoftmaxModel : public HashedLinearModel {
 public:
  using HashedLinearModel::HashedLinearModel;
  TaskKind kind() const override { return TaskKind::Pair; }
  std::unique_ptr<TaskModel> clone() const override { return std::make_unique<LinearSoftmaxModel>(*this); }

 protected:
  const char* tag() const override { return "pair_linear"; }
  nlohmann::ordered_json feature_meta() const override { return {{"ngram_order", 2}}; }

  std::vector<detail::FeatureVec> featurize(const Sample& s) const override {
    if (s.kind != TaskKind::Pair) fail(Errc::ConfigInvalid, "pair model fed a non-pair sample");
    detail::FeatureVec f;
    auto ngrams = [&](const std::vector<std::string>& toks, const char* pre1, const char* pre2) {
      for (std::size_t i = 0; i < toks.size(); ++i) {
        detail::add_feature(f, std::string(pre1) + toks[i], dim_);
        if (i + 1 < toks.size())
          detail::add_feature(f, std::string(pre2) + toks[i] + '\x1f' + toks[i + 1], dim_);
      }
    };
    ngrams(s.part_a, "a1:", "a2:");
    ngrams(s.part_b, "b1:", "b2:");
    const std::set<std::string> sa(s.part_a.begin(), s.part_a.end());
    const std::set<std::string> sb(s.part_b.begin(), s.part_b.end());
    std::size_t inter = 0;
    for (const auto& t : sb)
      if (sa.count(t)) {
        ++inter;
        detail::add_feature(f, "i:" + t, dim_);
      }
    const std::size_t uni = sa.size() + sb.size() - inter;
    const int bucket = std::min(9, static_cast<int>(10.0 * static_cast<double>(inter) / static_cast<double>(uni)));
    detail::add_feature(f, "ov:" + std::to_string(bucket), dim_);
    detail::l2_normalize(f);
    return {std::move(f)};
  }
};

/// Token tagger: hashed identity and context-window features (two tokens
/// each side plus adjacent-pair conjunctions) per position.
class TokenTaggerModel : public HashedLinearModel {
 public:
  using HashedLinearModel::HashedLinearModel;
  TaskKind kind() const override { return TaskKind::Tagging; }
  std::unique_ptr<TaskModel> clone() const override { return std::make_unique<TokenTaggerModel>(*this); }

 protected:
  const char* tag() const override { return "token_tagger"; }
  nlohmann::ordered_json feature_meta() const override { return {{"window", 2}}; }

  std::vector<detail::FeatureVec> featurize(const Sample& s) const override {
    if (s.kind != TaskKind::Tagging) fail(Errc::ConfigInvalid, "tagger fed a non-tagging sample");
    const auto& toks = s.tokens;
    const auto at = [&](std::ptrdiff_t i) -> std::string {
      if (i < 0) return "<s>";
      if (i >= static_cast<std::ptrdiff_t>(toks.size())) return "</s>";
      return toks[static_cast<std::size_t>(i)];
    };
    std::vector<detail::FeatureVec> rows(toks.size());
    for (std::size_t t = 0; t < toks.size(); ++t) {
      const auto ti = static_cast<std::ptrdiff_t>(t);
      detail::FeatureVec& f = rows[t];
      detail::add_feature(f, "w0:" + toks[t], dim_);
      detail::add_feature(f, "w-1:" + at(ti - 1), dim_);
      detail::add_feature(f, "w-2:" + at(ti - 2), dim_);
      detail::add_feature(f, "w+1:" + at(ti + 1), dim_);
      detail::add_feature(f, "w+2:" + at(ti + 2), dim_);
      detail::add_feature(f, "w-10:" + at(ti - 1) + '\x1f' + toks[t], dim_);
      detail::add_feature(f, "w01:" + toks[t] + '\x1f' + at(ti + 1), dim_);
      detail::l2_normalize(f);
    }
    return rows;
  }
};

/// Reopens a checkpoint written by TaskModel::save, dispatching on the
/// model tag in the header.
inline std::unique_ptr<TaskModel> load_model(std::istream& in) {
  char magic[4];
  in.read(magic, 4);
  if (!in || std::memcmp(magic, "MMIX", 4) != 0) fail(Errc::IoFailure, "bad checkpoint magic");
  detail::read_u64(in);  // version, revalidated by load
  const std::uint64_t hlen = detail::read_u64(in);
  std::string hs(hlen, '\0');
  in.read(hs.data(), static_cast<std::streamsize>(hlen));
  if (!in) fail(Errc::IoFailure, "truncated checkpoint header");
  const auto header = nlohmann::json::parse(hs, nullptr, false);
  if (header.is_discarded()) fail(Errc::IoFailure, "malformed checkpoint header");
  const std::string tag = header.value("model", "");
  std::unique_ptr<TaskModel> model;
  if (tag == "pair_linear") model = std::make_unique<LinearSoftmaxModel>(2, 1, 0);
  else if (tag == "token_tagger") model = std::make_unique<TokenTaggerModel>(2, 1, 0);
  else fail(Errc::IoFailure, "unknown checkpoint model tag '" + tag + "'");
  in.seekg(0);
  model->load(in);
  return model;
}

inline std::unique_ptr<TaskModel> load_model(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) fail(Errc::IoFailure, "cannot open " + path);
  return load_model(in);
}

inline ModelFactory pair_model_factory(int classes, std::size_t dim) {
  return [classes, dim](std::uint64_t seed) -> std::unique_ptr<TaskModel> {
    return std::make_unique<LinearSoftmaxModel>(classes, dim, seed);
  };
}

inline ModelFactory tagger_model_factory(int classes, std::size_t dim) {
  return [classes, dim](std::uint64_t seed) -> std::unique_ptr<TaskModel> {
    return std::make_unique<TokenTaggerModel>(classes, dim, seed);
  };
}

}  // namespace multimix
