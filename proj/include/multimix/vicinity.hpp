#pragma once

#include <algorithm>
#include <cmath>
#include <fstream>
#include <map>
#include <set>
#include <string>
#include <utility>
#include <vector>

#include <nlohmann/json.hpp>

#include "multimix/data.hpp"
#include "multimix/error.hpp"
#include "multimix/rng.hpp"

namespace multimix {

inline constexpr const char* kUnknownToken = "<unk>";

/// Vicinity model: a distribution over the vocabulary for one masked slot.
/// The token currently at `pos` is ignored; only the context matters.
class MaskedLM {
 public:
  virtual ~MaskedLM() = default;
  virtual const std::vector<std::string>& vocabulary() const = 0;
  virtual std::vector<double> distribution(const std::vector<std::string>& tokens, std::size_t pos) const = 0;
};

/// Bidirectional n-gram stand-in for a masked LM: counts of order-k left
/// contexts and right contexts are combined additively under add-lambda
/// smoothing, so every context (seen or not) yields a proper distribution.
class NGramMaskedLM : public MaskedLM {
 public:
  NGramMaskedLM() = default;

  NGramMaskedLM(const std::vector<std::vector<std::string>>& corpus, int order, double lambda)
      : order_(order), lambda_(lambda) {
    if (order < 2) fail(Errc::ConfigInvalid, "n-gram order must be at least 2");
    if (!(lambda > 0.0)) fail(Errc::ConfigInvalid, "smoothing lambda must be positive");
    if (corpus.empty()) fail(Errc::EmptyCorpus, "cannot fit LM on empty corpus");
    std::set<std::string> types;
    for (const auto& sent : corpus) {
      if (sent.empty()) fail(Errc::EmptyCorpus, "empty sentence in corpus");
      for (const auto& t : sent) types.insert(t);
    }
    types.insert(kUnknownToken);
    vocab_.assign(types.begin(), types.end());
    for (std::size_t i = 0; i < vocab_.size(); ++i) vocab_index_[vocab_[i]] = i;
    for (const auto& sent : corpus) {
      for (std::size_t pos = 0; pos < sent.size(); ++pos) {
        ++left_[left_context(sent, pos)][sent[pos]];
        ++right_[right_context(sent, pos)][sent[pos]];
      }
    }
    for (const auto& [ctx, counts] : left_)
      for (const auto& [tok, c] : counts) left_total_[ctx] += c;
    for (const auto& [ctx, counts] : right_)
      for (const auto& [tok, c] : counts) right_total_[ctx] += c;
  }

  int order() const { return order_; }
  double lambda() const { return lambda_; }
  const std::vector<std::string>& vocabulary() const override { return vocab_; }

  std::vector<double> distribution(const std::vector<std::string>& tokens, std::size_t pos) const override {
    if (pos >= tokens.size()) fail(Errc::IndexOutOfRange, "masked position past end");
    const std::string lc = left_context(tokens, pos);
    const std::string rc = right_context(tokens, pos);
    const auto* lcounts = find_counts(left_, lc);
    const auto* rcounts = find_counts(right_, rc);
    const double total = lookup_total(left_total_, lc) + lookup_total(right_total_, rc) +
                         lambda_ * static_cast<double>(vocab_.size());
    std::vector<double> p(vocab_.size(), lambda_ / total);
    auto add = [&](const std::map<std::string, std::uint64_t>* counts) {
      if (!counts) return;
      for (const auto& [tok, c] : *counts) p[vocab_index_.at(tok)] += static_cast<double>(c) / total;
    };
    add(lcounts);
    add(rcounts);
    return p;
  }

  void save(const std::string& path) const {
    nlohmann::ordered_json j;
    j["format"] = "mmlm";
    j["version"] = 1;
    j["order"] = order_;
    j["lambda"] = lambda_;
    j["vocab"] = vocab_;
    auto dump_counts = [](const std::map<std::string, std::map<std::string, std::uint64_t>>& m) {
      nlohmann::ordered_json out = nlohmann::ordered_json::object();
      for (const auto& [ctx, counts] : m) {
        nlohmann::ordered_json row = nlohmann::ordered_json::object();
        for (const auto& [tok, c] : counts) row[tok] = c;
        out[ctx] = std::move(row);
      }
      return out;
    };
    j["left"] = dump_counts(left_);
    j["right"] = dump_counts(right_);
    std::ofstream out(path, std::ios::binary);
    if (!out) fail(Errc::IoFailure, "cannot write " + path);
    out << j.dump() << '\n';
    if (!out) fail(Errc::IoFailure, "write failed for " + path);
  }

  static NGramMaskedLM load(const std::string& path) {
    std::ifstream in(path);
    if (!in) fail(Errc::IoFailure, "cannot open " + path);
    nlohmann::json j = nlohmann::json::parse(in, nullptr, false);
    if (j.is_discarded() || j.value("format", "") != "mmlm" || j.value("version", 0) != 1)
      fail(Errc::IoFailure, "unrecognized LM file " + path);
    NGramMaskedLM lm;
    lm.order_ = j.at("order").get<int>();
    lm.lambda_ = j.at("lambda").get<double>();
    lm.vocab_ = j.at("vocab").get<std::vector<std::string>>();
    for (std::size_t i = 0; i < lm.vocab_.size(); ++i) lm.vocab_index_[lm.vocab_[i]] = i;
    auto read_counts = [](const nlohmann::json& obj, std::map<std::string, std::map<std::string, std::uint64_t>>& m,
                          std::map<std::string, std::uint64_t>& totals) {
      for (const auto& [ctx, row] : obj.items())
        for (const auto& [tok, c] : row.items()) {
          m[ctx][tok] = c.get<std::uint64_t>();
          totals[ctx] += c.get<std::uint64_t>();
        }
    };
    read_counts(j.at("left"), lm.left_, lm.left_total_);
    read_counts(j.at("right"), lm.right_, lm.right_total_);
    return lm;
  }

 private:
  static std::string join(const std::vector<std::string>& parts) {
    std::string out;
    for (std::size_t i = 0; i < parts.size(); ++i) {
      if (i) out += '\x1f';
      out += parts[i];
    }
    return out;
  }

  std::string left_context(const std::vector<std::string>& toks, std::size_t pos) const {
    std::vector<std::string> ctx;
    for (int d = order_ - 1; d >= 1; --d) {
      const auto i = static_cast<std::ptrdiff_t>(pos) - d;
      ctx.push_back(i < 0 ? "<s>" : toks[static_cast<std::size_t>(i)]);
    }
    return join(ctx);
  }

  std::string right_context(const std::vector<std::string>& toks, std::size_t pos) const {
    std::vector<std::string> ctx;
    for (int d = 1; d <= order_ - 1; ++d) {
      const std::size_t i = pos + static_cast<std::size_t>(d);
      ctx.push_back(i >= toks.size() ? "</s>" : toks[i]);
    }
    return join(ctx);
  }

  static const std::map<std::string, std::uint64_t>* find_counts(
      const std::map<std::string, std::map<std::string, std::uint64_t>>& m, const std::string& ctx) {
    auto it = m.find(ctx);
    return it == m.end() ? nullptr : &it->second;
  }

  static double lookup_total(const std::map<std::string, std::uint64_t>& m, const std::string& ctx) {
    auto it = m.find(ctx);
    return it == m.end() ? 0.0 : static_cast<double>(it->second);
  }

  int order_ = 3;
  double lambda_ = 0.1;
  std::vector<std::string> vocab_;
  std::map<std::string, std::size_t> vocab_index_;
  std::map<std::string, std::map<std::string, std::uint64_t>> left_, right_;
  std::map<std::string, std::uint64_t> left_total_, right_total_;
};

inline NGramMaskedLM fit_ngram_lm(const std::vector<std::vector<std::string>>& corpus, int order = 3,
                                  double lambda = 0.1) {
  return NGramMaskedLM(corpus, order, lambda);
}

/// Flattens a dataset into LM training sentences; Pair samples contribute
/// each part separately.
inline std::vector<std::vector<std::string>> lm_sentences(const LabeledDataset& ds) {
  std::vector<std::vector<std::string>> out;
  for (const Sample& s : ds.samples) {
    if (s.kind == TaskKind::Tagging) {
      out.push_back(s.tokens);
    } else {
      out.push_back(s.part_a);
      out.push_back(s.part_b);
    }
  }
  return out;
}

/// Top-s candidates for a masked slot, probability-descending with
/// lexicographic tie-break.
inline std::vector<std::pair<std::string, double>> predict_masked(const MaskedLM& lm,
                                                                  const std::vector<std::string>& tokens,
                                                                  std::size_t pos, int s) {
  if (pos >= tokens.size()) fail(Errc::IndexOutOfRange, "masked position past end");
  if (s < 1) fail(Errc::ConfigInvalid, "candidate count must be at least 1");
  const auto dist = lm.distribution(tokens, pos);
  const auto& vocab = lm.vocabulary();
  std::vector<std::size_t> order(vocab.size());
  for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
  std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
    if (dist[a] != dist[b]) return dist[a] > dist[b];
    return vocab[a] < vocab[b];
  });
  std::vector<std::pair<std::string, double>> out;
  const auto keep = std::min<std::size_t>(static_cast<std::size_t>(s), vocab.size());
  for (std::size_t i = 0; i < keep; ++i) out.emplace_back(vocab[order[i]], dist[order[i]]);
  return out;
}

/// Picks max(1, round(p% of length)) distinct positions, half-up rounding.
inline std::vector<std::size_t> mask_positions(std::size_t length, double p, Rng& rng) {
  if (length == 0) fail(Errc::ConfigInvalid, "cannot mask an empty sequence");
  if (!(p > 0.0) || p > 100.0) fail(Errc::ConfigInvalid, "mask ratio must be in (0, 100]");
  const auto m = static_cast<std::size_t>(
      std::max(1.0, std::floor(p * static_cast<double>(length) / 100.0 + 0.5)));
  return rng.choose(length, m);
}

enum class GenMode { Max, Cross };

struct GenConfig {
  double mask_percent = 30.0;  // P
  int delta = 3;               // Max
  int delta1 = 2, delta2 = 2;  // Cross
  int candidates = 1;          // S
  GenMode mode = GenMode::Max;
  std::uint64_t seed = 0;

  void validate() const {
    if (!(mask_percent > 0.0) || mask_percent > 100.0)
      fail(Errc::ConfigInvalid, "mask_percent must be in (0, 100]");
    if (delta < 1 || delta1 < 1 || delta2 < 1) fail(Errc::ConfigInvalid, "diversification must be >= 1");
    if (candidates < 1) fail(Errc::ConfigInvalid, "candidates must be >= 1");
  }
};

namespace detail {

/// Replaces each listed position (ascending) with the LM argmax; later
/// predictions see earlier replacements.
inline void infill(const MaskedLM& lm, std::vector<std::string>& toks, const std::vector<std::size_t>& positions) {
  for (std::size_t pos : positions) toks[pos] = predict_masked(lm, toks, pos, 1)[0].first;
}

inline std::vector<std::string> max_variant(const MaskedLM& lm, const std::vector<std::string>& toks,
                                            double percent, std::uint64_t seed) {
  Rng rng(seed);
  auto out = toks;
  infill(lm, out, mask_positions(out.size(), percent, rng));
  return out;
}

}  // namespace detail

/// Successive max: delta variants, each from a fresh random mask set filled
/// left to right with LM argmaxes. Pair samples mask across both parts but
/// each prediction only sees its own part's context.
inline std::vector<Sample> successive_max(const MaskedLM& lm, const Sample& sample, const GenConfig& cfg) {
  cfg.validate();
  std::vector<Sample> out;
  for (int d = 0; d < cfg.delta; ++d) {
    Sample v = sample;
    v.id = sample.id + "#m" + std::to_string(d);
    v.origin_id = sample.id;
    const std::uint64_t seed = derive_seed(cfg.seed, sample.id, static_cast<std::uint64_t>(d));
    if (sample.kind == TaskKind::Tagging) {
      v.tokens = detail::max_variant(lm, sample.tokens, cfg.mask_percent, seed);
    } else {
      // One mask draw over the concatenated length, applied per part.
      Rng rng(seed);
      const std::size_t na = sample.part_a.size();
      std::vector<std::size_t> pos_a, pos_b;
      for (std::size_t p : mask_positions(na + sample.part_b.size(), cfg.mask_percent, rng)) {
        if (p < na) pos_a.push_back(p);
        else pos_b.push_back(p - na);
      }
      detail::infill(lm, v.part_a, pos_a);
      detail::infill(lm, v.part_b, pos_b);
    }
    out.push_back(std::move(v));
  }
  return out;
}

/// Successive cross: the sample splits into two parts (Pair at the natural
/// boundary, Tagging at floor(T/2)); delta1 and delta2 max-variants of the
/// parts recombine into delta1 * delta2 samples. A one-token Tagging sample
/// cannot split, so it degrades to successive max with delta1 * delta2
/// variants.
inline std::vector<Sample> successive_cross(const MaskedLM& lm, const Sample& sample, const GenConfig& cfg) {
  cfg.validate();
  const int total = cfg.delta1 * cfg.delta2;
  if (sample.kind == TaskKind::Tagging && sample.tokens.size() < 2) {
    GenConfig fallback = cfg;
    fallback.delta = total;
    auto out = successive_max(lm, sample, fallback);
    for (int n = 0; n < total; ++n) out[static_cast<std::size_t>(n)].id = sample.id + "#x" + std::to_string(n);
    return out;
  }
  const std::vector<std::string>* part_one = nullptr;
  const std::vector<std::string>* part_two = nullptr;
  std::vector<std::string> half_one, half_two;
  if (sample.kind == TaskKind::Pair) {
    part_one = &sample.part_a;
    part_two = &sample.part_b;
  } else {
    const std::size_t cut = sample.tokens.size() / 2;
    half_one.assign(sample.tokens.begin(), sample.tokens.begin() + static_cast<std::ptrdiff_t>(cut));
    half_two.assign(sample.tokens.begin() + static_cast<std::ptrdiff_t>(cut), sample.tokens.end());
    part_one = &half_one;
    part_two = &half_two;
  }
  std::vector<std::vector<std::string>> va, vb;
  for (int i = 0; i < cfg.delta1; ++i)
    va.push_back(detail::max_variant(lm, *part_one, cfg.mask_percent,
                                     derive_seed(cfg.seed, sample.id + "#a", static_cast<std::uint64_t>(i))));
  for (int j = 0; j < cfg.delta2; ++j)
    vb.push_back(detail::max_variant(lm, *part_two, cfg.mask_percent,
                                     derive_seed(cfg.seed, sample.id + "#b", static_cast<std::uint64_t>(j))));
  std::vector<Sample> out;
  for (int i = 0; i < cfg.delta1; ++i)
    for (int j = 0; j < cfg.delta2; ++j) {
      Sample v = sample;
      v.id = sample.id + "#x" + std::to_string(i * cfg.delta2 + j);
      v.origin_id = sample.id;
      if (sample.kind == TaskKind::Pair) {
        v.part_a = va[static_cast<std::size_t>(i)];
        v.part_b = vb[static_cast<std::size_t>(j)];
      } else {
        v.tokens = va[static_cast<std::size_t>(i)];
        v.tokens.insert(v.tokens.end(), vb[static_cast<std::size_t>(j)].begin(),
                        vb[static_cast<std::size_t>(j)].end());
      }
      out.push_back(std::move(v));
    }
  return out;
}

/// Gen-LM: per-sample generation concatenated in input order. The result is
/// unlabeled; origin_id records provenance.
inline LabeledDataset gen_lm(const LabeledDataset& data, const MaskedLM& lm, const GenConfig& cfg) {
  cfg.validate();
  if (data.empty()) fail(Errc::EmptyDataset, "gen_lm over empty dataset");
  LabeledDataset out;
  out.vocab = data.vocab;
  for (const Sample& s : data.samples) {
    auto variants = cfg.mode == GenMode::Max ? successive_max(lm, s, cfg) : successive_cross(lm, s, cfg);
    for (auto& v : variants) out.samples.push_back(std::move(v));
  }
  return out;
}

}  // namespace multimix
