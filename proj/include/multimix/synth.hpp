#pragma once

#include <array>
#include <cmath>
#include <map>
#include <set>
#include <string>
#include <vector>

#include "multimix/data.hpp"
#include "multimix/error.hpp"
#include "multimix/rng.hpp"

namespace multimix {

/// Controls the synthetic source->target benchmark. rho is the fraction of
/// the context vocabulary the cipher maps to itself; the rest is substituted
/// by a bijection onto fresh surface forms, so rho = 1 means an
/// identical-looking "language" and rho = 0 means zero surface overlap
/// outside entities. Tagging gazetteer entries transliterate and are never
/// ciphered.
struct SynthConfig {
  std::size_t vocab_size = 120;     // filler words
  std::size_t gazetteer_size = 20;  // entity surface forms per class
  std::size_t template_count = 12;
  double rho = 0.5;
  double swap_rate = 0.1;  // adjacent-pair word-order perturbation
  std::size_t train_size = 300;
  std::size_t dev_size = 100;
  std::size_t test_size = 100;
  double label_noise = 0.0;  // source train labels only
  std::uint64_t seed = 0;

  void validate() const {
    if (vocab_size < 20) fail(Errc::ConfigInvalid, "vocab_size must be at least 20");
    if (gazetteer_size < 1 || template_count < 1) fail(Errc::ConfigInvalid, "sizes must be >= 1");
    if (train_size < 1 || dev_size < 1 || test_size < 1) fail(Errc::ConfigInvalid, "split sizes must be >= 1");
    if (rho < 0.0 || rho > 1.0) fail(Errc::ConfigInvalid, "rho must be in [0, 1]");
    if (swap_rate < 0.0 || swap_rate > 1.0) fail(Errc::ConfigInvalid, "swap_rate must be in [0, 1]");
    if (label_noise < 0.0 || label_noise > 1.0) fail(Errc::ConfigInvalid, "label_noise must be in [0, 1]");
  }
};

struct Benchmark {
  LabeledDataset source_train, source_dev, source_test;
  LabeledDataset target_train;         // unlabeled, what adaptation sees
  LabeledDataset target_train_oracle;  // same samples with labels, analysis only
  LabeledDataset target_dev, target_test;
  std::map<std::string, std::string> cipher;  // substituted words only
};

namespace detail {

inline const std::array<const char*, 40>& syllables() {
  static const std::array<const char*, 40> s = {
      "ba", "be", "bi", "bo", "bu", "da", "de", "di", "do", "du", "ka", "ke", "ki", "ko",
      "ku", "la", "le", "li", "lo", "lu", "ma", "me", "mi", "mo", "mu", "na", "ne", "ni",
      "no", "nu", "ra", "re", "ri", "ro", "ru", "sa", "se", "si", "so", "su"};
  return s;
}

/// Pseudo-word generator; a shared used-set keeps every word distinct across
/// all lexicon categories and both "languages".
class WordGen {
 public:
  WordGen(std::uint64_t seed, std::set<std::string>& used) : rng_(seed), used_(used) {}

  std::string fresh() {
    for (;;) {
      const std::size_t len = 2 + rng_.below(2);
      std::string w;
      for (std::size_t i = 0; i < len; ++i) w += syllables()[rng_.below(syllables().size())];
      if (used_.insert(w).second) return w;
    }
  }

  std::vector<std::string> fresh_list(std::size_t n) {
    std::vector<std::string> out;
    for (std::size_t i = 0; i < n; ++i) out.push_back(fresh());
    return out;
  }

 private:
  Rng rng_;
  std::set<std::string>& used_;
};

/// Builds the substitution cipher. Words are permuted deterministically and
/// the first round((1-rho) * V) of the permutation get substituted, so the
/// substituted set only grows as rho falls and is otherwise independent of
/// rho. Each word's foreign counterpart is fixed up front.
inline std::map<std::string, std::string> build_cipher(const std::vector<std::string>& words,
                                                       const std::map<std::string, std::string>& foreign,
                                                       double rho, std::uint64_t seed) {
  std::vector<std::string> order = words;
  std::sort(order.begin(), order.end());
  Rng rng(derive_seed(seed, "cipher"));
  for (std::size_t i = order.size(); i > 1; --i) std::swap(order[i - 1], order[rng.below(i)]);
  const auto mapped = static_cast<std::size_t>(
      std::llround((1.0 - rho) * static_cast<double>(order.size())));
  std::map<std::string, std::string> cipher;
  for (std::size_t i = 0; i < mapped; ++i) cipher[order[i]] = foreign.at(order[i]);
  return cipher;
}

inline std::string apply_cipher(const std::map<std::string, std::string>& cipher, const std::string& w) {
  auto it = cipher.find(w);
  return it == cipher.end() ? w : it->second;
}

inline void strip_to_unlabeled(const LabeledDataset& oracle, LabeledDataset& out) {
  out = oracle.without_labels();
}

}  // namespace detail

inline Benchmark gen_tagging_benchmark(const SynthConfig& cfg) {
  cfg.validate();
  const LabelVocab vocab =
      LabelVocab::iob2({"O", "B-PER", "I-PER", "B-ORG", "I-ORG", "B-LOC", "I-LOC"});

  std::set<std::string> used;
  detail::WordGen words(derive_seed(cfg.seed, "tag-words"), used);
  const auto common = words.fresh_list(cfg.vocab_size);
  std::array<std::vector<std::string>, 3> triggers, gazetteer;
  for (int c = 0; c < 3; ++c) {
    triggers[c] = words.fresh_list(3);
    gazetteer[c] = words.fresh_list(cfg.gazetteer_size);
  }
  // Entity surface forms transliterate, so gazetteer entries are shared with
  // the target language at every rho; the cipher only rewrites the context
  // vocabulary (fillers and triggers).
  std::vector<std::string> context_words = common;
  for (int c = 0; c < 3; ++c)
    context_words.insert(context_words.end(), triggers[c].begin(), triggers[c].end());
  std::map<std::string, std::string> foreign;
  {
    std::vector<std::string> sorted = context_words;
    std::sort(sorted.begin(), sorted.end());
    detail::WordGen fwords(derive_seed(cfg.seed, "tag-foreign"), used);
    for (const auto& w : sorted) foreign[w] = fwords.fresh();
  }

  // A template is a structural recipe; word identities are drawn per sentence.
  struct Template {
    std::size_t prefix, middle, suffix;
    int cls1, ent1;
    int cls2, ent2;  // cls2 = -1 when the sentence has a single entity
  };
  std::vector<Template> templates;
  {
    Rng trng(derive_seed(cfg.seed, "tag-templates"));
    for (std::size_t i = 0; i < cfg.template_count; ++i) {
      Template t;
      t.prefix = 1 + trng.below(4);
      t.cls1 = static_cast<int>(trng.below(3));
      t.ent1 = 1 + static_cast<int>(trng.below(2));
      t.middle = 2 + trng.below(4);
      if (trng.below(2) == 0) {
        t.cls2 = static_cast<int>(trng.below(3));
        t.ent2 = 1 + static_cast<int>(trng.below(2));
      } else {
        t.cls2 = -1;
        t.ent2 = 0;
      }
      t.suffix = 1 + trng.below(3);
      templates.push_back(t);
    }
  }

  auto draw_split = [&](const char* name, std::size_t count) {
    LabeledDataset ds;
    ds.vocab = vocab;
    Rng rng(derive_seed(cfg.seed, std::string("tag-") + name));
    for (std::size_t i = 0; i < count; ++i) {
      const Template& t = templates[rng.below(templates.size())];
      Sample s;
      s.id = std::string(name) + "-" + std::to_string(i);
      s.kind = TaskKind::Tagging;
      std::vector<int> lab;
      auto fillers = [&](std::size_t n) {
        for (std::size_t f = 0; f < n; ++f) {
          s.tokens.push_back(common[rng.below(common.size())]);
          lab.push_back(vocab.index_of("O"));
        }
      };
      auto entity = [&](int cls, int len) {
        s.tokens.push_back(triggers[cls][rng.below(triggers[cls].size())]);
        lab.push_back(vocab.index_of("O"));
        static const char* kinds[] = {"PER", "ORG", "LOC"};
        for (int e = 0; e < len; ++e) {
          s.tokens.push_back(gazetteer[cls][rng.below(gazetteer[cls].size())]);
          lab.push_back(vocab.index_of(std::string(e == 0 ? "B-" : "I-") + kinds[cls]));
        }
      };
      fillers(t.prefix);
      entity(t.cls1, t.ent1);
      fillers(t.middle);
      if (t.cls2 >= 0) entity(t.cls2, t.ent2);
      fillers(t.suffix);
      ds.samples.push_back(std::move(s));
      ds.labels.push_back(std::move(lab));
    }
    return ds;
  };

  Benchmark b;
  b.cipher = detail::build_cipher(context_words, foreign, cfg.rho, cfg.seed);
  b.source_train = draw_split("s-train", cfg.train_size);
  b.source_dev = draw_split("s-dev", cfg.dev_size);
  b.source_test = draw_split("s-test", cfg.test_size);

  if (cfg.label_noise > 0.0) {
    Rng nrng(derive_seed(cfg.seed, "tag-noise"));
    for (auto& lab : b.source_train.labels)
      for (int& v : lab)
        if (nrng.uniform() < cfg.label_noise) {
          const int shift = 1 + static_cast<int>(nrng.below(static_cast<std::uint64_t>(vocab.size() - 1)));
          v = (v + shift) % vocab.size();
        }
  }

  // Target side: fresh draws, then the cipher, then O-O adjacent swaps so
  // gold spans stay valid IOB2.
  auto to_target = [&](LabeledDataset ds, const char* tag) {
    Rng srng(derive_seed(cfg.seed, std::string("tag-swap-") + tag));
    for (std::size_t i = 0; i < ds.size(); ++i) {
      auto& toks = ds.samples[i].tokens;
      const auto& lab = ds.labels[i];
      for (auto& w : toks) w = detail::apply_cipher(b.cipher, w);
      const int o = ds.vocab.index_of("O");
      std::size_t t = 0;
      while (t + 1 < toks.size()) {
        if (lab[t] == o && lab[t + 1] == o && srng.uniform() < cfg.swap_rate) {
          std::swap(toks[t], toks[t + 1]);
          t += 2;
        } else {
          ++t;
        }
      }
    }
    return ds;
  };
  b.target_train_oracle = to_target(draw_split("t-train", cfg.train_size), "train");
  detail::strip_to_unlabeled(b.target_train_oracle, b.target_train);
  b.target_dev = to_target(draw_split("t-dev", cfg.dev_size), "dev");
  b.target_test = to_target(draw_split("t-test", cfg.test_size), "test");
  return b;
}

inline Benchmark gen_pair_benchmark(const SynthConfig& cfg) {
  cfg.validate();
  const LabelVocab vocab = LabelVocab::sentence({"entail", "contradiction", "neutral"});

  std::set<std::string> used;
  detail::WordGen words(derive_seed(cfg.seed, "pair-words"), used);
  const auto common = words.fresh_list(cfg.vocab_size);
  const auto negation = words.fresh_list(2);
  std::vector<std::string> all_words = common;
  all_words.insert(all_words.end(), negation.begin(), negation.end());
  std::map<std::string, std::string> foreign;
  {
    std::vector<std::string> sorted = all_words;
    std::sort(sorted.begin(), sorted.end());
    detail::WordGen fwords(derive_seed(cfg.seed, "pair-foreign"), used);
    for (const auto& w : sorted) foreign[w] = fwords.fresh();
  }

  // Round-robin classes keep every split balanced within one sample.
  // entail: hypothesis is a token subset of the premise; contradiction adds
  // an inserted negation word; neutral draws an unrelated sentence.
  auto draw_split = [&](const char* name, std::size_t count) {
    LabeledDataset ds;
    ds.vocab = vocab;
    Rng rng(derive_seed(cfg.seed, std::string("pair-") + name));
    auto sentence = [&]() {
      std::vector<std::string> toks;
      const std::size_t len = 5 + rng.below(5);
      for (std::size_t i = 0; i < len; ++i) toks.push_back(common[rng.below(common.size())]);
      return toks;
    };
    for (std::size_t i = 0; i < count; ++i) {
      Sample s;
      s.id = std::string(name) + "-" + std::to_string(i);
      s.kind = TaskKind::Pair;
      s.part_a = sentence();
      const int cls = static_cast<int>(i % 3);
      if (cls == 2) {
        s.part_b = sentence();
      } else {
        for (const auto& w : s.part_a)
          if (rng.uniform() < 0.6) s.part_b.push_back(w);
        if (s.part_b.empty()) s.part_b.push_back(s.part_a[0]);
        if (cls == 1) {
          const auto pos = rng.below(s.part_b.size() + 1);
          s.part_b.insert(s.part_b.begin() + static_cast<std::ptrdiff_t>(pos),
                          negation[rng.below(negation.size())]);
        }
      }
      ds.samples.push_back(std::move(s));
      ds.labels.push_back({cls});
    }
    return ds;
  };

  Benchmark b;
  b.cipher = detail::build_cipher(all_words, foreign, cfg.rho, cfg.seed);
  b.source_train = draw_split("s-train", cfg.train_size);
  b.source_dev = draw_split("s-dev", cfg.dev_size);
  b.source_test = draw_split("s-test", cfg.test_size);

  if (cfg.label_noise > 0.0) {
    Rng nrng(derive_seed(cfg.seed, "pair-noise"));
    for (auto& lab : b.source_train.labels)
      if (nrng.uniform() < cfg.label_noise) {
        const int shift = 1 + static_cast<int>(nrng.below(2));
        lab[0] = (lab[0] + shift) % 3;
      }
  }

  auto to_target = [&](LabeledDataset ds, const char* tag) {
    Rng srng(derive_seed(cfg.seed, std::string("pair-swap-") + tag));
    auto perturb = [&](std::vector<std::string>& toks) {
      for (auto& w : toks) w = detail::apply_cipher(b.cipher, w);
      std::size_t t = 0;
      while (t + 1 < toks.size()) {
        if (srng.uniform() < cfg.swap_rate) {
          std::swap(toks[t], toks[t + 1]);
          t += 2;
        } else {
          ++t;
        }
      }
    };
    for (auto& s : ds.samples) {
      perturb(s.part_a);
      perturb(s.part_b);
    }
    return ds;
  };
  b.target_train_oracle = to_target(draw_split("t-train", cfg.train_size), "train");
  detail::strip_to_unlabeled(b.target_train_oracle, b.target_train);
  b.target_dev = to_target(draw_split("t-dev", cfg.dev_size), "dev");
  b.target_test = to_target(draw_split("t-test", cfg.test_size), "test");
  return b;
}

}  // namespace multimix
