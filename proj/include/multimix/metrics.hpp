#pragma once

#include <cmath>
#include <set>
#include <string>
#include <tuple>
#include <vector>

#include "multimix/data.hpp"
#include "multimix/error.hpp"

namespace multimix {

/// (sentence index, start, end-exclusive, type)
using Span = std::tuple<std::size_t, std::size_t, std::size_t, std::string>;

namespace detail {

struct TagView {
  char prefix = 'O';   // 'O', 'B' or 'I'
  std::string type;    // empty for O
};

inline TagView split_tag(const std::string& name) {
  if (name == "O") return {};
  return {name[0], name.substr(2)};
}

/// Decodes one IOB2 sequence into spans. `strict` rejects I-X without a
/// preceding B-X/I-X of the same type (gold side); otherwise the stray I-X
/// is read as B-X (predicted side).
inline void extract_spans(const std::vector<int>& seq, const LabelVocab& vocab,
                          std::size_t sent, bool strict, std::set<Span>& out) {
  std::size_t start = 0;
  std::string open;  // type of the span being built, empty if none
  auto close = [&](std::size_t end) {
    if (!open.empty()) out.emplace(sent, start, end, open);
    open.clear();
  };
  for (std::size_t t = 0; t < seq.size(); ++t) {
    TagView tag = split_tag(vocab.names[seq[t]]);
    if (tag.prefix == 'O') {
      close(t);
    } else if (tag.prefix == 'B') {
      close(t);
      open = tag.type;
      start = t;
    } else {  // 'I'
      if (open == tag.type) continue;
      if (strict)
        fail(Errc::SchemeViolation,
             "I-" + tag.type + " at position " + std::to_string(t) + " does not continue a span");
      close(t);
      open = tag.type;
      start = t;
    }
  }
  close(seq.size());
}

}  // namespace detail

struct F1Score {
  double precision = 0.0;
  double recall = 0.0;
  double f1 = 0.0;
};

/// Span-level micro F1 over IOB2 sequences. Gold sequences must be valid
/// IOB2; predicted stray I-X tags are repaired as B-X. Both sides empty of
/// spans counts as a perfect match.
inline F1Score micro_f1(const std::vector<std::vector<int>>& gold,
                        const std::vector<std::vector<int>>& pred,
                        const LabelVocab& vocab) {
  if (vocab.scheme != LabelScheme::IOB2) fail(Errc::ConfigInvalid, "micro_f1 requires an IOB2 vocab");
  if (gold.size() != pred.size()) fail(Errc::LengthMismatch, "gold/pred sentence counts differ");
  std::set<Span> gspans, pspans;
  for (std::size_t i = 0; i < gold.size(); ++i) {
    if (gold[i].size() != pred[i].size())
      fail(Errc::LengthMismatch, "sentence " + std::to_string(i) + " lengths differ");
    detail::extract_spans(gold[i], vocab, i, /*strict=*/true, gspans);
    detail::extract_spans(pred[i], vocab, i, /*strict=*/false, pspans);
  }
  if (gspans.empty() && pspans.empty()) return {1.0, 1.0, 1.0};
  std::size_t tp = 0;
  for (const auto& s : pspans) tp += gspans.count(s);
  F1Score sc;
  sc.precision = pspans.empty() ? 0.0 : static_cast<double>(tp) / static_cast<double>(pspans.size());
  sc.recall = gspans.empty() ? 0.0 : static_cast<double>(tp) / static_cast<double>(gspans.size());
  if (sc.precision + sc.recall > 0.0)
    sc.f1 = 2.0 * sc.precision * sc.recall / (sc.precision + sc.recall);
  return sc;
}

/// Fraction of exact label matches over single-label predictions.
inline double accuracy(const std::vector<int>& gold, const std::vector<int>& pred) {
  if (gold.size() != pred.size()) fail(Errc::LengthMismatch, "gold/pred counts differ");
  if (gold.empty()) fail(Errc::EmptyDataset, "accuracy over no examples");
  std::size_t hits = 0;
  for (std::size_t i = 0; i < gold.size(); ++i)
    if (gold[i] == pred[i]) ++hits;
  return static_cast<double>(hits) / static_cast<double>(gold.size());
}

struct MeanStd {
  double mean = 0.0;
  double std = 0.0;  // population (divide by N)
};

inline MeanStd mean_std(const std::vector<double>& xs) {
  if (xs.empty()) fail(Errc::EmptyDataset, "mean over no values");
  double sum = 0.0;
  for (double x : xs) sum += x;
  const double mean = sum / static_cast<double>(xs.size());
  double ss = 0.0;
  for (double x : xs) ss += (x - mean) * (x - mean);
  return {mean, std::sqrt(ss / static_cast<double>(xs.size()))};
}

}  // namespace multimix
