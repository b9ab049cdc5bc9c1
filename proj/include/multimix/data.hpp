#pragma once

#include <cctype>
#include <cmath>
#include <fstream>
#include <optional>
#include <string>
#include <unordered_map>
#include <unordered_set>
#include <vector>

#include <nlohmann/json.hpp>

#include "multimix/error.hpp"
#include "multimix/rng.hpp"

namespace multimix {

enum class TaskKind { Tagging, Pair };

inline const char* task_kind_name(TaskKind k) { return k == TaskKind::Tagging ? "tagging" : "pair"; }

inline TaskKind parse_task_kind(const std::string& s) {
  if (s == "tagging") return TaskKind::Tagging;
  if (s == "pair") return TaskKind::Pair;
  fail(Errc::ConfigInvalid, "unknown task kind '" + s + "'");
}

/// One input example: a token sequence (Tagging) or two sentences (Pair).
/// Virtual samples generated from an original carry its id in origin_id.
struct Sample {
  std::string id;
  TaskKind kind = TaskKind::Tagging;
  std::vector<std::string> tokens;           // Tagging
  std::vector<std::string> part_a, part_b;   // Pair
  std::string origin_id;                     // empty for original samples

  std::size_t length() const {
    return kind == TaskKind::Tagging ? tokens.size() : part_a.size() + part_b.size();
  }
};

enum class LabelScheme { IOB2, Sentence };

/// Ordered class names. For IOB2 every name is "O" or "B-X"/"I-X" with a
/// matching B- tag for every I- tag.
struct LabelVocab {
  std::vector<std::string> names;
  LabelScheme scheme = LabelScheme::Sentence;

  int size() const { return static_cast<int>(names.size()); }

  int index_of(const std::string& name) const {
    for (std::size_t i = 0; i < names.size(); ++i)
      if (names[i] == name) return static_cast<int>(i);
    return -1;
  }

  void validate() const {
    if (names.size() < 2) fail(Errc::ConfigInvalid, "label vocab needs at least 2 classes");
    std::unordered_set<std::string> seen;
    for (const auto& n : names) {
      if (!seen.insert(n).second) fail(Errc::ConfigInvalid, "duplicate label name '" + n + "'");
    }
    if (scheme == LabelScheme::IOB2) {
      for (const auto& n : names) {
        if (n == "O") continue;
        if (n.size() < 3 || (n[0] != 'B' && n[0] != 'I') || n[1] != '-')
          fail(Errc::ConfigInvalid, "'" + n + "' is not a valid IOB2 tag");
        if (n[0] == 'I' && !seen.count("B-" + n.substr(2)))
          fail(Errc::ConfigInvalid, "tag '" + n + "' has no matching B- tag");
      }
      if (!seen.count("O")) fail(Errc::ConfigInvalid, "IOB2 vocab requires the O tag");
    }
  }

  static LabelVocab iob2(std::vector<std::string> names) {
    LabelVocab v{std::move(names), LabelScheme::IOB2};
    v.validate();
    return v;
  }

  static LabelVocab sentence(std::vector<std::string> names) {
    LabelVocab v{std::move(names), LabelScheme::Sentence};
    v.validate();
    return v;
  }

  bool operator==(const LabelVocab&) const = default;
};

/// Samples plus an optional aligned label column. Labels are class indices:
/// one per token for Tagging, exactly one per sample for Pair.
struct LabeledDataset {
  LabelVocab vocab;
  std::vector<Sample> samples;
  std::vector<std::vector<int>> labels;  // empty when unlabeled

  bool labeled() const { return !labels.empty(); }
  std::size_t size() const { return samples.size(); }
  bool empty() const { return samples.empty(); }

  void validate() const {
    vocab.validate();
    std::unordered_set<std::string> ids;
    const int c = vocab.size();
    for (std::size_t i = 0; i < samples.size(); ++i) {
      const Sample& s = samples[i];
      if (!ids.insert(s.id).second) fail(Errc::DuplicateId, s.id);
      if (i > 0 && s.kind != samples[0].kind)
        fail(Errc::ConfigInvalid, "mixed sample kinds in one dataset (" + s.id + ")");
      auto check_tokens = [&](const std::vector<std::string>& toks) {
        if (toks.empty()) fail(Errc::MalformedLine, "empty token list in sample " + s.id);
        for (const auto& t : toks) {
          if (t.empty()) fail(Errc::MalformedLine, "empty token in sample " + s.id);
          for (unsigned char ch : t)
            if (std::isspace(ch)) fail(Errc::MalformedLine, "whitespace inside token in sample " + s.id);
        }
      };
      if (s.kind == TaskKind::Tagging) {
        check_tokens(s.tokens);
      } else {
        check_tokens(s.part_a);
        check_tokens(s.part_b);
      }
      if (labeled()) {
        if (labels.size() != samples.size())
          fail(Errc::LabelLengthMismatch, "label column size differs from sample count");
        const auto& lab = labels[i];
        const std::size_t want = s.kind == TaskKind::Tagging ? s.tokens.size() : 1;
        if (lab.size() != want) fail(Errc::LabelLengthMismatch, s.id);
        for (int v : lab)
          if (v < 0 || v >= c) fail(Errc::UnknownLabel, s.id + ": index " + std::to_string(v));
      }
    }
  }

  /// Same samples with the label column dropped.
  LabeledDataset without_labels() const { return LabeledDataset{vocab, samples, {}}; }
};

namespace detail {

inline std::vector<std::string> parse_token_array(const nlohmann::json& j, int line_no) {
  if (!j.is_array()) fail(Errc::MalformedLine, "line " + std::to_string(line_no) + ": expected token array");
  std::vector<std::string> out;
  out.reserve(j.size());
  for (const auto& t : j) {
    if (!t.is_string()) fail(Errc::MalformedLine, "line " + std::to_string(line_no) + ": non-string token");
    out.push_back(t.get<std::string>());
  }
  return out;
}

}  // namespace detail

/// Reads a JSONL dataset. One object per line with fields
/// id, kind, tokens | part_a/part_b, optional labels, optional origin_id.
inline LabeledDataset load_jsonl(const std::string& path, const LabelVocab& vocab) {
  std::ifstream in(path);
  if (!in) fail(Errc::IoFailure, "cannot open " + path);
  LabeledDataset ds;
  ds.vocab = vocab;
  std::string line;
  int line_no = 0;
  bool any_labels = false;
  std::vector<std::optional<std::vector<int>>> raw_labels;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty()) continue;
    nlohmann::json j = nlohmann::json::parse(line, nullptr, false);
    if (j.is_discarded() || !j.is_object())
      fail(Errc::MalformedLine, "line " + std::to_string(line_no));
    Sample s;
    if (!j.contains("id") || !j["id"].is_string())
      fail(Errc::MalformedLine, "line " + std::to_string(line_no) + ": missing id");
    s.id = j["id"].get<std::string>();
    if (!j.contains("kind") || !j["kind"].is_string())
      fail(Errc::MalformedLine, "line " + std::to_string(line_no) + ": missing kind");
    const std::string kind = j["kind"].get<std::string>();
    if (kind == "tagging") {
      s.kind = TaskKind::Tagging;
      if (!j.contains("tokens")) fail(Errc::MalformedLine, "line " + std::to_string(line_no) + ": missing tokens");
      s.tokens = detail::parse_token_array(j["tokens"], line_no);
    } else if (kind == "pair") {
      s.kind = TaskKind::Pair;
      if (!j.contains("part_a") || !j.contains("part_b"))
        fail(Errc::MalformedLine, "line " + std::to_string(line_no) + ": missing part_a/part_b");
      s.part_a = detail::parse_token_array(j["part_a"], line_no);
      s.part_b = detail::parse_token_array(j["part_b"], line_no);
    } else {
      fail(Errc::MalformedLine, "line " + std::to_string(line_no) + ": unknown kind '" + kind + "'");
    }
    if (j.contains("origin_id")) s.origin_id = j["origin_id"].get<std::string>();

    if (j.contains("labels")) {
      any_labels = true;
      std::vector<int> lab;
      auto to_index = [&](const std::string& name) {
        int idx = vocab.index_of(name);
        if (idx < 0) fail(Errc::UnknownLabel, s.id + ": '" + name + "'");
        return idx;
      };
      const auto& jl = j["labels"];
      if (s.kind == TaskKind::Tagging) {
        if (!jl.is_array()) fail(Errc::MalformedLine, "line " + std::to_string(line_no) + ": labels must be an array");
        for (const auto& n : jl) lab.push_back(to_index(n.get<std::string>()));
        if (lab.size() != s.tokens.size()) fail(Errc::LabelLengthMismatch, s.id);
      } else {
        if (!jl.is_string()) fail(Errc::MalformedLine, "line " + std::to_string(line_no) + ": pair label must be a string");
        lab.push_back(to_index(jl.get<std::string>()));
      }
      raw_labels.emplace_back(std::move(lab));
    } else {
      raw_labels.emplace_back(std::nullopt);
    }
    ds.samples.push_back(std::move(s));
  }
  if (any_labels) {
    ds.labels.reserve(ds.samples.size());
    for (std::size_t i = 0; i < raw_labels.size(); ++i) {
      if (!raw_labels[i])
        fail(Errc::LabelLengthMismatch, "sample " + ds.samples[i].id + " lacks labels in a labeled file");
      ds.labels.push_back(std::move(*raw_labels[i]));
    }
  }
  ds.validate();
  return ds;
}

/// Writes JSONL with a fixed field order so that save/load round-trips
/// byte-stably: id, kind, tokens|part_a/part_b, labels, origin_id.
inline void save_jsonl(const LabeledDataset& ds, const std::string& path) {
  ds.validate();
  std::ofstream out(path, std::ios::binary);
  if (!out) fail(Errc::IoFailure, "cannot write " + path);
  for (std::size_t i = 0; i < ds.samples.size(); ++i) {
    const Sample& s = ds.samples[i];
    nlohmann::ordered_json j;
    j["id"] = s.id;
    j["kind"] = task_kind_name(s.kind);
    if (s.kind == TaskKind::Tagging) {
      j["tokens"] = s.tokens;
    } else {
      j["part_a"] = s.part_a;
      j["part_b"] = s.part_b;
    }
    if (ds.labeled()) {
      if (s.kind == TaskKind::Tagging) {
        std::vector<std::string> names;
        for (int v : ds.labels[i]) names.push_back(ds.vocab.names[v]);
        j["labels"] = names;
      } else {
        j["labels"] = ds.vocab.names[ds.labels[i][0]];
      }
    }
    if (!s.origin_id.empty()) j["origin_id"] = s.origin_id;
    out << j.dump() << '\n';
    if (!out) fail(Errc::IoFailure, "write failed for " + path);
  }
  out.flush();
  if (!out) fail(Errc::IoFailure, "write failed for " + path);
}

/// Draws ceil(percent/100 * N) samples without replacement, keeping input
/// order. percent = 100 keeps every member.
inline LabeledDataset subsample(const LabeledDataset& ds, double percent, std::uint64_t seed) {
  if (ds.empty()) fail(Errc::EmptyDataset, "subsample of empty dataset");
  if (percent <= 0.0 || percent > 100.0) fail(Errc::ConfigInvalid, "percent must be in (0, 100]");
  const std::size_t n = ds.size();
  const auto k = static_cast<std::size_t>(std::ceil(percent / 100.0 * static_cast<double>(n)));
  Rng rng(derive_seed(seed, "subsample"));
  auto chosen = rng.choose(n, k);
  LabeledDataset out;
  out.vocab = ds.vocab;
  for (std::size_t idx : chosen) {
    out.samples.push_back(ds.samples[idx]);
    if (ds.labeled()) out.labels.push_back(ds.labels[idx]);
  }
  return out;
}

}  // namespace multimix
