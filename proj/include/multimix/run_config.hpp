#pragma once

#include <fstream>
#include <optional>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "multimix/coteach.hpp"
#include "multimix/data.hpp"
#include "multimix/error.hpp"
#include "multimix/model.hpp"
#include "multimix/synth.hpp"
#include "multimix/vicinity.hpp"

namespace multimix {

inline nlohmann::json load_config_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) fail(Errc::IoFailure, "cannot open config " + path);
  nlohmann::json j = nlohmann::json::parse(in, nullptr, false);
  if (j.is_discarded() || !j.is_object()) fail(Errc::ConfigInvalid, "config is not a JSON object: " + path);
  return j;
}

/// Applies one "dot.path=value" override. The value is parsed as JSON when
/// possible, otherwise taken as a plain string.
inline void apply_override(nlohmann::json& cfg, const std::string& kv) {
  const auto eq = kv.find('=');
  if (eq == std::string::npos || eq == 0) fail(Errc::ConfigInvalid, "override must look like key=value: " + kv);
  const std::string path = kv.substr(0, eq);
  const std::string raw = kv.substr(eq + 1);
  nlohmann::json value = nlohmann::json::parse(raw, nullptr, false);
  if (value.is_discarded()) value = raw;
  nlohmann::json* node = &cfg;
  std::size_t start = 0;
  for (;;) {
    const auto dot = path.find('.', start);
    const std::string key = path.substr(start, dot == std::string::npos ? std::string::npos : dot - start);
    if (key.empty()) fail(Errc::ConfigInvalid, "empty key segment in override: " + kv);
    if (dot == std::string::npos) {
      (*node)[key] = std::move(value);
      return;
    }
    node = &(*node)[key];
    if (!node->is_object() && !node->is_null()) fail(Errc::ConfigInvalid, "override path crosses a scalar: " + kv);
    start = dot + 1;
  }
}

namespace detail {

template <typename T>
T get_or(const nlohmann::json& j, const char* key, T def) {
  if (!j.is_object() || !j.contains(key)) return def;
  return j.at(key).get<T>();
}

inline TrainConfig parse_train(const nlohmann::json& j, const TrainConfig& defaults) {
  TrainConfig t = defaults;
  t.lr = get_or(j, "lr", t.lr);
  t.batch_size = get_or(j, "batch_size", t.batch_size);
  t.epochs = get_or(j, "epochs", t.epochs);
  t.conf_penalty = get_or(j, "conf_penalty", t.conf_penalty);
  t.beta = get_or(j, "beta", t.beta);
  t.max_grad_norm = get_or(j, "max_grad_norm", t.max_grad_norm);
  return t;
}

}  // namespace detail

/// Everything a command needs, resolved from the config document. Data comes
/// either from the synth block (generated in memory) or from dataset paths.
struct RunConfig {
  TaskKind task = TaskKind::Tagging;

  bool has_synth = false;
  SynthConfig synth;

  std::string source_train_path, target_train_path, target_dev_path, target_test_path, lm_corpus_path;
  std::string input_path;        // augment / distill / eval
  std::string checkpoint_path;   // distill / eval
  std::vector<std::string> checkpoint_paths;  // eval over several models
  LabelVocab vocab;              // file-based commands only
  bool has_vocab = false;

  std::size_t hash_dim = 4096;
  int lm_order = 3;
  double lm_lambda = 0.1;

  TrainConfig warmup;
  CoteachConfig coteach;
  DistillMethod distill_method = DistillMethod::Confidence;  // cmd_distill
  double distill_eta = 80.0;                                 // cmd_distill
  std::uint64_t seed = 0;
};

inline RunConfig parse_run_config(const nlohmann::json& j) {
  RunConfig rc;
  if (!j.contains("task")) fail(Errc::ConfigInvalid, "config needs a task field");
  rc.task = parse_task_kind(j.at("task").get<std::string>());
  if (!j.contains("seed") || !j.at("seed").is_number())
    fail(Errc::ConfigInvalid, "config needs an explicit integer seed");
  rc.seed = j.at("seed").get<std::uint64_t>();

  if (j.contains("synth")) {
    rc.has_synth = true;
    const auto& s = j.at("synth");
    rc.synth.vocab_size = detail::get_or<std::size_t>(s, "vocab_size", rc.synth.vocab_size);
    rc.synth.gazetteer_size = detail::get_or<std::size_t>(s, "gazetteer_size", rc.synth.gazetteer_size);
    rc.synth.template_count = detail::get_or<std::size_t>(s, "template_count", rc.synth.template_count);
    rc.synth.rho = detail::get_or(s, "rho", rc.synth.rho);
    rc.synth.swap_rate = detail::get_or(s, "swap_rate", rc.synth.swap_rate);
    rc.synth.train_size = detail::get_or<std::size_t>(s, "train_size", rc.synth.train_size);
    rc.synth.dev_size = detail::get_or<std::size_t>(s, "dev_size", rc.synth.dev_size);
    rc.synth.test_size = detail::get_or<std::size_t>(s, "test_size", rc.synth.test_size);
    rc.synth.label_noise = detail::get_or(s, "label_noise", rc.synth.label_noise);
    rc.synth.seed = detail::get_or<std::uint64_t>(s, "seed", rc.seed);
    rc.synth.validate();
  }

  const auto paths = j.contains("paths") ? j.at("paths") : nlohmann::json::object();
  rc.source_train_path = detail::get_or<std::string>(paths, "source_train", "");
  rc.target_train_path = detail::get_or<std::string>(paths, "target_train", "");
  rc.target_dev_path = detail::get_or<std::string>(paths, "target_dev", "");
  rc.target_test_path = detail::get_or<std::string>(paths, "target_test", "");
  rc.lm_corpus_path = detail::get_or<std::string>(paths, "lm_corpus", "");
  rc.input_path = detail::get_or<std::string>(paths, "input", "");
  rc.checkpoint_path = detail::get_or<std::string>(paths, "checkpoint", "");
  if (paths.contains("checkpoints")) rc.checkpoint_paths = paths.at("checkpoints").get<std::vector<std::string>>();

  if (j.contains("labels")) {
    rc.has_vocab = true;
    auto names = j.at("labels").get<std::vector<std::string>>();
    const std::string scheme =
        detail::get_or<std::string>(j, "scheme", rc.task == TaskKind::Tagging ? "iob2" : "sentence");
    if (scheme == "iob2") rc.vocab = LabelVocab::iob2(std::move(names));
    else if (scheme == "sentence") rc.vocab = LabelVocab::sentence(std::move(names));
    else fail(Errc::ConfigInvalid, "unknown label scheme '" + scheme + "'");
  }

  const auto model = j.contains("model") ? j.at("model") : nlohmann::json::object();
  rc.hash_dim = detail::get_or<std::size_t>(model, "hash_dim", rc.hash_dim);
  const auto lm = j.contains("lm") ? j.at("lm") : nlohmann::json::object();
  rc.lm_order = detail::get_or(lm, "order", rc.lm_order);
  rc.lm_lambda = detail::get_or(lm, "lambda", rc.lm_lambda);

  // Desk-scale defaults: the hashed linear models need a large constant lr
  // and many passes before the source task saturates.
  TrainConfig warm_default;
  warm_default.lr = 5.0;
  warm_default.batch_size = 16;
  warm_default.epochs = 16;
  warm_default.conf_penalty = true;
  warm_default.beta = 1.0;
  rc.warmup = detail::parse_train(j.contains("warmup") ? j.at("warmup") : nlohmann::json::object(), warm_default);

  TrainConfig adapt_default;
  adapt_default.lr = 1.0;
  adapt_default.batch_size = 16;
  adapt_default.epochs = 1;
  adapt_default.conf_penalty = false;
  rc.coteach.adapt_train =
      detail::parse_train(j.contains("adapt") ? j.at("adapt") : nlohmann::json::object(), adapt_default);

  const auto ct = j.contains("coteach") ? j.at("coteach") : nlohmann::json::object();
  rc.coteach.epochs = detail::get_or(ct, "epochs", 3);
  rc.coteach.alpha = detail::get_or(ct, "alpha", 0.7);
  rc.coteach.seed = rc.seed;
  rc.coteach.dry_run = detail::get_or(ct, "dry_run", false);
  rc.coteach.use_agreement = detail::get_or(ct, "use_agreement", true);
  rc.coteach.distill.eta_per_epoch =
      detail::get_or<std::vector<double>>(ct, "eta", {80.0, 100.0, 100.0});
  const std::string method = detail::get_or<std::string>(ct, "distill_method", "confidence");
  if (method == "confidence") rc.coteach.distill.method = DistillMethod::Confidence;
  else if (method == "clustering") rc.coteach.distill.method = DistillMethod::Clustering;
  else fail(Errc::ConfigInvalid, "unknown distill method '" + method + "'");
  rc.coteach.distill.gmm.max_iters = detail::get_or(ct, "gmm_max_iters", 100);
  rc.coteach.distill.gmm.tol = detail::get_or(ct, "gmm_tol", 1e-6);
  rc.coteach.distill.gmm.var_floor = detail::get_or(ct, "gmm_var_floor", 1e-6);

  const auto gen = j.contains("gen") ? j.at("gen") : nlohmann::json::object();
  rc.coteach.gen.mask_percent = detail::get_or(gen, "mask_percent", 30.0);
  rc.coteach.gen.delta = detail::get_or(gen, "delta", 3);
  rc.coteach.gen.delta1 = detail::get_or(gen, "delta1", 2);
  rc.coteach.gen.delta2 = detail::get_or(gen, "delta2", 2);
  rc.coteach.gen.candidates = detail::get_or(gen, "candidates", 1);
  const std::string mode = detail::get_or<std::string>(gen, "mode", "max");
  if (mode == "max") rc.coteach.gen.mode = GenMode::Max;
  else if (mode == "cross") rc.coteach.gen.mode = GenMode::Cross;
  else fail(Errc::ConfigInvalid, "unknown gen mode '" + mode + "'");
  rc.coteach.gen.validate();

  const auto dist = j.contains("distill") ? j.at("distill") : nlohmann::json::object();
  rc.distill_eta = detail::get_or(dist, "eta", rc.distill_eta);
  const std::string dmethod = detail::get_or<std::string>(dist, "method", "confidence");
  if (dmethod == "confidence") rc.distill_method = DistillMethod::Confidence;
  else if (dmethod == "clustering") rc.distill_method = DistillMethod::Clustering;
  else fail(Errc::ConfigInvalid, "unknown distill method '" + dmethod + "'");

  return rc;
}

}  // namespace multimix
