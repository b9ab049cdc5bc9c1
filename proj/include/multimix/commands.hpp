#pragma once

#include <array>
#include <filesystem>
#include <fstream>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "multimix/coteach.hpp"
#include "multimix/data.hpp"
#include "multimix/distill.hpp"
#include "multimix/error.hpp"
#include "multimix/feature_models.hpp"
#include "multimix/metrics.hpp"
#include "multimix/run_config.hpp"
#include "multimix/synth.hpp"
#include "multimix/vicinity.hpp"

namespace multimix {

inline ModelFactory make_factory(TaskKind task, int classes, std::size_t dim) {
  return task == TaskKind::Tagging ? tagger_model_factory(classes, dim)
                                   : pair_model_factory(classes, dim);
}

namespace detail {

inline void write_json(const nlohmann::ordered_json& j, const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) fail(Errc::IoFailure, "cannot write " + path.string());
  out << j.dump(2) << '\n';
  if (!out) fail(Errc::IoFailure, "write failed for " + path.string());
}

inline nlohmann::ordered_json metric_block(const std::vector<double>& per_model) {
  const MeanStd ms = mean_std(per_model);
  nlohmann::ordered_json j;
  j["per_model"] = per_model;
  j["mean"] = ms.mean;
  j["std"] = ms.std;
  return j;
}

struct RunData {
  LabeledDataset source_train, target_train, target_dev, target_test;
};

inline RunData resolve_run_data(const RunConfig& rc) {
  RunData d;
  if (rc.has_synth) {
    Benchmark b = rc.task == TaskKind::Tagging ? gen_tagging_benchmark(rc.synth)
                                               : gen_pair_benchmark(rc.synth);
    d.source_train = std::move(b.source_train);
    d.target_train = std::move(b.target_train);
    d.target_dev = std::move(b.target_dev);
    d.target_test = std::move(b.target_test);
    return d;
  }
  if (!rc.has_vocab) fail(Errc::ConfigInvalid, "file-based runs need a labels list in the config");
  if (rc.source_train_path.empty() || rc.target_train_path.empty() || rc.target_dev_path.empty() ||
      rc.target_test_path.empty())
    fail(Errc::ConfigInvalid, "run needs paths.source_train/target_train/target_dev/target_test");
  d.source_train = load_jsonl(rc.source_train_path, rc.vocab);
  d.target_train = load_jsonl(rc.target_train_path, rc.vocab);
  d.target_dev = load_jsonl(rc.target_dev_path, rc.vocab);
  d.target_test = load_jsonl(rc.target_test_path, rc.vocab);
  return d;
}

inline NGramMaskedLM fit_run_lm(const RunConfig& rc, const RunData& d) {
  std::vector<std::vector<std::string>> corpus;
  if (!rc.lm_corpus_path.empty()) {
    corpus = lm_sentences(load_jsonl(rc.lm_corpus_path, d.source_train.vocab));
  } else {
    corpus = lm_sentences(d.source_train);
    for (auto& s : lm_sentences(d.target_train)) corpus.push_back(std::move(s));
  }
  return fit_ngram_lm(corpus, rc.lm_order, rc.lm_lambda);
}

}  // namespace detail

/// Full pipeline: warm-up, co-teaching adaptation, checkpoints, report.json
/// with the effective config and trace, metrics.json with test scores of the
/// warm-up baseline and the adapted models (mean +- population std over the
/// three task models).
inline void cmd_run(const nlohmann::json& cfg_json, const std::string& out_dir) {
  const RunConfig rc = parse_run_config(cfg_json);
  const detail::RunData data = detail::resolve_run_data(rc);
  const NGramMaskedLM lm = detail::fit_run_lm(rc, data);
  const ModelFactory factory = make_factory(rc.task, data.source_train.vocab.size(), rc.hash_dim);
  const std::array<std::uint64_t, 3> seeds = {derive_seed(rc.seed, "model", 1),
                                              derive_seed(rc.seed, "model", 2),
                                              derive_seed(rc.seed, "model", 3)};
  const std::filesystem::path out(out_dir);
  std::filesystem::create_directories(out);
  RunResult res = run_multimix(data.source_train, data.target_train, lm, rc.coteach, data.target_dev,
                               factory, rc.warmup, seeds, (out / "checkpoints").string());

  std::vector<double> baseline, adapted;
  for (int m = 0; m < 3; ++m) {
    baseline.push_back(evaluate_model(*res.warmup_models[m], data.target_test));
    adapted.push_back(evaluate_model(*res.best_models[m], data.target_test));
  }
  nlohmann::ordered_json metrics;
  metrics["task"] = task_kind_name(rc.task);
  metrics["metric"] = rc.task == TaskKind::Tagging ? "micro_f1" : "accuracy";
  metrics["baseline"] = detail::metric_block(baseline);
  metrics["multimix"] = detail::metric_block(adapted);
  metrics["best_epochs"] = res.best_epochs;
  detail::write_json(metrics, out / "metrics.json");

  nlohmann::ordered_json report;
  report["config"] = cfg_json;
  for (auto& [key, value] : res.report.items()) report[key] = value;
  report["test"] = metrics;
  detail::write_json(report, out / "report.json");
}

/// Generates the synthetic benchmark and writes every split as JSONL plus a
/// manifest with the effective settings and the cipher map.
inline void cmd_synth(const nlohmann::json& cfg_json, const std::string& out_dir) {
  const RunConfig rc = parse_run_config(cfg_json);
  if (!rc.has_synth) fail(Errc::ConfigInvalid, "synth command needs a synth block");
  const Benchmark b =
      rc.task == TaskKind::Tagging ? gen_tagging_benchmark(rc.synth) : gen_pair_benchmark(rc.synth);
  const std::filesystem::path out(out_dir);
  std::filesystem::create_directories(out);
  save_jsonl(b.source_train, (out / "source_train.jsonl").string());
  save_jsonl(b.source_dev, (out / "source_dev.jsonl").string());
  save_jsonl(b.source_test, (out / "source_test.jsonl").string());
  save_jsonl(b.target_train, (out / "target_train.jsonl").string());
  save_jsonl(b.target_train_oracle, (out / "target_train_oracle.jsonl").string());
  save_jsonl(b.target_dev, (out / "target_dev.jsonl").string());
  save_jsonl(b.target_test, (out / "target_test.jsonl").string());
  nlohmann::ordered_json manifest;
  manifest["task"] = task_kind_name(rc.task);
  manifest["synth"] = {{"vocab_size", rc.synth.vocab_size},
                       {"gazetteer_size", rc.synth.gazetteer_size},
                       {"template_count", rc.synth.template_count},
                       {"rho", rc.synth.rho},
                       {"swap_rate", rc.synth.swap_rate},
                       {"train_size", rc.synth.train_size},
                       {"dev_size", rc.synth.dev_size},
                       {"test_size", rc.synth.test_size},
                       {"label_noise", rc.synth.label_noise},
                       {"seed", rc.synth.seed}};
  manifest["cipher"] = b.cipher;
  detail::write_json(manifest, out / "manifest.json");
}

/// Gen-LM as a standalone step: reads paths.input, writes augmented.jsonl.
inline void cmd_augment(const nlohmann::json& cfg_json, const std::string& out_dir) {
  const RunConfig rc = parse_run_config(cfg_json);
  if (rc.input_path.empty()) fail(Errc::ConfigInvalid, "augment needs paths.input");
  if (!rc.has_vocab) fail(Errc::ConfigInvalid, "augment needs a labels list in the config");
  const LabeledDataset data = load_jsonl(rc.input_path, rc.vocab);
  std::vector<std::vector<std::string>> corpus =
      rc.lm_corpus_path.empty() ? lm_sentences(data)
                                : lm_sentences(load_jsonl(rc.lm_corpus_path, rc.vocab));
  const NGramMaskedLM lm = fit_ngram_lm(corpus, rc.lm_order, rc.lm_lambda);
  GenConfig gen = rc.coteach.gen;
  gen.seed = rc.seed;
  const LabeledDataset augmented = gen_lm(data.without_labels(), lm, gen);
  const std::filesystem::path out(out_dir);
  std::filesystem::create_directories(out);
  save_jsonl(augmented, (out / "augmented.jsonl").string());
}

/// Distil as a standalone step: pseudo-labels paths.input with the model at
/// paths.checkpoint, writes the selected subset and a loss_stats.csv row for
/// every input sample.
inline void cmd_distill(const nlohmann::json& cfg_json, const std::string& out_dir) {
  const RunConfig rc = parse_run_config(cfg_json);
  if (rc.input_path.empty() || rc.checkpoint_path.empty())
    fail(Errc::ConfigInvalid, "distill needs paths.input and paths.checkpoint");
  if (!rc.has_vocab) fail(Errc::ConfigInvalid, "distill needs a labels list in the config");
  const LabeledDataset data = load_jsonl(rc.input_path, rc.vocab);
  const auto model = load_model(rc.checkpoint_path);
  PseudoLabeledSet all = pseudo_label_all(*model, data.without_labels());
  GmmModel gmm;
  if (all.size() >= 2) {
    gmm = gmm_fit(all.losses(), rc.coteach.distill.gmm);
    for (auto& e : all.entries) e.goodness = gmm_goodness(gmm, e.loss);
  }
  const PseudoLabeledSet selected = rc.distill_method == DistillMethod::Confidence
                                        ? distil_confidence(all, rc.distill_eta)
                                        : distil_clustering(all, gmm, rc.distill_eta);
  const std::filesystem::path out(out_dir);
  std::filesystem::create_directories(out);
  save_jsonl(selected.to_dataset(), (out / "selected.jsonl").string());
  write_loss_stats(all, (out / "loss_stats.csv").string());
}

/// Evaluates one or more checkpoints on labeled paths.input data.
inline void cmd_eval(const nlohmann::json& cfg_json, const std::string& out_dir) {
  const RunConfig rc = parse_run_config(cfg_json);
  if (rc.input_path.empty()) fail(Errc::ConfigInvalid, "eval needs paths.input");
  if (!rc.has_vocab) fail(Errc::ConfigInvalid, "eval needs a labels list in the config");
  std::vector<std::string> paths = rc.checkpoint_paths;
  if (!rc.checkpoint_path.empty()) paths.insert(paths.begin(), rc.checkpoint_path);
  if (paths.empty()) fail(Errc::ConfigInvalid, "eval needs paths.checkpoint or paths.checkpoints");
  const LabeledDataset test = load_jsonl(rc.input_path, rc.vocab);
  if (!test.labeled()) fail(Errc::UnlabeledData, "eval input has no labels");
  std::vector<double> scores;
  for (const auto& p : paths) {
    const auto model = load_model(p);
    if (model->kind() != rc.task) fail(Errc::ConfigInvalid, "checkpoint task differs from config task: " + p);
    scores.push_back(evaluate_model(*model, test));
  }
  nlohmann::ordered_json metrics;
  metrics["task"] = task_kind_name(rc.task);
  metrics["metric"] = rc.task == TaskKind::Tagging ? "micro_f1" : "accuracy";
  metrics["checkpoints"] = paths;
  const auto block = detail::metric_block(scores);
  for (const auto& [key, value] : block.items()) metrics[key] = value;
  const std::filesystem::path out(out_dir);
  std::filesystem::create_directories(out);
  detail::write_json(metrics, out / "metrics.json");
}

}  // namespace multimix
