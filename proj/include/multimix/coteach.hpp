#pragma once

#include <array>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <map>
#include <memory>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "multimix/data.hpp"
#include "multimix/distill.hpp"
#include "multimix/error.hpp"
#include "multimix/model.hpp"
#include "multimix/sampling.hpp"
#include "multimix/vicinity.hpp"

namespace multimix {

/// The four dataset roles that can enter an adaptation training mix.
enum class Role { Ds, DtPrime, DsAug, DtAug };

inline const char* role_name(Role r) {
  switch (r) {
    case Role::Ds: return "D_s";
    case Role::DtPrime: return "D_t_prime";
    case Role::DsAug: return "D_s_aug";
    default: return "D_t_aug";
  }
}

/// Active roles per co-teaching epoch: {D_s, D_t'} in epoch 1, {D_t_aug} in
/// epoch 2, all four in epoch 3.
inline std::vector<Role> epoch_datasets(int e) {
  switch (e) {
    case 1: return {Role::Ds, Role::DtPrime};
    case 2: return {Role::DtAug};
    case 3: return {Role::Ds, Role::DtPrime, Role::DsAug, Role::DtAug};
    default: fail(Errc::EpochOutOfRange, "epoch " + std::to_string(e) + " outside 1..3");
  }
}

struct CoteachConfig {
  int epochs = 3;
  DistillConfig distill;    // eta_per_epoch must have one entry per epoch
  GenConfig gen;            // seed field is overridden per generation call
  double alpha = 0.7;
  TrainConfig adapt_train;  // confidence penalty off by default here
  std::uint64_t seed = 0;
  bool dry_run = false;        // full pipeline, no weight updates anywhere
  bool use_agreement = true;   // false: keep model k's distilled set alone
};

struct RunResult {
  std::vector<std::unique_ptr<TaskModel>> models;         // state after the last epoch
  std::vector<std::unique_ptr<TaskModel>> warmup_models;  // zero-shot baseline snapshot
  std::vector<std::unique_ptr<TaskModel>> best_models;    // per-model best dev epoch
  std::vector<int> best_epochs;
  std::vector<double> warmup_dev;
  std::vector<double> best_dev;
  nlohmann::ordered_json report;
};

namespace detail {

inline std::uint64_t loop_key(int e, int k, int j) {
  return static_cast<std::uint64_t>(e) * 100 + static_cast<std::uint64_t>(k) * 10 +
         static_cast<std::uint64_t>(j);
}

inline void save_checkpoint(const TaskModel& model, const std::filesystem::path& dir, int index) {
  std::filesystem::create_directories(dir);
  std::ofstream out(dir / (std::to_string(index) + ".mmx"), std::ios::binary);
  if (!out) fail(Errc::IoFailure, "cannot write checkpoint in " + dir.string());
  model.save(out);
}

}  // namespace detail

/// Runs the full co-teaching schedule: warm-up, then for each epoch e and
/// each ordered model pair (k, j) the Distil / Gen-LM / Agreement cascade,
/// finally training the left-out model l on the epoch's active roles mixed
/// with factor alpha. Each model is therefore trained twice per epoch, once
/// per ordering of its two peers; updates apply sequentially in loop order.
/// The unlabeled target distillation is computed once per (model, epoch) and
/// reused; the trace marks reuses with "cached". Target train labels are
/// never read; dev_t only steers per-model checkpoint selection.
inline RunResult run_multimix(const LabeledDataset& d_s, const LabeledDataset& x_t, const MaskedLM& lm,
                              const CoteachConfig& cfg, const LabeledDataset& dev_t,
                              const ModelFactory& factory, const TrainConfig& warmup_cfg,
                              const std::array<std::uint64_t, 3>& seeds,
                              const std::string& checkpoint_dir = "") {
  if (!d_s.labeled() || d_s.empty()) fail(Errc::UnlabeledData, "source train set must be labeled");
  if (x_t.empty()) fail(Errc::EmptyDataset, "target train set is empty");
  if (x_t.labeled()) fail(Errc::ConfigInvalid, "target train set must be unlabeled (zero-resource contract)");
  if (!dev_t.labeled() || dev_t.empty()) fail(Errc::UnlabeledData, "target dev set must be labeled");
  if (cfg.epochs < 1) fail(Errc::ConfigInvalid, "epochs must be >= 1");
  if (cfg.distill.eta_per_epoch.size() != static_cast<std::size_t>(cfg.epochs))
    fail(Errc::ConfigArityMismatch, "eta schedule length differs from epoch count");
  if (cfg.adapt_train.batch_size <= 0) fail(Errc::ConfigInvalid, "batch_size must be positive");
  cfg.gen.validate();
  for (int e = 1; e <= cfg.epochs; ++e) epoch_datasets(e);
  if (seeds[0] == seeds[1] || seeds[0] == seeds[2] || seeds[1] == seeds[2])
    fail(Errc::DuplicateSeeds, "model seeds must be pairwise distinct");

  RunResult res;
  nlohmann::ordered_json& report = res.report;
  report["seeds"] = seeds;
  report["alpha"] = cfg.alpha;
  report["epochs"] = cfg.epochs;
  report["eta"] = cfg.distill.eta_per_epoch;
  report["distill_method"] = cfg.distill.method == DistillMethod::Confidence ? "confidence" : "clustering";
  report["gen_mode"] = cfg.gen.mode == GenMode::Max ? "max" : "cross";
  report["mask_percent"] = cfg.gen.mask_percent;
  report["dry_run"] = cfg.dry_run;
  report["use_agreement"] = cfg.use_agreement;
  report["trace"] = nlohmann::ordered_json::array();
  auto& trace = report["trace"];

  // Line 1: warm-up (skipped updates in dry-run keep the factory weights).
  if (cfg.dry_run) {
    for (std::uint64_t s : seeds) res.models.push_back(factory(s));
  } else {
    res.models = train_warmup(factory, d_s, warmup_cfg, seeds);
  }
  const std::filesystem::path ckpt(checkpoint_dir);
  for (int m = 0; m < 3; ++m) {
    res.warmup_models.push_back(res.models[m]->clone());
    res.warmup_dev.push_back(evaluate_model(*res.models[m], dev_t));
    if (!checkpoint_dir.empty()) detail::save_checkpoint(*res.models[m], ckpt / "warmup", m + 1);
  }
  report["warmup_dev"] = res.warmup_dev;

  res.best_epochs.assign(3, 0);
  res.best_dev.assign(3, -1.0);
  for (int m = 0; m < 3; ++m) res.best_models.push_back(res.models[m]->clone());

  report["epoch_log"] = nlohmann::ordered_json::array();
  for (int e = 1; e <= cfg.epochs; ++e) {
    const double eta = cfg.distill.eta_per_epoch[static_cast<std::size_t>(e - 1)];
    std::map<int, PseudoLabeledSet> target_cache;  // model index -> Distil(X_t)

    // The per-epoch X_t distillation cache: a model's set is computed at its
    // first requesting call site and silently reused afterwards.
    auto target_set = [&](int model_1based) -> const PseudoLabeledSet& {
      auto it = target_cache.find(model_1based);
      if (it == target_cache.end())
        it = target_cache
                 .emplace(model_1based, distil(*res.models[model_1based - 1], x_t, cfg.distill.method, eta,
                                               cfg.distill.gmm))
                 .first;
      return it->second;
    };

    auto distil_target = [&](int model_1based, int line, int k, int j) -> const PseudoLabeledSet& {
      const bool cached = target_cache.count(model_1based) > 0;
      const PseudoLabeledSet& set = target_set(model_1based);
      nlohmann::ordered_json ev;
      ev["event"] = "distil";
      ev["line"] = line;
      ev["epoch"] = e;
      if (line == 12) {
        ev["k"] = k;
        ev["j"] = j;
      }
      ev["model"] = model_1based;
      ev["data"] = "X_t";
      ev["cached"] = cached;
      ev["in"] = x_t.size();
      ev["out"] = set.size();
      trace.push_back(std::move(ev));
      return set;
    };

    auto distil_virtual = [&](int model_1based, const LabeledDataset& virt, const char* data_name, int line,
                              int k, int j) {
      PseudoLabeledSet set =
          distil(*res.models[model_1based - 1], virt, cfg.distill.method, eta, cfg.distill.gmm);
      nlohmann::ordered_json ev;
      ev["event"] = "distil";
      ev["line"] = line;
      ev["epoch"] = e;
      ev["k"] = k;
      ev["j"] = j;
      ev["model"] = model_1based;
      ev["data"] = data_name;
      ev["cached"] = false;
      ev["in"] = virt.size();
      ev["out"] = set.size();
      trace.push_back(std::move(ev));
      return set;
    };

    auto agree = [&](const PseudoLabeledSet& a, const PseudoLabeledSet& b, const char* out_name, int line,
                     int k, int j) {
      PseudoLabeledSet res_set = cfg.use_agreement ? agreement(a, b) : a;
      if (cfg.use_agreement) {
        nlohmann::ordered_json ev;
        ev["event"] = "agreement";
        ev["line"] = line;
        ev["epoch"] = e;
        ev["k"] = k;
        ev["j"] = j;
        ev["out"] = out_name;
        ev["a"] = a.size();
        ev["b"] = b.size();
        ev["size"] = res_set.size();
        trace.push_back(std::move(ev));
      }
      return res_set;
    };

    for (int k = 1; k <= 3; ++k) {
      // Line 4: target distillation with the current pivot model.
      distil_target(k, 4, k, 0);
      for (int j = 1; j <= 3; ++j) {
        if (j == k) continue;

        // Lines 8-10: source augmentation.
        GenConfig gen_s = cfg.gen;
        gen_s.seed = derive_seed(cfg.seed, "gen-s", detail::loop_key(e, k, j));
        const LabeledDataset x_s_virtual = gen_lm(d_s.without_labels(), lm, gen_s);
        {
          nlohmann::ordered_json ev;
          ev["event"] = "gen_lm";
          ev["line"] = 8;
          ev["epoch"] = e;
          ev["k"] = k;
          ev["j"] = j;
          ev["data"] = "X_s";
          ev["in"] = d_s.size();
          ev["out"] = x_s_virtual.size();
          trace.push_back(std::move(ev));
        }
        const auto s_k = distil_virtual(k, x_s_virtual, "X_s_virtual", 9, k, j);
        const auto s_j = distil_virtual(j, x_s_virtual, "X_s_virtual", 9, k, j);
        const auto d_s_aug = agree(s_k, s_j, "D_s_aug", 10, k, j);

        // Lines 12-13: target selection (line 4's X_t^(k) reused silently).
        const auto& t_k = target_set(k);
        const auto& t_j = distil_target(j, 12, k, j);
        const auto d_t_prime = agree(t_k, t_j, "D_t_prime", 13, k, j);

        // Lines 15-17: target augmentation.
        GenConfig gen_t = cfg.gen;
        gen_t.seed = derive_seed(cfg.seed, "gen-t", detail::loop_key(e, k, j));
        const LabeledDataset x_t_virtual = gen_lm(x_t, lm, gen_t);
        {
          nlohmann::ordered_json ev;
          ev["event"] = "gen_lm";
          ev["line"] = 15;
          ev["epoch"] = e;
          ev["k"] = k;
          ev["j"] = j;
          ev["data"] = "X_t";
          ev["in"] = x_t.size();
          ev["out"] = x_t_virtual.size();
          trace.push_back(std::move(ev));
        }
        const auto v_k = distil_virtual(k, x_t_virtual, "X_t_virtual", 16, k, j);
        const auto v_j = distil_virtual(j, x_t_virtual, "X_t_virtual", 16, k, j);
        const auto d_t_aug = agree(v_k, v_j, "D_t_aug", 17, k, j);

        // Lines 19-22: train the left-out model on this epoch's roles.
        const int l = 6 - k - j;
        std::map<Role, LabeledDataset> materialized;
        materialized[Role::Ds] = d_s;
        materialized[Role::DtPrime] = d_t_prime.to_dataset();
        materialized[Role::DsAug] = d_s_aug.to_dataset();
        materialized[Role::DtAug] = d_t_aug.to_dataset();

        const auto roles = epoch_datasets(e);
        std::vector<const LabeledDataset*> active;
        nlohmann::ordered_json sizes = nlohmann::ordered_json::object();
        std::size_t mix_size = 0;
        for (Role r : roles) {
          const LabeledDataset& ds = materialized[r];
          sizes[role_name(r)] = ds.size();
          mix_size += ds.size();
          if (!ds.empty()) active.push_back(&ds);
        }
        const auto batch_sz = static_cast<std::size_t>(cfg.adapt_train.batch_size);
        const std::size_t steps = (mix_size + batch_sz - 1) / batch_sz;
        if (!active.empty() && steps > 0 && !cfg.dry_run) {
          MixtureStream stream([&] {
            std::vector<std::size_t> ns;
            for (const auto* ds : active) ns.push_back(ds->size());
            return ns;
          }(), cfg.alpha, derive_seed(cfg.seed, "mix", detail::loop_key(e, k, j)));
          for (std::size_t step = 0; step < steps; ++step) {
            Batch b;
            for (const DrawRef& ref : stream.next_batch(batch_sz)) {
              const LabeledDataset* ds = active[ref.dataset];
              b.samples.push_back(&ds->samples[ref.sample]);
              b.labels.push_back(&ds->labels[ref.sample]);
            }
            res.models[l - 1]->train_batch(b, cfg.adapt_train);
          }
        }
        {
          nlohmann::ordered_json ev;
          ev["event"] = "train";
          ev["line"] = 22;
          ev["epoch"] = e;
          ev["k"] = k;
          ev["j"] = j;
          ev["model"] = l;
          nlohmann::ordered_json role_list = nlohmann::ordered_json::array();
          for (Role r : roles) role_list.push_back(role_name(r));
          ev["roles"] = std::move(role_list);
          ev["sizes"] = std::move(sizes);
          ev["steps"] = steps;
          trace.push_back(std::move(ev));
        }
      }
    }

    nlohmann::ordered_json epoch_entry;
    epoch_entry["epoch"] = e;
    std::vector<double> dev;
    for (int m = 0; m < 3; ++m) {
      dev.push_back(evaluate_model(*res.models[m], dev_t));
      if (dev[static_cast<std::size_t>(m)] > res.best_dev[static_cast<std::size_t>(m)]) {
        res.best_dev[static_cast<std::size_t>(m)] = dev[static_cast<std::size_t>(m)];
        res.best_epochs[static_cast<std::size_t>(m)] = e;
        res.best_models[static_cast<std::size_t>(m)] = res.models[static_cast<std::size_t>(m)]->clone();
      }
      if (!checkpoint_dir.empty())
        detail::save_checkpoint(*res.models[static_cast<std::size_t>(m)], ckpt / ("epoch" + std::to_string(e)),
                                m + 1);
    }
    epoch_entry["dev"] = dev;
    report["epoch_log"].push_back(std::move(epoch_entry));
  }

  report["best_epochs"] = res.best_epochs;
  report["best_dev"] = res.best_dev;
  return res;
}

}  // namespace multimix
