#include <catch2/catch_amalgamated.hpp>

#include <cstdlib>
#include <filesystem>
#include <string>
#include <sys/wait.h>

#include <nlohmann/json.hpp>

#include "multimix/data.hpp"
#include "test_util.hpp"

using nlohmann::json;
using testutil::read_file;
using testutil::tmp_dir;
using testutil::write_file;

namespace {

namespace fs = std::filesystem;

int run_cli(const std::string& args, const fs::path& log) {
  const std::string cmd =
      std::string("\"") + MULTIMIX_CLI_PATH + "\" " + args + " > \"" + log.string() + "\" 2>&1";
  const int rc = std::system(cmd.c_str());
  return WIFEXITED(rc) ? WEXITSTATUS(rc) : -1;
}

json tagging_config(std::uint64_t seed) {
  json cfg;
  cfg["task"] = "tagging";
  cfg["seed"] = seed;
  cfg["synth"] = {{"vocab_size", 25}, {"gazetteer_size", 4}, {"template_count", 5},
                  {"train_size", 12}, {"dev_size", 6},       {"test_size", 6},
                  {"rho", 0.6},       {"swap_rate", 0.1}};
  cfg["model"] = {{"hash_dim", 512}};
  cfg["warmup"] = {{"lr", 0.5}, {"batch_size", 8}, {"epochs", 1}};
  cfg["adapt"] = {{"lr", 0.3}, {"batch_size", 8}};
  cfg["coteach"] = {{"epochs", 1}, {"eta", {80.0}}};
  cfg["gen"] = {{"delta", 1}, {"mask_percent", 30.0}};
  return cfg;
}

const multimix::LabelVocab kTagVocab =
    multimix::LabelVocab::iob2({"O", "B-PER", "I-PER", "B-ORG", "I-ORG", "B-LOC", "I-LOC"});

}  // namespace

TEST_CASE("usage errors exit with 1, help with 0", "[cli]") {
  const auto dir = tmp_dir("cli-usage");
  CHECK(run_cli("", dir / "log") == 1);
  CHECK(run_cli("frobnicate --config x.json", dir / "log") == 1);
  CHECK(run_cli("run", dir / "log") == 1);  // --config is required
  CHECK(run_cli("--help", dir / "log") == 0);
  CHECK(run_cli("run --help", dir / "log") == 0);
}

TEST_CASE("runtime errors exit with 2 and a JSON diagnostic", "[cli]") {
  const auto dir = tmp_dir("cli-errors");
  const auto log = dir / "log";

  CHECK(run_cli("synth --config \"" + (dir / "missing.json").string() + "\"", log) == 2);
  CHECK(read_file(log).find("IoFailure") != std::string::npos);

  write_file(dir / "broken.json", "{not json");
  CHECK(run_cli("synth --config \"" + (dir / "broken.json").string() + "\"", log) == 2);

  // A config without the mandatory seed is rejected.
  write_file(dir / "noseed.json", R"({"task":"tagging","synth":{}})");
  CHECK(run_cli("synth --config \"" + (dir / "noseed.json").string() + "\"", log) == 2);
  CHECK(read_file(log).find("ConfigInvalid") != std::string::npos);

  // Malformed --set override.
  write_file(dir / "ok.json", tagging_config(1).dump());
  CHECK(run_cli("synth --config \"" + (dir / "ok.json").string() + "\" --set nonsense", log) == 2);
}

TEST_CASE("synth writes all splits and a manifest", "[cli]") {
  const auto dir = tmp_dir("cli-synth");
  const auto log = dir / "log";
  write_file(dir / "cfg.json", tagging_config(7).dump());
  const auto out = dir / "out";
  REQUIRE(run_cli("synth --config \"" + (dir / "cfg.json").string() + "\" --out \"" + out.string() + "\"",
                  log) == 0);

  for (const char* name : {"source_train", "source_dev", "source_test", "target_train",
                           "target_train_oracle", "target_dev", "target_test"})
    CHECK(fs::exists(out / (std::string(name) + ".jsonl")));

  const auto manifest = json::parse(read_file(out / "manifest.json"));
  CHECK(manifest["task"] == "tagging");
  CHECK(manifest["synth"]["train_size"] == 12);

  const auto train = multimix::load_jsonl((out / "source_train.jsonl").string(), kTagVocab);
  CHECK(train.size() == 12);
  CHECK(train.labeled());
  const auto target = multimix::load_jsonl((out / "target_train.jsonl").string(), kTagVocab);
  CHECK_FALSE(target.labeled());
}

TEST_CASE("set and seed flags override the config", "[cli]") {
  const auto dir = tmp_dir("cli-overrides");
  const auto log = dir / "log";
  write_file(dir / "cfg.json", tagging_config(7).dump());

  const auto out1 = dir / "rho1";
  REQUIRE(run_cli("synth --config \"" + (dir / "cfg.json").string() + "\" --set synth.rho=1.0 --out \"" +
                      out1.string() + "\"",
                  log) == 0);
  const auto manifest = json::parse(read_file(out1 / "manifest.json"));
  CHECK(manifest["synth"]["rho"] == 1.0);
  CHECK(manifest["cipher"].empty());

  const auto out_a = dir / "seed-a";
  const auto out_b = dir / "seed-b";
  REQUIRE(run_cli("synth --config \"" + (dir / "cfg.json").string() + "\" --seed 100 --out \"" +
                      out_a.string() + "\"",
                  log) == 0);
  REQUIRE(run_cli("synth --config \"" + (dir / "cfg.json").string() + "\" --seed 101 --out \"" +
                      out_b.string() + "\"",
                  log) == 0);
  CHECK(read_file(out_a / "source_train.jsonl") != read_file(out_b / "source_train.jsonl"));
}

TEST_CASE("run produces metrics, report and checkpoints deterministically", "[cli]") {
  const auto dir = tmp_dir("cli-run");
  const auto log = dir / "log";
  write_file(dir / "cfg.json", tagging_config(3).dump());

  const auto out1 = dir / "out1";
  const auto out2 = dir / "out2";
  REQUIRE(run_cli("run --config \"" + (dir / "cfg.json").string() + "\" --out \"" + out1.string() + "\"",
                  log) == 0);
  REQUIRE(run_cli("run --config \"" + (dir / "cfg.json").string() + "\" --out \"" + out2.string() + "\"",
                  log) == 0);

  const auto metrics = json::parse(read_file(out1 / "metrics.json"));
  CHECK(metrics["task"] == "tagging");
  CHECK(metrics["metric"] == "micro_f1");
  REQUIRE(metrics["baseline"]["per_model"].size() == 3);
  REQUIRE(metrics["multimix"]["per_model"].size() == 3);
  CHECK(metrics["baseline"].contains("mean"));
  CHECK(metrics["baseline"].contains("std"));

  const auto report = json::parse(read_file(out1 / "report.json"));
  CHECK(report["config"]["task"] == "tagging");
  CHECK(report["trace"].is_array());
  CHECK(report["epoch_log"].size() == 1);

  for (int m = 1; m <= 3; ++m) {
    CHECK(fs::exists(out1 / "checkpoints" / "warmup" / (std::to_string(m) + ".mmx")));
    CHECK(fs::exists(out1 / "checkpoints" / "epoch1" / (std::to_string(m) + ".mmx")));
  }

  CHECK(read_file(out1 / "report.json") == read_file(out2 / "report.json"));
  CHECK(read_file(out1 / "metrics.json") == read_file(out2 / "metrics.json"));
}

TEST_CASE("augment, distill and eval chain over files", "[cli]") {
  const auto dir = tmp_dir("cli-chain");
  const auto log = dir / "log";
  write_file(dir / "cfg.json", tagging_config(5).dump());

  const auto synth_out = dir / "data";
  REQUIRE(run_cli("synth --config \"" + (dir / "cfg.json").string() + "\" --out \"" +
                      synth_out.string() + "\"",
                  log) == 0);
  const auto run_out = dir / "run";
  REQUIRE(run_cli("run --config \"" + (dir / "cfg.json").string() + "\" --out \"" + run_out.string() +
                      "\"",
                  log) == 0);
  const std::string ckpt = (run_out / "checkpoints" / "warmup" / "1.mmx").string();

  // Augment the unlabeled target split.
  json aug;
  aug["task"] = "tagging";
  aug["seed"] = 11;
  aug["labels"] = {"O", "B-PER", "I-PER", "B-ORG", "I-ORG", "B-LOC", "I-LOC"};
  aug["paths"] = {{"input", (synth_out / "target_train.jsonl").string()}};
  aug["gen"] = {{"delta", 2}};
  write_file(dir / "aug.json", aug.dump());
  const auto aug_out = dir / "aug";
  REQUIRE(run_cli("augment --config \"" + (dir / "aug.json").string() + "\" --out \"" +
                      aug_out.string() + "\"",
                  log) == 0);
  const auto augmented = multimix::load_jsonl((aug_out / "augmented.jsonl").string(), kTagVocab);
  CHECK(augmented.size() == 24);  // 12 samples x delta 2
  CHECK_FALSE(augmented.labeled());
  CHECK_FALSE(augmented.samples[0].origin_id.empty());

  // Distill the target dev split with a warm-up checkpoint.
  json dst;
  dst["task"] = "tagging";
  dst["seed"] = 12;
  dst["labels"] = aug["labels"];
  dst["paths"] = {{"input", (synth_out / "target_dev.jsonl").string()}, {"checkpoint", ckpt}};
  dst["distill"] = {{"eta", 50.0}, {"method", "confidence"}};
  write_file(dir / "dst.json", dst.dump());
  const auto dst_out = dir / "dst";
  REQUIRE(run_cli("distill --config \"" + (dir / "dst.json").string() + "\" --out \"" +
                      dst_out.string() + "\"",
                  log) == 0);
  const auto selected = multimix::load_jsonl((dst_out / "selected.jsonl").string(), kTagVocab);
  CHECK(selected.size() == 3);  // ceil(50% of 6)
  CHECK(selected.labeled());
  const auto stats = read_file(dst_out / "loss_stats.csv");
  std::size_t lines = 0;
  for (char ch : stats)
    if (ch == '\n') ++lines;
  CHECK(lines == 7);  // header + one row per input sample

  // Evaluate all three warm-up checkpoints on labeled target test data.
  json ev;
  ev["task"] = "tagging";
  ev["seed"] = 13;
  ev["labels"] = aug["labels"];
  ev["paths"] = {{"input", (synth_out / "target_test.jsonl").string()},
                 {"checkpoints",
                  {(run_out / "checkpoints" / "warmup" / "1.mmx").string(),
                   (run_out / "checkpoints" / "warmup" / "2.mmx").string(),
                   (run_out / "checkpoints" / "warmup" / "3.mmx").string()}}};
  write_file(dir / "ev.json", ev.dump());
  const auto ev_out = dir / "ev";
  REQUIRE(run_cli("eval --config \"" + (dir / "ev.json").string() + "\" --out \"" + ev_out.string() +
                      "\"",
                  log) == 0);
  const auto metrics = json::parse(read_file(ev_out / "metrics.json"));
  REQUIRE(metrics["per_model"].size() == 3);
  for (const auto& v : metrics["per_model"]) {
    CHECK(v.get<double>() >= 0.0);
    CHECK(v.get<double>() <= 1.0);
  }

  // A pair-task config cannot score a tagging checkpoint.
  ev["task"] = "pair";
  ev["labels"] = {"entail", "contradiction", "neutral"};
  ev["scheme"] = "sentence";
  write_file(dir / "ev-bad.json", ev.dump());
  CHECK(run_cli("eval --config \"" + (dir / "ev-bad.json").string() + "\" --out \"" +
                    (dir / "ev-bad").string() + "\"",
                log) == 2);
}
