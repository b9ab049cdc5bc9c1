// Command-line front end: run | augment | distill | synth | eval.
// Exit codes: 0 success, 1 usage error, 2 runtime error.

#include <cstdint>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "multimix/commands.hpp"

namespace {

void emit_error(const std::string& code, const std::string& message) {
  nlohmann::ordered_json j;
  j["error"] = code;
  j["message"] = message;
  std::cerr << j.dump() << '\n';
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"MultiMix cross-domain adaptation harness"};
  app.require_subcommand(1);

  std::string config_path;
  std::string out_dir = "out";
  std::vector<std::string> overrides;
  std::optional<std::uint64_t> seed_flag;

  const char* names[] = {"run", "augment", "distill", "synth", "eval"};
  const char* descs[] = {"warm-up + co-teaching adaptation",
                         "masked-LM augmentation of a dataset",
                         "pseudo-label and select with one model",
                         "generate the synthetic benchmark",
                         "score checkpoints on labeled data"};
  for (int i = 0; i < 5; ++i) {
    CLI::App* sub = app.add_subcommand(names[i], descs[i]);
    sub->add_option("--config", config_path, "JSON config file")->required();
    sub->add_option("--set", overrides, "dot-path override, key=value (repeatable)");
    sub->add_option("--seed", seed_flag, "master seed (overrides the config)");
    sub->add_option("--out", out_dir, "output directory");
  }

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : 1;
  }

  try {
    nlohmann::json cfg = multimix::load_config_file(config_path);
    for (const auto& kv : overrides) multimix::apply_override(cfg, kv);
    if (seed_flag) cfg["seed"] = *seed_flag;

    if (app.got_subcommand("run")) multimix::cmd_run(cfg, out_dir);
    else if (app.got_subcommand("augment")) multimix::cmd_augment(cfg, out_dir);
    else if (app.got_subcommand("distill")) multimix::cmd_distill(cfg, out_dir);
    else if (app.got_subcommand("synth")) multimix::cmd_synth(cfg, out_dir);
    else multimix::cmd_eval(cfg, out_dir);
  } catch (const multimix::Error& e) {
    emit_error(multimix::errc_name(e.code()), e.what());
    return 2;
  } catch (const std::exception& e) {
    emit_error("exception", e.what());
    return 2;
  }
  return 0;
}
