#include <CLI11.hpp>
#include <cstdlib>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include "commdecode/errors.hpp"
#include "commdecode/pipeline.hpp"

namespace {

struct CommonOpts {
  std::string config_path;
  std::optional<std::string> out_dir;
  std::vector<std::string> overrides;
  std::optional<std::uint64_t> seed;
};

commdecode::RunConfig build_config(const CommonOpts& opts) {
  commdecode::RunConfig cfg = opts.config_path.empty()
                                  ? commdecode::RunConfig::defaults()
                                  : commdecode::RunConfig::from_json_file(opts.config_path);
  for (const std::string& kv : opts.overrides) cfg.apply_override(kv);
  if (opts.seed) {
    cfg.seed = *opts.seed;
  } else if (const char* env_seed = std::getenv("COMMDECODE_SEED")) {
    cfg.seed = std::strtoull(env_seed, nullptr, 10);
  }
  if (opts.out_dir) cfg.out_dir = *opts.out_dir;
  cfg.validate();
  return cfg;
}

void add_common(CLI::App* cmd, CommonOpts& opts) {
  cmd->add_option("--config", opts.config_path, "JSON run configuration");
  cmd->add_option("--out", opts.out_dir, "output directory (default: config out_dir)");
  cmd->add_option("--set", opts.overrides, "config override key=value (repeatable)");
  cmd->add_option("--seed", opts.seed, "run seed (overrides COMMDECODE_SEED and config)");
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"goal-signalling gridworld communication decoding pipeline"};
  app.require_subcommand(1);

  CommonOpts opts;
  bool assert_thresholds = false;
  std::string instance_path;

  auto* plan = app.add_subcommand("plan", "value iteration + policy distillation");
  auto* train_transition =
      app.add_subcommand("train-transition", "fit the dynamics model");
  auto* gen_demos = app.add_subcommand("gen-demos", "generate a demonstration corpus");
  auto* train_decoder = app.add_subcommand("train-decoder", "train the state decoder");
  auto* decode_exact =
      app.add_subcommand("decode-exact", "rational-inference goal sets per message");
  auto* eval_decoder =
      app.add_subcommand("eval-decoder", "score the decoder and render heatmaps");
  auto* analyze_equiv =
      app.add_subcommand("analyze-equiv", "strategic equivalence report on a micro instance");
  auto* all = app.add_subcommand("all", "full pipeline");

  for (CLI::App* cmd : {plan, train_transition, gen_demos, train_decoder,
                        decode_exact, eval_decoder, analyze_equiv, all})
    add_common(cmd, opts);
  eval_decoder->add_flag("--assert", assert_thresholds,
                         "exit 4 when evaluation thresholds fail");
  analyze_equiv->add_option("--instance", instance_path,
                            "micro-instance JSON (defaults to a built-in 1x3 corridor)");

  CLI11_PARSE(app, argc, argv);

  try {
    const commdecode::RunConfig cfg = build_config(opts);
    if (plan->parsed()) {
      commdecode::run_plan(cfg, cfg.out_dir);
    } else if (train_transition->parsed()) {
      commdecode::run_train_transition(cfg, cfg.out_dir);
    } else if (gen_demos->parsed()) {
      commdecode::run_gen_demos(cfg, cfg.out_dir);
    } else if (train_decoder->parsed()) {
      commdecode::run_train_decoder(cfg, cfg.out_dir);
    } else if (decode_exact->parsed()) {
      commdecode::run_decode_exact(cfg, cfg.out_dir);
    } else if (eval_decoder->parsed()) {
      const bool ok = commdecode::run_eval_decoder(cfg, cfg.out_dir);
      if (!ok && assert_thresholds) {
        std::cerr << "eval-decoder: thresholds not met (see metrics.json)\n";
        return 4;
      }
    } else if (analyze_equiv->parsed()) {
      commdecode::run_analyze_equiv(
          cfg, cfg.out_dir,
          instance_path.empty() ? std::nullopt
                                : std::make_optional(instance_path));
    } else if (all->parsed()) {
      commdecode::run_all(cfg, cfg.out_dir);
    }
  } catch (const commdecode::ConfigError& e) {
    std::cerr << "config error: " << e.what() << '\n';
    return 1;
  } catch (const commdecode::MissingArtifact& e) {
    std::cerr << "missing dependency: " << e.path() << '\n';
    return 2;
  } catch (const commdecode::NumericError& e) {
    std::cerr << "numeric failure: " << e.what() << '\n';
    return 3;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 1;
  }
  return 0;
}
