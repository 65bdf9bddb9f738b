#pragma once

#include <cstdint>
#include <optional>
#include <string>

#include "commdecode/env.hpp"
#include "commdecode/planner.hpp"
#include "commdecode/state_decoder.hpp"
#include "commdecode/transition.hpp"

namespace commdecode {

inline constexpr const char* kToolVersion = "0.1.0";

struct DemosStageConfig {
  std::size_t count = 10000;
  double temperature = 0.0;
};

struct EvalStageConfig {
  int demos_per_message = 100;
  double min_accuracy = 0.40;
  int max_distance = 2;
  double min_miss_fraction_at_1 = 0.80;
};

/// Aggregated run configuration, serialised as one JSON document.
struct RunConfig {
  GridConfig env;
  DistillConfig planner;
  TransitionTrainConfig transition;
  DecoderTrainConfig decoder;
  double decoder_demo_temperature = 0.0;
  DemosStageConfig demos;
  EvalStageConfig eval;
  std::uint64_t seed = 42;
  std::string out_dir = "out";

  static RunConfig defaults();
  static RunConfig from_json_text(const std::string& text);
  static RunConfig from_json_file(const std::string& path);
  std::string to_json_text() const;

  /// Applies a dotted-path override such as "env.width=7" or
  /// "decoder.total_steps=200". Throws ConfigError on unknown keys.
  void apply_override(const std::string& key_equals_value);

  void validate() const;  // throws ConfigError naming the offending key
  std::string content_hash() const;
};

/// Per-stage artifact file names inside the output directory.
namespace artifact {
inline constexpr const char* kQTable = "qtable.csv";
inline constexpr const char* kPolicy = "policy.json";
inline constexpr const char* kTransitions = "transitions.jsonl";
inline constexpr const char* kTransitionModel = "transition.json";
inline constexpr const char* kMapping = "mapping.json";
inline constexpr const char* kDemos = "demos.jsonl";
inline constexpr const char* kDecoder = "decoder.json";
inline constexpr const char* kTrainingLog = "training_log.csv";
inline constexpr const char* kGoalSets = "goal_sets.json";
inline constexpr const char* kGoalSetsTable = "goal_sets.txt";
inline constexpr const char* kMetrics = "metrics.json";
inline constexpr const char* kHeatmapCsv = "heatmaps.csv";
inline constexpr const char* kHeatmapSvg = "heatmaps.svg";
inline constexpr const char* kEquivReport = "equiv_report.json";
inline constexpr const char* kEquivReportTable = "equiv_report.txt";
}  // namespace artifact

void run_plan(const RunConfig& cfg, const std::string& out_dir);
void run_train_transition(const RunConfig& cfg, const std::string& out_dir);
void run_gen_demos(const RunConfig& cfg, const std::string& out_dir);
void run_train_decoder(const RunConfig& cfg, const std::string& out_dir);
void run_decode_exact(const RunConfig& cfg, const std::string& out_dir);
/// Returns true when the evaluation clears the configured thresholds.
bool run_eval_decoder(const RunConfig& cfg, const std::string& out_dir);
void run_analyze_equiv(const RunConfig& cfg, const std::string& out_dir,
                       const std::optional<std::string>& instance_path);
bool run_all(const RunConfig& cfg, const std::string& out_dir);

}  // namespace commdecode
