#pragma once

#include <cstdint>
#include <map>
#include <string>
#include <vector>

#include "commdecode/env.hpp"
#include "commdecode/exact_decoder.hpp"
#include "commdecode/planner.hpp"

namespace commdecode {

/// Injective map from goal cells to message symbols, fixed for an experiment.
struct MessageMapping {
  std::uint64_t seed = 0;
  std::map<Cell, int> map;  // goal cell -> symbol

  int symbol_for(const Cell& goal) const;

  void save_json(const std::string& path) const;
  static MessageMapping load_json(const std::string& path);
};

/// Uniformly random injection from goal cells into the message alphabet.
MessageMapping assign_messages(const GridConfig& config, std::uint64_t seed);

struct DemoProvenance {
  std::uint64_t seed = 0;
  std::uint64_t mapping_seed = 0;
  std::string policy_id;  // content hash of the q-table the demonstrator used
  double temperature = 0.0;
  std::size_t requested = 0;
  std::size_t discarded_non_terminating = 0;
};

struct DemoDataset {
  std::vector<Demonstration> demos;
  DemoProvenance meta;
};

/// Rolls out `count` demonstrator episodes: initial states from
/// sample_initial, message = mapping(goal), actions from sample_action at the
/// given temperature until termination or horizon. Episodes that hit the
/// horizon without terminating are discarded and regenerated so the returned
/// dataset holds exactly `count` demos.
DemoDataset generate_demos(const QTable& q, const MessageMapping& mapping,
                           std::size_t count, double temperature,
                           const GridConfig& config, std::uint64_t seed);

void save_demos_jsonl(const DemoDataset& data, const std::string& path);
std::vector<Demonstration> load_demos_jsonl(const std::string& path);

/// Content hash used as a policy checkpoint id in provenance metadata.
std::string qtable_content_id(const QTable& q);

}  // namespace commdecode
