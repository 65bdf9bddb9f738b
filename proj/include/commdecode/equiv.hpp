#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "commdecode/rng.hpp"

namespace commdecode::equiv {

struct MicroAgent {
  std::string name;
  int observations = 1;
  int env_actions = 1;
  int alphabet = 1;
};

/// Small finite cooperative environment with per-agent observations,
/// environment actions and message alphabets. Transitions are deterministic
/// and depend only on the environment actions; rewards are shared. Sized for
/// exhaustive joint-policy enumeration.
struct MicroDecPomdpComm {
  std::string name;
  int states = 1;
  int horizon = 1;
  std::vector<MicroAgent> agents;
  std::vector<std::vector<int>> obs;          // [state][agent] -> observation index
  std::vector<std::vector<int>> transition;   // [state][joint env action] -> state
  std::vector<std::vector<double>> reward;    // [state][joint env action] -> reward
  std::vector<int> initial_states;            // uniform initial distribution

  int joint_env_action_count() const;
  int joint_action_index(std::span<const int> per_agent_env) const;
  void validate() const;

  /// Total joint policy count; throws EnumerationCapExceeded above the cap.
  unsigned long long policy_space_size(unsigned long long cap) const;

  static MicroDecPomdpComm from_json_file(const std::string& path);
  static MicroDecPomdpComm from_json_text(const std::string& text);
  std::string to_json_text() const;

  /// The built-in demonstration instance: a 1x3 corridor with goals at both
  /// ends, a mute listener and a two-symbol speaker.
  static MicroDecPomdpComm line3_two_goals();
};

/// Deterministic memoryless policy for one agent, factored into environment
/// and communication parts (both maps over the agent's observations).
struct AgentPolicy {
  std::vector<int> env_action;  // per observation
  std::vector<int> message;     // per observation
};

struct FactoredJointPolicy {
  std::vector<AgentPolicy> agents;

  bool operator==(const FactoredJointPolicy&) const = default;
};

/// True iff the joint environment-action outputs agree on every joint
/// observation; communication outputs are ignored.
bool env_equiv(const FactoredJointPolicy& a, const FactoredJointPolicy& b);

/// True iff, for every agent, the per-observation message maps differ only
/// by a bijective relabelling of symbols. Requires env_equiv(a, b); refuses
/// otherwise, naming the first joint observation where they differ.
bool comm_equiv(const FactoredJointPolicy& a, const FactoredJointPolicy& b);

enum class Relation { Env, Comm };

/// Groups policies into equivalence classes (indices into the input).
/// The comm variant requires all inputs to share one env class.
std::vector<std::vector<std::size_t>> partition_classes(
    std::span<const FactoredJointPolicy> policies, Relation relation);

/// Exact expected undiscounted return over the uniform initial distribution.
double expected_return(const MicroDecPomdpComm& m, const FactoredJointPolicy& pi);

/// Enumerates every joint policy in index order.
std::vector<FactoredJointPolicy> enumerate_policies(const MicroDecPomdpComm& m,
                                                    unsigned long long cap = 1000000);

struct OptimalUnionReport {
  unsigned long long policy_count = 0;
  std::size_t optimal_count = 0;
  double optimal_return = 0.0;
  std::vector<std::size_t> env_class_sizes;          // optimal env classes
  std::vector<std::size_t> comm_classes_per_env_class;
  bool union_identity_holds = false;

  std::string to_json_text() const;
  std::string to_table_text() const;
};

/// Enumerates all joint policies, evaluates exact returns, computes the
/// optimal set, partitions it by env-equivalence and checks that the optimal
/// set equals the union of the full env classes of its members.
OptimalUnionReport verify_optimal_union(const MicroDecPomdpComm& m,
                                        unsigned long long cap = 1000000);

/// Uniformly random joint policy (used by relation property tests).
FactoredJointPolicy random_policy(const MicroDecPomdpComm& m, Rng& rng);

}  // namespace commdecode::equiv
