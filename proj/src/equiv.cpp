#include "commdecode/equiv.hpp"

#include <algorithm>
#include <fstream>
#include <json.hpp>
#include <map>
#include <sstream>

#include "commdecode/errors.hpp"

namespace commdecode::equiv {

using nlohmann::json;

int MicroDecPomdpComm::joint_env_action_count() const {
  int n = 1;
  for (const MicroAgent& a : agents) n *= a.env_actions;
  return n;
}

int MicroDecPomdpComm::joint_action_index(std::span<const int> per_agent_env) const {
  int idx = 0;
  for (std::size_t i = 0; i < agents.size(); ++i)
    idx = idx * agents[i].env_actions + per_agent_env[i];
  return idx;
}

void MicroDecPomdpComm::validate() const {
  if (states < 1) throw DomainError("micro instance: need at least one state");
  if (horizon < 1) throw DomainError("micro instance: horizon must be >= 1");
  if (agents.empty()) throw DomainError("micro instance: need at least one agent");
  for (const MicroAgent& a : agents)
    if (a.observations < 1 || a.env_actions < 1 || a.alphabet < 1)
      throw DomainError("micro instance: agent '" + a.name + "' has empty sets");
  const int ja = joint_env_action_count();
  if (static_cast<int>(obs.size()) != states ||
      static_cast<int>(transition.size()) != states ||
      static_cast<int>(reward.size()) != states)
    throw DomainError("micro instance: table row count != states");
  for (int s = 0; s < states; ++s) {
    if (obs[static_cast<std::size_t>(s)].size() != agents.size())
      throw DomainError("micro instance: observation row width mismatch");
    for (std::size_t i = 0; i < agents.size(); ++i) {
      const int o = obs[static_cast<std::size_t>(s)][i];
      if (o < 0 || o >= agents[i].observations)
        throw DomainError("micro instance: observation index out of range");
    }
    if (static_cast<int>(transition[static_cast<std::size_t>(s)].size()) != ja ||
        static_cast<int>(reward[static_cast<std::size_t>(s)].size()) != ja)
      throw DomainError("micro instance: transition/reward row width mismatch");
    for (int t : transition[static_cast<std::size_t>(s)])
      if (t < 0 || t >= states)
        throw DomainError("micro instance: transition target out of range");
  }
  if (initial_states.empty())
    throw DomainError("micro instance: need at least one initial state");
  for (int s : initial_states)
    if (s < 0 || s >= states)
      throw DomainError("micro instance: initial state out of range");
}

unsigned long long MicroDecPomdpComm::policy_space_size(unsigned long long cap) const {
  long double exact = 1.0L;
  unsigned long long total = 1;
  bool over = false;
  for (const MicroAgent& a : agents) {
    const unsigned long long per_obs =
        static_cast<unsigned long long>(a.env_actions) *
        static_cast<unsigned long long>(a.alphabet);
    for (int o = 0; o < a.observations; ++o) {
      exact *= static_cast<long double>(per_obs);
      if (!over && total > cap / per_obs) over = true;
      if (!over) total *= per_obs;
    }
  }
  if (over || total > cap) {
    const unsigned long long reported =
        over ? static_cast<unsigned long long>(
                   std::min<long double>(exact, 1e18L))
             : total;
    throw EnumerationCapExceeded(reported, cap);
  }
  return total;
}

bool env_equiv(const FactoredJointPolicy& a, const FactoredJointPolicy& b) {
  if (a.agents.size() != b.agents.size())
    throw DomainError("env_equiv: policies have different agent counts");
  for (std::size_t i = 0; i < a.agents.size(); ++i) {
    if (a.agents[i].env_action.size() != b.agents[i].env_action.size())
      throw DomainError("env_equiv: observation domains differ for agent " +
                        std::to_string(i));
    if (a.agents[i].env_action != b.agents[i].env_action) return false;
  }
  return true;
}

bool comm_equiv(const FactoredJointPolicy& a, const FactoredJointPolicy& b) {
  if (a.agents.size() != b.agents.size())
    throw DomainError("comm_equiv: policies have different agent counts");
  for (std::size_t i = 0; i < a.agents.size(); ++i) {
    if (a.agents[i].env_action.size() != b.agents[i].env_action.size())
      throw DomainError("comm_equiv: observation domains differ for agent " +
                        std::to_string(i));
    for (std::size_t o = 0; o < a.agents[i].env_action.size(); ++o)
      if (a.agents[i].env_action[o] != b.agents[i].env_action[o])
        throw UsageError("comm_equiv: precondition violated, policies are not "
                         "environment-level equivalent at agent " +
                         std::to_string(i) + " observation " + std::to_string(o));
  }
  // For each agent, the relation {(msg_b(o), msg_a(o))} must be a function
  // and injective: exactly when a bijective relabelling exists.
  for (std::size_t i = 0; i < a.agents.size(); ++i) {
    std::map<int, int> forward;   // b symbol -> a symbol
    std::map<int, int> backward;  // a symbol -> b symbol
    for (std::size_t o = 0; o < a.agents[i].message.size(); ++o) {
      const int ma = a.agents[i].message[o];
      const int mb = b.agents[i].message[o];
      const auto [fit, finserted] = forward.emplace(mb, ma);
      if (!finserted && fit->second != ma) return false;  // not a function
      const auto [bit, binserted] = backward.emplace(ma, mb);
      if (!binserted && bit->second != mb) return false;  // not injective
    }
  }
  return true;
}

namespace {

std::vector<int> canonical_comm_signature(const FactoredJointPolicy& p) {
  // relabel each agent's symbols by first appearance over observation order
  std::vector<int> sig;
  for (const AgentPolicy& a : p.agents) {
    std::map<int, int> relabel;
    for (int m : a.message) {
      const auto [it, inserted] = relabel.emplace(m, static_cast<int>(relabel.size()));
      sig.push_back(it->second);
      (void)inserted;
    }
    sig.push_back(-1);  // agent separator
  }
  return sig;
}

}  // namespace

std::vector<std::vector<std::size_t>> partition_classes(
    std::span<const FactoredJointPolicy> policies, Relation relation) {
  std::vector<std::vector<std::size_t>> classes;
  if (policies.empty()) return classes;

  if (relation == Relation::Comm) {
    for (std::size_t i = 1; i < policies.size(); ++i)
      if (!env_equiv(policies[0], policies[i]))
        throw UsageError("partition_classes: comm partition requested across "
                         "differing environment classes");
  }

  std::map<std::vector<int>, std::size_t> index;
  for (std::size_t i = 0; i < policies.size(); ++i) {
    std::vector<int> key;
    if (relation == Relation::Env) {
      for (const AgentPolicy& a : policies[i].agents) {
        key.insert(key.end(), a.env_action.begin(), a.env_action.end());
        key.push_back(-1);
      }
    } else {
      key = canonical_comm_signature(policies[i]);
    }
    const auto [it, inserted] = index.emplace(std::move(key), classes.size());
    if (inserted) classes.emplace_back();
    classes[it->second].push_back(i);
  }
  return classes;
}

double expected_return(const MicroDecPomdpComm& m, const FactoredJointPolicy& pi) {
  if (pi.agents.size() != m.agents.size())
    throw DomainError("expected_return: policy/instance agent count mismatch");
  double total = 0.0;
  std::vector<int> env_choice(m.agents.size());
  for (int s0 : m.initial_states) {
    int s = s0;
    double ret = 0.0;
    for (int t = 0; t < m.horizon; ++t) {
      for (std::size_t i = 0; i < m.agents.size(); ++i) {
        const int o = m.obs[static_cast<std::size_t>(s)][i];
        env_choice[i] = pi.agents[i].env_action[static_cast<std::size_t>(o)];
      }
      const int ja = m.joint_action_index(env_choice);
      ret += m.reward[static_cast<std::size_t>(s)][static_cast<std::size_t>(ja)];
      s = m.transition[static_cast<std::size_t>(s)][static_cast<std::size_t>(ja)];
    }
    total += ret;
  }
  return total / static_cast<double>(m.initial_states.size());
}

std::vector<FactoredJointPolicy> enumerate_policies(const MicroDecPomdpComm& m,
                                                    unsigned long long cap) {
  m.validate();
  const unsigned long long total = m.policy_space_size(cap);
  std::vector<FactoredJointPolicy> out;
  out.reserve(static_cast<std::size_t>(total));

  FactoredJointPolicy current;
  current.agents.resize(m.agents.size());
  for (std::size_t i = 0; i < m.agents.size(); ++i) {
    current.agents[i].env_action.assign(
        static_cast<std::size_t>(m.agents[i].observations), 0);
    current.agents[i].message.assign(
        static_cast<std::size_t>(m.agents[i].observations), 0);
  }

  // odometer over all (env action, message) choices per (agent, observation)
  while (true) {
    out.push_back(current);
    std::size_t agent = 0;
    int obs_i = 0;
    bool carried = true;
    while (carried) {
      if (agent >= m.agents.size()) return out;
      AgentPolicy& ap = current.agents[agent];
      auto& e = ap.env_action[static_cast<std::size_t>(obs_i)];
      auto& msg = ap.message[static_cast<std::size_t>(obs_i)];
      if (msg + 1 < m.agents[agent].alphabet) {
        ++msg;
        carried = false;
      } else if (e + 1 < m.agents[agent].env_actions) {
        msg = 0;
        ++e;
        carried = false;
      } else {
        msg = 0;
        e = 0;
        if (++obs_i >= m.agents[agent].observations) {
          obs_i = 0;
          ++agent;
        }
      }
    }
  }
}

OptimalUnionReport verify_optimal_union(const MicroDecPomdpComm& m,
                                        unsigned long long cap) {
  const auto policies = enumerate_policies(m, cap);

  OptimalUnionReport report;
  report.policy_count = policies.size();

  std::vector<double> returns(policies.size());
  double best = -1e300;
  for (std::size_t i = 0; i < policies.size(); ++i) {
    returns[i] = expected_return(m, policies[i]);
    best = std::max(best, returns[i]);
  }
  report.optimal_return = best;

  constexpr double kTol = 1e-9;
  std::vector<std::size_t> optimal;
  std::vector<FactoredJointPolicy> optimal_policies;
  for (std::size_t i = 0; i < policies.size(); ++i)
    if (returns[i] >= best - kTol) {
      optimal.push_back(i);
      optimal_policies.push_back(policies[i]);
    }
  report.optimal_count = optimal.size();

  // partition the optimal set by env-equivalence
  const auto opt_classes = partition_classes(optimal_policies, Relation::Env);
  for (const auto& cls : opt_classes) report.env_class_sizes.push_back(cls.size());

  // the theorem: the full env class of any optimal policy lies inside the
  // optimal set, i.e. the optimal set is a union of whole classes
  bool holds = true;
  for (const auto& cls : opt_classes) {
    const FactoredJointPolicy& representative = optimal_policies[cls[0]];
    std::size_t full_class_size = 0;
    std::size_t optimal_class_size = 0;
    for (std::size_t i = 0; i < policies.size(); ++i) {
      if (!env_equiv(policies[i], representative)) continue;
      ++full_class_size;
      if (returns[i] >= best - kTol) ++optimal_class_size;
    }
    if (full_class_size != optimal_class_size) holds = false;
    if (full_class_size != cls.size()) holds = false;
  }
  report.union_identity_holds = holds;

  // comm classes within each optimal env class
  for (const auto& cls : opt_classes) {
    std::vector<FactoredJointPolicy> members;
    for (std::size_t k : cls) members.push_back(optimal_policies[k]);
    report.comm_classes_per_env_class.push_back(
        partition_classes(members, Relation::Comm).size());
  }
  return report;
}

FactoredJointPolicy random_policy(const MicroDecPomdpComm& m, Rng& rng) {
  FactoredJointPolicy p;
  p.agents.resize(m.agents.size());
  for (std::size_t i = 0; i < m.agents.size(); ++i) {
    for (int o = 0; o < m.agents[i].observations; ++o) {
      p.agents[i].env_action.push_back(static_cast<int>(
          rng.uniform_below(static_cast<std::uint64_t>(m.agents[i].env_actions))));
      p.agents[i].message.push_back(static_cast<int>(
          rng.uniform_below(static_cast<std::uint64_t>(m.agents[i].alphabet))));
    }
  }
  return p;
}

MicroDecPomdpComm MicroDecPomdpComm::from_json_text(const std::string& text) {
  json j = json::parse(text);
  MicroDecPomdpComm m;
  m.name = j.value("name", "");
  m.states = j.at("states").get<int>();
  m.horizon = j.at("horizon").get<int>();
  for (const auto& a : j.at("agents")) {
    MicroAgent agent;
    agent.name = a.value("name", "");
    agent.observations = a.at("observations").get<int>();
    agent.env_actions = a.at("env_actions").get<int>();
    agent.alphabet = a.at("alphabet").get<int>();
    m.agents.push_back(agent);
  }
  m.obs = j.at("observation").get<std::vector<std::vector<int>>>();
  m.transition = j.at("transition").get<std::vector<std::vector<int>>>();
  m.reward = j.at("reward").get<std::vector<std::vector<double>>>();
  if (j.contains("initial_states"))
    m.initial_states = j.at("initial_states").get<std::vector<int>>();
  else
    for (int s = 0; s < m.states; ++s) m.initial_states.push_back(s);
  m.validate();
  return m;
}

MicroDecPomdpComm MicroDecPomdpComm::from_json_file(const std::string& path) {
  std::ifstream f(path);
  if (!f) throw MissingArtifact(path);
  std::stringstream ss;
  ss << f.rdbuf();
  return from_json_text(ss.str());
}

std::string MicroDecPomdpComm::to_json_text() const {
  json j;
  j["name"] = name;
  j["states"] = states;
  j["horizon"] = horizon;
  json agents_j = json::array();
  for (const MicroAgent& a : agents)
    agents_j.push_back({{"name", a.name},
                        {"observations", a.observations},
                        {"env_actions", a.env_actions},
                        {"alphabet", a.alphabet}});
  j["agents"] = agents_j;
  j["observation"] = obs;
  j["transition"] = transition;
  j["reward"] = reward;
  j["initial_states"] = initial_states;
  return j.dump(2);
}

MicroDecPomdpComm MicroDecPomdpComm::line3_two_goals() {
  // Cells 0,1,2 on a line; goals at cell 0 and cell 2. State = (pos, goal):
  // index = goal_id * 3 + pos, goal_id 0 -> cell 0, goal_id 1 -> cell 2.
  // The speaker observes the goal and only communicates; the listener
  // observes its own position, moves left/right and is mute (1 symbol).
  // Reaching the goal is absorbing with zero further reward.
  MicroDecPomdpComm m;
  m.name = "line3-two-goals";
  m.states = 6;
  m.horizon = 2;
  m.agents = {MicroAgent{"speaker", 2, 1, 2}, MicroAgent{"listener", 3, 2, 1}};
  const auto goal_cell = [](int goal_id) { return goal_id == 0 ? 0 : 2; };
  for (int g = 0; g < 2; ++g)
    for (int pos = 0; pos < 3; ++pos) {
      m.obs.push_back({g, pos});
      std::vector<int> trans;
      std::vector<double> rew;
      // joint env actions: speaker noop x listener {left, right}
      for (int dir = 0; dir < 2; ++dir) {
        if (pos == goal_cell(g)) {
          trans.push_back(g * 3 + pos);  // absorbing
          rew.push_back(0.0);
        } else {
          const int moved = std::clamp(pos + (dir == 0 ? -1 : 1), 0, 2);
          trans.push_back(g * 3 + moved);
          rew.push_back(moved == goal_cell(g) ? 1.0 : -1.0);
        }
      }
      m.transition.push_back(std::move(trans));
      m.reward.push_back(std::move(rew));
    }
  for (int g = 0; g < 2; ++g)
    for (int pos = 0; pos < 3; ++pos)
      if (pos != goal_cell(g)) m.initial_states.push_back(g * 3 + pos);
  m.validate();
  return m;
}

std::string OptimalUnionReport::to_json_text() const {
  json j;
  j["policy_count"] = policy_count;
  j["optimal_count"] = optimal_count;
  j["optimal_return"] = optimal_return;
  j["env_class_sizes"] = env_class_sizes;
  j["comm_classes_per_env_class"] = comm_classes_per_env_class;
  j["union_identity_holds"] = union_identity_holds;
  return j.dump(2);
}

std::string OptimalUnionReport::to_table_text() const {
  std::ostringstream ss;
  ss << "joint policies enumerated : " << policy_count << '\n'
     << "optimal policies          : " << optimal_count << '\n'
     << "optimal expected return   : " << optimal_return << '\n'
     << "optimal env classes       : " << env_class_sizes.size() << '\n';
  for (std::size_t i = 0; i < env_class_sizes.size(); ++i)
    ss << "  class " << i << ": " << env_class_sizes[i] << " policies, "
       << comm_classes_per_env_class[i] << " comm classes\n";
  ss << "optimal set == union of env classes : "
     << (union_identity_holds ? "yes" : "NO") << '\n';
  return ss.str();
}

}  // namespace commdecode::equiv
