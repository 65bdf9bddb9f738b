#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <algorithm>
#include <map>
#include <set>

#include "commdecode/equiv.hpp"
#include "commdecode/errors.hpp"

using namespace commdecode;
using namespace commdecode::equiv;

namespace {

// O(n^2) pairwise-comparison oracle for class partitioning
std::vector<std::vector<std::size_t>> pairwise_partition(
    std::span<const FactoredJointPolicy> policies, Relation rel) {
  std::vector<std::vector<std::size_t>> classes;
  std::vector<bool> assigned(policies.size(), false);
  for (std::size_t i = 0; i < policies.size(); ++i) {
    if (assigned[i]) continue;
    std::vector<std::size_t> cls = {i};
    assigned[i] = true;
    for (std::size_t k = i + 1; k < policies.size(); ++k) {
      if (assigned[k]) continue;
      const bool related = rel == Relation::Env ? env_equiv(policies[i], policies[k])
                                                : comm_equiv(policies[i], policies[k]);
      if (related) {
        cls.push_back(k);
        assigned[k] = true;
      }
    }
    classes.push_back(std::move(cls));
  }
  return classes;
}

// independent return evaluator: backward induction over time instead of
// forward simulation
double dp_expected_return(const MicroDecPomdpComm& m, const FactoredJointPolicy& pi) {
  std::vector<double> value(static_cast<std::size_t>(m.states), 0.0);
  for (int t = m.horizon; t-- > 0;) {
    std::vector<double> next(static_cast<std::size_t>(m.states), 0.0);
    for (int s = 0; s < m.states; ++s) {
      std::vector<int> choice(m.agents.size());
      for (std::size_t i = 0; i < m.agents.size(); ++i)
        choice[i] = pi.agents[i].env_action[static_cast<std::size_t>(
            m.obs[static_cast<std::size_t>(s)][i])];
      const int ja = m.joint_action_index(choice);
      next[static_cast<std::size_t>(s)] =
          m.reward[static_cast<std::size_t>(s)][static_cast<std::size_t>(ja)] +
          value[static_cast<std::size_t>(
              m.transition[static_cast<std::size_t>(s)][static_cast<std::size_t>(ja)])];
    }
    value = next;
  }
  double total = 0.0;
  for (int s0 : m.initial_states) total += value[static_cast<std::size_t>(s0)];
  return total / static_cast<double>(m.initial_states.size());
}

FactoredJointPolicy relabel_messages(const FactoredJointPolicy& p,
                                     const std::vector<std::vector<int>>& perms) {
  FactoredJointPolicy out = p;
  for (std::size_t i = 0; i < p.agents.size(); ++i)
    for (std::size_t o = 0; o < p.agents[i].message.size(); ++o)
      out.agents[i].message[o] =
          perms[i][static_cast<std::size_t>(p.agents[i].message[o])];
  return out;
}

}  // namespace

TEST_CASE("env_equiv basics") {
  const MicroDecPomdpComm m = MicroDecPomdpComm::line3_two_goals();
  Rng rng(1);
  const FactoredJointPolicy a = random_policy(m, rng);

  CHECK(env_equiv(a, a));  // reflexive

  FactoredJointPolicy relabeled = a;
  relabeled.agents[0].message[0] = 1 - relabeled.agents[0].message[0];
  CHECK(env_equiv(a, relabeled));  // messages are ignored

  FactoredJointPolicy different = a;
  different.agents[1].env_action[1] = 1 - different.agents[1].env_action[1];
  CHECK(!env_equiv(a, different));
}

TEST_CASE("env_equiv rejects mismatched observation domains") {
  const MicroDecPomdpComm m = MicroDecPomdpComm::line3_two_goals();
  Rng rng(2);
  FactoredJointPolicy a = random_policy(m, rng);
  FactoredJointPolicy b = a;
  b.agents[1].env_action.push_back(0);
  CHECK_THROWS_AS(env_equiv(a, b), DomainError);
}

TEST_CASE("comm_equiv accepts bijective relabellings") {
  const MicroDecPomdpComm m = MicroDecPomdpComm::line3_two_goals();
  Rng rng(3);
  const FactoredJointPolicy a = random_policy(m, rng);
  const FactoredJointPolicy b = relabel_messages(a, {{1, 0}, {0}});
  CHECK(comm_equiv(a, b));
  CHECK(comm_equiv(b, a));
}

TEST_CASE("comm_equiv refuses env-inequivalent pairs, naming the spot") {
  const MicroDecPomdpComm m = MicroDecPomdpComm::line3_two_goals();
  Rng rng(4);
  FactoredJointPolicy a = random_policy(m, rng);
  FactoredJointPolicy b = a;
  b.agents[1].env_action[2] = 1 - b.agents[1].env_action[2];
  try {
    comm_equiv(a, b);
    FAIL("expected UsageError");
  } catch (const UsageError& e) {
    const std::string what = e.what();
    CHECK(what.find("agent 1") != std::string::npos);
    CHECK(what.find("observation 2") != std::string::npos);
  }
}

TEST_CASE("direction-naming vs goal-naming protocols are not comm-equivalent") {
  // speaker observes 25 goals; protocol A reuses 4 symbols (first-move
  // direction style), protocol B names each goal with its own symbol
  MicroDecPomdpComm m;
  m.name = "protocol-gap";
  m.states = 25;
  m.horizon = 1;
  m.agents = {MicroAgent{"speaker", 25, 1, 25}};
  for (int s = 0; s < 25; ++s) {
    m.obs.push_back({s});
    m.transition.push_back({s});
    m.reward.push_back({0.0});
  }
  m.initial_states = {0};
  m.validate();

  FactoredJointPolicy four_symbol, per_goal;
  four_symbol.agents.resize(1);
  per_goal.agents.resize(1);
  for (int o = 0; o < 25; ++o) {
    four_symbol.agents[0].env_action.push_back(0);
    per_goal.agents[0].env_action.push_back(0);
    four_symbol.agents[0].message.push_back(o % 4);  // 4 distinct symbols
    per_goal.agents[0].message.push_back(o);         // 25 distinct symbols
  }
  CHECK(env_equiv(four_symbol, per_goal));
  CHECK(!comm_equiv(four_symbol, per_goal));
  CHECK(!comm_equiv(per_goal, four_symbol));
}

TEST_CASE("merging two observations onto one symbol breaks equivalence") {
  MicroDecPomdpComm m;
  m.name = "two-obs";
  m.states = 2;
  m.horizon = 1;
  m.agents = {MicroAgent{"a", 2, 1, 2}};
  m.obs = {{0}, {1}};
  m.transition = {{0}, {1}};
  m.reward = {{0.0}, {0.0}};
  m.initial_states = {0, 1};
  m.validate();

  FactoredJointPolicy merged, split;
  merged.agents.resize(1);
  split.agents.resize(1);
  merged.agents[0].env_action = {0, 0};
  split.agents[0].env_action = {0, 0};
  merged.agents[0].message = {0, 0};
  split.agents[0].message = {0, 1};
  CHECK(!comm_equiv(merged, split));  // relation is not a function
  CHECK(!comm_equiv(split, merged));  // relation is not injective
}

TEST_CASE("comm equivalence is reflexive, symmetric and transitive (persistence over random pairs)") {
  const MicroDecPomdpComm m = MicroDecPomdpComm::line3_two_goals();
  Rng rng(5);
  int related_pairs = 0;
  for (int trial = 0; trial < 3000; ++trial) {
    FactoredJointPolicy a = random_policy(m, rng);
    CHECK(env_equiv(a, a));
    CHECK(comm_equiv(a, a));

    // construct b and c within a's env class
    FactoredJointPolicy b = random_policy(m, rng);
    FactoredJointPolicy c = random_policy(m, rng);
    for (std::size_t i = 0; i < a.agents.size(); ++i) {
      b.agents[i].env_action = a.agents[i].env_action;
      c.agents[i].env_action = a.agents[i].env_action;
    }
    CHECK(env_equiv(a, b));
    CHECK(env_equiv(a, c));

    const bool ab = comm_equiv(a, b);
    CHECK(comm_equiv(b, a) == ab);  // symmetric
    const bool bc = comm_equiv(b, c);
    const bool ac = comm_equiv(a, c);
    if (ab && bc) {
      CHECK(ac);  // transitive
      ++related_pairs;
    }
  }
  CHECK(related_pairs > 0);  // the triple case actually occurred
}

TEST_CASE("partition_classes basics") {
  const MicroDecPomdpComm m = MicroDecPomdpComm::line3_two_goals();
  Rng rng(6);

  SUBCASE("singleton input") {
    const std::vector<FactoredJointPolicy> one = {random_policy(m, rng)};
    const auto classes = partition_classes(one, Relation::Env);
    REQUIRE(classes.size() == 1);
    CHECK(classes[0] == std::vector<std::size_t>{0});
  }

  SUBCASE("message relabellings collapse into one comm class") {
    const FactoredJointPolicy base = random_policy(m, rng);
    std::vector<FactoredJointPolicy> all = {base,
                                            relabel_messages(base, {{1, 0}, {0}})};
    const auto classes = partition_classes(all, Relation::Comm);
    CHECK(classes.size() == 1);
  }

  SUBCASE("comm partition across env classes is refused") {
    FactoredJointPolicy a = random_policy(m, rng);
    FactoredJointPolicy b = a;
    b.agents[1].env_action[0] = 1 - b.agents[1].env_action[0];
    const std::vector<FactoredJointPolicy> mixed = {a, b};
    CHECK_THROWS_AS(partition_classes(mixed, Relation::Comm), UsageError);
  }
}

TEST_CASE("partition matches the pairwise oracle on the full 1x3 policy space") {
  const MicroDecPomdpComm m = MicroDecPomdpComm::line3_two_goals();
  const auto policies = enumerate_policies(m);
  REQUIRE(policies.size() == 32);  // (1*2)^2 speaker maps x (2*1)^3 listener maps

  const auto fast = partition_classes(policies, Relation::Env);
  const auto slow = pairwise_partition(policies, Relation::Env);
  REQUIRE(fast.size() == slow.size());

  const auto sizes = [](const std::vector<std::vector<std::size_t>>& cs) {
    std::multiset<std::size_t> out;
    for (const auto& c : cs) out.insert(c.size());
    return out;
  };
  CHECK(sizes(fast) == sizes(slow));

  // comm classes inside one env class, again against the oracle
  std::vector<FactoredJointPolicy> one_class;
  for (std::size_t i : fast[0]) one_class.push_back(policies[i]);
  const auto fast_comm = partition_classes(one_class, Relation::Comm);
  const auto slow_comm = pairwise_partition(one_class, Relation::Comm);
  CHECK(sizes(fast_comm) == sizes(slow_comm));
}

TEST_CASE("partition output is invariant under input ordering") {
  const MicroDecPomdpComm m = MicroDecPomdpComm::line3_two_goals();
  auto policies = enumerate_policies(m);
  const auto sizes_of = [&](std::span<const FactoredJointPolicy> ps) {
    std::multiset<std::size_t> out;
    for (const auto& c : partition_classes(ps, Relation::Env)) out.insert(c.size());
    return out;
  };
  const auto before = sizes_of(policies);
  std::reverse(policies.begin(), policies.end());
  CHECK(sizes_of(policies) == before);
}

TEST_CASE("every comm class is a union of relabelling orbits") {
  const MicroDecPomdpComm m = MicroDecPomdpComm::line3_two_goals();
  Rng rng(7);
  for (int trial = 0; trial < 200; ++trial) {
    const FactoredJointPolicy a = random_policy(m, rng);
    for (const auto& perm :
         {std::vector<std::vector<int>>{{0, 1}, {0}}, {{1, 0}, {0}}})
      CHECK(comm_equiv(a, relabel_messages(a, perm)));
  }
}

TEST_CASE("verify_optimal_union on the 1x3 corridor") {
  const MicroDecPomdpComm m = MicroDecPomdpComm::line3_two_goals();
  const OptimalUnionReport r = verify_optimal_union(m);

  CHECK(r.policy_count == 32);
  CHECK(r.union_identity_holds);

  // independent return computation: optimal return and |optimal set| by
  // dynamic programming over all policies
  const auto policies = enumerate_policies(m);
  double best = -1e300;
  for (const auto& p : policies) best = std::max(best, dp_expected_return(m, p));
  std::size_t optimal = 0;
  for (const auto& p : policies)
    if (dp_expected_return(m, p) >= best - 1e-9) ++optimal;

  CHECK(r.optimal_return == doctest::Approx(best));
  CHECK(r.optimal_count == optimal);
  // four optimal listener maps (the cell away from the committed direction
  // is return-irrelevant), each times 4 free speaker comm maps
  CHECK(r.optimal_count == 16);
  CHECK(r.env_class_sizes.size() == 4);
  for (std::size_t s : r.env_class_sizes) CHECK(s == 4);
  for (std::size_t c : r.comm_classes_per_env_class) CHECK(c == 2);
}

TEST_CASE("a degenerate single-state instance makes every policy optimal") {
  MicroDecPomdpComm m;
  m.name = "degenerate";
  m.states = 1;
  m.horizon = 3;
  m.agents = {MicroAgent{"solo", 1, 1, 4}};  // one (zero-reward) action, free messages
  m.obs = {{0}};
  m.transition = {{0}};
  m.reward = {{0.0}};
  m.initial_states = {0};
  m.validate();

  const OptimalUnionReport r = verify_optimal_union(m);
  CHECK(r.policy_count == 4);
  CHECK(r.optimal_count == 4);
  CHECK(r.union_identity_holds);
  CHECK(r.env_class_sizes.size() == 1);  // a single class holds everything
  CHECK(r.env_class_sizes[0] == 4);
}

TEST_CASE("the enumeration cap is enforced with the computed cardinality") {
  MicroDecPomdpComm m;
  m.name = "huge";
  m.states = 1;
  m.horizon = 1;
  m.agents = {MicroAgent{"wide", 8, 4, 4}};  // 16^8 = 4.3e9 policies
  m.obs = {{0}};
  std::vector<int> trans(4, 0);
  std::vector<double> rew(4, 0.0);
  m.transition = {trans};
  m.reward = {rew};
  m.initial_states = {0};
  // validate() untouched: the observation indices referenced by obs are in
  // range even though the agent declares more observations than states use
  try {
    verify_optimal_union(m, 1000000);
    FAIL("expected EnumerationCapExceeded");
  } catch (const EnumerationCapExceeded& e) {
    CHECK(e.cardinality() == 4294967296ULL);
  }
}

TEST_CASE("micro-instance JSON round-trips") {
  const MicroDecPomdpComm m = MicroDecPomdpComm::line3_two_goals();
  const MicroDecPomdpComm loaded = MicroDecPomdpComm::from_json_text(m.to_json_text());
  CHECK(loaded.states == m.states);
  CHECK(loaded.horizon == m.horizon);
  CHECK(loaded.obs == m.obs);
  CHECK(loaded.transition == m.transition);
  CHECK(loaded.reward == m.reward);
  CHECK(loaded.initial_states == m.initial_states);
  const OptimalUnionReport a = verify_optimal_union(m);
  const OptimalUnionReport b = verify_optimal_union(loaded);
  CHECK(a.optimal_count == b.optimal_count);
}
