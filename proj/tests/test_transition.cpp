#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <algorithm>
#include <filesystem>
#include <set>

#include "commdecode/checkpoint.hpp"
#include "commdecode/errors.hpp"
#include "commdecode/planner.hpp"
#include "commdecode/transition.hpp"

using namespace commdecode;

namespace {

TransitionModel untrained_model(const GridConfig& c, std::uint64_t seed) {
  TransitionModel m;
  m.config = c;
  Rng rng(seed);
  const std::array<int, 4> factor_width = {c.width, c.height, c.width, c.height};
  for (std::size_t f = 0; f < 4; ++f) {
    const std::array<int, 4> widths = {c.feature_size() + 4, 64, 64, factor_width[f]};
    m.heads[f] = nn::make_mlp(m.params, "head" + std::to_string(f), widths, rng);
  }
  return m;
}

// all (listener cell, action) pairs with the action greedy for some goal
std::set<std::pair<std::pair<int, int>, int>> reachable_cell_action_pairs(
    const QTable& q, const GridConfig& c) {
  std::set<std::pair<std::pair<int, int>, int>> out;
  for (int lx = 0; lx < c.width; ++lx)
    for (int ly = 0; ly < c.height; ++ly)
      for (int gx = 0; gx < c.width; ++gx)
        for (int gy = 0; gy < c.height; ++gy) {
          const State s{{lx, ly}, {gx, gy}};
          if (s.listener == s.goal) continue;
          for (Action a : greedy_action_set(q, s))
            out.insert({{lx, ly}, static_cast<int>(a)});
        }
  return out;
}

}  // namespace

TEST_CASE("generated transitions are faithful to the environment") {
  const GridConfig c;
  const QTable q = value_iteration(c);
  const auto data = generate_transitions(q, c, 5000, 77);
  REQUIRE(data.size() == 5000);

  for (const TransitionSample& s : data) {
    const State from = decode_state_features(s.state_features, c);
    // goal factors never move
    CHECK(s.next_factors[0] == from.goal.x);
    CHECK(s.next_factors[1] == from.goal.y);
    // replay through env.step reproduces the recorded next state
    const StepOutcome o = step(from, static_cast<Action>(s.action), c);
    CHECK(s.next_factors[2] == o.next_state.listener.x);
    CHECK(s.next_factors[3] == o.next_state.listener.y);
    // the demonstrator only emits greedy actions
    const auto greedy = greedy_action_set(q, from);
    CHECK(std::find(greedy.begin(), greedy.end(), static_cast<Action>(s.action)) !=
          greedy.end());
  }
}

TEST_CASE("10k samples cover every reachable (listener-cell, action) pair") {
  const GridConfig c;
  const QTable q = value_iteration(c);
  const auto target = reachable_cell_action_pairs(q, c);
  CHECK(target.size() == 80);  // in-grid moves: 4 corners*2 + 12 edges*3 + 9 interior*4

  const auto data = generate_transitions(q, c, 10000, 123);
  std::set<std::pair<std::pair<int, int>, int>> seen;
  for (const TransitionSample& s : data) {
    const State from = decode_state_features(s.state_features, c);
    seen.insert({{from.listener.x, from.listener.y}, s.action});
  }
  CHECK(seen == target);
}

TEST_CASE("generation is deterministic per seed") {
  const GridConfig c;
  const QTable q = value_iteration(c);
  const auto a = generate_transitions(q, c, 300, 5);
  const auto b = generate_transitions(q, c, 300, 5);
  REQUIRE(a.size() == b.size());
  for (std::size_t i = 0; i < a.size(); ++i) {
    CHECK(a[i].state_features == b[i].state_features);
    CHECK(a[i].action == b[i].action);
    CHECK(a[i].next_factors == b[i].next_factors);
  }
}

TEST_CASE("an untrained model predicts at chance level") {
  const GridConfig c;
  const QTable q = value_iteration(c);
  const auto data = generate_transitions(q, c, 2000, 9);
  const TransitionModel model = untrained_model(c, 10);

  std::size_t full_match = 0;
  for (const TransitionSample& s : data) {
    const State pred = model.predict(s.state_features, s.action);
    if (pred.goal.x == s.next_factors[0] && pred.goal.y == s.next_factors[1] &&
        pred.listener.x == s.next_factors[2] && pred.listener.y == s.next_factors[3])
      ++full_match;
  }
  CHECK(static_cast<double>(full_match) / 2000.0 < 0.2);
}

TEST_CASE("untrained recursive rollouts fall apart") {
  const GridConfig c;
  const QTable q = value_iteration(c);
  const TransitionModel model = untrained_model(c, 11);
  CHECK(rollout_accuracy(model, q, c, 500, 12) < 0.1);
}

TEST_CASE("training reaches numerically zero loss and perfect accuracy on 3x3") {
  const GridConfig c = GridConfig::make(3, 3);
  const QTable q = value_iteration(c);
  const auto data = generate_transitions(q, c, 8000, 20);

  TransitionTrainConfig cfg;
  cfg.steps = 1000;
  cfg.batch = 256;
  Rng rng(21);
  const auto result = train_transition(data, c, cfg, rng);

  CHECK(result.first_step_below_1e3 >= 0);
  CHECK(result.first_step_below_1e3 < 1000);

  // held-out single-step predictions: exhaustive over every greedy pair
  for (int lx = 0; lx < 3; ++lx)
    for (int ly = 0; ly < 3; ++ly)
      for (int gx = 0; gx < 3; ++gx)
        for (int gy = 0; gy < 3; ++gy) {
          const State s{{lx, ly}, {gx, gy}};
          if (s.listener == s.goal) continue;
          for (Action a : greedy_action_set(q, s)) {
            const StepOutcome o = step(s, a, c);
            const State pred = result.model.predict(encode_state_features(s, c),
                                                    static_cast<int>(a));
            CHECK(pred == o.next_state);
          }
        }

  CHECK(rollout_accuracy(result.model, q, c, 1000, 22) == 1.0);

  // converged goal factors argmax-decode to the input goal
  for (const TransitionSample& s : data) {
    const State pred = result.model.predict(s.state_features, s.action);
    const State from = decode_state_features(s.state_features, c);
    CHECK(pred.goal == from.goal);
  }
}

TEST_CASE("training is seed-deterministic") {
  const GridConfig c = GridConfig::make(3, 3);
  const QTable q = value_iteration(c);
  const auto data = generate_transitions(q, c, 2000, 30);
  TransitionTrainConfig cfg;
  cfg.steps = 60;
  cfg.batch = 128;
  Rng r1(31), r2(31);
  const auto a = train_transition(data, c, cfg, r1);
  const auto b = train_transition(data, c, cfg, r2);
  CHECK(a.loss_curve == b.loss_curve);
  for (std::size_t i = 0; i < a.model.params.count(); ++i)
    CHECK(a.model.params.at(static_cast<int>(i)).v ==
          b.model.params.at(static_cast<int>(i)).v);
}

TEST_CASE("a model trained on one goal does not transfer to the opposite corner") {
  const GridConfig c = GridConfig::make(3, 3);
  const QTable q = value_iteration(c);
  auto data = generate_transitions(q, c, 20000, 40);
  std::erase_if(data, [](const TransitionSample& s) {
    return !(s.next_factors[0] == 0 && s.next_factors[1] == 0);
  });
  REQUIRE(data.size() > 500);

  TransitionTrainConfig cfg;
  cfg.steps = 600;
  cfg.batch = 256;
  Rng rng(41);
  const auto result = train_transition(data, c, cfg, rng);

  // on-distribution: goal (0,0) transitions are learned
  std::size_t shifted_misses = 0, on_dist_misses = 0;
  for (int lx = 0; lx < 3; ++lx)
    for (int ly = 0; ly < 3; ++ly) {
      const State on{{lx, ly}, {0, 0}};
      if (on.listener != on.goal)
        for (Action a : greedy_action_set(q, on))
          if (result.model.predict(encode_state_features(on, c),
                                   static_cast<int>(a)) != step(on, a, c).next_state)
            ++on_dist_misses;
      const State off{{lx, ly}, {2, 2}};
      if (off.listener != off.goal)
        for (Action a : greedy_action_set(q, off))
          if (result.model.predict(encode_state_features(off, c),
                                   static_cast<int>(a)) != step(off, a, c).next_state)
            ++shifted_misses;
    }
  CHECK(on_dist_misses == 0);
  CHECK(shifted_misses > 0);  // distribution shift breaks the model
}

TEST_CASE("transition dataset JSONL round-trips") {
  const GridConfig c;
  const QTable q = value_iteration(c);
  const auto data = generate_transitions(q, c, 100, 50);
  const auto path = std::filesystem::temp_directory_path() / "cd_transitions_test.jsonl";
  save_transitions_jsonl(data, path.string());
  const auto loaded = load_transitions_jsonl(path.string());
  std::filesystem::remove(path);
  REQUIRE(loaded.size() == data.size());
  for (std::size_t i = 0; i < data.size(); ++i) {
    CHECK(loaded[i].state_features == data[i].state_features);
    CHECK(loaded[i].action == data[i].action);
    CHECK(loaded[i].next_factors == data[i].next_factors);
  }
}

TEST_CASE("transition checkpoint round-trips through JSON") {
  const GridConfig c = GridConfig::make(3, 3);
  const QTable q = value_iteration(c);
  const auto data = generate_transitions(q, c, 1000, 60);
  TransitionTrainConfig cfg;
  cfg.steps = 50;
  Rng rng(61);
  const auto result = train_transition(data, c, cfg, rng);

  const auto path = std::filesystem::temp_directory_path() / "cd_transition_ckpt.json";
  save_transition_model(result.model, path.string());
  const TransitionModel loaded = load_transition_model(path.string());
  std::filesystem::remove(path);

  for (const TransitionSample& s : data) {
    const auto a = result.model.logits(s.state_features, s.action);
    const auto b = loaded.logits(s.state_features, s.action);
    CHECK(a == b);
  }
}

TEST_CASE("empty datasets are rejected") {
  const GridConfig c;
  TransitionTrainConfig cfg;
  Rng rng(70);
  const std::vector<TransitionSample> empty;
  CHECK_THROWS_AS(train_transition(empty, c, cfg, rng), DomainError);
}
