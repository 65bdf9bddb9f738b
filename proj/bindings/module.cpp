#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

#include "commdecode/checkpoint.hpp"
#include "commdecode/demos.hpp"
#include "commdecode/env.hpp"
#include "commdecode/equiv.hpp"
#include "commdecode/errors.hpp"
#include "commdecode/exact_decoder.hpp"
#include "commdecode/nn/graph.hpp"
#include "commdecode/pipeline.hpp"
#include "commdecode/planner.hpp"
#include "commdecode/report.hpp"
#include "commdecode/state_decoder.hpp"
#include "commdecode/transition.hpp"

namespace py = pybind11;
using namespace commdecode;

PYBIND11_MODULE(_core, m) {
  m.doc() = "goal-signalling gridworld communication decoding toolkit";
  m.attr("__version__") = kToolVersion;

  py::register_exception<DomainError>(m, "DomainError", PyExc_ValueError);
  py::register_exception<UsageError>(m, "UsageError", PyExc_RuntimeError);

  py::class_<Rng>(m, "Rng")
      .def(py::init<std::uint64_t>(), py::arg("seed"))
      .def("uniform_open01", &Rng::uniform_open01)
      .def("uniform_below", &Rng::uniform_below)
      .def("gumbel", &Rng::gumbel)
      .def("derive", &Rng::derive);

  py::class_<GridConfig>(m, "GridConfig")
      .def(py::init<>())
      .def_static("make", &GridConfig::make, py::arg("width"), py::arg("height"))
      .def_readwrite("width", &GridConfig::width)
      .def_readwrite("height", &GridConfig::height)
      .def_readwrite("horizon", &GridConfig::horizon)
      .def_readwrite("message_alphabet_size", &GridConfig::message_alphabet_size)
      .def("feature_size", &GridConfig::feature_size);

  py::class_<Cell>(m, "Cell")
      .def(py::init<int, int>(), py::arg("x") = 0, py::arg("y") = 0)
      .def_readwrite("x", &Cell::x)
      .def_readwrite("y", &Cell::y)
      .def("__eq__", [](const Cell& a, const Cell& b) { return a == b; })
      .def("__hash__", [](const Cell& c) { return c.x * 8191 + c.y; })
      .def("__repr__", [](const Cell& c) {
        return "Cell(" + std::to_string(c.x) + ", " + std::to_string(c.y) + ")";
      });

  py::class_<State>(m, "State")
      .def(py::init([](const Cell& listener, const Cell& goal) {
             return State{listener, goal};
           }),
           py::arg("listener"), py::arg("goal"))
      .def_readwrite("listener", &State::listener)
      .def_readwrite("goal", &State::goal)
      .def("__eq__", [](const State& a, const State& b) { return a == b; });

  py::enum_<Action>(m, "Action")
      .value("Up", Action::Up)
      .value("Down", Action::Down)
      .value("Left", Action::Left)
      .value("Right", Action::Right);

  py::class_<StepOutcome>(m, "StepOutcome")
      .def_readonly("next_state", &StepOutcome::next_state)
      .def_readonly("reward", &StepOutcome::reward)
      .def_readonly("terminated", &StepOutcome::terminated);

  m.def("step", &step, py::arg("state"), py::arg("action"), py::arg("config"));
  m.def("sample_initial", &sample_initial, py::arg("config"), py::arg("rng"));
  m.def("encode_state_features", &encode_state_features, py::arg("state"),
        py::arg("config"));
  m.def("decode_state_features",
        [](const std::vector<double>& f, const GridConfig& c) {
          return decode_state_features(f, c);
        },
        py::arg("features"), py::arg("config"));
  m.def("manhattan_distance", &manhattan_distance);
  m.def("message_binary", &message_binary, py::arg("symbol"), py::arg("config"));

  py::class_<QTable>(m, "QTable")
      .def("q", &QTable::q, py::arg("state"), py::arg("action"))
      .def("v", &QTable::v, py::arg("state"))
      .def("save_csv", &QTable::save_csv)
      .def_static("load_csv", &QTable::load_csv)
      .def_property_readonly("config", &QTable::config);

  m.def("value_iteration", &value_iteration, py::arg("config"));
  m.def("greedy_action_set", &greedy_action_set, py::arg("q"), py::arg("state"),
        py::arg("eps") = 1e-6);
  m.def("sample_action", &sample_action, py::arg("q"), py::arg("state"),
        py::arg("temperature"), py::arg("rng"));

  py::class_<DifferentiablePolicy>(m, "DifferentiablePolicy")
      .def("logits",
           [](const DifferentiablePolicy& p, const std::vector<double>& f) {
             return p.logits(f);
           })
      .def("greedy_action", &DifferentiablePolicy::greedy_action);
  py::class_<DistillConfig>(m, "DistillConfig")
      .def(py::init<>())
      .def_readwrite("hidden", &DistillConfig::hidden)
      .def_readwrite("lr", &DistillConfig::lr)
      .def_readwrite("batch", &DistillConfig::batch)
      .def_readwrite("max_steps", &DistillConfig::max_steps)
      .def_readwrite("check_every", &DistillConfig::check_every);
  m.def("distill_policy", &distill_policy, py::arg("q"), py::arg("config"),
        py::arg("rng"));

  py::class_<Demonstration>(m, "Demonstration")
      .def(py::init<>())
      .def_readwrite("message", &Demonstration::message)
      .def_readwrite("actions", &Demonstration::actions)
      .def_readwrite("terminated", &Demonstration::terminated)
      .def_readwrite("oracle", &Demonstration::oracle);

  py::class_<ConsistencySet>(m, "ConsistencySet")
      .def_readonly("pairs", &ConsistencySet::pairs)
      .def_readonly("vacuous", &ConsistencySet::vacuous);
  py::class_<GoalSet>(m, "GoalSet")
      .def_readonly("cells", &GoalSet::cells)
      .def("contains", &GoalSet::contains);
  py::class_<DecodeResult>(m, "DecodeResult")
      .def_readonly("goal_sets", &DecodeResult::goal_sets)
      .def_readonly("empty_messages", &DecodeResult::empty_messages)
      .def_readonly("vacuous_demo_count", &DecodeResult::vacuous_demo_count);

  m.def("consistent_pairs",
        [](const std::vector<Action>& actions, bool terminated, const QTable& q,
           const GridConfig& c) { return consistent_pairs(actions, terminated, q, c); },
        py::arg("actions"), py::arg("terminated"), py::arg("q"), py::arg("config"));
  m.def("decode_dataset",
        [](const std::vector<Demonstration>& demos, const QTable& q,
           const GridConfig& c) { return decode_dataset(demos, q, c); },
        py::arg("demos"), py::arg("q"), py::arg("config"));

  py::class_<MessageMapping>(m, "MessageMapping")
      .def_readonly("seed", &MessageMapping::seed)
      .def_readonly("map", &MessageMapping::map)
      .def("symbol_for", &MessageMapping::symbol_for)
      .def("save_json", &MessageMapping::save_json)
      .def_static("load_json", &MessageMapping::load_json);
  m.def("assign_messages", &assign_messages, py::arg("config"), py::arg("seed"));

  py::class_<DemoDataset>(m, "DemoDataset")
      .def_readonly("demos", &DemoDataset::demos);
  m.def("generate_demos", &generate_demos, py::arg("q"), py::arg("mapping"),
        py::arg("count"), py::arg("temperature"), py::arg("config"), py::arg("seed"));
  m.def("save_demos_jsonl", &save_demos_jsonl);
  m.def("load_demos_jsonl", &load_demos_jsonl);

  py::class_<TransitionModel>(m, "TransitionModel")
      .def("logits",
           [](const TransitionModel& t, const std::vector<double>& f, int action) {
             return t.logits(f, action);
           })
      .def("predict",
           [](const TransitionModel& t, const std::vector<double>& f, int action) {
             return t.predict(f, action);
           });
  py::class_<TransitionSample>(m, "TransitionSample")
      .def_readonly("state_features", &TransitionSample::state_features)
      .def_readonly("action", &TransitionSample::action)
      .def_readonly("next_factors", &TransitionSample::next_factors);
  m.def("generate_transitions", &generate_transitions, py::arg("q"), py::arg("config"),
        py::arg("count"), py::arg("seed"));
  m.def("rollout_accuracy", &rollout_accuracy, py::arg("model"), py::arg("q"),
        py::arg("config"), py::arg("episodes"), py::arg("seed"));

  m.def("gumbel_softmax_sample",
        [](const std::vector<double>& logits, double tau, Rng& rng) {
          nn::Graph g;
          const nn::Var x = g.input(logits);
          const nn::Var y = g.gumbel_softmax(x, tau, rng);
          const auto v = g.value(y);
          return std::vector<double>(v.begin(), v.end());
        },
        py::arg("logits"), py::arg("temperature"), py::arg("rng"));

  py::class_<DecoderParams>(m, "DecoderParams");
  m.def("load_decoder", &load_decoder);
  m.def("predict_goal",
        [](const DecoderParams& dec, int message) { return predict_goal(dec, message); },
        py::arg("decoder"), py::arg("message"));
  m.def("load_policy", &load_policy);
  m.def("load_transition_model", &load_transition_model);

  py::class_<equiv::MicroDecPomdpComm>(m, "MicroDecPomdpComm")
      .def_static("line3_two_goals", &equiv::MicroDecPomdpComm::line3_two_goals)
      .def_static("from_json_text", &equiv::MicroDecPomdpComm::from_json_text)
      .def("to_json_text", &equiv::MicroDecPomdpComm::to_json_text);
  py::class_<equiv::OptimalUnionReport>(m, "OptimalUnionReport")
      .def_readonly("policy_count", &equiv::OptimalUnionReport::policy_count)
      .def_readonly("optimal_count", &equiv::OptimalUnionReport::optimal_count)
      .def_readonly("optimal_return", &equiv::OptimalUnionReport::optimal_return)
      .def_readonly("env_class_sizes", &equiv::OptimalUnionReport::env_class_sizes)
      .def_readonly("union_identity_holds",
                    &equiv::OptimalUnionReport::union_identity_holds)
      .def("to_json_text", &equiv::OptimalUnionReport::to_json_text);
  m.def("verify_optimal_union", &equiv::verify_optimal_union, py::arg("instance"),
        py::arg("cap") = 1000000ULL);

  py::class_<RunConfig>(m, "RunConfig")
      .def_static("defaults", &RunConfig::defaults)
      .def_static("from_json_text", &RunConfig::from_json_text)
      .def("to_json_text", &RunConfig::to_json_text)
      .def("apply_override", &RunConfig::apply_override)
      .def_readwrite("seed", &RunConfig::seed);
  m.def("run_plan", &run_plan);
  m.def("run_gen_demos", &run_gen_demos);
  m.def("run_decode_exact", &run_decode_exact);
  m.def("render_heatmaps", &render_heatmaps, py::arg("csv_path"), py::arg("svg_path"),
        py::arg("config"));
}
