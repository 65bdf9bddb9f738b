#include "commdecode/pipeline.hpp"

#include <chrono>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <json.hpp>
#include <map>
#include <sstream>

#include "commdecode/checkpoint.hpp"
#include "commdecode/demos.hpp"
#include "commdecode/errors.hpp"
#include "commdecode/exact_decoder.hpp"
#include "commdecode/equiv.hpp"
#include "commdecode/report.hpp"

namespace commdecode {

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

// stage seed tags
constexpr std::uint64_t kTagPlan = 0x706c616e;
constexpr std::uint64_t kTagTransition = 0x7472616e;
constexpr std::uint64_t kTagDemos = 0x64656d6f;
constexpr std::uint64_t kTagDecoder = 0x64656364;
constexpr std::uint64_t kTagEval = 0x6576616c;

json grid_to_json(const GridConfig& c) {
  return {{"width", c.width},
          {"height", c.height},
          {"horizon", c.horizon},
          {"message_alphabet_size", c.message_alphabet_size}};
}

std::uint64_t fnv1a64(const std::string& s) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char c : s) {
    h ^= c;
    h *= 0x100000001b3ULL;
  }
  return h;
}

std::string hex64(std::uint64_t h) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(h));
  return buf;
}

std::string join(const std::string& dir, const char* name) {
  return (fs::path(dir) / name).string();
}

void require_artifact(const std::string& path) {
  if (!fs::exists(path)) throw MissingArtifact(path);
}

void write_manifest(const RunConfig& cfg, const std::string& out_dir,
                    const std::string& stage,
                    const std::vector<std::string>& inputs,
                    const std::vector<std::string>& outputs) {
  json j;
  j["stage"] = stage;
  j["config_hash"] = cfg.content_hash();
  j["config"] = json::parse(cfg.to_json_text());  // full provenance
  j["seed"] = cfg.seed;
  j["tool_version"] = kToolVersion;
  json in = json::object(), out = json::object();
  for (const auto& p : inputs) in[fs::path(p).filename().string()] = file_content_id(p);
  for (const auto& p : outputs) out[fs::path(p).filename().string()] = file_content_id(p);
  j["inputs"] = in;
  j["outputs"] = out;
  j["timestamp"] = std::chrono::duration_cast<std::chrono::milliseconds>(
                       std::chrono::system_clock::now().time_since_epoch())
                       .count();
  std::ofstream f(join(out_dir, (stage + ".manifest.json").c_str()));
  f << j.dump(2) << '\n';
}

template <typename T>
T get_or(const json& j, const std::string& key, const T& fallback,
         const std::string& prefix) {
  if (!j.contains(key)) return fallback;
  try {
    return j.at(key).get<T>();
  } catch (const json::exception&) {
    throw ConfigError(prefix + key, "wrong type");
  }
}

}  // namespace

RunConfig RunConfig::defaults() { return RunConfig{}; }

void RunConfig::validate() const {
  if (env.width < 1) throw ConfigError("env.width", "must be >= 1");
  if (env.height < 1) throw ConfigError("env.height", "must be >= 1");
  if (env.horizon < 1) throw ConfigError("env.horizon", "must be >= 1");
  if (env.message_alphabet_size < 1)
    throw ConfigError("env.message_alphabet_size", "must be >= 1");
  if (planner.hidden < 1) throw ConfigError("planner.hidden", "must be >= 1");
  if (!(planner.lr > 0)) throw ConfigError("planner.lr", "must be positive");
  if (transition.steps < 1) throw ConfigError("transition.steps", "must be >= 1");
  if (!(transition.lr > 0)) throw ConfigError("transition.lr", "must be positive");
  if (transition.dataset_size < 1)
    throw ConfigError("transition.dataset_size", "must be >= 1");
  if (decoder.batch < 1) throw ConfigError("decoder.batch", "must be >= 1");
  if (!(decoder.lr > 0)) throw ConfigError("decoder.lr", "must be positive");
  if (decoder.schedule.total_steps < 1)
    throw ConfigError("decoder.total_steps", "must be >= 1");
  if (decoder.schedule.decay_steps < 1)
    throw ConfigError("decoder.decay_steps", "must be >= 1");
  if (decoder.schedule.update_every < 1)
    throw ConfigError("decoder.update_every", "must be >= 1");
  if (!(decoder.schedule.tau_start > 0))
    throw ConfigError("decoder.tau_start", "must be positive");
  if (!(decoder.schedule.tau_end > 0))
    throw ConfigError("decoder.tau_end", "must be positive");
  if (decoder.schedule.tau_end > decoder.schedule.tau_start)
    throw ConfigError("decoder.tau_end", "must not exceed tau_start");
  if (decoder_demo_temperature < 0)
    throw ConfigError("decoder.demo_temperature", "must be >= 0");
  if (demos.count < 1) throw ConfigError("demos.count", "must be >= 1");
  if (demos.temperature < 0) throw ConfigError("demos.temperature", "must be >= 0");
  if (eval.demos_per_message < 1)
    throw ConfigError("eval.demos_per_message", "must be >= 1");
}

RunConfig RunConfig::from_json_text(const std::string& text) {
  json j;
  try {
    j = json::parse(text);
  } catch (const json::parse_error& e) {
    throw ConfigError("<root>", std::string("invalid JSON: ") + e.what());
  }
  RunConfig c;
  if (j.contains("env")) {
    const json& e = j.at("env");
    c.env.width = get_or(e, "width", c.env.width, "env.");
    c.env.height = get_or(e, "height", c.env.height, "env.");
    c.env.horizon = get_or(e, "horizon", c.env.width - 1 + c.env.height - 1, "env.");
    c.env.message_alphabet_size =
        get_or(e, "message_alphabet_size", c.env.width * c.env.height, "env.");
  }
  if (j.contains("planner")) {
    const json& p = j.at("planner");
    c.planner.hidden = get_or(p, "hidden", c.planner.hidden, "planner.");
    c.planner.lr = get_or(p, "lr", c.planner.lr, "planner.");
    c.planner.batch = get_or(p, "batch", c.planner.batch, "planner.");
    c.planner.max_steps = get_or(p, "max_steps", c.planner.max_steps, "planner.");
    c.planner.check_every = get_or(p, "check_every", c.planner.check_every, "planner.");
  }
  if (j.contains("transition")) {
    const json& t = j.at("transition");
    c.transition.hidden = get_or(t, "hidden", c.transition.hidden, "transition.");
    c.transition.lr = get_or(t, "lr", c.transition.lr, "transition.");
    c.transition.steps = get_or(t, "steps", c.transition.steps, "transition.");
    c.transition.batch = get_or(t, "batch", c.transition.batch, "transition.");
    c.transition.dataset_size =
        get_or(t, "dataset_size", c.transition.dataset_size, "transition.");
  }
  if (j.contains("decoder")) {
    const json& d = j.at("decoder");
    c.decoder.schedule.tau_start =
        get_or(d, "tau_start", c.decoder.schedule.tau_start, "decoder.");
    c.decoder.schedule.tau_end =
        get_or(d, "tau_end", c.decoder.schedule.tau_end, "decoder.");
    c.decoder.schedule.decay_steps =
        get_or(d, "decay_steps", c.decoder.schedule.decay_steps, "decoder.");
    c.decoder.schedule.update_every =
        get_or(d, "update_every", c.decoder.schedule.update_every, "decoder.");
    c.decoder.schedule.total_steps =
        get_or(d, "total_steps", c.decoder.schedule.total_steps, "decoder.");
    c.decoder.batch = get_or(d, "batch", c.decoder.batch, "decoder.");
    c.decoder.lr = get_or(d, "lr", c.decoder.lr, "decoder.");
    c.decoder.eval_every = get_or(d, "eval_every", c.decoder.eval_every, "decoder.");
    c.decoder.gru_hidden = get_or(d, "gru_hidden", c.decoder.gru_hidden, "decoder.");
    c.decoder.gen_hidden = get_or(d, "gen_hidden", c.decoder.gen_hidden, "decoder.");
    c.decoder_demo_temperature =
        get_or(d, "demo_temperature", c.decoder_demo_temperature, "decoder.");
  }
  if (j.contains("demos")) {
    const json& d = j.at("demos");
    c.demos.count = get_or<std::size_t>(d, "count", c.demos.count, "demos.");
    c.demos.temperature = get_or(d, "temperature", c.demos.temperature, "demos.");
  }
  if (j.contains("eval")) {
    const json& e = j.at("eval");
    c.eval.demos_per_message =
        get_or(e, "demos_per_message", c.eval.demos_per_message, "eval.");
    c.eval.min_accuracy = get_or(e, "min_accuracy", c.eval.min_accuracy, "eval.");
    c.eval.max_distance = get_or(e, "max_distance", c.eval.max_distance, "eval.");
    c.eval.min_miss_fraction_at_1 =
        get_or(e, "min_miss_fraction_at_1", c.eval.min_miss_fraction_at_1, "eval.");
  }
  c.seed = get_or<std::uint64_t>(j, "seed", c.seed, "");
  c.out_dir = get_or<std::string>(j, "out_dir", c.out_dir, "");
  c.validate();
  return c;
}

RunConfig RunConfig::from_json_file(const std::string& path) {
  std::ifstream f(path);
  if (!f) throw MissingArtifact(path);
  std::stringstream ss;
  ss << f.rdbuf();
  return from_json_text(ss.str());
}

std::string RunConfig::to_json_text() const {
  json j;
  j["env"] = grid_to_json(env);
  j["planner"] = {{"hidden", planner.hidden},
                  {"lr", planner.lr},
                  {"batch", planner.batch},
                  {"max_steps", planner.max_steps},
                  {"check_every", planner.check_every}};
  j["transition"] = {{"hidden", transition.hidden},
                     {"lr", transition.lr},
                     {"steps", transition.steps},
                     {"batch", transition.batch},
                     {"dataset_size", transition.dataset_size}};
  j["decoder"] = {{"tau_start", decoder.schedule.tau_start},
                  {"tau_end", decoder.schedule.tau_end},
                  {"decay_steps", decoder.schedule.decay_steps},
                  {"update_every", decoder.schedule.update_every},
                  {"total_steps", decoder.schedule.total_steps},
                  {"batch", decoder.batch},
                  {"lr", decoder.lr},
                  {"eval_every", decoder.eval_every},
                  {"gru_hidden", decoder.gru_hidden},
                  {"gen_hidden", decoder.gen_hidden},
                  {"demo_temperature", decoder_demo_temperature}};
  j["demos"] = {{"count", demos.count}, {"temperature", demos.temperature}};
  j["eval"] = {{"demos_per_message", eval.demos_per_message},
               {"min_accuracy", eval.min_accuracy},
               {"max_distance", eval.max_distance},
               {"min_miss_fraction_at_1", eval.min_miss_fraction_at_1}};
  j["seed"] = seed;
  j["out_dir"] = out_dir;
  return j.dump(2);
}

void RunConfig::apply_override(const std::string& kv) {
  const auto eq = kv.find('=');
  if (eq == std::string::npos)
    throw ConfigError(kv, "override must be key=value");
  const std::string key = kv.substr(0, eq);
  const std::string value = kv.substr(eq + 1);

  json j = json::parse(to_json_text());
  json* node = &j;
  std::string leaf = key;
  while (true) {
    const auto dot = leaf.find('.');
    if (dot == std::string::npos) break;
    const std::string head = leaf.substr(0, dot);
    if (!node->contains(head)) throw ConfigError(key, "unknown key");
    node = &(*node)[head];
    leaf = leaf.substr(dot + 1);
  }
  if (!node->contains(leaf)) throw ConfigError(key, "unknown key");
  json parsed;
  try {
    parsed = json::parse(value);
  } catch (const json::parse_error&) {
    parsed = value;  // plain string
  }
  (*node)[leaf] = parsed;
  *this = from_json_text(j.dump());
}

std::string RunConfig::content_hash() const { return hex64(fnv1a64(to_json_text())); }

void run_plan(const RunConfig& cfg, const std::string& out_dir) {
  cfg.validate();
  fs::create_directories(out_dir);
  const QTable q = value_iteration(cfg.env);
  q.save_csv(join(out_dir, artifact::kQTable));

  Rng rng = Rng(cfg.seed).derive(kTagPlan);
  const DifferentiablePolicy policy = distill_policy(q, cfg.planner, rng);
  save_policy(policy, join(out_dir, artifact::kPolicy));

  write_manifest(cfg, out_dir, "plan", {},
                 {join(out_dir, artifact::kQTable), join(out_dir, artifact::kPolicy)});
}

void run_train_transition(const RunConfig& cfg, const std::string& out_dir) {
  cfg.validate();
  const std::string qpath = join(out_dir, artifact::kQTable);
  require_artifact(qpath);
  const QTable q = QTable::load_csv(qpath);

  const std::uint64_t stage_seed = Rng::mix(cfg.seed, kTagTransition);
  const auto data =
      generate_transitions(q, cfg.env, cfg.transition.dataset_size, stage_seed);
  save_transitions_jsonl(data, join(out_dir, artifact::kTransitions));

  Rng rng = Rng(cfg.seed).derive(kTagTransition + 1);
  const auto result = train_transition(data, cfg.env, cfg.transition, rng);
  save_transition_model(result.model, join(out_dir, artifact::kTransitionModel));

  write_manifest(cfg, out_dir, "train-transition", {qpath},
                 {join(out_dir, artifact::kTransitions),
                  join(out_dir, artifact::kTransitionModel)});
}

void run_gen_demos(const RunConfig& cfg, const std::string& out_dir) {
  cfg.validate();
  const std::string qpath = join(out_dir, artifact::kQTable);
  require_artifact(qpath);
  const QTable q = QTable::load_csv(qpath);

  const std::uint64_t mapping_seed = Rng::mix(cfg.seed, kTagDemos);
  const MessageMapping mapping = assign_messages(cfg.env, mapping_seed);
  mapping.save_json(join(out_dir, artifact::kMapping));

  const std::uint64_t demo_seed = Rng::mix(cfg.seed, kTagDemos + 1);
  const DemoDataset data = generate_demos(q, mapping, cfg.demos.count,
                                          cfg.demos.temperature, cfg.env, demo_seed);
  save_demos_jsonl(data, join(out_dir, artifact::kDemos));

  write_manifest(cfg, out_dir, "gen-demos", {qpath},
                 {join(out_dir, artifact::kMapping), join(out_dir, artifact::kDemos)});
}

void run_train_decoder(const RunConfig& cfg, const std::string& out_dir) {
  cfg.validate();
  const std::string qpath = join(out_dir, artifact::kQTable);
  const std::string ppath = join(out_dir, artifact::kPolicy);
  const std::string tpath = join(out_dir, artifact::kTransitionModel);
  const std::string mpath = join(out_dir, artifact::kMapping);
  for (const auto& p : {qpath, ppath, tpath, mpath}) require_artifact(p);

  const QTable q = QTable::load_csv(qpath);
  const DifferentiablePolicy policy = load_policy(ppath);
  const TransitionModel model = load_transition_model(tpath);
  const MessageMapping mapping = MessageMapping::load_json(mpath);

  OnlineDemoSource source(q, mapping, cfg.env, cfg.decoder_demo_temperature);
  const std::uint64_t train_seed = Rng::mix(cfg.seed, kTagDecoder);
  const DecoderTrainResult result =
      train_state_decoder(cfg.decoder, policy, model, source, train_seed, &mapping);

  save_decoder(result.params, join(out_dir, artifact::kDecoder));
  save_training_log_csv(result.log, join(out_dir, artifact::kTrainingLog));

  write_manifest(cfg, out_dir, "train-decoder", {qpath, ppath, tpath, mpath},
                 {join(out_dir, artifact::kDecoder),
                  join(out_dir, artifact::kTrainingLog)});
}

void run_decode_exact(const RunConfig& cfg, const std::string& out_dir) {
  cfg.validate();
  const std::string qpath = join(out_dir, artifact::kQTable);
  const std::string dpath = join(out_dir, artifact::kDemos);
  for (const auto& p : {qpath, dpath}) require_artifact(p);

  const QTable q = QTable::load_csv(qpath);
  const auto demos = load_demos_jsonl(dpath);
  const DecodeResult result = decode_dataset(demos, q, cfg.env);

  // documented schema: a bare symbol -> cells map
  json jm = json::object();
  for (const auto& [symbol, gs] : result.goal_sets) {
    json cells = json::array();
    for (const Cell& c : gs.cells) cells.push_back({c.x, c.y});
    jm[std::to_string(symbol)] = cells;
  }
  {
    std::ofstream f(join(out_dir, artifact::kGoalSets));
    f << jm.dump(2) << '\n';
  }
  {
    std::ofstream f(join(out_dir, artifact::kGoalSetsTable));
    f << "message | goals\n--------+------\n";
    for (const auto& [symbol, gs] : result.goal_sets) {
      f << symbol << " | ";
      for (const Cell& c : gs.cells) f << '(' << c.x << ',' << c.y << ") ";
      if (gs.cells.empty()) f << "(EMPTY: inconsistent demonstrations)";
      f << '\n';
    }
    if (!result.empty_messages.empty()) {
      f << "\ndiagnostic: empty goal sets (irrational demonstrator or model "
           "mismatch) for messages:";
      for (int m : result.empty_messages) f << ' ' << m;
      f << '\n';
    }
    if (result.vacuous_demo_count > 0)
      f << "warning: " << result.vacuous_demo_count
        << " demonstration(s) carried no actions (vacuous evidence)\n";
  }
  for (int m : result.empty_messages)
    std::fprintf(stderr, "decode-exact: empty goal set for message %d\n", m);

  write_manifest(cfg, out_dir, "decode-exact", {qpath, dpath},
                 {join(out_dir, artifact::kGoalSets),
                  join(out_dir, artifact::kGoalSetsTable)});
}

bool run_eval_decoder(const RunConfig& cfg, const std::string& out_dir) {
  cfg.validate();
  const std::string qpath = join(out_dir, artifact::kQTable);
  const std::string cpath = join(out_dir, artifact::kDecoder);
  const std::string mpath = join(out_dir, artifact::kMapping);
  for (const auto& p : {qpath, cpath, mpath}) require_artifact(p);

  const QTable q = QTable::load_csv(qpath);
  const DecoderParams dec = load_decoder(cpath);
  const MessageMapping mapping = MessageMapping::load_json(mpath);

  // fixed goal per message; starts sampled uniformly among the other cells
  const Rng base = Rng(cfg.seed).derive(kTagEval);
  std::vector<Demonstration> demos;
  std::uint64_t tag = 0;
  for (const auto& [goal, symbol] : mapping.map) {
    for (int k = 0; k < cfg.eval.demos_per_message; ++k) {
      Rng ep = base.derive(tag++);
      State s;
      s.goal = goal;
      do {
        const std::uint64_t flat = ep.uniform_below(
            static_cast<std::uint64_t>(cfg.env.cells()));
        s.listener = Cell{static_cast<int>(flat) % cfg.env.width,
                          static_cast<int>(flat) / cfg.env.width};
      } while (s.listener == s.goal);
      Demonstration d;
      d.message = symbol;
      d.oracle = s;
      bool terminated = false;
      State cur = s;
      while (!terminated) {
        const Action a = sample_action(q, cur, 0.0, ep);
        d.actions.push_back(a);
        const StepOutcome o = step(cur, a, cfg.env);
        cur = o.next_state;
        terminated = o.terminated;
      }
      d.terminated = true;
      demos.push_back(std::move(d));
    }
  }

  const EvalMetrics m = evaluate(dec, demos);
  save_heatmap_csv(m, join(out_dir, artifact::kHeatmapCsv));
  render_heatmaps(join(out_dir, artifact::kHeatmapCsv),
                  join(out_dir, artifact::kHeatmapSvg), cfg.env);

  const double miss_fraction_at_1 =
      m.miss_count == 0 ? 1.0
                        : static_cast<double>(m.misses_at_distance_1) /
                              static_cast<double>(m.miss_count);
  const bool ok = m.accuracy >= cfg.eval.min_accuracy &&
                  m.worst_distance <= cfg.eval.max_distance &&
                  miss_fraction_at_1 >= cfg.eval.min_miss_fraction_at_1;

  json j;
  j["accuracy"] = m.accuracy;
  j["worst_distance"] = m.worst_distance;
  j["message_count"] = m.message_count;
  j["miss_count"] = m.miss_count;
  j["misses_at_distance_1"] = m.misses_at_distance_1;
  j["miss_fraction_at_1"] = miss_fraction_at_1;
  json hist = json::object();
  for (const auto& [dist, n] : m.manhattan_histogram) hist[std::to_string(dist)] = n;
  j["manhattan_histogram"] = hist;
  j["thresholds"] = {{"min_accuracy", cfg.eval.min_accuracy},
                     {"max_distance", cfg.eval.max_distance},
                     {"min_miss_fraction_at_1", cfg.eval.min_miss_fraction_at_1},
                     {"passed", ok}};
  {
    std::ofstream f(join(out_dir, artifact::kMetrics));
    f << j.dump(2) << '\n';
  }

  write_manifest(cfg, out_dir, "eval-decoder", {qpath, cpath, mpath},
                 {join(out_dir, artifact::kMetrics),
                  join(out_dir, artifact::kHeatmapCsv),
                  join(out_dir, artifact::kHeatmapSvg)});
  return ok;
}

void run_analyze_equiv(const RunConfig& cfg, const std::string& out_dir,
                       const std::optional<std::string>& instance_path) {
  cfg.validate();
  fs::create_directories(out_dir);
  equiv::MicroDecPomdpComm instance =
      instance_path ? equiv::MicroDecPomdpComm::from_json_file(*instance_path)
                    : equiv::MicroDecPomdpComm::line3_two_goals();
  const equiv::OptimalUnionReport report = equiv::verify_optimal_union(instance);
  {
    std::ofstream f(join(out_dir, artifact::kEquivReport));
    f << report.to_json_text() << '\n';
  }
  {
    std::ofstream f(join(out_dir, artifact::kEquivReportTable));
    f << "instance: " << instance.name << '\n' << report.to_table_text();
  }
  std::vector<std::string> inputs;
  if (instance_path) inputs.push_back(*instance_path);
  write_manifest(cfg, out_dir, "analyze-equiv", inputs,
                 {join(out_dir, artifact::kEquivReport),
                  join(out_dir, artifact::kEquivReportTable)});
}

bool run_all(const RunConfig& cfg, const std::string& out_dir) {
  run_plan(cfg, out_dir);
  run_train_transition(cfg, out_dir);
  run_gen_demos(cfg, out_dir);
  run_train_decoder(cfg, out_dir);
  run_decode_exact(cfg, out_dir);
  return run_eval_decoder(cfg, out_dir);
}

}  // namespace commdecode
