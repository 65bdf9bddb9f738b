#include "commdecode/demos.hpp"

#include <cstdio>
#include <fstream>
#include <json.hpp>

#include "commdecode/errors.hpp"

namespace commdecode {

using nlohmann::json;
using ojson = nlohmann::ordered_json;

int MessageMapping::symbol_for(const Cell& goal) const {
  const auto it = map.find(goal);
  if (it == map.end())
    throw DomainError("MessageMapping: no symbol for goal (" +
                      std::to_string(goal.x) + "," + std::to_string(goal.y) + ")");
  return it->second;
}

MessageMapping assign_messages(const GridConfig& config, std::uint64_t seed) {
  config.validate();
  const int cells = config.cells();
  if (config.message_alphabet_size < cells)
    throw DomainError("assign_messages: alphabet of size " +
                      std::to_string(config.message_alphabet_size) +
                      " cannot injectively cover " + std::to_string(cells) +
                      " goal cells");

  // Fisher-Yates over the full alphabet; the first `cells` entries form a
  // uniformly random injection.
  Rng rng(seed);
  std::vector<int> symbols(static_cast<std::size_t>(config.message_alphabet_size));
  for (std::size_t i = 0; i < symbols.size(); ++i) symbols[i] = static_cast<int>(i);
  for (std::size_t i = symbols.size(); i > 1; --i) {
    const std::size_t j = rng.uniform_below(i);
    std::swap(symbols[i - 1], symbols[j]);
  }

  MessageMapping m;
  m.seed = seed;
  std::size_t k = 0;
  for (int y = 0; y < config.height; ++y)
    for (int x = 0; x < config.width; ++x) m.map[Cell{x, y}] = symbols[k++];
  return m;
}

void MessageMapping::save_json(const std::string& path) const {
  ojson j;
  j["seed"] = seed;
  ojson jm = ojson::object();
  for (const auto& [cell, sym] : map)
    jm[std::to_string(cell.x) + "," + std::to_string(cell.y)] = sym;
  j["map"] = jm;
  std::ofstream f(path);
  if (!f) throw std::runtime_error("cannot open " + path + " for writing");
  f << j.dump(2) << '\n';
}

MessageMapping load_json_mapping_impl(const std::string& path) {
  std::ifstream f(path);
  if (!f) throw MissingArtifact(path);
  json j = json::parse(f);
  MessageMapping m;
  m.seed = j.at("seed").get<std::uint64_t>();
  for (const auto& [key, val] : j.at("map").items()) {
    const auto comma = key.find(',');
    if (comma == std::string::npos) throw ParseError(1, "bad mapping key: " + key);
    Cell c{std::stoi(key.substr(0, comma)), std::stoi(key.substr(comma + 1))};
    m.map[c] = val.get<int>();
  }
  return m;
}

MessageMapping MessageMapping::load_json(const std::string& path) {
  return load_json_mapping_impl(path);
}

DemoDataset generate_demos(const QTable& q, const MessageMapping& mapping,
                           std::size_t count, double temperature,
                           const GridConfig& config, std::uint64_t seed) {
  if (temperature < 0.0) throw DomainError("generate_demos: negative temperature");

  DemoDataset data;
  data.meta.seed = seed;
  data.meta.mapping_seed = mapping.seed;
  data.meta.policy_id = qtable_content_id(q);
  data.meta.temperature = temperature;
  data.meta.requested = count;

  const Rng base(seed);
  std::uint64_t attempt = 0;
  while (data.demos.size() < count) {
    Rng ep = base.derive(attempt++);
    State s = sample_initial(config, ep);
    Demonstration d;
    d.message = mapping.symbol_for(s.goal);
    d.oracle = s;
    bool terminated = false;
    for (int t = 0; t < config.horizon && !terminated; ++t) {
      const Action a = sample_action(q, s, temperature, ep);
      d.actions.push_back(a);
      const StepOutcome out = step(s, a, config);
      s = out.next_state;
      terminated = out.terminated;
    }
    d.terminated = terminated;
    if (!terminated) {
      ++data.meta.discarded_non_terminating;
      if (attempt >= 1000 &&
          data.meta.discarded_non_terminating * 100 > attempt * 99)
        throw DomainError("generate_demos: discard rate above 99%, temperature " +
                          std::to_string(temperature) + " is pathological");
      continue;
    }
    data.demos.push_back(std::move(d));
  }
  return data;
}

void save_demos_jsonl(const DemoDataset& data, const std::string& path) {
  std::ofstream f(path);
  if (!f) throw std::runtime_error("cannot open " + path + " for writing");
  for (const Demonstration& d : data.demos) {
    ojson j;
    j["message"] = d.message;
    ojson acts = ojson::array();
    for (Action a : d.actions) acts.push_back(static_cast<int>(a));
    j["actions"] = acts;
    j["terminated"] = d.terminated;
    if (d.oracle) {
      j["oracle"] = {{"start", {d.oracle->listener.x, d.oracle->listener.y}},
                     {"goal", {d.oracle->goal.x, d.oracle->goal.y}}};
    }
    f << j.dump() << '\n';
  }
}

std::vector<Demonstration> load_demos_jsonl(const std::string& path) {
  std::ifstream f(path);
  if (!f) throw MissingArtifact(path);
  std::vector<Demonstration> out;
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(f, line)) {
    ++lineno;
    if (line.empty()) continue;
    json j;
    try {
      j = json::parse(line);
    } catch (const json::parse_error& e) {
      throw ParseError(lineno, e.what());
    }
    Demonstration d;
    d.message = j.at("message").get<int>();
    for (const auto& a : j.at("actions")) {
      const int ai = a.get<int>();
      if (ai < 0 || ai > 3) throw ParseError(lineno, "action out of range");
      d.actions.push_back(static_cast<Action>(ai));
    }
    d.terminated = j.at("terminated").get<bool>();
    if (j.contains("oracle")) {
      const auto& o = j.at("oracle");
      State s;
      s.listener = Cell{o.at("start").at(0).get<int>(), o.at("start").at(1).get<int>()};
      s.goal = Cell{o.at("goal").at(0).get<int>(), o.at("goal").at(1).get<int>()};
      d.oracle = s;
    }
    out.push_back(std::move(d));
  }
  return out;
}

std::string qtable_content_id(const QTable& q) {
  // FNV-1a over the raw value bytes; a provenance identifier, not a
  // cryptographic digest.
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (double v : q.raw()) {
    const auto* bytes = reinterpret_cast<const unsigned char*>(&v);
    for (std::size_t i = 0; i < sizeof v; ++i) {
      h ^= bytes[i];
      h *= 0x100000001b3ULL;
    }
  }
  char buf[32];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(h));
  return buf;
}

}  // namespace commdecode
