#include "commdecode/checkpoint.hpp"

#include <cstdio>
#include <fstream>
#include <json.hpp>
#include <sstream>

#include "commdecode/errors.hpp"

namespace commdecode {

using nlohmann::json;
using ojson = nlohmann::ordered_json;

namespace {

ojson params_to_json(const nn::ParamStore& store) {
  ojson arr = ojson::array();
  for (const auto& t : store.tensors()) arr.push_back(t.v);
  return arr;
}

void params_from_json(const json& arr, nn::ParamStore& store) {
  if (arr.size() != store.count())
    throw ParseError(1, "checkpoint has " + std::to_string(arr.size()) +
                            " parameter tensors, expected " +
                            std::to_string(store.count()));
  for (std::size_t i = 0; i < store.count(); ++i) {
    auto& t = store.at(static_cast<int>(i));
    const auto vals = arr.at(i).get<std::vector<double>>();
    if (vals.size() != t.size())
      throw ParseError(1, "tensor " + t.name + " has size " +
                              std::to_string(vals.size()) + ", expected " +
                              std::to_string(t.size()));
    t.v = vals;
  }
}

json grid_to_json(const GridConfig& c) {
  return {{"width", c.width},
          {"height", c.height},
          {"horizon", c.horizon},
          {"message_alphabet_size", c.message_alphabet_size}};
}

GridConfig grid_from_json(const json& j) {
  GridConfig c;
  c.width = j.at("width").get<int>();
  c.height = j.at("height").get<int>();
  c.horizon = j.at("horizon").get<int>();
  c.message_alphabet_size = j.at("message_alphabet_size").get<int>();
  c.validate();
  return c;
}

json load_checkpoint(const std::string& path, const std::string& expected_kind) {
  std::ifstream f(path);
  if (!f) throw MissingArtifact(path);
  json j = json::parse(f);
  if (j.at("format_version").get<int>() != 1)
    throw ParseError(1, "unsupported checkpoint format_version");
  if (j.at("arch").at("kind").get<std::string>() != expected_kind)
    throw ParseError(1, "checkpoint kind mismatch: expected " + expected_kind);
  return j;
}

void write_json(const ojson& j, const std::string& path) {
  std::ofstream f(path);
  if (!f) throw std::runtime_error("cannot open " + path + " for writing");
  f << j.dump() << '\n';
}

}  // namespace

void save_policy(const DifferentiablePolicy& policy, const std::string& path) {
  ojson j;
  j["format_version"] = 1;
  j["arch"] = {{"kind", "policy_mlp"},
               {"widths", policy.arch.widths},
               {"env", grid_to_json(policy.config)}};
  j["params"] = params_to_json(policy.params);
  write_json(j, path);
}

DifferentiablePolicy load_policy(const std::string& path) {
  const json j = load_checkpoint(path, "policy_mlp");
  DifferentiablePolicy p;
  p.config = grid_from_json(j.at("arch").at("env"));
  const auto widths = j.at("arch").at("widths").get<std::vector<int>>();
  Rng scratch(0);
  p.arch = nn::make_mlp(p.params, "policy", widths, scratch);
  params_from_json(j.at("params"), p.params);
  return p;
}

void save_transition_model(const TransitionModel& model, const std::string& path) {
  ojson j;
  j["format_version"] = 1;
  ojson head_widths = ojson::array();
  for (const auto& head : model.heads) head_widths.push_back(head.widths);
  j["arch"] = {{"kind", "transition_heads"},
               {"head_widths", head_widths},
               {"env", grid_to_json(model.config)}};
  j["params"] = params_to_json(model.params);
  write_json(j, path);
}

TransitionModel load_transition_model(const std::string& path) {
  const json j = load_checkpoint(path, "transition_heads");
  TransitionModel m;
  m.config = grid_from_json(j.at("arch").at("env"));
  const auto head_widths =
      j.at("arch").at("head_widths").get<std::vector<std::vector<int>>>();
  if (head_widths.size() != 4) throw ParseError(1, "expected four transition heads");
  Rng scratch(0);
  for (std::size_t f = 0; f < 4; ++f)
    m.heads[f] = nn::make_mlp(m.params, "head" + std::to_string(f), head_widths[f],
                              scratch);
  params_from_json(j.at("params"), m.params);
  return m;
}

void save_decoder(const DecoderParams& dec, const std::string& path) {
  ojson j;
  j["format_version"] = 1;
  j["arch"] = {{"kind", "state_decoder"},
               {"env", grid_to_json(dec.config)},
               {"alphabet", dec.alphabet},
               {"gru_hidden", dec.gru_hidden},
               {"gen_speaker_widths", dec.gen_speaker.widths},
               {"gen_listener_widths", dec.gen_listener.widths}};
  j["params"] = params_to_json(dec.params);
  write_json(j, path);
}

DecoderParams load_decoder(const std::string& path) {
  const json j = load_checkpoint(path, "state_decoder");
  const json& arch = j.at("arch");
  const GridConfig config = grid_from_json(arch.at("env"));
  const int alphabet = arch.at("alphabet").get<int>();
  const int gru_hidden = arch.at("gru_hidden").get<int>();
  const auto sw = arch.at("gen_speaker_widths").get<std::vector<int>>();
  const int gen_hidden = sw.size() >= 2 ? sw[1] : 64;

  Rng scratch(0);
  DecoderParams dec = make_decoder(config, alphabet, scratch, gru_hidden, gen_hidden);
  params_from_json(j.at("params"), dec.params);
  return dec;
}

std::string file_content_id(const std::string& path) {
  std::ifstream f(path, std::ios::binary);
  if (!f) throw MissingArtifact(path);
  std::uint64_t h = 0xcbf29ce484222325ULL;
  char buf[4096];
  while (f.read(buf, sizeof buf) || f.gcount() > 0) {
    const std::streamsize n = f.gcount();
    for (std::streamsize i = 0; i < n; ++i) {
      h ^= static_cast<unsigned char>(buf[i]);
      h *= 0x100000001b3ULL;
    }
  }
  char out[32];
  std::snprintf(out, sizeof out, "%016llx", static_cast<unsigned long long>(h));
  return out;
}

}  // namespace commdecode
