#pragma once

#include <string>

#include "commdecode/planner.hpp"
#include "commdecode/state_decoder.hpp"
#include "commdecode/transition.hpp"

namespace commdecode {

/// Versioned JSON checkpoints: {"format_version":1,"arch":{...},"params":[[...],...]}
/// with parameter matrices flattened row-major, in store order.

void save_policy(const DifferentiablePolicy& policy, const std::string& path);
DifferentiablePolicy load_policy(const std::string& path);

void save_transition_model(const TransitionModel& model, const std::string& path);
TransitionModel load_transition_model(const std::string& path);

void save_decoder(const DecoderParams& dec, const std::string& path);
DecoderParams load_decoder(const std::string& path);

/// FNV-1a hash of a file's bytes, as fixed-width hex (provenance id).
std::string file_content_id(const std::string& path);

}  // namespace commdecode
