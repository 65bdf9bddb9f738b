#pragma once

#include <string>

#include "commdecode/env.hpp"

namespace commdecode {

/// Renders the per-goal prediction-proportion CSV
/// (true_gx,true_gy,pred_gx,pred_gy,proportion) as a WxH grid of WxH
/// grayscale heatmaps; the true-goal cell carries a red outline. Throws
/// ParseError (with line number) on malformed rows and refuses to write a
/// file when the CSV holds no data rows.
void render_heatmaps(const std::string& csv_path, const std::string& svg_path,
                     const GridConfig& config);

}  // namespace commdecode
