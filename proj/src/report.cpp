#include "commdecode/report.hpp"

#include <cmath>
#include <fstream>
#include <map>
#include <sstream>
#include <vector>

#include "commdecode/errors.hpp"

namespace commdecode {

namespace {
struct CsvRow {
  Cell true_goal;
  Cell predicted;
  double proportion;
};
}  // namespace

void render_heatmaps(const std::string& csv_path, const std::string& svg_path,
                     const GridConfig& config) {
  std::ifstream f(csv_path);
  if (!f) throw MissingArtifact(csv_path);

  std::string line;
  std::size_t lineno = 0;
  std::vector<CsvRow> rows;
  bool header_seen = false;
  while (std::getline(f, line)) {
    ++lineno;
    if (line.empty()) continue;
    if (!header_seen) {
      header_seen = true;  // first non-empty line is the header
      continue;
    }
    std::istringstream ss(line);
    std::string tok;
    CsvRow r;
    int fields[4];
    for (int i = 0; i < 4; ++i) {
      if (!std::getline(ss, tok, ',')) throw ParseError(lineno, "missing column");
      try {
        fields[i] = std::stoi(tok);
      } catch (const std::exception&) {
        throw ParseError(lineno, "malformed integer: " + tok);
      }
    }
    if (!std::getline(ss, tok, ',')) throw ParseError(lineno, "missing proportion");
    try {
      r.proportion = std::stod(tok);
    } catch (const std::exception&) {
      throw ParseError(lineno, "malformed proportion: " + tok);
    }
    r.true_goal = Cell{fields[0], fields[1]};
    r.predicted = Cell{fields[2], fields[3]};
    validate_cell(r.true_goal, config);
    validate_cell(r.predicted, config);
    if (!(r.proportion >= 0.0 && r.proportion <= 1.0))
      throw ParseError(lineno, "proportion outside [0,1]");
    rows.push_back(r);
  }
  if (rows.empty())
    throw ParseError(lineno == 0 ? 1 : lineno, "no data rows in " + csv_path);

  std::map<std::pair<int, int>, std::map<std::pair<int, int>, double>> grids;
  for (const CsvRow& r : rows)
    grids[{r.true_goal.x, r.true_goal.y}][{r.predicted.x, r.predicted.y}] =
        r.proportion;

  const int w = config.width, h = config.height;
  const int cell = 12;          // pixels per heatmap cell
  const int gap = 8;            // gap between heatmaps
  const int margin = 16;
  const int tile_w = w * cell, tile_h = h * cell;
  const int svg_w = 2 * margin + w * tile_w + (w - 1) * gap;
  const int svg_h = 2 * margin + h * tile_h + (h - 1) * gap;

  std::ostringstream out;
  out << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << svg_w
      << "\" height=\"" << svg_h << "\" viewBox=\"0 0 " << svg_w << ' ' << svg_h
      << "\">\n";
  out << "<rect width=\"" << svg_w << "\" height=\"" << svg_h
      << "\" fill=\"#202020\"/>\n";

  // outer grid position (i,j) = true goal (i,j); y flipped so (0,0) sits
  // bottom-left
  for (int gj = 0; gj < h; ++gj) {
    for (int gi = 0; gi < w; ++gi) {
      const int ox = margin + gi * (tile_w + gap);
      const int oy = margin + (h - 1 - gj) * (tile_h + gap);
      const auto git = grids.find({gi, gj});
      for (int py = 0; py < h; ++py) {
        for (int px = 0; px < w; ++px) {
          double v = 0.0;
          if (git != grids.end()) {
            const auto pit = git->second.find({px, py});
            if (pit != git->second.end()) v = pit->second;
          }
          const int shade = static_cast<int>(std::lround(v * 255.0));
          out << "<rect x=\"" << ox + px * cell << "\" y=\""
              << oy + (h - 1 - py) * cell << "\" width=\"" << cell
              << "\" height=\"" << cell << "\" fill=\"rgb(" << shade << ','
              << shade << ',' << shade << ")\"/>\n";
        }
      }
      // red outline marks the true goal cell inside its own heatmap
      out << "<rect x=\"" << ox + gi * cell << "\" y=\"" << oy + (h - 1 - gj) * cell
          << "\" width=\"" << cell << "\" height=\"" << cell
          << "\" fill=\"none\" stroke=\"red\" stroke-width=\"1.5\"/>\n";
    }
  }
  out << "</svg>\n";

  std::ofstream svg(svg_path);
  if (!svg) throw std::runtime_error("cannot open " + svg_path + " for writing");
  svg << out.str();
}

}  // namespace commdecode
