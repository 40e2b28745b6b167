#include "mopa/runio.h"

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <stdexcept>

namespace mopa {

std::string version_string() { return "mopa-pd 0.1.0"; }

void write_run_manifest(const std::string& run_dir, const RunManifest& manifest) {
  std::filesystem::create_directories(run_dir);
  const std::string path = (std::filesystem::path(run_dir) / "manifest.txt").string();
  std::ofstream out(path);
  if (!out) throw std::runtime_error("write_run_manifest: cannot open " + path);
  out << "command = " << manifest.command << "\n";
  out << "config_hash = " << manifest.config_hash << "\n";
  out << "code_version = " << manifest.code_version << "\n";
  out << "seeds =";
  for (std::uint64_t s : manifest.seeds) out << " " << s;
  out << "\n";
  for (const std::string& o : manifest.outputs) out << "output = " << o << "\n";
  if (manifest.final_log_alpha)
    out << "final_log_alpha = " << *manifest.final_log_alpha << "\n";
  out << "wall_clock_sec = " << manifest.wall_clock_sec << "\n";
}

int CsvTable::col(const std::string& name) const {
  for (std::size_t i = 0; i < columns.size(); ++i)
    if (columns[i] == name) return static_cast<int>(i);
  return -1;
}

std::vector<double> CsvTable::column(const std::string& name) const {
  const int c = col(name);
  if (c < 0) throw std::runtime_error("csv: no column named " + name);
  std::vector<double> out;
  out.reserve(rows.size());
  for (const auto& r : rows) out.push_back(r[static_cast<std::size_t>(c)]);
  return out;
}

CsvTable read_csv(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("read_csv: cannot open " + path);
  CsvTable table;
  std::string line;
  if (!std::getline(in, line)) throw std::runtime_error("read_csv: empty file " + path);
  std::istringstream hs(line);
  std::string cell;
  while (std::getline(hs, cell, ',')) table.columns.push_back(cell);
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    std::istringstream ls(line);
    std::vector<double> row;
    while (std::getline(ls, cell, ',')) row.push_back(std::stod(cell));
    if (row.size() != table.columns.size())
      throw std::runtime_error("read_csv: ragged row in " + path);
    table.rows.push_back(std::move(row));
  }
  return table;
}

namespace {

const char* kPalette[6] = {"#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#ff7f0e", "#8c564b"};

std::string fmt(double v) {
  std::ostringstream os;
  os.precision(6);
  os << v;
  return os.str();
}

}  // namespace

void write_svg_plot(const std::string& path, const std::string& title, const std::string& xlabel,
                    const std::string& ylabel, const std::vector<Series>& series,
                    bool equal_aspect) {
  double xmin = 0, xmax = 1, ymin = 0, ymax = 1;
  bool first = true;
  for (const Series& s : series) {
    for (std::size_t i = 0; i < s.x.size(); ++i) {
      if (first) {
        xmin = xmax = s.x[i];
        ymin = ymax = s.y[i];
        first = false;
      }
      xmin = std::min(xmin, s.x[i]);
      xmax = std::max(xmax, s.x[i]);
      ymin = std::min(ymin, s.y[i]);
      ymax = std::max(ymax, s.y[i]);
    }
  }
  if (xmax - xmin < 1e-12) xmax = xmin + 1.0;
  if (ymax - ymin < 1e-12) ymax = ymin + 1.0;
  if (equal_aspect) {
    const double span = std::max(xmax - xmin, ymax - ymin);
    const double cx = 0.5 * (xmin + xmax), cy = 0.5 * (ymin + ymax);
    xmin = cx - span / 2;
    xmax = cx + span / 2;
    ymin = cy - span / 2;
    ymax = cy + span / 2;
  }

  const int width = 640, height = 440;
  const int ml = 70, mr = 20, mt = 40, mb = 50;
  const auto px = [&](double x) {
    return ml + (x - xmin) / (xmax - xmin) * (width - ml - mr);
  };
  const auto py = [&](double y) {
    return height - mb - (y - ymin) / (ymax - ymin) * (height - mt - mb);
  };

  std::ofstream out(path);
  if (!out) throw std::runtime_error("write_svg_plot: cannot open " + path);
  out << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << width << "\" height=\"" << height
      << "\" viewBox=\"0 0 " << width << " " << height << "\">\n";
  out << "<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n";
  out << "<text x=\"" << width / 2 << "\" y=\"22\" text-anchor=\"middle\" font-size=\"15\">"
      << title << "</text>\n";
  // axes
  out << "<line x1=\"" << ml << "\" y1=\"" << height - mb << "\" x2=\"" << width - mr << "\" y2=\""
      << height - mb << "\" stroke=\"black\"/>\n";
  out << "<line x1=\"" << ml << "\" y1=\"" << mt << "\" x2=\"" << ml << "\" y2=\"" << height - mb
      << "\" stroke=\"black\"/>\n";
  for (int i = 0; i <= 4; ++i) {
    const double xv = xmin + (xmax - xmin) * i / 4.0;
    const double yv = ymin + (ymax - ymin) * i / 4.0;
    out << "<text x=\"" << px(xv) << "\" y=\"" << height - mb + 18
        << "\" text-anchor=\"middle\" font-size=\"11\">" << fmt(xv) << "</text>\n";
    out << "<text x=\"" << ml - 8 << "\" y=\"" << py(yv) + 4
        << "\" text-anchor=\"end\" font-size=\"11\">" << fmt(yv) << "</text>\n";
  }
  out << "<text x=\"" << width / 2 << "\" y=\"" << height - 12
      << "\" text-anchor=\"middle\" font-size=\"12\">" << xlabel << "</text>\n";
  out << "<text x=\"16\" y=\"" << height / 2
      << "\" text-anchor=\"middle\" font-size=\"12\" transform=\"rotate(-90 16 " << height / 2
      << ")\">" << ylabel << "</text>\n";

  int color = 0;
  int legend_y = mt + 6;
  for (const Series& s : series) {
    const char* c = kPalette[color % 6];
    out << "<polyline fill=\"none\" stroke=\"" << c << "\" stroke-width=\"1.5\" points=\"";
    for (std::size_t i = 0; i < s.x.size(); ++i)
      out << px(s.x[i]) << "," << py(s.y[i]) << " ";
    out << "\"/>\n";
    if (!s.label.empty()) {
      out << "<line x1=\"" << width - mr - 130 << "\" y1=\"" << legend_y << "\" x2=\""
          << width - mr - 110 << "\" y2=\"" << legend_y << "\" stroke=\"" << c
          << "\" stroke-width=\"2\"/>\n";
      out << "<text x=\"" << width - mr - 104 << "\" y=\"" << legend_y + 4
          << "\" font-size=\"11\">" << s.label << "</text>\n";
      legend_y += 16;
    }
    ++color;
  }
  out << "</svg>\n";
}

}  // namespace mopa
