#include "ragtts/report.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <sstream>

#include "ragtts/errors.hpp"
#include "ragtts/rng.hpp"

namespace ragtts {

std::string read_text_file(const std::string& path) {
  std::ifstream f(path, std::ios::binary);
  if (!f) throw DataError("cannot open file: " + path);
  std::ostringstream os;
  os << f.rdbuf();
  return os.str();
}

void write_text_file(const std::string& path, const std::string& content) {
  std::ofstream f(path, std::ios::binary);
  if (!f) throw DataError("cannot open file for writing: " + path);
  f << content;
  if (!f) throw DataError("failed writing file: " + path);
}

std::string bytes_hash_hex(const std::string& bytes) {
  const uint64_t h = fnv1a64(bytes.data(), bytes.size());
  char buf[17];
  std::snprintf(buf, sizeof(buf), "%016llx", static_cast<unsigned long long>(h));
  return buf;
}

std::string file_hash_hex(const std::string& path) {
  return bytes_hash_hex(read_text_file(path));
}

namespace {

std::string fmt(double v) {
  char buf[32];
  std::snprintf(buf, sizeof(buf), "%.3f", v);
  return buf;
}

const char* kSeriesColors[] = {"#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#ff7f0e"};

}  // namespace

std::string line_chart_svg(const std::string& title, const std::string& x_label,
                           const std::string& y_label, const std::vector<ChartSeries>& series) {
  const int width = 640, height = 400;
  const int left = 70, right = 610, top = 50, bottom = 340;

  double xmin = 0, xmax = 1, ymin = 0, ymax = 1;
  bool first = true;
  for (const ChartSeries& s : series) {
    for (const auto& [x, y] : s.points) {
      if (first) {
        xmin = xmax = x;
        ymin = ymax = y;
        first = false;
      }
      xmin = std::min(xmin, x);
      xmax = std::max(xmax, x);
      ymin = std::min(ymin, y);
      ymax = std::max(ymax, y);
    }
  }
  if (xmax == xmin) xmax = xmin + 1.0;
  if (ymax == ymin) ymax = ymin + 1.0;
  const double ypad = 0.05 * (ymax - ymin);
  ymin -= ypad;
  ymax += ypad;

  auto sx = [&](double x) { return left + (x - xmin) / (xmax - xmin) * (right - left); };
  auto sy = [&](double y) { return bottom - (y - ymin) / (ymax - ymin) * (bottom - top); };

  std::ostringstream svg;
  svg << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << width << "\" height=\""
      << height << "\">\n";
  svg << "<rect width=\"" << width << "\" height=\"" << height << "\" fill=\"white\"/>\n";
  svg << "<text x=\"320\" y=\"28\" text-anchor=\"middle\" font-size=\"16\">" << title
      << "</text>\n";
  svg << "<line x1=\"" << left << "\" y1=\"" << bottom << "\" x2=\"" << right << "\" y2=\""
      << bottom << "\" stroke=\"black\"/>\n";
  svg << "<line x1=\"" << left << "\" y1=\"" << top << "\" x2=\"" << left << "\" y2=\"" << bottom
      << "\" stroke=\"black\"/>\n";
  svg << "<text x=\"320\" y=\"380\" text-anchor=\"middle\" font-size=\"12\">" << x_label
      << "</text>\n";
  svg << "<text x=\"18\" y=\"200\" text-anchor=\"middle\" font-size=\"12\" "
         "transform=\"rotate(-90 18 200)\">"
      << y_label << "</text>\n";
  svg << "<text x=\"" << left << "\" y=\"355\" text-anchor=\"middle\" font-size=\"10\">"
      << fmt(xmin) << "</text>\n";
  svg << "<text x=\"" << right << "\" y=\"355\" text-anchor=\"middle\" font-size=\"10\">"
      << fmt(xmax) << "</text>\n";
  svg << "<text x=\"" << left - 8 << "\" y=\"" << bottom + 4
      << "\" text-anchor=\"end\" font-size=\"10\">" << fmt(ymin) << "</text>\n";
  svg << "<text x=\"" << left - 8 << "\" y=\"" << top + 4
      << "\" text-anchor=\"end\" font-size=\"10\">" << fmt(ymax) << "</text>\n";

  for (size_t si = 0; si < series.size(); ++si) {
    const char* color = kSeriesColors[si % 5];
    std::ostringstream pts;
    for (const auto& [x, y] : series[si].points) {
      pts << fmt(sx(x)) << "," << fmt(sy(y)) << " ";
    }
    svg << "<polyline fill=\"none\" stroke=\"" << color << "\" stroke-width=\"2\" points=\""
        << pts.str() << "\"/>\n";
    for (const auto& [x, y] : series[si].points) {
      svg << "<circle cx=\"" << fmt(sx(x)) << "\" cy=\"" << fmt(sy(y)) << "\" r=\"3\" fill=\""
          << color << "\"/>\n";
    }
    svg << "<text x=\"" << right - 120 << "\" y=\"" << top + 16 + 16 * static_cast<int>(si)
        << "\" font-size=\"12\" fill=\"" << color << "\">" << series[si].name << "</text>\n";
  }
  svg << "</svg>\n";
  return svg.str();
}

}  // namespace ragtts
