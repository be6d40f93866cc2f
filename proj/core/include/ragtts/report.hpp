#pragma once

#include <string>
#include <vector>

namespace ragtts {

std::string read_text_file(const std::string& path);
void write_text_file(const std::string& path, const std::string& content);

// fnv1a64 content hash as 16 hex digits; used for the artifact hash listing.
std::string bytes_hash_hex(const std::string& bytes);
std::string file_hash_hex(const std::string& path);

// Deterministic line chart (fixed canvas, fixed precision) for the ablation
// score-vs-parameter plots.
struct ChartSeries {
  std::string name;
  std::vector<std::pair<double, double>> points;
};

std::string line_chart_svg(const std::string& title, const std::string& x_label,
                           const std::string& y_label, const std::vector<ChartSeries>& series);

}  // namespace ragtts
