#pragma once

#include <filesystem>
#include <string>
#include <vector>

#include <json.hpp>

#include "psfinv/stats.hpp"

namespace psfinv::report {

// Shortest round-trip decimal; infinities print as "inf"/"-inf", NaN as "nan".
std::string num(double v);
// Fixed six decimals, used for wall times in seconds.
std::string seconds(double v);

// JSON number, or the strings "inf"/"-inf"/"nan" for non-finite values.
nlohmann::json json_num(double v);

struct Table {
  std::vector<std::string> header;
  std::vector<std::vector<std::string>> rows;
};

void write_csv(const Table& t, const std::filesystem::path& path);
void write_json(const nlohmann::json& j, const std::filesystem::path& path);
void write_text(const std::string& text, const std::filesystem::path& path);

struct Series {
  std::string label;
  std::vector<double> ys;
};

// Line chart with one polyline per series; `log_y` plots log10 of positive values.
std::string svg_line_chart(const std::string& title, const std::string& x_label, const std::vector<double>& xs,
                           const std::vector<Series>& series, bool log_y = false);
// Bars for one value per category.
std::string svg_bar_chart(const std::string& title, const std::vector<std::string>& categories,
                          const std::vector<double>& values);
// Correlation matrix as a shaded table (blue negative, red positive).
std::string svg_heat_table(const std::string& title, const stats::CorrelationMatrix& m);

nlohmann::json to_json(const stats::CorrelationMatrix& m);

}  // namespace psfinv::report
