#include "psfinv/report.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <iterator>
#include <limits>
#include <sstream>

#include "psfinv/errors.hpp"

namespace psfinv::report {

namespace fs = std::filesystem;

std::string num(double v) {
  if (std::isnan(v)) return "nan";
  if (std::isinf(v)) return v > 0 ? "inf" : "-inf";
  char buf[64];
  const auto res = std::to_chars(buf, buf + sizeof buf, v);
  return std::string(buf, res.ptr);
}

std::string seconds(double v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.6f", v);
  return buf;
}

nlohmann::json json_num(double v) {
  if (std::isfinite(v)) return v;
  return num(v);
}

namespace {

std::ofstream open_out(const fs::path& path) {
  if (path.has_parent_path()) fs::create_directories(path.parent_path());
  std::ofstream out(path, std::ios::binary);
  if (!out) throw ConfigError("cannot write " + path.string());
  return out;
}

std::string csv_field(const std::string& s) {
  if (s.find_first_of(",\"\n") == std::string::npos) return s;
  std::string q = "\"";
  for (char c : s) {
    if (c == '"') q += '"';
    q += c;
  }
  return q + "\"";
}

std::string xml_escape(const std::string& s) {
  std::string o;
  for (char c : s) {
    switch (c) {
      case '<': o += "&lt;"; break;
      case '>': o += "&gt;"; break;
      case '&': o += "&amp;"; break;
      case '"': o += "&quot;"; break;
      default: o += c;
    }
  }
  return o;
}

std::string fmt(double v, int prec = 3) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.*g", prec, v);
  return buf;
}

constexpr const char* kPalette[] = {"#1f77b4", "#d62728", "#2ca02c", "#ff7f0e", "#9467bd", "#8c564b"};

}  // namespace

void write_csv(const Table& t, const fs::path& path) {
  auto out = open_out(path);
  auto line = [&](const std::vector<std::string>& cells) {
    for (std::size_t i = 0; i < cells.size(); ++i) out << (i ? "," : "") << csv_field(cells[i]);
    out << '\n';
  };
  line(t.header);
  for (const auto& r : t.rows) {
    if (r.size() != t.header.size()) throw InvalidInput("csv: row width does not match header");
    line(r);
  }
}

void write_json(const nlohmann::json& j, const fs::path& path) { open_out(path) << j.dump(2) << '\n'; }

void write_text(const std::string& text, const fs::path& path) { open_out(path) << text; }

std::string svg_line_chart(const std::string& title, const std::string& x_label, const std::vector<double>& xs,
                           const std::vector<Series>& series, bool log_y) {
  constexpr double W = 640, H = 400, L = 70, R = 160, T = 40, B = 50;
  auto ty = [&](double y) { return log_y ? (y > 0 ? std::log10(y) : std::nan("")) : y; };
  double xmin = std::numeric_limits<double>::infinity(), xmax = -std::numeric_limits<double>::infinity(), ymin = std::numeric_limits<double>::infinity(), ymax = -std::numeric_limits<double>::infinity();
  for (double x : xs) xmin = std::min(xmin, x), xmax = std::max(xmax, x);
  for (const auto& s : series)
    for (double y : s.ys)
      if (std::isfinite(ty(y))) ymin = std::min(ymin, ty(y)), ymax = std::max(ymax, ty(y));
  if (!(xmax > xmin)) xmax = xmin + 1;
  if (!(ymax > ymin)) ymax = ymin + 1;
  auto px = [&](double x) { return L + (x - xmin) / (xmax - xmin) * (W - L - R); };
  auto py = [&](double y) { return H - B - (y - ymin) / (ymax - ymin) * (H - T - B); };
  std::ostringstream o;
  o << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << W << "\" height=\"" << H << "\">\n";
  o << "<text x=\"" << W / 2 << "\" y=\"20\" text-anchor=\"middle\" font-size=\"14\">" << xml_escape(title) << "</text>\n";
  o << "<line x1=\"" << L << "\" y1=\"" << H - B << "\" x2=\"" << W - R << "\" y2=\"" << H - B << "\" stroke=\"black\"/>\n";
  o << "<line x1=\"" << L << "\" y1=\"" << T << "\" x2=\"" << L << "\" y2=\"" << H - B << "\" stroke=\"black\"/>\n";
  o << "<text x=\"" << (L + W - R) / 2 << "\" y=\"" << H - 10 << "\" text-anchor=\"middle\" font-size=\"12\">"
    << xml_escape(x_label) << "</text>\n";
  for (double x : xs)
    o << "<text x=\"" << px(x) << "\" y=\"" << H - B + 16 << "\" text-anchor=\"middle\" font-size=\"10\">" << fmt(x)
      << "</text>\n";
  for (int t = 0; t <= 4; ++t) {
    const double y = ymin + (ymax - ymin) * t / 4;
    o << "<text x=\"" << L - 6 << "\" y=\"" << py(y) + 3 << "\" text-anchor=\"end\" font-size=\"10\">"
      << (log_y ? "1e" + fmt(y, 2) : fmt(y)) << "</text>\n";
  }
  for (std::size_t s = 0; s < series.size(); ++s) {
    const char* color = kPalette[s % std::size(kPalette)];
    std::string pts;
    for (std::size_t i = 0; i < xs.size() && i < series[s].ys.size(); ++i) {
      const double y = ty(series[s].ys[i]);
      if (!std::isfinite(y)) continue;
      pts += fmt(px(xs[i]), 6) + "," + fmt(py(y), 6) + " ";
      o << "<circle cx=\"" << px(xs[i]) << "\" cy=\"" << py(y) << "\" r=\"3\" fill=\"" << color << "\"/>\n";
    }
    o << "<polyline fill=\"none\" stroke=\"" << color << "\" points=\"" << pts << "\"/>\n";
    o << "<text x=\"" << W - R + 10 << "\" y=\"" << T + 16 * (s + 1) << "\" font-size=\"11\" fill=\"" << color << "\">"
      << xml_escape(series[s].label) << "</text>\n";
  }
  o << "</svg>\n";
  return o.str();
}

std::string svg_bar_chart(const std::string& title, const std::vector<std::string>& categories,
                          const std::vector<double>& values) {
  constexpr double W = 640, H = 400, L = 70, T = 40, B = 60;
  double vmax = 0;
  for (double v : values)
    if (std::isfinite(v)) vmax = std::max(vmax, std::abs(v));
  if (vmax == 0) vmax = 1;
  const double slot = (W - L - 20) / std::max<std::size_t>(1, categories.size());
  std::ostringstream o;
  o << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << W << "\" height=\"" << H << "\">\n";
  o << "<text x=\"" << W / 2 << "\" y=\"20\" text-anchor=\"middle\" font-size=\"14\">" << xml_escape(title) << "</text>\n";
  o << "<line x1=\"" << L << "\" y1=\"" << H - B << "\" x2=\"" << W - 20 << "\" y2=\"" << H - B << "\" stroke=\"black\"/>\n";
  for (std::size_t i = 0; i < categories.size(); ++i) {
    const double v = i < values.size() && std::isfinite(values[i]) ? values[i] : 0;
    const double h = std::abs(v) / vmax * (H - T - B);
    const double x = L + slot * i + slot * 0.15;
    o << "<rect x=\"" << x << "\" y=\"" << H - B - h << "\" width=\"" << slot * 0.7 << "\" height=\"" << h
      << "\" fill=\"" << kPalette[i % std::size(kPalette)] << "\"/>\n";
    o << "<text x=\"" << x + slot * 0.35 << "\" y=\"" << H - B - h - 4 << "\" text-anchor=\"middle\" font-size=\"10\">"
      << fmt(i < values.size() ? values[i] : 0, 4) << "</text>\n";
    o << "<text x=\"" << x + slot * 0.35 << "\" y=\"" << H - B + 16 << "\" text-anchor=\"middle\" font-size=\"11\">"
      << xml_escape(categories[i]) << "</text>\n";
  }
  o << "</svg>\n";
  return o.str();
}

std::string svg_heat_table(const std::string& title, const stats::CorrelationMatrix& m) {
  const std::size_t n = m.labels.size();
  constexpr double cell = 70, L = 110, T = 60;
  const double W = L + cell * n + 20, H = T + cell * n + 20;
  std::ostringstream o;
  o << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << W << "\" height=\"" << H << "\">\n";
  o << "<text x=\"" << W / 2 << "\" y=\"20\" text-anchor=\"middle\" font-size=\"14\">" << xml_escape(title) << "</text>\n";
  for (std::size_t j = 0; j < n; ++j)
    o << "<text x=\"" << L + cell * (j + 0.5) << "\" y=\"" << T - 8 << "\" text-anchor=\"middle\" font-size=\"10\">"
      << xml_escape(m.labels[j]) << "</text>\n";
  for (std::size_t i = 0; i < n; ++i) {
    o << "<text x=\"" << L - 6 << "\" y=\"" << T + cell * (i + 0.5) + 4 << "\" text-anchor=\"end\" font-size=\"10\">"
      << xml_escape(m.labels[i]) << "</text>\n";
    for (std::size_t j = 0; j < n; ++j) {
      const double v = std::clamp(m.values[i][j], -1.0, 1.0);
      const int fade = static_cast<int>(std::lround(255 * (1 - std::abs(v))));
      char color[16];
      std::snprintf(color, sizeof color, v >= 0 ? "#ff%02x%02x" : "#%02x%02xff", fade, fade);
      o << "<rect x=\"" << L + cell * j << "\" y=\"" << T + cell * i << "\" width=\"" << cell << "\" height=\"" << cell
        << "\" fill=\"" << color << "\" stroke=\"white\"/>\n";
      o << "<text x=\"" << L + cell * (j + 0.5) << "\" y=\"" << T + cell * (i + 0.5) + 4
        << "\" text-anchor=\"middle\" font-size=\"12\">" << fmt(m.values[i][j], 2) << "</text>\n";
    }
  }
  o << "</svg>\n";
  return o.str();
}

nlohmann::json to_json(const stats::CorrelationMatrix& m) {
  nlohmann::json j;
  j["labels"] = m.labels;
  j["values"] = nlohmann::json::array();
  for (const auto& row : m.values) {
    nlohmann::json r = nlohmann::json::array();
    for (double v : row) r.push_back(json_num(v));
    j["values"].push_back(r);
  }
  return j;
}

}  // namespace psfinv::report
