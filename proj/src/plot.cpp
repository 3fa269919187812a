#include "mirage/plot.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <map>
#include <sstream>
#include <vector>

#include "mirage/errors.hpp"

namespace mirage::plot {

namespace {

constexpr double kWidth = 800, kHeight = 500;
constexpr double kLeft = 70, kRight = 160, kTop = 30, kBottom = 50;
constexpr int kBins = 40;

constexpr const char* kPalette[] = {"#1f77b4", "#ff7f0e", "#2ca02c", "#d62728", "#9467bd", "#8c564b",
                                    "#e377c2", "#7f7f7f", "#bcbd22", "#17becf", "#393b79", "#637939",
                                    "#8c6d31", "#843c39", "#7b4173", "#3182bd"};

std::string num(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.2f", v);
  return buf;
}

std::string label(double v) {
  char buf[32];
  if (std::abs(v) >= 1e5) std::snprintf(buf, sizeof buf, "%.3g", v);
  else std::snprintf(buf, sizeof buf, "%.6g", v);
  return buf;
}

struct Table {
  std::vector<std::string> header;
  std::vector<std::vector<std::string>> rows;

  int column(std::string_view name) const {
    for (std::size_t i = 0; i < header.size(); ++i)
      if (header[i] == name) return static_cast<int>(i);
    return -1;
  }
};

Table parse_csv(const std::string& text) {
  Table t;
  std::istringstream in(text);
  std::string line;
  while (std::getline(in, line)) {
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty() || line[0] == '#') continue;
    std::vector<std::string> cells;
    std::string cell;
    std::istringstream ls(line);
    while (std::getline(ls, cell, ',')) cells.push_back(cell);
    if (t.header.empty()) t.header = std::move(cells);
    else t.rows.push_back(std::move(cells));
  }
  if (t.rows.empty()) throw ArgumentError("no data rows to plot");
  for (const auto& r : t.rows)
    if (r.size() != t.header.size()) throw ConfigError("CSV row has " + std::to_string(r.size()) +
                                                       " cells, header has " + std::to_string(t.header.size()));
  return t;
}

double to_number(const std::string& s) {
  char* end = nullptr;
  const double v = std::strtod(s.c_str(), &end);
  if (s.empty() || *end != '\0') throw ConfigError("non-numeric cell '" + s + "'");
  return v;
}

struct Series {
  std::string name;
  std::vector<std::pair<double, double>> points;
};

class Canvas {
 public:
  Canvas(double xmin, double xmax, double ymin, double ymax, bool log_x)
      : xmin_(xmin), xmax_(xmax), ymin_(ymin), ymax_(ymax), log_x_(log_x) {
    if (xmax_ <= xmin_) xmax_ = xmin_ + 1;
    if (ymax_ <= ymin_) ymax_ = ymin_ + 1;
  }

  double px(double x) const {
    const double a = log_x_ ? std::log2(xmin_) : xmin_;
    const double b = log_x_ ? std::log2(xmax_) : xmax_;
    const double v = log_x_ ? std::log2(x) : x;
    return kLeft + (v - a) / (b - a) * (kWidth - kLeft - kRight);
  }
  double py(double y) const { return kHeight - kBottom - (y - ymin_) / (ymax_ - ymin_) * (kHeight - kTop - kBottom); }

  std::string render(const std::vector<Series>& series, const std::string& title, const std::string& xlab,
                     const std::string& ylab, const std::vector<double>& xticks) const {
    std::ostringstream o;
    o << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << kWidth << "\" height=\"" << kHeight
      << "\" viewBox=\"0 0 " << kWidth << ' ' << kHeight << "\" font-family=\"sans-serif\" font-size=\"11\">\n";
    o << "<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n";
    o << "<text x=\"" << num(kWidth / 2) << "\" y=\"18\" text-anchor=\"middle\" font-size=\"14\">" << title
      << "</text>\n";
    const double x0 = kLeft, x1 = kWidth - kRight, y0 = kHeight - kBottom, y1 = kTop;
    o << "<path d=\"M" << num(x0) << ' ' << num(y1) << " L" << num(x0) << ' ' << num(y0) << " L" << num(x1)
      << ' ' << num(y0) << "\" stroke=\"black\" fill=\"none\"/>\n";
    for (double x : xticks) {
      o << "<line x1=\"" << num(px(x)) << "\" y1=\"" << num(y0) << "\" x2=\"" << num(px(x)) << "\" y2=\""
        << num(y0 + 4) << "\" stroke=\"black\"/>";
      o << "<text x=\"" << num(px(x)) << "\" y=\"" << num(y0 + 16) << "\" text-anchor=\"middle\">" << label(x)
        << "</text>\n";
    }
    for (int i = 0; i <= 4; ++i) {
      const double y = ymin_ + (ymax_ - ymin_) * i / 4;
      o << "<line x1=\"" << num(x0 - 4) << "\" y1=\"" << num(py(y)) << "\" x2=\"" << num(x0) << "\" y2=\""
        << num(py(y)) << "\" stroke=\"black\"/>";
      o << "<text x=\"" << num(x0 - 6) << "\" y=\"" << num(py(y) + 4) << "\" text-anchor=\"end\">" << label(y)
        << "</text>\n";
    }
    o << "<text x=\"" << num((x0 + x1) / 2) << "\" y=\"" << num(kHeight - 12) << "\" text-anchor=\"middle\">"
      << xlab << "</text>\n";
    o << "<text transform=\"translate(16 " << num((y0 + y1) / 2) << ") rotate(-90)\" text-anchor=\"middle\">"
      << ylab << "</text>\n";
    for (std::size_t s = 0; s < series.size(); ++s) {
      const char* color = kPalette[s % std::size(kPalette)];
      o << "<polyline fill=\"none\" stroke-width=\"1.5\" stroke=\"" << color << "\" points=\"";
      for (std::size_t i = 0; i < series[s].points.size(); ++i) {
        if (i) o << ' ';
        o << num(px(series[s].points[i].first)) << ',' << num(py(series[s].points[i].second));
      }
      o << "\"/>\n";
      const double ly = kTop + 14.0 * static_cast<double>(s);
      o << "<line x1=\"" << num(x1 + 10) << "\" y1=\"" << num(ly) << "\" x2=\"" << num(x1 + 30) << "\" y2=\""
        << num(ly) << "\" stroke=\"" << color << "\" stroke-width=\"2\"/>";
      o << "<text x=\"" << num(x1 + 35) << "\" y=\"" << num(ly + 4) << "\">" << series[s].name << "</text>\n";
    }
    o << "</svg>\n";
    return o.str();
  }

 private:
  double xmin_, xmax_, ymin_, ymax_;
  bool log_x_;
};

std::string histogram_overlay(const Table& t) {
  const int value_col = t.column("miss_count");
  int group_col = t.column("victim_accesses");
  std::string group_name = "victim_accesses";
  if (group_col < 0) {
    group_col = t.column("bit_sent");
    group_name = "bit_sent";
  }
  if (value_col < 0 || group_col < 0)
    throw ConfigError("histogram_overlay needs a miss_count column and a victim_accesses or bit_sent column");
  std::map<double, std::vector<double>> groups;
  double lo = INFINITY, hi = -INFINITY;
  for (const auto& r : t.rows) {
    const double v = to_number(r[static_cast<std::size_t>(value_col)]);
    groups[to_number(r[static_cast<std::size_t>(group_col)])].push_back(v);
    lo = std::min(lo, v);
    hi = std::max(hi, v);
  }
  const double width = std::max(1.0, std::ceil((hi - lo + 1) / kBins));
  std::vector<Series> series;
  double ymax = 0;
  for (const auto& [g, xs] : groups) {
    std::vector<double> counts(kBins, 0.0);
    for (double x : xs) counts[std::min<std::size_t>(kBins - 1, static_cast<std::size_t>((x - lo) / width))] += 1;
    Series s{group_name + "=" + label(g), {}};
    for (int b = 0; b < kBins; ++b) {
      const double frac = counts[b] / static_cast<double>(xs.size());
      ymax = std::max(ymax, frac);
      s.points.emplace_back(lo + (b + 0.5) * width, frac);
    }
    series.push_back(std::move(s));
  }
  const double xmax = lo + kBins * width;
  Canvas c(lo, xmax, 0, ymax, false);
  std::vector<double> ticks;
  for (int i = 0; i <= 5; ++i) ticks.push_back(std::round(lo + (xmax - lo) * i / 5));
  return c.render(series, "Receiver miss-count distributions", "miss count", "fraction of trials", ticks);
}

std::string line_sweep(const Table& t) {
  const int x_col = t.column("buckets");
  const int y_col = t.column("throws_until_first_spill");
  const int lb_col = t.column("load_balanced");
  if (x_col < 0 || y_col < 0 || lb_col < 0)
    throw ConfigError("line_sweep needs buckets, load_balanced and throws_until_first_spill columns");
  std::map<std::string, std::map<double, std::pair<double, int>>> acc;
  for (const auto& r : t.rows) {
    const std::string& y = r[static_cast<std::size_t>(y_col)];
    if (y == "NA") continue;
    auto& cell = acc[r[static_cast<std::size_t>(lb_col)]][to_number(r[static_cast<std::size_t>(x_col)])];
    cell.first += to_number(y);
    cell.second += 1;
  }
  if (acc.empty()) throw ArgumentError("no spills recorded; nothing to plot");
  std::vector<Series> series;
  double xmin = INFINITY, xmax = -INFINITY, ymax = 0;
  for (const auto& [lb, pts] : acc) {
    Series s{lb == "1" ? "load balanced" : "single choice", {}};
    for (const auto& [x, sum] : pts) {
      const double mean = sum.first / sum.second;
      s.points.emplace_back(x, mean);
      xmin = std::min(xmin, x);
      xmax = std::max(xmax, x);
      ymax = std::max(ymax, mean);
    }
    series.push_back(std::move(s));
  }
  const bool log_x = xmin > 0;
  Canvas c(xmin, xmax, 0, ymax, log_x);
  std::vector<double> ticks;
  for (const auto& s : series)
    for (const auto& p : s.points)
      if (std::find(ticks.begin(), ticks.end(), p.first) == ticks.end()) ticks.push_back(p.first);
  std::sort(ticks.begin(), ticks.end());
  return c.render(series, "Throws until first bucket spill", "buckets", "mean throws", ticks);
}

}  // namespace

PlotKind parse_kind(std::string_view name) {
  if (name == "histogram_overlay") return PlotKind::HistogramOverlay;
  if (name == "line_sweep") return PlotKind::LineSweep;
  throw ArgumentError("unknown plot kind '" + std::string(name) + "' (histogram_overlay|line_sweep)");
}

std::string render_svg(const std::string& csv_text, PlotKind kind) {
  const Table t = parse_csv(csv_text);
  return kind == PlotKind::HistogramOverlay ? histogram_overlay(t) : line_sweep(t);
}

void emit_plot(const std::filesystem::path& csv_input, PlotKind kind, const std::filesystem::path& out_svg) {
  std::ifstream in(csv_input, std::ios::binary);
  if (!in) throw ArgumentError("cannot read " + csv_input.string());
  std::ostringstream buf;
  buf << in.rdbuf();
  const std::string svg = render_svg(buf.str(), kind);
  std::ofstream out(out_svg, std::ios::binary);
  if (!out) throw ArgumentError("cannot write " + out_svg.string());
  out << svg;
}

}  // namespace mirage::plot
