#pragma once

// Static SVG figures: labeled scatter plots of 2-D opinion points and
// error-vs-k curves with percentile bands.

#include <algorithm>
#include <cstdio>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "relop/lnp.hpp"

namespace relop {

struct ScatterPoint {
  std::string id;
  double x = 0.0;
  double y = 0.0;
  int cls = 0;
  std::optional<double> size;  // circle-size channel
};

struct PlotStyle {
  int width = 640;
  int height = 480;
  int margin = 40;
  double min_radius = 3.0;
  double max_radius = 12.0;
  std::string title;
  std::vector<std::string> class_names{"clinton", "trump"};
  std::vector<std::string> colors{"#1f5fbf", "#c8102e", "#2ca02c", "#9467bd", "#8c564b", "#7f7f7f"};
};

namespace svg_detail {

inline std::string num(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.2f", v);
  std::string s(buf);
  return s == "-0.00" ? "0.00" : s;
}

inline std::string escape(std::string_view s) {
  std::string out;
  for (char c : s) {
    switch (c) {
      case '&': out += "&amp;"; break;
      case '<': out += "&lt;"; break;
      case '>': out += "&gt;"; break;
      case '"': out += "&quot;"; break;
      default: out += c;
    }
  }
  return out;
}

inline std::string header(const PlotStyle& st) {
  std::string s = "<?xml version=\"1.0\" encoding=\"UTF-8\"?>\n";
  s += "<svg xmlns=\"http://www.w3.org/2000/svg\" version=\"1.1\" width=\"" + std::to_string(st.width) +
       "\" height=\"" + std::to_string(st.height) + "\" viewBox=\"0 0 " + std::to_string(st.width) + " " +
       std::to_string(st.height) + "\">\n";
  s += "<rect x=\"0\" y=\"0\" width=\"" + std::to_string(st.width) + "\" height=\"" + std::to_string(st.height) +
       "\" fill=\"white\"/>\n";
  if (!st.title.empty())
    s += "<text class=\"title\" x=\"" + num(st.width / 2.0) + "\" y=\"20\" text-anchor=\"middle\" font-family=\"sans-serif\" font-size=\"14\">" +
         escape(st.title) + "</text>\n";
  return s;
}

inline const std::string& color(const PlotStyle& st, int cls) {
  return st.colors[static_cast<std::size_t>(cls) % st.colors.size()];
}

struct Range {
  double lo = 0.0, hi = 1.0;
  void pad() {
    if (hi - lo <= 0.0) {
      lo -= 1.0;
      hi += 1.0;
    }
  }
};

}  // namespace svg_detail

/// Scatter with unlabeled axes, an id label per point, a class legend and
/// circle radii scaled linearly from the size channel.
inline std::string plot_scatter(const std::vector<ScatterPoint>& pts, const PlotStyle& st = {}) {
  using namespace svg_detail;
  Range xr{INFINITY, -INFINITY}, yr{INFINITY, -INFINITY}, sr{INFINITY, -INFINITY};
  for (const auto& p : pts) {
    xr.lo = std::min(xr.lo, p.x);
    xr.hi = std::max(xr.hi, p.x);
    yr.lo = std::min(yr.lo, p.y);
    yr.hi = std::max(yr.hi, p.y);
    if (p.size) {
      sr.lo = std::min(sr.lo, *p.size);
      sr.hi = std::max(sr.hi, *p.size);
    }
  }
  if (pts.empty()) xr = yr = Range{};
  xr.pad();
  yr.pad();
  const double m = st.margin, w = st.width - 2.0 * m, h = st.height - 2.0 * m;
  auto px = [&](double x) { return m + (x - xr.lo) / (xr.hi - xr.lo) * w; };
  auto py = [&](double y) { return st.height - m - (y - yr.lo) / (yr.hi - yr.lo) * h; };
  auto radius = [&](const ScatterPoint& p) {
    if (!p.size || !(sr.hi > sr.lo)) return 0.5 * (st.min_radius + st.max_radius);
    return st.min_radius + (*p.size - sr.lo) / (sr.hi - sr.lo) * (st.max_radius - st.min_radius);
  };

  std::string s = header(st);
  // Axes through the frame without ticks or labels: MDS axes carry no meaning.
  s += "<g stroke=\"#999999\" stroke-width=\"1\">\n";
  s += "<line x1=\"" + num(m) + "\" y1=\"" + num(st.height - m) + "\" x2=\"" + num(st.width - m) + "\" y2=\"" +
       num(st.height - m) + "\"/>\n";
  s += "<line x1=\"" + num(m) + "\" y1=\"" + num(m) + "\" x2=\"" + num(m) + "\" y2=\"" + num(st.height - m) + "\"/>\n";
  s += "</g>\n";
  for (const auto& p : pts) {
    s += "<circle cx=\"" + num(px(p.x)) + "\" cy=\"" + num(py(p.y)) + "\" r=\"" + num(radius(p)) + "\" fill=\"" +
         color(st, p.cls) + "\" fill-opacity=\"0.6\" stroke=\"" + color(st, p.cls) + "\"/>\n";
    s += "<text class=\"label\" x=\"" + num(px(p.x)) + "\" y=\"" + num(py(p.y) - radius(p) - 2.0) +
         "\" text-anchor=\"middle\" font-family=\"sans-serif\" font-size=\"10\">" + escape(p.id) + "</text>\n";
  }
  std::vector<int> classes;
  for (const auto& p : pts) classes.push_back(p.cls);
  std::sort(classes.begin(), classes.end());
  classes.erase(std::unique(classes.begin(), classes.end()), classes.end());
  double ly = m;
  for (int c : classes) {
    const std::string name = static_cast<std::size_t>(c) < st.class_names.size()
                                 ? st.class_names[static_cast<std::size_t>(c)]
                                 : "class " + std::to_string(c);
    s += "<rect class=\"legend\" x=\"" + num(st.width - m - 90.0) + "\" y=\"" + num(ly - 8.0) +
         "\" width=\"10\" height=\"10\" fill=\"" + color(st, c) + "\"/>\n";
    s += "<text class=\"legend\" x=\"" + num(st.width - m - 75.0) + "\" y=\"" + num(ly) +
         "\" font-family=\"sans-serif\" font-size=\"11\">" + escape(name) + "</text>\n";
    ly += 16.0;
  }
  s += "</svg>\n";
  return s;
}

/// Median error vs k per metric for one label count, with the 2.5-97.5
/// percentile band shaded behind each line.
inline std::string plot_error_curves(const std::vector<SweepSummary>& rows, int label_count, const PlotStyle& st = {}) {
  using namespace svg_detail;
  std::map<Metric, std::vector<SweepSummary>> by_metric;
  Range kr{INFINITY, -INFINITY}, er{0.0, -INFINITY};
  for (const auto& r : rows) {
    if (r.label_count != label_count) continue;
    by_metric[r.metric].push_back(r);
    kr.lo = std::min(kr.lo, static_cast<double>(r.k));
    kr.hi = std::max(kr.hi, static_cast<double>(r.k));
    er.hi = std::max(er.hi, r.upper);
  }
  if (by_metric.empty()) kr = er = Range{};
  kr.pad();
  if (!(er.hi > er.lo)) er.hi = er.lo + 1.0;
  const double m = st.margin, w = st.width - 2.0 * m, h = st.height - 2.0 * m;
  auto px = [&](double k) { return m + (k - kr.lo) / (kr.hi - kr.lo) * w; };
  auto py = [&](double e) { return st.height - m - (e - er.lo) / (er.hi - er.lo) * h; };

  std::string s = header(st);
  s += "<g stroke=\"#999999\" stroke-width=\"1\">\n";
  s += "<line x1=\"" + num(m) + "\" y1=\"" + num(st.height - m) + "\" x2=\"" + num(st.width - m) + "\" y2=\"" +
       num(st.height - m) + "\"/>\n";
  s += "<line x1=\"" + num(m) + "\" y1=\"" + num(m) + "\" x2=\"" + num(m) + "\" y2=\"" + num(st.height - m) + "\"/>\n";
  s += "</g>\n";
  s += "<text class=\"axis\" x=\"" + num(st.width / 2.0) + "\" y=\"" + num(st.height - 8.0) +
       "\" text-anchor=\"middle\" font-family=\"sans-serif\" font-size=\"11\">k</text>\n";
  s += "<text class=\"axis\" x=\"12\" y=\"" + num(st.height / 2.0) +
       "\" text-anchor=\"middle\" font-family=\"sans-serif\" font-size=\"11\" transform=\"rotate(-90 12 " +
       num(st.height / 2.0) + ")\">errors</text>\n";
  int idx = 0;
  for (auto& [metric, pts] : by_metric) {
    std::sort(pts.begin(), pts.end(), [](const auto& a, const auto& b) { return a.k < b.k; });
    const std::string& col = st.colors[static_cast<std::size_t>(idx) % st.colors.size()];
    std::string band, line;
    for (const auto& p : pts) band += num(px(p.k)) + "," + num(py(p.upper)) + " ";
    for (auto it = pts.rbegin(); it != pts.rend(); ++it) band += num(px(it->k)) + "," + num(py(it->lower)) + " ";
    for (const auto& p : pts) line += num(px(p.k)) + "," + num(py(p.median)) + " ";
    band.pop_back();
    line.pop_back();
    s += "<polygon class=\"band\" points=\"" + band + "\" fill=\"" + col + "\" fill-opacity=\"0.2\" stroke=\"none\"/>\n";
    s += "<polyline class=\"median\" points=\"" + line + "\" fill=\"none\" stroke=\"" + col +
         "\" stroke-width=\"2\"/>\n";
    s += "<text class=\"legend\" x=\"" + num(st.width - m - 90.0) + "\" y=\"" + num(m + 16.0 * idx) + "\" fill=\"" +
         col + "\" font-family=\"sans-serif\" font-size=\"11\">" + to_string(metric) + "</text>\n";
    ++idx;
  }
  s += "</svg>\n";
  return s;
}

}  // namespace relop
