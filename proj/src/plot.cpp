#include "evidistill/plot.hpp"

#include <algorithm>
#include <cstdio>
#include <map>

#include "evidistill/error.hpp"
#include "evidistill/text.hpp"

namespace evidistill {
namespace {

constexpr const char* kPalette[] = {"#1f77b4", "#ff7f0e", "#2ca02c", "#d62728", "#9467bd",
                                    "#8c564b", "#e377c2", "#7f7f7f", "#bcbd22", "#17becf"};

std::string num(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.2f", v);
  return buf;
}

std::string svg_open(double w, double h) {
  return "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" + num(w) + "\" height=\"" + num(h) +
         "\" viewBox=\"0 0 " + num(w) + " " + num(h) + "\" font-family=\"sans-serif\" font-size=\"11\">\n"
         "<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n";
}

std::string label(double x, double y, const std::string& s, const char* anchor = "middle") {
  return "<text x=\"" + num(x) + "\" y=\"" + num(y) + "\" text-anchor=\"" + anchor + "\">" + s + "</text>\n";
}

std::string line(double x1, double y1, double x2, double y2, const char* stroke = "black") {
  return "<line x1=\"" + num(x1) + "\" y1=\"" + num(y1) + "\" x2=\"" + num(x2) + "\" y2=\"" + num(y2) +
         "\" stroke=\"" + stroke + "\"/>\n";
}

std::vector<std::string> header_of(std::string_view tsv) {
  for (const auto& raw : text::split(tsv, '\n')) {
    auto l = text::trim(raw);
    if (!l.empty()) return text::split(l, '\t');
  }
  return {};
}

}  // namespace

std::vector<SweepRow> parse_sweep_tsv(std::string_view tsv) {
  auto lines = text::split(tsv, '\n');
  const auto header = header_of(tsv);
  auto col = [&](std::string_view name) {
    auto it = std::find(header.begin(), header.end(), name);
    if (it == header.end()) throw Error(ErrorCode::SchemaViolation, "sweep table lacks column '" + std::string(name) + "'");
    return static_cast<std::size_t>(it - header.begin());
  };
  const auto cm = col("m"), cn = col("n"), ca = col("accuracy");
  std::vector<SweepRow> rows;
  bool skipped_header = false;
  for (const auto& raw : lines) {
    auto l = text::trim(raw);
    if (l.empty()) continue;
    if (!skipped_header) {
      skipped_header = true;
      continue;
    }
    auto cells = text::split(l, '\t');
    if (cells.size() <= std::max({cm, cn, ca})) throw Error(ErrorCode::SchemaViolation, "short sweep row: " + l);
    try {
      rows.push_back({std::stoull(cells[cm]), std::stoull(cells[cn]), std::stod(cells[ca])});
    } catch (const std::logic_error&) {
      throw Error(ErrorCode::SchemaViolation, "non-numeric sweep row: " + l);
    }
  }
  return rows;
}

std::string plot_sweep_svg(std::span<const SweepRow> rows) {
  const double W = 640, H = 400, L = 60, R = 120, T = 30, B = 50;
  std::map<std::size_t, std::vector<std::pair<std::size_t, double>>> series;
  std::size_t max_total = 1, min_total = 0;
  bool first = true;
  double lo = 1.0, hi = 0.0;
  for (const auto& r : rows) {
    const auto total = r.m + r.n;
    series[r.n].push_back({total, r.accuracy});
    max_total = first ? total : std::max(max_total, total);
    min_total = first ? total : std::min(min_total, total);
    lo = std::min(lo, r.accuracy);
    hi = std::max(hi, r.accuracy);
    first = false;
  }
  if (rows.empty()) lo = 0.0, hi = 1.0;
  if (hi - lo < 1e-9) lo -= 0.05, hi += 0.05;
  if (max_total == min_total) ++max_total;
  auto sx = [&](double t) { return L + (t - min_total) / double(max_total - min_total) * (W - L - R); };
  auto sy = [&](double a) { return H - B - (a - lo) / (hi - lo) * (H - T - B); };

  std::string svg = svg_open(W, H);
  svg += line(L, H - B, W - R, H - B) + line(L, T, L, H - B);
  for (std::size_t t = min_total; t <= max_total; ++t) {
    svg += line(sx(double(t)), H - B, sx(double(t)), H - B + 4) + label(sx(double(t)), H - B + 16, std::to_string(t));
  }
  for (int k = 0; k <= 4; ++k) {
    const double a = lo + (hi - lo) * k / 4.0;
    svg += line(L - 4, sy(a), L, sy(a)) + label(L - 6, sy(a) + 4, num(a), "end");
  }
  svg += label((L + W - R) / 2, H - 12, "total evidence (m + n)") + label(16, T - 10, "accuracy", "start");
  std::size_t idx = 0;
  for (auto& [n, pts] : series) {
    std::sort(pts.begin(), pts.end());
    const char* color = kPalette[idx % std::size(kPalette)];
    std::string path;
    for (const auto& [t, a] : pts) path += (path.empty() ? "M" : " L") + num(sx(double(t))) + " " + num(sy(a));
    svg += "<path d=\"" + path + "\" fill=\"none\" stroke=\"" + color + "\" stroke-width=\"2\"/>\n";
    for (const auto& [t, a] : pts) {
      svg += "<circle cx=\"" + num(sx(double(t))) + "\" cy=\"" + num(sy(a)) + "\" r=\"3\" fill=\"" + color + "\"/>\n";
    }
    const double ly = T + 14.0 * double(idx);
    svg += line(W - R + 10, ly, W - R + 30, ly, color) + label(W - R + 34, ly + 4, "n = " + std::to_string(n), "start");
    ++idx;
  }
  return svg + "</svg>\n";
}

std::string plot_histogram_svg(const Histogram& h) {
  const double W = 640, panel = 140, L = 60, R = 20, T = 20, B = 30;
  const double H = T + panel * double(std::max<std::size_t>(1, h.groups.size())) + B;
  std::size_t max_bucket = 0, max_count = 1;
  for (const auto& [_, buckets] : h.groups) {
    for (const auto& [b, c] : buckets) {
      max_bucket = std::max(max_bucket, b);
      max_count = std::max(max_count, c);
    }
  }
  const double bw = (W - L - R) / double(max_bucket + 1);
  std::string svg = svg_open(W, H);
  double y0 = T;
  for (const auto& [group, buckets] : h.groups) {
    const double base = y0 + panel - 25;
    svg += line(L, base, W - R, base);
    svg += label(L, y0 + 10, "m = " + std::to_string(group.first) + ", n = " + std::to_string(group.second), "start");
    for (const auto& [b, c] : buckets) {
      const double bh = double(c) / double(max_count) * (panel - 45);
      svg += "<rect x=\"" + num(L + double(b) * bw + 1) + "\" y=\"" + num(base - bh) + "\" width=\"" +
             num(std::max(1.0, bw - 2)) + "\" height=\"" + num(bh) + "\" fill=\"" + kPalette[0] + "\"/>\n";
    }
    svg += label(L, base + 14, "0") + label(W - R, base + 14, std::to_string((max_bucket + 1) * h.width));
    y0 += panel;
  }
  svg += label((L + W - R) / 2, H - 8, "length");
  return svg + "</svg>\n";
}

std::string plot_table_svg(std::string_view tsv) {
  const auto header = header_of(tsv);
  auto has = [&](std::string_view c) { return std::find(header.begin(), header.end(), c) != header.end(); };
  if (has("accuracy") && has("m") && has("n")) return plot_sweep_svg(parse_sweep_tsv(tsv));
  if (has("lo") && has("hi") && has("count")) return plot_histogram_svg(parse_histogram_tsv(tsv));
  throw Error(ErrorCode::SchemaViolation, "unrecognized table; expected a sweep or histogram table");
}

}  // namespace evidistill
