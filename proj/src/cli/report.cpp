#include "aenc/cli/report.hpp"

#include "aenc/cli/commands.hpp"
#include "aenc/stattests.hpp"

#include <json.hpp>

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <map>
#include <numbers>

namespace aenc::cli {

using nlohmann::json;
namespace fs = std::filesystem;

namespace {

constexpr double kWidth = 640, kHeight = 400, kLeft = 70, kRight = 20, kTop = 40, kBottom = 60;
const char* const kPalette[] = {"#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#ff7f0e", "#8c564b", "#17becf", "#7f7f7f"};

std::string num(double v, int digits = 2) {
  if (!std::isfinite(v)) return "NA";
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.*f", digits, v);
  return buf;
}

std::string format_p(double p) {
  if (!std::isfinite(p)) return "NA";
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.3g", p);
  return buf;
}

std::string escape(const std::string& s) {
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

std::string svg_open(const std::string& title) {
  return "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" + num(kWidth, 0) + "\" height=\"" + num(kHeight, 0) +
         "\" font-family=\"sans-serif\" font-size=\"12\">\n<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n"
         "<text x=\"" + num(kWidth / 2, 0) + "\" y=\"22\" text-anchor=\"middle\" font-size=\"15\">" + escape(title) + "</text>\n";
}

struct Range {
  double lo, hi;
  double map(double v, double a, double b) const { return hi > lo ? a + (v - lo) / (hi - lo) * (b - a) : (a + b) / 2; }
};

Range padded(double lo, double hi) {
  if (!(hi > lo)) return {lo - 0.5, hi + 0.5};
  const double pad = 0.05 * (hi - lo);
  return {lo - pad, hi + pad};
}

std::string axes(const Range& xr, const Range& yr, const std::string& x_label, const std::string& y_label) {
  const double x0 = kLeft, x1 = kWidth - kRight, y0 = kHeight - kBottom, y1 = kTop;
  std::string s = "<line x1=\"" + num(x0) + "\" y1=\"" + num(y0) + "\" x2=\"" + num(x1) + "\" y2=\"" + num(y0) +
                  "\" stroke=\"black\"/>\n<line x1=\"" + num(x0) + "\" y1=\"" + num(y0) + "\" x2=\"" + num(x0) + "\" y2=\"" +
                  num(y1) + "\" stroke=\"black\"/>\n";
  for (int i = 0; i <= 4; ++i) {
    const double xv = xr.lo + (xr.hi - xr.lo) * i / 4.0, yv = yr.lo + (yr.hi - yr.lo) * i / 4.0;
    const double px = xr.map(xv, x0, x1), py = yr.map(yv, y0, y1);
    s += "<text x=\"" + num(px) + "\" y=\"" + num(y0 + 16) + "\" text-anchor=\"middle\">" + num(xv) + "</text>\n";
    s += "<text x=\"" + num(x0 - 6) + "\" y=\"" + num(py + 4) + "\" text-anchor=\"end\">" + num(yv) + "</text>\n";
  }
  s += "<text x=\"" + num((x0 + x1) / 2) + "\" y=\"" + num(kHeight - 18) + "\" text-anchor=\"middle\">" + escape(x_label) + "</text>\n";
  s += "<text x=\"16\" y=\"" + num((y0 + y1) / 2) + "\" text-anchor=\"middle\" transform=\"rotate(-90 16 " + num((y0 + y1) / 2) +
       ")\">" + escape(y_label) + "</text>\n";
  return s;
}

}  // namespace

std::string svg_line_plot(const std::string& title, const std::string& x_label, const std::string& y_label,
                          const std::vector<PlotSeries>& series, std::optional<double> marker_x) {
  double xlo = INFINITY, xhi = -INFINITY, ylo = INFINITY, yhi = -INFINITY;
  for (const auto& s : series) {
    for (double v : s.x) xlo = std::min(xlo, v), xhi = std::max(xhi, v);
    for (double v : s.y)
      if (std::isfinite(v)) ylo = std::min(ylo, v), yhi = std::max(yhi, v);
  }
  if (!std::isfinite(xlo)) xlo = 0, xhi = 1;
  if (!std::isfinite(ylo)) ylo = 0, yhi = 1;
  const Range xr = padded(xlo, xhi), yr = padded(ylo, yhi);
  const double x0 = kLeft, x1 = kWidth - kRight, y0 = kHeight - kBottom, y1 = kTop;
  std::string svg = svg_open(title) + axes(xr, yr, x_label, y_label);
  if (marker_x) {
    const double px = xr.map(*marker_x, x0, x1);
    svg += "<line x1=\"" + num(px) + "\" y1=\"" + num(y0) + "\" x2=\"" + num(px) + "\" y2=\"" + num(y1) +
           "\" stroke=\"gray\" stroke-dasharray=\"4 3\"/>\n";
  }
  for (std::size_t k = 0; k < series.size(); ++k) {
    const auto& s = series[k];
    const char* color = kPalette[k % std::size(kPalette)];
    std::string points;
    for (std::size_t i = 0; i < std::min(s.x.size(), s.y.size()); ++i) {
      if (!std::isfinite(s.y[i])) continue;
      points += num(xr.map(s.x[i], x0, x1)) + "," + num(yr.map(s.y[i], y0, y1)) + " ";
    }
    svg += "<polyline fill=\"none\" stroke=\"" + std::string(color) + "\" stroke-width=\"2\" points=\"" + points + "\"/>\n";
    svg += "<text x=\"" + num(x1 - 4) + "\" y=\"" + num(y1 + 14 * (k + 1)) + "\" text-anchor=\"end\" fill=\"" + color +
           "\">" + escape(s.name) + "</text>\n";
  }
  return svg + "</svg>\n";
}

std::string svg_violin_plot(const std::string& title, const std::vector<std::pair<std::string, std::vector<double>>>& groups) {
  double lo = INFINITY, hi = -INFINITY;
  for (const auto& [name, values] : groups)
    for (double v : values) lo = std::min(lo, v), hi = std::max(hi, v);
  if (!std::isfinite(lo)) lo = 0, hi = 1;
  const Range yr = padded(lo, hi);
  const Range xr{0.0, static_cast<double>(std::max<std::size_t>(groups.size(), 1))};
  const double x0 = kLeft, x1 = kWidth - kRight, y0 = kHeight - kBottom, y1 = kTop;
  std::string svg = svg_open(title);
  svg += "<line x1=\"" + num(x0) + "\" y1=\"" + num(y0) + "\" x2=\"" + num(x1) + "\" y2=\"" + num(y0) + "\" stroke=\"black\"/>\n";
  svg += "<line x1=\"" + num(x0) + "\" y1=\"" + num(y0) + "\" x2=\"" + num(x0) + "\" y2=\"" + num(y1) + "\" stroke=\"black\"/>\n";
  for (int i = 0; i <= 4; ++i) {
    const double yv = yr.lo + (yr.hi - yr.lo) * i / 4.0;
    svg += "<text x=\"" + num(x0 - 6) + "\" y=\"" + num(yr.map(yv, y0, y1) + 4) + "\" text-anchor=\"end\">" + num(yv) + "</text>\n";
  }
  const double half_width = 0.4 * (x1 - x0) / xr.hi;
  for (std::size_t g = 0; g < groups.size(); ++g) {
    const auto& values = groups[g].second;
    const double cx = xr.map(static_cast<double>(g) + 0.5, x0, x1);
    svg += "<text x=\"" + num(cx) + "\" y=\"" + num(y0 + 16) + "\" text-anchor=\"middle\">" + escape(groups[g].first) + "</text>\n";
    if (values.empty()) continue;
    const double m = mean(values);
    double var = 0;
    for (double v : values) var += (v - m) * (v - m);
    var /= static_cast<double>(values.size());
    const double bw = 1.06 * std::sqrt(var) * std::pow(static_cast<double>(values.size()), -0.2);
    const double vlo = *std::min_element(values.begin(), values.end());
    const double vhi = *std::max_element(values.begin(), values.end());
    const char* color = kPalette[g % std::size(kPalette)];
    if (!(bw > 0) || !(vhi > vlo)) {
      const double py = yr.map(vlo, y0, y1);
      svg += "<line x1=\"" + num(cx - half_width) + "\" y1=\"" + num(py) + "\" x2=\"" + num(cx + half_width) + "\" y2=\"" +
             num(py) + "\" stroke=\"" + color + "\" stroke-width=\"2\"/>\n";
      continue;
    }
    constexpr int kPoints = 50;
    std::vector<double> ys(kPoints), dens(kPoints);
    double peak = 0;
    for (int i = 0; i < kPoints; ++i) {
      ys[i] = vlo + (vhi - vlo) * i / (kPoints - 1);
      double d = 0;
      for (double v : values) d += std::exp(-0.5 * std::pow((ys[i] - v) / bw, 2));
      dens[i] = d;
      peak = std::max(peak, d);
    }
    std::string left, right;
    for (int i = 0; i < kPoints; ++i) {
      const double w = half_width * dens[i] / peak, py = yr.map(ys[i], y0, y1);
      left += num(cx - w) + "," + num(py) + " ";
      right = num(cx + w) + "," + num(py) + " " + right;
    }
    svg += "<polygon fill=\"" + std::string(color) + "\" fill-opacity=\"0.4\" stroke=\"" + color + "\" points=\"" + left + right + "\"/>\n";
    const double med = yr.map(quantile(values, 0.5), y0, y1);
    svg += "<line x1=\"" + num(cx - half_width / 3) + "\" y1=\"" + num(med) + "\" x2=\"" + num(cx + half_width / 3) + "\" y2=\"" +
           num(med) + "\" stroke=\"black\" stroke-width=\"2\"/>\n";
  }
  return svg + "</svg>\n";
}

std::string svg_grid_map(const std::string& title, const std::vector<GridCell>& cells) {
  const auto n = cells.size();
  const auto cols = static_cast<std::size_t>(std::ceil(std::sqrt(static_cast<double>(std::max<std::size_t>(n, 1)))));
  const std::size_t rows = (n + cols - 1) / cols;
  double vmax = 1e-12;
  for (const auto& c : cells)
    if (std::isfinite(c.value)) vmax = std::max(vmax, std::abs(c.value));
  const double cell = std::min((kWidth - 40) / static_cast<double>(cols), (kHeight - 80) / static_cast<double>(std::max<std::size_t>(rows, 1)));
  std::string svg = svg_open(title);
  for (std::size_t i = 0; i < n; ++i) {
    const auto& c = cells[i];
    const double x = 20 + cell * static_cast<double>(i % cols), y = 40 + cell * static_cast<double>(i / cols);
    std::string fill = "#dddddd";
    if (std::isfinite(c.value)) {
      const double t = std::clamp(c.value / vmax, -1.0, 1.0);
      const int fade = static_cast<int>(std::lround(255 * (1 - std::abs(t))));
      char buf[16];
      if (t >= 0)
        std::snprintf(buf, sizeof buf, "#ff%02x%02x", fade, fade);
      else
        std::snprintf(buf, sizeof buf, "#%02x%02xff", fade, fade);
      fill = buf;
    }
    svg += "<rect x=\"" + num(x + 2) + "\" y=\"" + num(y + 2) + "\" width=\"" + num(cell - 4) + "\" height=\"" + num(cell - 4) +
           "\" fill=\"" + fill + "\" stroke=\"black\" stroke-width=\"" + (c.flagged ? "3" : "0.5") + "\"/>\n";
    svg += "<text x=\"" + num(x + cell / 2) + "\" y=\"" + num(y + cell / 2) + "\" text-anchor=\"middle\" font-size=\"10\">" +
           escape(c.label) + "</text>\n";
    svg += "<text x=\"" + num(x + cell / 2) + "\" y=\"" + num(y + cell / 2 + 13) + "\" text-anchor=\"middle\" font-size=\"10\">" +
           num(c.value, 3) + "</text>\n";
  }
  svg += "<text x=\"20\" y=\"" + num(kHeight - 12) + "\">heavy border: significant; color scale +/-" + num(vmax, 3) + "</text>\n";
  return svg + "</svg>\n";
}

namespace {

std::optional<json> read_result(const fs::path& dir, const char* name) {
  std::ifstream in(dir / name);
  if (!in) return std::nullopt;
  try {
    return json::parse(in);
  } catch (const json::parse_error&) {
    throw DataError(std::string("corrupt ") + (dir / name).string());
  }
}

double value_or_nan(const json& j) { return j.is_number() ? j.get<double>() : std::nan(""); }

std::vector<double> doubles(const json& j) {
  std::vector<double> out;
  for (const auto& v : j) out.push_back(value_or_nan(v));
  return out;
}

std::vector<double> steps(std::size_t n) {
  std::vector<double> x(n);
  for (std::size_t i = 0; i < n; ++i) x[i] = static_cast<double>(i + 1);
  return x;
}

}  // namespace

std::vector<ReportFile> render_report(const fs::path& dir) {
  const auto features = read_result(dir, "features.json");
  const auto synchrony = read_result(dir, "synchrony.json");
  const auto splithalf = read_result(dir, "splithalf.json");
  const auto encode = read_result(dir, "encode.json");
  const auto null = read_result(dir, "null.json");
  const auto stepwise = read_result(dir, "stepwise.json");
  const auto difference = read_result(dir, "difference.json");
  const auto layers = read_result(dir, "layers.json");
  const auto elements = read_result(dir, "elements.json");
  if (!features && !synchrony && !splithalf && !encode && !null && !stepwise && !difference && !layers && !elements)
    throw DataError("no results in " + dir.string() + "; run the pipeline commands first");

  std::vector<ReportFile> files;
  std::string md = "# Results\n\n";

  if (features) {
    const auto& f = *features;
    md += "## Features\n\n" + std::to_string(f.at("entries").size()) + " tables requested, " +
          std::to_string(f.at("failures").get<std::size_t>()) + " failed.\n\n";
    for (const auto& e : f.at("entries"))
      if (e.at("status") == "failed")
        md += "- " + e.at("id").get<std::string>() + "/" + e.at("element").get<std::string>() + ": " + e.at("error").get<std::string>() + "\n";
    md += "\n";
  }
  if (synchrony) {
    md += "## Dynamic synchrony\n\n| stimulus | subjects | windows | missing | mean |\n|---|---|---|---|---|\n";
    for (const auto& s : synchrony->at("stimuli"))
      md += "| " + s.at("id").get<std::string>() + " | " + std::to_string(s.at("subjects").get<std::size_t>()) + " | " +
            std::to_string(s.at("n_windows").get<std::size_t>()) + " | " + std::to_string(s.at("missing_windows").get<std::size_t>()) +
            " | " + num(value_or_nan(s.at("mean")), 3) + " |\n";
    md += "\n";
  }
  if (splithalf) {
    std::vector<std::pair<std::string, std::vector<double>>> groups;
    md += "## Split-half reliability\n\n![split-half](splithalf.svg)\n\n| stimulus | rounds | mean PCC | Wilcoxon p |\n|---|---|---|---|\n";
    for (const auto& s : splithalf->at("stimuli")) {
      groups.emplace_back(s.at("id").get<std::string>(), doubles(s.at("round_pcc")));
      md += "| " + s.at("id").get<std::string>() + " | " + std::to_string(s.at("rounds").get<std::size_t>()) + " | " +
            num(value_or_nan(s.at("mean_pcc")), 3) + " | " + format_p(value_or_nan(s.at("wilcoxon").at("p_value"))) + " |\n";
    }
    md += "\n";
    files.push_back({"splithalf.svg", svg_violin_plot("Split-half inter-group PCC", groups)});
  }
  if (encode) {
    md += "## Emotion scores\n\nFeatures: " + encode->at("feature_element").get<std::string>() +
          " LLD.\n\n| target | samples | mean | folds |\n|---|---|---|---|\n";
    for (const auto& t : encode->at("targets")) {
      std::string folds;
      for (const auto& v : t.at("per_fold")) folds += (folds.empty() ? "" : ", ") + num(value_or_nan(v), 3);
      md += "| " + t.at("label").get<std::string>() + " | " + std::to_string(t.at("samples").get<std::size_t>()) + " | " +
            num(value_or_nan(t.at("mean")), 3) + " | " + folds + " |\n";
    }
    md += "\n";
  }
  if (null) {
    const auto& sig = null->at("significance");
    std::vector<GridCell> cells;
    md += "## Significance (" + sig.at("correction").get<std::string>() + ", alpha " + num(sig.at("alpha").get<double>(), 3) +
          ")\n\n![significance](significance.svg)\n\n| target | real | null mean | null q99 | p | p adj | significant |\n|---|---|---|---|---|---|---|\n";
    for (const auto& t : sig.at("targets")) {
      cells.push_back({t.at("label").get<std::string>(), value_or_nan(t.at("real_mean")), t.at("significant").get<bool>()});
      md += "| " + t.at("label").get<std::string>() + " | " + num(value_or_nan(t.at("real_mean")), 3) + " | " +
            num(value_or_nan(t.at("null_mean")), 3) + " | " + num(value_or_nan(t.at("null_q99")), 3) + " | " +
            format_p(value_or_nan(t.at("p_raw"))) + " | " + format_p(value_or_nan(t.at("p_adjusted"))) + " | " +
            (t.at("significant").get<bool>() ? "yes" : "no") + " |\n";
    }
    md += "\n";
    files.push_back({"significance.svg", svg_grid_map("Emotion score per target", cells)});
  }
  if (stepwise) {
    std::vector<PlotSeries> series;
    md += "## Stepwise regression\n\nTarget: " + stepwise->at("target").get<std::string>() +
          ".\n\n![stepwise](stepwise.svg)\n\n| order | boundary step | score at boundary | final score |\n|---|---|---|---|\n";
    std::optional<double> marker;
    for (const auto& [order, o] : stepwise->at("orders").items()) {
      const auto path = doubles(o.at("mean_path"));
      const auto b = o.at("boundary").get<std::size_t>();
      series.push_back({order, steps(path.size()), path});
      if (!marker) marker = static_cast<double>(b) + 0.5;
      md += "| " + order + " | " + std::to_string(b) + " | " + num(path.at(b - 1), 3) + " | " + num(path.back(), 3) + " |\n";
    }
    md += "\n";
    files.push_back({"stepwise.svg", svg_line_plot("Mean stepwise path", "features added", "emotion score", series, marker)});
  }
  if (difference) {
    std::vector<GridCell> cells;
    md += "## Score differences (" + difference->at("condition_a").get<std::string>() + " minus " +
          difference->at("condition_b").get<std::string>() + ", " + difference->at("correction").get<std::string>() +
          ")\n\n![difference](difference.svg)\n\n| region | delta | p | p adj | significant |\n|---|---|---|---|---|\n";
    for (const auto& r : difference->at("regions")) {
      cells.push_back({r.at("label").get<std::string>(), value_or_nan(r.at("delta")), r.at("significant").get<bool>()});
      md += "| " + r.at("label").get<std::string>() + " | " + num(value_or_nan(r.at("delta")), 3) + " | " +
            format_p(value_or_nan(r.at("p_raw"))) + " | " + format_p(value_or_nan(r.at("p_adjusted"))) + " | " +
            (r.at("significant").get<bool>() ? "yes" : "no") + " |\n";
    }
    md += "\n";
    files.push_back({"difference.svg", svg_grid_map("Score difference per region", cells)});
  }
  if (layers) {
    std::vector<PlotSeries> series;
    md += "## Layer-wise scores\n\n![layers](layers.svg)\n\n| target | scores by layer | gain vs layer 0 | top layers |\n|---|---|---|---|\n";
    for (const auto& t : layers->at("targets")) {
      std::vector<double> means;
      for (const auto& s : t.at("scores")) means.push_back(value_or_nan(s.at("mean")));
      std::vector<double> x(means.size());
      for (std::size_t k = 0; k < x.size(); ++k) x[k] = static_cast<double>(k);
      series.push_back({t.at("label").get<std::string>(), x, means});
      std::string sc, gains, top;
      for (double m : means) sc += (sc.empty() ? "" : ", ") + num(m, 3);
      for (const auto& g : t.at("gains")) gains += (gains.empty() ? "" : ", ") + num(value_or_nan(g), 3);
      for (const auto& k : t.at("top")) top += (top.empty() ? "" : ", ") + std::to_string(k.get<std::size_t>());
      md += "| " + t.at("label").get<std::string>() + " | " + sc + " | " + gains + " | " + top + " |\n";
    }
    md += "\n";
    files.push_back({"layers.svg", svg_line_plot("Emotion score by layer", "layer", "emotion score", series)});
  }
  if (elements) {
    md += "## Element effect (leave one audio out)\n\n| audio | voice score | soundtrack score | dominant | voice energy share |\n|---|---|---|---|---|\n";
    for (const auto& e : elements->at("audios"))
      md += "| " + e.at("id").get<std::string>() + " | " + num(value_or_nan(e.at("voice_score")), 3) + " | " +
            num(value_or_nan(e.at("soundtrack_score")), 3) + " | " + e.at("dominance").get<std::string>() + " | " +
            (e.contains("energy_ratio") ? num(value_or_nan(e.at("energy_ratio").at("voice")), 3) : std::string("NA")) + " |\n";
    md += "\n";
  }
  files.insert(files.begin(), {"report.md", md});
  return files;
}

void cmd_report(const fs::path& results_dir) {
  // Everything is rendered before the first file is written.
  const auto files = render_report(results_dir);
  const fs::path out = results_dir / "report";
  fs::create_directories(out);
  for (const auto& f : files) {
    std::ofstream o(out / f.name, std::ios::binary);
    if (!o) throw DataError("cannot write " + (out / f.name).string());
    o << f.content;
  }
}

}  // namespace aenc::cli
