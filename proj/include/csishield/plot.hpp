#pragma once

#include <algorithm>
#include <cmath>
#include <iomanip>
#include <sstream>
#include <string>
#include <vector>

#include "csishield/eval.hpp"
#include "csishield/matrix.hpp"

namespace csishield {

/// One curve of a per-subcarrier plot: mean amplitude with a +/- one standard
/// deviation band.
struct PlotSeries {
  std::string label;
  Vector mean;
  Vector std_dev;
};

inline PlotSeries series_from_amplitudes(const AmplitudeMatrix& amp, std::string label) {
  Vector f = featurize(amp);
  const std::size_t K = f.size() / 2;
  PlotSeries s;
  s.label = std::move(label);
  s.mean.assign(f.begin(), f.begin() + K);
  s.std_dev.assign(f.begin() + K, f.end());
  return s;
}

/// One row per subcarrier: index then (mean, std) per series. No header row;
/// the row count equals the subcarrier count.
inline std::string plot_csv(const std::vector<PlotSeries>& series) {
  if (series.empty()) throw EmptyInput("plot_csv: no series");
  std::ostringstream out;
  out << std::setprecision(10);
  const std::size_t K = series.front().mean.size();
  for (std::size_t k = 0; k < K; ++k) {
    out << k;
    for (const auto& s : series) out << "," << s.mean[k] << "," << s.std_dev[k];
    out << "\n";
  }
  return out.str();
}

namespace detail {

inline const char* series_color(std::size_t i) {
  static const char* palette[] = {"#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#ff7f0e"};
  return palette[i % 5];
}

}  // namespace detail

/// Static SVG line plot: mean curve per series plus a translucent band.
inline std::string plot_svg(const std::vector<PlotSeries>& series, const std::string& title) {
  if (series.empty()) throw EmptyInput("plot_svg: no series");
  const int width = 800, height = 420;
  const double ml = 60, mr = 20, mt = 40, mb = 45;
  const double pw = width - ml - mr, ph = height - mt - mb;
  const std::size_t K = series.front().mean.size();

  double lo = 1e300, hi = -1e300;
  for (const auto& s : series) {
    if (s.mean.size() != K) throw ShapeMismatch("plot_svg: series lengths differ");
    for (std::size_t k = 0; k < K; ++k) {
      lo = std::min(lo, s.mean[k] - s.std_dev[k]);
      hi = std::max(hi, s.mean[k] + s.std_dev[k]);
    }
  }
  if (hi <= lo) hi = lo + 1.0;
  const double pad = 0.05 * (hi - lo);
  lo -= pad;
  hi += pad;

  auto px = [&](double k) { return ml + pw * (K > 1 ? k / (K - 1) : 0.5); };
  auto py = [&](double v) { return mt + ph * (1.0 - (v - lo) / (hi - lo)); };

  std::ostringstream svg;
  svg << std::setprecision(6);
  svg << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << width << "\" height=\"" << height
      << "\" viewBox=\"0 0 " << width << " " << height << "\">\n";
  svg << "<rect width=\"" << width << "\" height=\"" << height << "\" fill=\"white\"/>\n";
  svg << "<text x=\"" << width / 2 << "\" y=\"24\" text-anchor=\"middle\" font-size=\"15\" "
         "font-family=\"sans-serif\">"
      << title << "</text>\n";

  // axes and ticks
  svg << "<line x1=\"" << ml << "\" y1=\"" << mt + ph << "\" x2=\"" << ml + pw << "\" y2=\""
      << mt + ph << "\" stroke=\"black\"/>\n";
  svg << "<line x1=\"" << ml << "\" y1=\"" << mt << "\" x2=\"" << ml << "\" y2=\"" << mt + ph
      << "\" stroke=\"black\"/>\n";
  for (int i = 0; i <= 4; ++i) {
    const double v = lo + (hi - lo) * i / 4.0;
    svg << "<text x=\"" << ml - 8 << "\" y=\"" << py(v) + 4
        << "\" text-anchor=\"end\" font-size=\"11\" font-family=\"sans-serif\">" << std::fixed
        << std::setprecision(2) << v << std::defaultfloat << std::setprecision(6) << "</text>\n";
    svg << "<line x1=\"" << ml - 4 << "\" y1=\"" << py(v) << "\" x2=\"" << ml << "\" y2=\"" << py(v)
        << "\" stroke=\"black\"/>\n";
  }
  for (std::size_t k = 0; k < K; k += std::max<std::size_t>(1, K / 8)) {
    svg << "<text x=\"" << px(static_cast<double>(k)) << "\" y=\"" << mt + ph + 18
        << "\" text-anchor=\"middle\" font-size=\"11\" font-family=\"sans-serif\">" << k
        << "</text>\n";
  }
  svg << "<text x=\"" << ml + pw / 2 << "\" y=\"" << height - 8
      << "\" text-anchor=\"middle\" font-size=\"12\" font-family=\"sans-serif\">subcarrier</text>\n";

  for (std::size_t si = 0; si < series.size(); ++si) {
    const PlotSeries& s = series[si];
    const char* color = detail::series_color(si);
    // band polygon: mean+std forward, mean-std backward
    svg << "<polygon fill=\"" << color << "\" fill-opacity=\"0.15\" stroke=\"none\" points=\"";
    for (std::size_t k = 0; k < K; ++k)
      svg << px(static_cast<double>(k)) << "," << py(s.mean[k] + s.std_dev[k]) << " ";
    for (std::size_t k = K; k-- > 0;)
      svg << px(static_cast<double>(k)) << "," << py(s.mean[k] - s.std_dev[k]) << " ";
    svg << "\"/>\n";
    svg << "<polyline fill=\"none\" stroke=\"" << color << "\" stroke-width=\"1.6\" points=\"";
    for (std::size_t k = 0; k < K; ++k)
      svg << px(static_cast<double>(k)) << "," << py(s.mean[k]) << " ";
    svg << "\"/>\n";
    svg << "<text x=\"" << ml + pw - 8 << "\" y=\"" << mt + 16 + 16 * si
        << "\" text-anchor=\"end\" font-size=\"12\" font-family=\"sans-serif\" fill=\"" << color
        << "\">" << s.label << "</text>\n";
  }
  svg << "</svg>\n";
  return svg.str();
}

}  // namespace csishield
