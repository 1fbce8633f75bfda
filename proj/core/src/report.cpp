#include "stsc/report.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>

#include "stsc/error.hpp"
#include "stsc/io.hpp"

namespace stsc {

namespace {

std::string num(double v) { return std::isfinite(v) ? format_fixed(v, 6) : "nan"; }

double metric_of(const Metrics& m, MetricKind kind) {
  switch (kind) {
    case MetricKind::mae: return m.mae;
    case MetricKind::rmse: return m.rmse;
    case MetricKind::mape: return m.mape;
  }
  return 0.0;
}

const std::string& group_name(std::span<const std::string> names, std::size_t i) {
  if (i >= names.size()) throw Error(Errc::dimension, "missing name for group " + std::to_string(i));
  return names[i];
}

}  // namespace

std::string metrics_csv(std::span<const MetricsReport> reports) {
  std::ostringstream out;
  out << "technique,horizon_min,mae,rmse,mape,n\n";
  for (const auto& r : reports)
    for (const auto& row : r.rows)
      out << r.technique << ',' << row.horizon_min << ',' << num(row.metrics.mae) << ','
          << num(row.metrics.rmse) << ',' << num(row.metrics.mape) << ',' << row.metrics.n << '\n';
  return out.str();
}

std::string neighbors_csv(std::span<const std::pair<std::string, RankedSensors>> rankings) {
  std::ostringstream out;
  out << "target,rank,sensor_id,closeness,corr,km,mean_diff\n";
  for (const auto& [target, ranked] : rankings)
    for (std::size_t i = 0; i < ranked.ranked.size(); ++i) {
      const auto& a = ranked.ranked[i];
      out << target << ',' << (i + 1) << ',' << a.sensor_id << ',' << num(ranked.closeness[i]) << ','
          << num(a.correlation) << ',' << num(a.km) << ',' << num(a.mean_diff) << '\n';
    }
  return out.str();
}

std::string kwt_csv(const KwtResult& kwt, std::span<const std::string> names) {
  std::ostringstream out;
  out << "group,n,rank_sum,mean_rank\n";
  for (std::size_t g = 0; g < kwt.sizes.size(); ++g)
    out << group_name(names, g) << ',' << kwt.sizes[g] << ',' << num(kwt.rank_sums[g]) << ','
        << num(kwt.mean_rank(g)) << '\n';
  out << "# H=" << num(kwt.h) << " dof=" << kwt.dof << " p=" << format_double(kwt.p_value) << '\n';
  return out.str();
}

std::string mct_csv(const MctResult& mct, std::span<const std::string> names) {
  std::ostringstream out;
  out << "group_a,group_b,difference,lower,upper,p_adjusted,significant\n";
  for (const auto& p : mct.pairs)
    out << group_name(names, p.i) << ',' << group_name(names, p.j) << ',' << num(p.difference)
        << ',' << num(p.lower) << ',' << num(p.upper) << ',' << format_double(p.p_adjusted) << ','
        << (p.significant ? "yes" : "no") << '\n';
  return out.str();
}

std::string_view to_string(MetricKind kind) noexcept {
  switch (kind) {
    case MetricKind::mae: return "MAE";
    case MetricKind::rmse: return "RMSE";
    case MetricKind::mape: return "MAPE";
  }
  return "?";
}

std::string metric_chart_svg(std::span<const MetricsReport> reports, MetricKind kind) {
  constexpr double width = 640, height = 400, left = 70, right = 170, top = 40, bottom = 50;
  constexpr const char* colors[] = {"#1f77b4", "#d62728", "#2ca02c", "#ff7f0e",
                                    "#9467bd", "#8c564b", "#17becf", "#7f7f7f"};
  double x_max = 0.0, y_max = 0.0;
  for (const auto& r : reports)
    for (const auto& row : r.rows) {
      x_max = std::max(x_max, static_cast<double>(row.horizon_min));
      const double v = metric_of(row.metrics, kind);
      if (std::isfinite(v)) y_max = std::max(y_max, v);
    }
  if (x_max <= 0.0) x_max = 60.0;
  if (y_max <= 0.0) y_max = 1.0;
  y_max *= 1.1;
  const double plot_w = width - left - right, plot_h = height - top - bottom;
  auto px = [&](double x) { return left + plot_w * x / x_max; };
  auto py = [&](double y) { return top + plot_h * (1.0 - y / y_max); };
  const std::string unit = kind == MetricKind::mape ? " (%)" : " (mph)";

  std::ostringstream svg;
  svg << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << width << "\" height=\"" << height
      << "\" font-family=\"sans-serif\" font-size=\"12\">\n"
      << "<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n"
      << "<text x=\"" << width / 2 << "\" y=\"22\" text-anchor=\"middle\" font-size=\"15\">"
      << to_string(kind) << " by prediction horizon</text>\n"
      << "<line x1=\"" << left << "\" y1=\"" << top + plot_h << "\" x2=\"" << left + plot_w
      << "\" y2=\"" << top + plot_h << "\" stroke=\"black\"/>\n"
      << "<line x1=\"" << left << "\" y1=\"" << top << "\" x2=\"" << left << "\" y2=\""
      << top + plot_h << "\" stroke=\"black\"/>\n";
  for (int t = 0; t <= 5; ++t) {
    const double y = y_max * t / 5.0;
    svg << "<line x1=\"" << left - 4 << "\" y1=\"" << py(y) << "\" x2=\"" << left + plot_w
        << "\" y2=\"" << py(y) << "\" stroke=\"#ddd\"/>\n"
        << "<text x=\"" << left - 8 << "\" y=\"" << py(y) + 4 << "\" text-anchor=\"end\">"
        << format_fixed(y, 2) << "</text>\n";
  }
  if (!reports.empty())
    for (const auto& row : reports.front().rows)
      svg << "<text x=\"" << px(static_cast<double>(row.horizon_min)) << "\" y=\""
          << top + plot_h + 18 << "\" text-anchor=\"middle\">" << row.horizon_min << "</text>\n";
  svg << "<text x=\"" << left + plot_w / 2 << "\" y=\"" << height - 12
      << "\" text-anchor=\"middle\">horizon (min)</text>\n"
      << "<text transform=\"translate(18," << top + plot_h / 2
      << ") rotate(-90)\" text-anchor=\"middle\">" << to_string(kind) << unit << "</text>\n";

  for (std::size_t k = 0; k < reports.size(); ++k) {
    const char* color = colors[k % std::size(colors)];
    std::ostringstream points;
    for (const auto& row : reports[k].rows) {
      const double v = metric_of(row.metrics, kind);
      if (!std::isfinite(v)) continue;
      points << px(static_cast<double>(row.horizon_min)) << ',' << py(v) << ' ';
      svg << "<circle cx=\"" << px(static_cast<double>(row.horizon_min)) << "\" cy=\"" << py(v)
          << "\" r=\"3\" fill=\"" << color << "\"/>\n";
    }
    svg << "<polyline fill=\"none\" stroke=\"" << color << "\" stroke-width=\"2\" points=\""
        << points.str() << "\"/>\n";
    const double ly = top + 10 + 20.0 * static_cast<double>(k);
    svg << "<line x1=\"" << left + plot_w + 15 << "\" y1=\"" << ly << "\" x2=\""
        << left + plot_w + 35 << "\" y2=\"" << ly << "\" stroke=\"" << color
        << "\" stroke-width=\"2\"/>\n"
        << "<text x=\"" << left + plot_w + 40 << "\" y=\"" << ly + 4 << "\">" << reports[k].technique
        << "</text>\n";
  }
  svg << "</svg>\n";
  return svg.str();
}

}  // namespace stsc
