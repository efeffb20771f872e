#include <algorithm>
#include <cmath>
#include <fstream>
#include <map>
#include <sstream>

#include "lrp/cli.hpp"
#include "lrp/errors.hpp"

namespace lrp::cli {

namespace {

struct Table {
  std::vector<std::string> header;
  std::vector<std::vector<std::string>> rows;

  std::size_t col(const std::string& name) const {
    const auto it = std::find(header.begin(), header.end(), name);
    if (it == header.end()) throw ConfigError("plot: column '" + name + "' missing");
    return static_cast<std::size_t>(it - header.begin());
  }
};

std::vector<std::string> split(const std::string& line) {
  std::vector<std::string> out;
  std::stringstream ss(line);
  std::string cell;
  while (std::getline(ss, cell, ',')) out.push_back(cell);
  return out;
}

Table read_csv(const fs::path& p) {
  std::ifstream in(p);
  if (!in) throw ConfigError("plot: cannot read " + p.string());
  Table t;
  std::string line;
  if (std::getline(in, line)) t.header = split(line);
  while (std::getline(in, line)) {
    if (!line.empty()) t.rows.push_back(split(line));
  }
  return t;
}

double to_double(const std::string& s) {
  if (s == "nan") return std::nan("");
  if (s == "inf") return HUGE_VAL;
  if (s == "-inf") return -HUGE_VAL;
  return std::stod(s);
}

struct Spec {
  std::string source;                // CSV in the output directory
  std::vector<std::string> columns;  // emitted columns, in order
  std::string filter_column;         // optional extra filter
  std::string filter_value;
  std::string x, y, lo, hi, se, line, group;  // SVG roles
  std::string x_label, y_label;
};

const std::map<std::string, Spec>& specs() {
  static const std::map<std::string, Spec> s{
      {"lambda", {"lambda.csv", {"n", "lambda_hat", "se"}, "", "", "n", "lambda_hat", "", "", "se", "", "", "n", "Lambda-hat(n)"}},
      {"spectral",
       {"spectral.csv", {"n", "mean_p2n", "se", "fit_line"}, "kind", "annealed", "n", "mean_p2n", "", "", "se", "fit_line", "", "n", "E p_2n(0,0)"}},
      {"spectral_quenched",
       {"spectral.csv", {"env", "n", "mean_p2n", "fit_line"}, "kind", "quenched", "n", "mean_p2n", "", "", "", "fit_line", "env", "n", "p_2n(0,0)"}},
      {"exit", {"exit.csv", {"r", "mean", "se", "fit_line"}, "", "", "r", "mean", "", "", "se", "fit_line", "", "r", "E tau_r"}},
      {"tails",
       {"tails.csv", {"tag", "lambda", "probability", "wilson_lo", "wilson_hi"}, "", "", "lambda", "probability", "wilson_lo", "wilson_hi", "", "", "tag", "lambda", "probability"}},
      {"goodradius",
       {"goodradius.csv", {"lambda", "one_minus", "wilson_lo", "wilson_hi"}, "", "", "lambda", "one_minus", "", "", "", "", "", "lambda", "1 - P[r in J]"}},
      {"inverse_volume", {"inverse_volume.csv", {"r", "scaled_mean"}, "", "", "r", "scaled_mean", "", "", "", "", "", "r", "E[1/V_r] r^(1/delta)"}},
  };
  return s;
}

std::string xml_escape(const std::string& s) {
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

std::string fixed(double v) {
  std::ostringstream o;
  o.setf(std::ios::fixed);
  o.precision(2);
  o << v;
  return o.str();
}

}  // namespace

std::vector<std::string> plot_series(const fs::path& output_dir) {
  std::vector<std::string> out;
  for (const auto& [name, spec] : specs()) {
    const fs::path src = output_dir / spec.source;
    if (!fs::exists(src)) continue;
    if (!spec.filter_column.empty()) {
      const Table t = read_csv(src);
      const auto c = t.col(spec.filter_column);
      if (std::none_of(t.rows.begin(), t.rows.end(), [&](const auto& r) { return r[c] == spec.filter_value; })) continue;
    }
    out.push_back(name);
  }
  return out;
}

std::vector<fs::path> emit_plot_data(const fs::path& output_dir, const std::string& which, bool svg) {
  const auto available = plot_series(output_dir);
  if (std::find(available.begin(), available.end(), which) == available.end()) {
    std::string list;
    for (const auto& a : available) list += (list.empty() ? "" : ", ") + a;
    throw ConfigError("plot: unknown series '" + which + "'; available: " + (list.empty() ? "(none)" : list));
  }
  const Spec& spec = specs().at(which);
  const Table t = read_csv(output_dir / spec.source);
  const auto beta_col = t.col("beta");
  std::vector<std::string> betas;
  for (const auto& r : t.rows) {
    if (std::find(betas.begin(), betas.end(), r[beta_col]) == betas.end()) betas.push_back(r[beta_col]);
  }
  const fs::path dir = output_dir / "plots";
  fs::create_directories(dir);
  std::vector<fs::path> written;
  for (const auto& beta : betas) {
    std::vector<const std::vector<std::string>*> rows;
    for (const auto& r : t.rows) {
      if (r[beta_col] != beta) continue;
      if (!spec.filter_column.empty() && r[t.col(spec.filter_column)] != spec.filter_value) continue;
      rows.push_back(&r);
    }
    std::ostringstream body;
    for (std::size_t i = 0; i < spec.columns.size(); ++i) body << (i ? "," : "") << spec.columns[i];
    body << "\n";
    for (const auto* r : rows) {
      for (std::size_t i = 0; i < spec.columns.size(); ++i) {
        std::string cell = (*r)[t.col(spec.columns[i])];
        if (which == "goodradius" && (spec.columns[i] == "wilson_lo" || spec.columns[i] == "wilson_hi")) {
          // interval of 1 - frequency
          const auto other = spec.columns[i] == "wilson_lo" ? "wilson_hi" : "wilson_lo";
          std::ostringstream v;
          v << 1.0 - to_double((*r)[t.col(other)]);
          cell = v.str();
        }
        body << (i ? "," : "") << cell;
      }
      body << "\n";
    }
    const fs::path csv_path = dir / (which + "_beta" + beta + ".csv");
    std::ofstream(csv_path) << body.str();
    written.push_back(csv_path);
    if (!svg) continue;

    std::map<std::string, SvgSeries> groups;
    std::vector<std::string> group_order;
    for (const auto* r : rows) {
      const std::string g = spec.group.empty() ? which : spec.group + "=" + (*r)[t.col(spec.group)];
      if (!groups.count(g)) {
        group_order.push_back(g);
        groups[g].label = g;
      }
      auto& s = groups[g];
      const double x = to_double((*r)[t.col(spec.x)]);
      const double y = to_double((*r)[t.col(spec.y)]);
      s.x.push_back(x);
      s.y.push_back(y);
      if (!spec.se.empty()) {
        const double se = to_double((*r)[t.col(spec.se)]);
        s.lo.push_back(y - se);
        s.hi.push_back(y + se);
      } else if (!spec.lo.empty()) {
        s.lo.push_back(to_double((*r)[t.col(spec.lo)]));
        s.hi.push_back(to_double((*r)[t.col(spec.hi)]));
      }
    }
    std::vector<SvgSeries> series;
    for (const auto& g : group_order) {
      series.push_back(groups[g]);
      if (!spec.line.empty()) {
        SvgSeries fit;
        fit.label = g + " fit";
        fit.line = true;
        for (const auto* r : rows) {
          const std::string rg = spec.group.empty() ? which : spec.group + "=" + (*r)[t.col(spec.group)];
          if (rg != g) continue;
          fit.x.push_back(to_double((*r)[t.col(spec.x)]));
          fit.y.push_back(to_double((*r)[t.col(spec.line)]));
        }
        series.push_back(fit);
      }
    }
    const fs::path svg_path = dir / (which + "_beta" + beta + ".svg");
    std::ofstream(svg_path) << render_svg(which + " (beta=" + beta + ")", spec.x_label, spec.y_label, series);
  }
  return written;
}

std::string render_svg(const std::string& title, const std::string& x_label, const std::string& y_label,
                       const std::vector<SvgSeries>& series) {
  constexpr double W = 640, H = 480, L = 80, R = 20, T = 40, B = 60;
  double x0 = HUGE_VAL, x1 = -HUGE_VAL, y0 = HUGE_VAL, y1 = -HUGE_VAL;
  auto take = [](double v, double& lo, double& hi) {
    if (v > 0 && std::isfinite(v)) {
      lo = std::min(lo, std::log10(v));
      hi = std::max(hi, std::log10(v));
    }
  };
  for (const auto& s : series) {
    for (std::size_t i = 0; i < s.x.size(); ++i) {
      take(s.x[i], x0, x1);
      take(s.y[i], y0, y1);
    }
  }
  if (!(x0 <= x1)) x0 = 0, x1 = 1;
  if (!(y0 <= y1)) y0 = 0, y1 = 1;
  if (x1 - x0 < 1e-9) x0 -= 0.5, x1 += 0.5;
  if (y1 - y0 < 1e-9) y0 -= 0.5, y1 += 0.5;
  const double px = (x1 - x0) * 0.05, py = (y1 - y0) * 0.05;
  x0 -= px, x1 += px, y0 -= py, y1 += py;
  auto sx = [&](double v) { return L + (std::log10(v) - x0) / (x1 - x0) * (W - L - R); };
  auto sy = [&](double v) { return H - B - (std::log10(v) - y0) / (y1 - y0) * (H - T - B); };
  auto ok = [](double v) { return v > 0 && std::isfinite(v); };
  static const char* colours[] = {"#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#ff7f0e", "#8c564b"};

  std::ostringstream o;
  o << "<?xml version=\"1.0\" encoding=\"UTF-8\" standalone=\"no\"?>\n"
    << "<svg xmlns=\"http://www.w3.org/2000/svg\" version=\"1.1\" width=\"" << W << "\" height=\"" << H
    << "\" viewBox=\"0 0 " << W << ' ' << H << "\">\n"
    << "<title>" << xml_escape(title) << "</title>\n"
    << "<rect x=\"0\" y=\"0\" width=\"" << W << "\" height=\"" << H << "\" fill=\"white\"/>\n"
    << "<g stroke=\"black\" fill=\"none\">\n"
    << "<rect x=\"" << L << "\" y=\"" << T << "\" width=\"" << W - L - R << "\" height=\"" << H - T - B << "\"/>\n"
    << "</g>\n<g font-family=\"sans-serif\" font-size=\"11\">\n";
  for (int e = static_cast<int>(std::ceil(x0)); e <= static_cast<int>(std::floor(x1)); ++e) {
    const double x = sx(std::pow(10.0, e));
    o << "<line x1=\"" << fixed(x) << "\" y1=\"" << H - B << "\" x2=\"" << fixed(x) << "\" y2=\"" << H - B + 5
      << "\" stroke=\"black\"/>\n<text x=\"" << fixed(x) << "\" y=\"" << H - B + 18 << "\" text-anchor=\"middle\">1e"
      << e << "</text>\n";
  }
  for (int e = static_cast<int>(std::ceil(y0)); e <= static_cast<int>(std::floor(y1)); ++e) {
    const double y = sy(std::pow(10.0, e));
    o << "<line x1=\"" << L - 5 << "\" y1=\"" << fixed(y) << "\" x2=\"" << L << "\" y2=\"" << fixed(y)
      << "\" stroke=\"black\"/>\n<text x=\"" << L - 8 << "\" y=\"" << fixed(y + 4) << "\" text-anchor=\"end\">1e" << e
      << "</text>\n";
  }
  o << "<text x=\"" << W / 2 << "\" y=\"" << T - 15 << "\" text-anchor=\"middle\" font-size=\"14\">"
    << xml_escape(title) << "</text>\n"
    << "<text x=\"" << (W + L - R) / 2 << "\" y=\"" << H - 15 << "\" text-anchor=\"middle\">" << xml_escape(x_label)
    << " (log scale)</text>\n"
    << "<text x=\"18\" y=\"" << (H - B + T) / 2 << "\" text-anchor=\"middle\" transform=\"rotate(-90 18 "
    << (H - B + T) / 2 << ")\">" << xml_escape(y_label) << " (log scale)</text>\n</g>\n";

  for (std::size_t k = 0; k < series.size(); ++k) {
    const auto& s = series[k];
    const char* c = colours[k % 6];
    o << "<g stroke=\"" << c << "\" fill=\"" << c << "\">\n";
    if (s.line) {
      std::string pts;
      for (std::size_t i = 0; i < s.x.size(); ++i) {
        if (ok(s.x[i]) && ok(s.y[i])) pts += fixed(sx(s.x[i])) + "," + fixed(sy(s.y[i])) + " ";
      }
      if (!pts.empty()) o << "<polyline fill=\"none\" stroke-dasharray=\"4 3\" points=\"" << pts << "\"/>\n";
    } else {
      for (std::size_t i = 0; i < s.x.size(); ++i) {
        if (!ok(s.x[i]) || !ok(s.y[i])) continue;
        const double x = sx(s.x[i]);
        if (i < s.lo.size() && ok(s.hi[i])) {
          const double lo = ok(s.lo[i]) ? s.lo[i] : std::pow(10.0, y0);
          o << "<line x1=\"" << fixed(x) << "\" y1=\"" << fixed(sy(lo)) << "\" x2=\"" << fixed(x) << "\" y2=\""
            << fixed(sy(s.hi[i])) << "\"/>\n";
        }
        o << "<circle cx=\"" << fixed(x) << "\" cy=\"" << fixed(sy(s.y[i])) << "\" r=\"3\"/>\n";
      }
    }
    const double ly = T + 15 + 15 * static_cast<double>(k);
    o << "<text x=\"" << W - R - 10 << "\" y=\"" << fixed(ly) << "\" text-anchor=\"end\" stroke=\"none\" "
      << "font-family=\"sans-serif\" font-size=\"11\">" << xml_escape(s.label) << "</text>\n</g>\n";
  }
  o << "</svg>\n";
  return o.str();
}

}  // namespace lrp::cli
