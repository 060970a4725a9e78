#ifndef IDFORGE_REPORT_SVG_HPP
#define IDFORGE_REPORT_SVG_HPP

#include <algorithm>
#include <fstream>
#include <map>
#include <sstream>
#include <string>
#include <vector>

#include "idforge/errors.hpp"

namespace idforge {

struct CsvTable {
    std::vector<std::string> header;
    std::vector<std::vector<std::string>> rows;

    std::size_t column(const std::string& name) const {
        for (std::size_t i = 0; i < header.size(); ++i)
            if (header[i] == name) return i;
        throw ParseError("csv: missing column '" + name + "'");
    }
    bool has_column(const std::string& name) const {
        return std::find(header.begin(), header.end(), name) != header.end();
    }
};

inline CsvTable read_csv(const std::string& path) {
    std::ifstream f(path);
    if (!f) throw ParseError("cannot open: " + path);
    CsvTable t;
    std::string line;
    std::size_t lineno = 0;
    while (std::getline(f, line)) {
        ++lineno;
        if (line.empty()) continue;
        std::vector<std::string> fields;
        std::string cur;
        for (char ch : line) {
            if (ch == ',') { fields.push_back(cur); cur.clear(); }
            else cur.push_back(ch);
        }
        fields.push_back(cur);
        if (t.header.empty()) t.header = std::move(fields);
        else {
            if (fields.size() != t.header.size())
                throw ParseError(path + ":" + std::to_string(lineno) + ": field count " +
                                 std::to_string(fields.size()) + " != header " +
                                 std::to_string(t.header.size()));
            t.rows.push_back(std::move(fields));
        }
    }
    if (t.header.empty()) throw ParseError(path + ": empty CSV");
    if (t.rows.empty()) throw ParseError(path + ": CSV has no data rows");
    return t;
}

namespace detail {

inline const char* series_color(std::size_t i) {
    static const char* palette[] = {"#4c72b0", "#dd8452", "#55a868", "#c44e52",
                                    "#8172b3", "#937860", "#da8bc3", "#8c8c8c"};
    return palette[i % 8];
}

inline std::string fmt_num(double v) {
    std::ostringstream os;
    os.precision(5);
    os << v;
    return os.str();
}

} // namespace detail

/// Grouped bar chart: one group per `group_col` value, one bar per
/// `series_col` value, heights from `value_col`.
inline void write_bar_chart_svg(const std::string& path, const CsvTable& t,
                                const std::string& group_col, const std::string& series_col,
                                const std::string& value_col) {
    const std::size_t gc = t.column(group_col);
    const std::size_t sc = t.column(series_col);
    const std::size_t vc = t.column(value_col);

    std::vector<std::string> groups, series;
    std::map<std::pair<std::string, std::string>, double> values;
    double vmax = 0.0;
    for (const auto& row : t.rows) {
        if (std::find(groups.begin(), groups.end(), row[gc]) == groups.end())
            groups.push_back(row[gc]);
        if (std::find(series.begin(), series.end(), row[sc]) == series.end())
            series.push_back(row[sc]);
        const double v = std::stod(row[vc]);
        values[{row[gc], row[sc]}] = v;
        vmax = std::max(vmax, v);
    }
    if (vmax <= 0.0) vmax = 1.0;

    const double w = 720, h = 420, ml = 60, mb = 60, mt = 30, mr = 20;
    const double plot_w = w - ml - mr, plot_h = h - mt - mb;
    const double group_w = plot_w / static_cast<double>(groups.size());
    const double bar_w = group_w * 0.8 / static_cast<double>(series.size());

    std::ofstream f(path);
    if (!f) throw ParseError("cannot open for writing: " + path);
    f << "<svg xmlns='http://www.w3.org/2000/svg' width='" << w << "' height='" << h << "'>\n";
    f << "<rect width='100%' height='100%' fill='white'/>\n";
    f << "<line x1='" << ml << "' y1='" << mt + plot_h << "' x2='" << ml + plot_w
      << "' y2='" << mt + plot_h << "' stroke='black'/>\n";
    f << "<line x1='" << ml << "' y1='" << mt << "' x2='" << ml << "' y2='" << mt + plot_h
      << "' stroke='black'/>\n";
    for (std::size_t g = 0; g < groups.size(); ++g) {
        const double gx = ml + group_w * (static_cast<double>(g) + 0.1);
        for (std::size_t s = 0; s < series.size(); ++s) {
            auto it = values.find({groups[g], series[s]});
            if (it == values.end()) continue;
            const double bh = plot_h * it->second / vmax;
            f << "<rect x='" << gx + bar_w * static_cast<double>(s) << "' y='"
              << mt + plot_h - bh << "' width='" << bar_w * 0.92 << "' height='" << bh
              << "' fill='" << detail::series_color(s) << "'/>\n";
        }
        f << "<text x='" << ml + group_w * (static_cast<double>(g) + 0.5) << "' y='"
          << mt + plot_h + 18 << "' font-size='12' text-anchor='middle'>" << groups[g]
          << "</text>\n";
    }
    for (std::size_t s = 0; s < series.size(); ++s) {
        const double lx = ml + 10 + static_cast<double>(s) * 140;
        f << "<rect x='" << lx << "' y='8' width='12' height='12' fill='"
          << detail::series_color(s) << "'/>\n";
        f << "<text x='" << lx + 16 << "' y='18' font-size='12'>" << series[s] << "</text>\n";
    }
    f << "<text x='12' y='" << mt + 12 << "' font-size='12'>" << detail::fmt_num(vmax)
      << "</text>\n";
    f << "<text x='" << w / 2 << "' y='" << h - 10 << "' font-size='13' text-anchor='middle'>"
      << group_col << "</text>\n";
    f << "</svg>\n";
}

/// Line chart: x from `x_col`, one polyline per listed value column,
/// averaged over rows sharing the same x.
inline void write_line_chart_svg(const std::string& path, const CsvTable& t,
                                 const std::string& x_col,
                                 const std::vector<std::string>& value_cols) {
    const std::size_t xc = t.column(x_col);
    std::map<double, std::vector<std::pair<double, std::size_t>>> agg; // x -> per-series (sum, n)
    for (const auto& row : t.rows) {
        const double x = std::stod(row[xc]);
        auto& slot = agg[x];
        if (slot.empty()) slot.assign(value_cols.size(), {0.0, 0});
        for (std::size_t s = 0; s < value_cols.size(); ++s) {
            slot[s].first += std::stod(row[t.column(value_cols[s])]);
            slot[s].second += 1;
        }
    }
    double xmin = agg.begin()->first, xmax = agg.rbegin()->first;
    if (xmax == xmin) xmax = xmin + 1.0;
    double vmin = 0.0, vmax = 0.0;
    bool first = true;
    for (const auto& [x, slot] : agg)
        for (const auto& [sum, n] : slot) {
            const double v = sum / static_cast<double>(n);
            if (first) { vmin = vmax = v; first = false; }
            vmin = std::min(vmin, v);
            vmax = std::max(vmax, v);
        }
    if (vmax == vmin) vmax = vmin + 1.0;

    const double w = 720, h = 420, ml = 70, mb = 50, mt = 30, mr = 20;
    const double plot_w = w - ml - mr, plot_h = h - mt - mb;
    auto px = [&](double x) { return ml + plot_w * (x - xmin) / (xmax - xmin); };
    auto py = [&](double v) { return mt + plot_h * (1.0 - (v - vmin) / (vmax - vmin)); };

    std::ofstream f(path);
    if (!f) throw ParseError("cannot open for writing: " + path);
    f << "<svg xmlns='http://www.w3.org/2000/svg' width='" << w << "' height='" << h << "'>\n";
    f << "<rect width='100%' height='100%' fill='white'/>\n";
    f << "<line x1='" << ml << "' y1='" << mt + plot_h << "' x2='" << ml + plot_w << "' y2='"
      << mt + plot_h << "' stroke='black'/>\n";
    f << "<line x1='" << ml << "' y1='" << mt << "' x2='" << ml << "' y2='" << mt + plot_h
      << "' stroke='black'/>\n";
    for (std::size_t s = 0; s < value_cols.size(); ++s) {
        f << "<polyline fill='none' stroke='" << detail::series_color(s)
          << "' stroke-width='2' points='";
        for (const auto& [x, slot] : agg)
            f << px(x) << ',' << py(slot[s].first / static_cast<double>(slot[s].second)) << ' ';
        f << "'/>\n";
        const double lx = ml + 10 + static_cast<double>(s) * 200;
        f << "<rect x='" << lx << "' y='8' width='12' height='12' fill='"
          << detail::series_color(s) << "'/>\n";
        f << "<text x='" << lx + 16 << "' y='18' font-size='12'>" << value_cols[s]
          << "</text>\n";
    }
    for (const auto& [x, slot] : agg) {
        f << "<text x='" << px(x) << "' y='" << mt + plot_h + 16
          << "' font-size='11' text-anchor='middle'>" << detail::fmt_num(x) << "</text>\n";
        (void)slot;
    }
    f << "<text x='12' y='" << mt + 12 << "' font-size='11'>" << detail::fmt_num(vmax)
      << "</text>\n";
    f << "<text x='12' y='" << mt + plot_h << "' font-size='11'>" << detail::fmt_num(vmin)
      << "</text>\n";
    f << "<text x='" << w / 2 << "' y='" << h - 8 << "' font-size='13' text-anchor='middle'>"
      << x_col << "</text>\n";
    f << "</svg>\n";
}

} // namespace idforge

#endif
