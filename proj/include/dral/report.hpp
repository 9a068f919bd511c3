#pragma once

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <limits>
#include <map>
#include <sstream>
#include <string>
#include <vector>

#include "dral/errors.hpp"
#include "dral/harness.hpp"

namespace dral {

namespace fs = std::filesystem;

/// Shortest round-trip decimal form; identical bits give identical text.
inline std::string format_double(double x) {
    if (std::isnan(x)) return "nan";
    if (std::isinf(x)) return x > 0 ? "inf" : "-inf";
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.17g", x);
    return buf;
}

inline constexpr const char* kTrialsHeader = "trial_seed,t,chosen_index,E_t,worst_var,sum_sigma2,info_gain,bound_slack_thm2";
inline constexpr const char* kDiagnosticsHeader =
    "trial_seed,t,sigma2_selected,feasibility_slack,abs_error_worst,abs_error_bound,entropy_worst,entropy_bound,"
    "confidence_bound,us_bound_slack,thm1_bound_slack,covered,noise_variance,lengthscale";
inline constexpr const char* kSummaryHeader = "t,mean_E,stderr_E,mean_worst_var,stderr_worst_var";
inline constexpr const char* kSweepHeader =
    "cell,strategy,eta,kernel,t,mean_E,stderr_E,mean_worst_var,stderr_worst_var";

inline void write_text(const fs::path& path, const std::string& text) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw std::runtime_error("cannot write '" + path.string() + "'");
    out << text;
    if (!out) throw std::runtime_error("write failed for '" + path.string() + "'");
}

inline std::string trials_csv(const std::vector<TrialRecord>& records) {
    std::ostringstream os;
    os << kTrialsHeader << '\n';
    for (const auto& r : records)
        for (const auto& row : r.rows)
            os << r.seed << ',' << row.t << ',' << row.chosen << ',' << format_double(row.error) << ','
               << format_double(row.worst_var) << ',' << format_double(row.sum_sigma2) << ','
               << format_double(row.info_gain) << ',' << format_double(row.bound_slack_thm2) << '\n';
    return os.str();
}

inline std::string diagnostics_csv(const std::vector<TrialRecord>& records) {
    std::ostringstream os;
    os << kDiagnosticsHeader << '\n';
    for (const auto& r : records)
        for (const auto& row : r.rows)
            os << r.seed << ',' << row.t << ',' << format_double(row.sigma2_selected) << ','
               << format_double(row.feasibility_slack) << ',' << format_double(row.abs_error_worst) << ','
               << format_double(row.abs_error_bound) << ',' << format_double(row.entropy_worst) << ','
               << format_double(row.entropy_bound) << ',' << format_double(row.confidence_bound) << ','
               << format_double(row.us_bound_slack) << ',' << format_double(row.thm1_bound_slack) << ','
               << (row.covered ? 1 : 0) << ',' << format_double(row.noise_variance) << ','
               << format_double(row.lengthscale) << '\n';
    return os.str();
}

inline std::string summary_csv(const std::vector<SummaryRow>& rows) {
    std::ostringstream os;
    os << kSummaryHeader << '\n';
    for (const auto& s : rows)
        os << s.t << ',' << format_double(s.mean_error) << ',' << format_double(s.stderr_error) << ','
           << format_double(s.mean_worst_var) << ',' << format_double(s.stderr_worst_var) << '\n';
    return os.str();
}

/// Parsed comma-separated table with a header row; all cells kept as text.
struct CsvTable {
    std::vector<std::string> header;
    std::vector<std::vector<std::string>> rows;

    [[nodiscard]] std::size_t column(const std::string& name) const {
        const auto it = std::find(header.begin(), header.end(), name);
        if (it == header.end()) throw ParseError("missing column '" + name + "'", 1, header.size() + 1);
        return static_cast<std::size_t>(it - header.begin());
    }

    /// Numeric cell; `row` is 0-based over data rows, reported 1-based counting the header line.
    [[nodiscard]] double number(std::size_t row, std::size_t col) const {
        const std::string& cell = rows.at(row).at(col);
        if (cell == "nan") return std::numeric_limits<double>::quiet_NaN();
        if (cell == "inf") return std::numeric_limits<double>::infinity();
        if (cell == "-inf") return -std::numeric_limits<double>::infinity();
        double v = 0.0;
        if (!detail::parse_double(cell, v)) throw ParseError("non-numeric cell '" + cell + "'", row + 2, col + 1);
        return v;
    }
};

inline CsvTable read_csv(const fs::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw std::runtime_error("cannot open '" + path.string() + "'");
    CsvTable table;
    std::string line;
    if (!std::getline(in, line)) throw ParseError("empty file '" + path.string() + "'", 1, 1);
    for (auto cell : detail::split(line, ',')) table.header.emplace_back(cell);
    std::size_t line_no = 1;
    while (std::getline(in, line)) {
        ++line_no;
        if (detail::trim(line).empty()) continue;
        std::vector<std::string> cells;
        for (auto cell : detail::split(line, ',')) cells.emplace_back(cell);
        if (cells.size() != table.header.size())
            throw ParseError("expected " + std::to_string(table.header.size()) + " cells, found " + std::to_string(cells.size()),
                             line_no, std::min(cells.size(), table.header.size()) + 1);
        table.rows.push_back(std::move(cells));
    }
    return table;
}

/// One plotted line: per-iteration mean with a standard-error band.
struct Series {
    std::string name;
    std::vector<double> t;
    std::vector<double> mean;
    std::vector<double> stderr_;
};

namespace detail {

inline std::string xml_escape(const std::string& s) {
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

inline const char* palette(std::size_t k) {
    static const char* colors[] = {"#1f77b4", "#ff7f0e", "#2ca02c", "#d62728", "#9467bd", "#8c564b", "#e377c2", "#7f7f7f"};
    return colors[k % 8];
}

} // namespace detail

/**
 * Line chart with a log-scaled vertical axis, one line per series and shaded standard-error
 * bands. The plotted numbers are embedded verbatim in a <metadata> CSV block.
 */
inline std::string render_chart(const std::string& title, const std::string& y_label, const std::vector<Series>& series) {
    constexpr double width = 720, height = 460, left = 80, right = 190, top = 40, bottom = 60;
    const double plot_w = width - left - right;
    const double plot_h = height - top - bottom;

    double t_min = std::numeric_limits<double>::infinity(), t_max = -t_min;
    double y_min = std::numeric_limits<double>::infinity(), y_max = 0.0;
    for (const auto& s : series)
        for (std::size_t k = 0; k < s.t.size(); ++k) {
            t_min = std::min(t_min, s.t[k]);
            t_max = std::max(t_max, s.t[k]);
            const double hi = s.mean[k] + s.stderr_[k];
            if (s.mean[k] > 0.0) y_min = std::min(y_min, s.mean[k]);
            if (s.mean[k] - s.stderr_[k] > 0.0) y_min = std::min(y_min, s.mean[k] - s.stderr_[k]);
            y_max = std::max(y_max, hi);
        }
    if (!std::isfinite(t_min)) t_min = 0.0, t_max = 1.0;
    if (t_max <= t_min) t_max = t_min + 1.0;
    if (!std::isfinite(y_min) || !(y_max > 0.0)) y_min = 1e-12, y_max = 1.0;
    double log_lo = std::floor(std::log10(y_min));
    double log_hi = std::ceil(std::log10(y_max));
    if (log_hi <= log_lo) log_hi = log_lo + 1.0;

    auto px = [&](double t) { return left + (t - t_min) / (t_max - t_min) * plot_w; };
    auto py = [&](double y) {
        const double ly = std::log10(std::max(y, std::pow(10.0, log_lo)));
        return top + (log_hi - ly) / (log_hi - log_lo) * plot_h;
    };
    auto num = [](double v) {
        char buf[32];
        std::snprintf(buf, sizeof buf, "%.2f", v);
        return std::string(buf);
    };

    std::ostringstream os;
    os << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << width << "\" height=\"" << height << "\" viewBox=\"0 0 "
       << width << ' ' << height << "\">\n";
    os << "<metadata id=\"series-data\"><![CDATA[\nseries,t,mean,stderr\n";
    for (const auto& s : series)
        for (std::size_t k = 0; k < s.t.size(); ++k)
            os << s.name << ',' << format_double(s.t[k]) << ',' << format_double(s.mean[k]) << ','
               << format_double(s.stderr_[k]) << '\n';
    os << "]]></metadata>\n";
    os << "<rect x=\"0\" y=\"0\" width=\"" << width << "\" height=\"" << height << "\" fill=\"white\"/>\n";
    os << "<text x=\"" << width / 2 << "\" y=\"24\" text-anchor=\"middle\" font-family=\"sans-serif\" font-size=\"15\">"
       << detail::xml_escape(title) << "</text>\n";

    for (double e = log_lo; e <= log_hi + 1e-9; e += 1.0) {
        const double y = py(std::pow(10.0, e));
        os << "<line x1=\"" << left << "\" y1=\"" << num(y) << "\" x2=\"" << left + plot_w << "\" y2=\"" << num(y)
           << "\" stroke=\"#ddd\"/>\n";
        os << "<text x=\"" << left - 6 << "\" y=\"" << num(y + 4) << "\" text-anchor=\"end\" font-family=\"sans-serif\" "
           << "font-size=\"11\">1e" << static_cast<int>(e) << "</text>\n";
    }
    for (int k = 0; k <= 5; ++k) {
        const double t = t_min + (t_max - t_min) * k / 5.0;
        os << "<text x=\"" << num(px(t)) << "\" y=\"" << top + plot_h + 18
           << "\" text-anchor=\"middle\" font-family=\"sans-serif\" font-size=\"11\">" << num(t) << "</text>\n";
    }
    os << "<rect x=\"" << left << "\" y=\"" << top << "\" width=\"" << plot_w << "\" height=\"" << plot_h
       << "\" fill=\"none\" stroke=\"black\"/>\n";
    os << "<text x=\"" << left + plot_w / 2 << "\" y=\"" << height - 16
       << "\" text-anchor=\"middle\" font-family=\"sans-serif\" font-size=\"13\">iteration</text>\n";
    os << "<text x=\"18\" y=\"" << top + plot_h / 2 << "\" text-anchor=\"middle\" font-family=\"sans-serif\" "
       << "font-size=\"13\" transform=\"rotate(-90 18 " << top + plot_h / 2 << ")\">" << detail::xml_escape(y_label)
       << " (log scale)</text>\n";

    for (std::size_t s = 0; s < series.size(); ++s) {
        const Series& line = series[s];
        const char* color = detail::palette(s);
        if (line.t.empty()) continue;
        os << "<polygon fill=\"" << color << "\" fill-opacity=\"0.18\" stroke=\"none\" points=\"";
        for (std::size_t k = 0; k < line.t.size(); ++k) os << num(px(line.t[k])) << ',' << num(py(line.mean[k] + line.stderr_[k])) << ' ';
        for (std::size_t k = line.t.size(); k-- > 0;) os << num(px(line.t[k])) << ',' << num(py(line.mean[k] - line.stderr_[k])) << ' ';
        os << "\"/>\n";
        os << "<polyline fill=\"none\" stroke=\"" << color << "\" stroke-width=\"1.8\" points=\"";
        for (std::size_t k = 0; k < line.t.size(); ++k) os << num(px(line.t[k])) << ',' << num(py(line.mean[k])) << ' ';
        os << "\"/>\n";
        const double ly = top + 14 + 18.0 * static_cast<double>(s);
        os << "<line x1=\"" << left + plot_w + 12 << "\" y1=\"" << ly << "\" x2=\"" << left + plot_w + 34 << "\" y2=\"" << ly
           << "\" stroke=\"" << color << "\" stroke-width=\"2\"/>\n";
        os << "<text x=\"" << left + plot_w + 40 << "\" y=\"" << ly + 4 << "\" font-family=\"sans-serif\" font-size=\"11\">"
           << detail::xml_escape(line.name) << "</text>\n";
    }
    os << "</svg>\n";
    return os.str();
}

/// Recovers the series embedded by render_chart.
inline std::vector<Series> parse_chart_data(const std::string& svg) {
    const std::string open = "<![CDATA[";
    const auto begin = svg.find(open);
    const auto end = svg.find("]]>", begin);
    if (begin == std::string::npos || end == std::string::npos) throw ParseError("chart has no data block", 1, 1);
    std::istringstream in(svg.substr(begin + open.size(), end - begin - open.size()));
    std::vector<Series> out;
    std::string line;
    bool header = true;
    while (std::getline(in, line)) {
        if (line.empty()) continue;
        if (header) {
            header = false;
            continue;
        }
        const auto cells = detail::split(line, ',');
        if (cells.size() != 4) throw ParseError("malformed chart data line", 1, 1);
        const std::string name(cells[0]);
        if (out.empty() || out.back().name != name) out.push_back(Series{name, {}, {}, {}});
        double t = 0, m = 0, s = 0;
        detail::parse_double(cells[1], t);
        detail::parse_double(cells[2], m);
        detail::parse_double(cells[3], s);
        out.back().t.push_back(t);
        out.back().mean.push_back(m);
        out.back().stderr_.push_back(s);
    }
    return out;
}

} // namespace dral
