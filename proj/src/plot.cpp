#include "relaysim/plot.hpp"

#include <algorithm>
#include <cmath>
#include <istream>
#include <limits>
#include <map>
#include <sstream>

#include "relaysim/errors.hpp"

namespace relaysim {

namespace {

constexpr double kWidth = 640;
constexpr double kHeight = 420;
constexpr double kLeft = 70;
constexpr double kRight = 170;
constexpr double kTop = 40;
constexpr double kBottom = 50;
constexpr double kLogFloor = 1e-5;

const char* kPalette[] = {"#1f77b4", "#d62728", "#2ca02c", "#ff7f0e", "#9467bd",
                          "#8c564b", "#e377c2", "#7f7f7f", "#bcbd22", "#17becf"};

std::string escape(const std::string& s) {
    std::string out;
    for (char c : s) {
        switch (c) {
            case '<': out += "&lt;"; break;
            case '>': out += "&gt;"; break;
            case '&': out += "&amp;"; break;
            case '"': out += "&quot;"; break;
            default: out += c;
        }
    }
    return out;
}

std::string fmt(double v) {
    std::ostringstream s;
    s.precision(4);
    s << v;
    return s.str();
}

double to_double(const std::string& s, std::size_t row) {
    try {
        return std::stod(s);
    } catch (const std::logic_error&) {
        throw InvalidInput("row " + std::to_string(row + 2) + ": '" + s + "' is not a number");
    }
}

}  // namespace

std::string render_svg(const Chart& chart) {
    double x0 = std::numeric_limits<double>::infinity(), x1 = -x0, y0 = x0, y1 = -x0;
    auto ty = [&](double y) { return chart.log_y ? std::log10(std::max(y, kLogFloor)) : y; };
    for (const auto& s : chart.series)
        for (auto [x, y] : s.points) {
            x0 = std::min(x0, x);
            x1 = std::max(x1, x);
            y0 = std::min(y0, ty(y));
            y1 = std::max(y1, ty(y));
        }
    if (!(x1 >= x0)) x0 = 0, x1 = 1, y0 = 0, y1 = 1;
    if (x1 == x0) x1 = x0 + 1;
    if (y1 == y0) y1 = y0 + 1;
    if (chart.log_y) y0 = std::floor(y0), y1 = std::ceil(y1);

    const double pw = kWidth - kLeft - kRight;
    const double ph = kHeight - kTop - kBottom;
    auto px = [&](double x) { return kLeft + (x - x0) / (x1 - x0) * pw; };
    auto py = [&](double y) { return kTop + (1.0 - (ty(y) - y0) / (y1 - y0)) * ph; };
    auto py_raw = [&](double t) { return kTop + (1.0 - (t - y0) / (y1 - y0)) * ph; };

    std::ostringstream o;
    o << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << kWidth << "\" height=\"" << kHeight
      << "\" font-family=\"sans-serif\" font-size=\"11\">\n";
    o << "<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n";
    o << "<text x=\"" << kWidth / 2 << "\" y=\"20\" text-anchor=\"middle\" font-size=\"14\">" << escape(chart.title)
      << "</text>\n";
    o << "<rect x=\"" << kLeft << "\" y=\"" << kTop << "\" width=\"" << pw << "\" height=\"" << ph
      << "\" fill=\"none\" stroke=\"black\"/>\n";
    for (int i = 0; i <= 5; ++i) {
        const double x = x0 + (x1 - x0) * i / 5.0;
        o << "<text x=\"" << px(x) << "\" y=\"" << kTop + ph + 15 << "\" text-anchor=\"middle\">" << fmt(x)
          << "</text>\n";
    }
    const int ticks = chart.log_y ? static_cast<int>(y1 - y0) : 5;
    for (int i = 0; i <= ticks; ++i) {
        const double t = y0 + (y1 - y0) * i / std::max(ticks, 1);
        const double label = chart.log_y ? std::pow(10.0, t) : t;
        o << "<text x=\"" << kLeft - 6 << "\" y=\"" << py_raw(t) + 4 << "\" text-anchor=\"end\">" << fmt(label)
          << "</text>\n";
        o << "<line x1=\"" << kLeft << "\" x2=\"" << kLeft + pw << "\" y1=\"" << py_raw(t) << "\" y2=\"" << py_raw(t)
          << "\" stroke=\"#ddd\"/>\n";
    }
    o << "<text x=\"" << kLeft + pw / 2 << "\" y=\"" << kHeight - 12 << "\" text-anchor=\"middle\">"
      << escape(chart.x_label) << "</text>\n";
    o << "<text transform=\"translate(16," << kTop + ph / 2 << ") rotate(-90)\" text-anchor=\"middle\">"
      << escape(chart.y_label) << "</text>\n";

    for (std::size_t i = 0; i < chart.series.size(); ++i) {
        const auto& s = chart.series[i];
        const char* colour = kPalette[i % std::size(kPalette)];
        o << "<polyline fill=\"none\" stroke=\"" << colour << "\" stroke-width=\"1.5\" points=\"";
        for (std::size_t k = 0; k < s.points.size(); ++k)
            o << (k ? " " : "") << px(s.points[k].first) << ',' << py(s.points[k].second);
        o << "\"/>\n";
        const double ly = kTop + 14.0 * static_cast<double>(i) + 8;
        o << "<line x1=\"" << kLeft + pw + 10 << "\" x2=\"" << kLeft + pw + 30 << "\" y1=\"" << ly << "\" y2=\"" << ly
          << "\" stroke=\"" << colour << "\" stroke-width=\"2\"/>\n";
        o << "<text x=\"" << kLeft + pw + 34 << "\" y=\"" << ly + 4 << "\">" << escape(s.label) << "</text>\n";
    }
    o << "</svg>\n";
    return o.str();
}

std::size_t CsvTable::column(const std::string& name) const {
    const auto it = std::find(header.begin(), header.end(), name);
    if (it == header.end()) throw InvalidInput("CSV has no column '" + name + "'");
    return static_cast<std::size_t>(it - header.begin());
}

CsvTable read_csv(std::istream& in) {
    CsvTable t;
    auto split = [](const std::string& line) {
        std::vector<std::string> cells;
        std::stringstream ss(line);
        for (std::string c; std::getline(ss, c, ',');) cells.push_back(c);
        if (!line.empty() && line.back() == ',') cells.emplace_back();
        return cells;
    };
    std::string line;
    if (!std::getline(in, line)) throw InvalidInput("CSV is empty");
    t.header = split(line);
    std::size_t n = 1;
    while (std::getline(in, line)) {
        ++n;
        if (line.empty()) continue;
        auto cells = split(line);
        if (cells.size() != t.header.size())
            throw InvalidInput("CSV line " + std::to_string(n) + ": expected " + std::to_string(t.header.size()) +
                               " columns");
        t.rows.push_back(std::move(cells));
    }
    return t;
}

Chart chart_from_csv(const CsvTable& table) {
    auto has = [&](const std::string& c) {
        return std::find(table.header.begin(), table.header.end(), c) != table.header.end();
    };
    Chart chart;
    std::map<std::string, Series> grouped;
    std::vector<std::string> order;
    auto add = [&](const std::string& label, double x, double y) {
        auto [it, inserted] = grouped.try_emplace(label, Series{label, {}});
        if (inserted) order.push_back(label);
        it->second.points.emplace_back(x, y);
    };

    if (has("ser") && has("snr_db")) {
        chart = {"SER vs SNR", "SNR (dB)", "SER", true, {}};
        const auto L = table.column("relays"), snr = table.column("snr_db"), det = table.column("detector"),
                   ser = table.column("ser");
        std::map<std::string, bool> relay_counts;
        for (const auto& r : table.rows) relay_counts[r[L]] = true;
        for (std::size_t i = 0; i < table.rows.size(); ++i) {
            const auto& r = table.rows[i];
            const std::string label = relay_counts.size() > 1 ? r[det] + " L=" + r[L] : r[det];
            add(label, to_double(r[snr], i), to_double(r[ser], i));
        }
    } else if (has("lag") && has("acf")) {
        chart = {"ACF of Re(g1)", "lag", "ACF", false, {}};
        const auto w = table.column("weighting"), m = table.column("metric"), e = table.column("epsilon"),
                   lag = table.column("lag"), acf = table.column("acf");
        for (std::size_t i = 0; i < table.rows.size(); ++i) {
            const auto& r = table.rows[i];
            add(r[w] + "+" + r[m] + " eps=" + r[e], to_double(r[lag], i), to_double(r[acf], i));
        }
    } else if (has("mean_edf_error") && has("epsilon")) {
        chart = {"EDF error vs tolerance", "epsilon", "max EDF error", false, {}};
        const auto w = table.column("weighting"), m = table.column("metric"), e = table.column("epsilon"),
                   err = table.column("mean_edf_error");
        for (std::size_t i = 0; i < table.rows.size(); ++i) {
            const auto& r = table.rows[i];
            add(r[w] + "+" + r[m], to_double(r[e], i), to_double(r[err], i));
        }
    } else {
        throw InvalidInput("unrecognised CSV layout; expected ser.csv, acf.csv or tolerance.csv");
    }
    for (const auto& label : order) {
        Series s = grouped[label];
        std::stable_sort(s.points.begin(), s.points.end());
        chart.series.push_back(std::move(s));
    }
    return chart;
}

}  // namespace relaysim
