#pragma once

#include <iosfwd>
#include <string>
#include <utility>
#include <vector>

namespace relaysim {

struct Series {
    std::string label;
    std::vector<std::pair<double, double>> points;
};

struct Chart {
    std::string title;
    std::string x_label;
    std::string y_label;
    bool log_y = false;
    std::vector<Series> series;
};

/// Line chart with one polyline per series.
std::string render_svg(const Chart& chart);

/// Simple comma-separated table with a header row.
struct CsvTable {
    std::vector<std::string> header;
    std::vector<std::vector<std::string>> rows;

    std::size_t column(const std::string& name) const;
};

CsvTable read_csv(std::istream& in);

/// Chart for a CSV written by the harness, chosen from its header: SER vs SNR
/// (one series per relay count and detector), ACF vs lag (one per
/// configuration and tolerance) or EDF error vs tolerance (one per
/// configuration).
Chart chart_from_csv(const CsvTable& table);

}  // namespace relaysim
