#include "badhash/plots.hpp"

#include "badhash/error.hpp"

#include <opencv2/imgcodecs.hpp>
#include <opencv2/imgproc.hpp>

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <limits>
#include <sstream>

namespace badhash {

std::size_t CsvTable::column(const std::string& name) const {
    const auto it = std::find(header.begin(), header.end(), name);
    if (it == header.end()) throw FormatError("CSV has no column '" + name + "'");
    return static_cast<std::size_t>(it - header.begin());
}

namespace {

std::vector<std::string> split_cells(const std::string& line) {
    std::vector<std::string> cells;
    std::stringstream ss(line);
    std::string cell;
    while (std::getline(ss, cell, ',')) cells.push_back(cell);
    if (!line.empty() && line.back() == ',') cells.emplace_back();
    return cells;
}

bool parse_number(const std::string& s, double& out) {
    if (s.empty()) return false;
    char* end = nullptr;
    out = std::strtod(s.c_str(), &end);
    return end == s.c_str() + s.size();
}

std::string format_tick(double v) {
    char buf[32];
    std::snprintf(buf, sizeof(buf), "%.3g", v);
    return buf;
}

const cv::Scalar kColors[] = {{180, 119, 31}, {14, 127, 255}, {44, 160, 44}, {40, 39, 214}, {189, 103, 148}, {75, 86, 140}};

} // namespace

CsvTable read_numeric_csv(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw LoadError("cannot open " + path.string());
    CsvTable t;
    std::string line;
    if (!std::getline(in, line)) throw FormatError("empty CSV: " + path.string());
    t.header = split_cells(line);
    while (std::getline(in, line)) {
        const auto cells = split_cells(line);
        std::vector<double> row(t.header.size(), std::numeric_limits<double>::quiet_NaN());
        double first = 0.0;
        if (cells.empty() || !parse_number(cells[0], first)) continue;
        for (std::size_t i = 0; i < cells.size() && i < row.size(); ++i) parse_number(cells[i], row[i]);
        t.rows.push_back(std::move(row));
    }
    return t;
}

void plot_csv(const std::filesystem::path& csv, const std::filesystem::path& png, const PlotSpec& spec) {
    const auto table = read_numeric_csv(csv);
    const auto xc = table.column(spec.x_column);
    std::vector<std::size_t> ycs;
    for (const auto& y : spec.y_columns) ycs.push_back(table.column(y));

    const auto tx = [&](double x) { return spec.log_x ? std::log10(std::max(x, 1e-12)) : x; };
    double x0 = std::numeric_limits<double>::infinity(), x1 = -x0, y0 = x0, y1 = -x0;
    for (const auto& r : table.rows) {
        if (!std::isfinite(r[xc])) continue;
        x0 = std::min(x0, tx(r[xc]));
        x1 = std::max(x1, tx(r[xc]));
        for (auto c : ycs) {
            if (!std::isfinite(r[c])) continue;
            y0 = std::min(y0, r[c]);
            y1 = std::max(y1, r[c]);
        }
    }
    if (!std::isfinite(x0) || !std::isfinite(y0)) {
        x0 = 0;
        x1 = 1;
        y0 = 0;
        y1 = 1;
    }
    if (x1 - x0 < 1e-12) x1 = x0 + 1.0;
    if (y1 - y0 < 1e-12) {
        y0 -= 0.5;
        y1 += 0.5;
    }

    cv::Mat img(spec.height, spec.width, CV_8UC3, cv::Scalar(255, 255, 255));
    const int left = 70, right = 20, top = 40, bottom = 50;
    const int pw = spec.width - left - right, ph = spec.height - top - bottom;
    const auto px = [&](double x) { return left + static_cast<int>(std::lround((tx(x) - x0) / (x1 - x0) * pw)); };
    const auto py = [&](double y) { return top + ph - static_cast<int>(std::lround((y - y0) / (y1 - y0) * ph)); };

    const auto font = cv::FONT_HERSHEY_SIMPLEX;
    for (int i = 0; i <= 4; ++i) {
        const double fy = y0 + (y1 - y0) * i / 4.0;
        const int yy = top + ph - ph * i / 4;
        cv::line(img, {left, yy}, {left + pw, yy}, cv::Scalar(225, 225, 225), 1);
        cv::putText(img, format_tick(fy), {5, yy + 4}, font, 0.4, cv::Scalar(0, 0, 0), 1, cv::LINE_AA);
        const double fx = x0 + (x1 - x0) * i / 4.0;
        const int xx = left + pw * i / 4;
        cv::putText(img, format_tick(spec.log_x ? std::pow(10.0, fx) : fx), {xx - 12, top + ph + 18}, font, 0.4,
                    cv::Scalar(0, 0, 0), 1, cv::LINE_AA);
    }
    cv::rectangle(img, {left, top}, {left + pw, top + ph}, cv::Scalar(0, 0, 0), 1);
    cv::putText(img, spec.title, {left, 25}, font, 0.55, cv::Scalar(0, 0, 0), 1, cv::LINE_AA);
    cv::putText(img, spec.x_column, {left + pw / 2 - 20, spec.height - 10}, font, 0.45, cv::Scalar(0, 0, 0), 1, cv::LINE_AA);

    for (std::size_t s = 0; s < ycs.size(); ++s) {
        const auto color = kColors[s % std::size(kColors)];
        std::vector<cv::Point> pts;
        for (const auto& r : table.rows) {
            if (std::isfinite(r[xc]) && std::isfinite(r[ycs[s]])) pts.emplace_back(px(r[xc]), py(r[ycs[s]]));
        }
        if (pts.size() == 1) cv::circle(img, pts[0], 3, color, cv::FILLED, cv::LINE_AA);
        if (pts.size() > 1) cv::polylines(img, pts, false, color, 2, cv::LINE_AA);
        const int ly = top + 15 + 16 * static_cast<int>(s);
        cv::line(img, {left + pw - 130, ly - 4}, {left + pw - 110, ly - 4}, color, 2);
        cv::putText(img, spec.y_columns[s], {left + pw - 105, ly}, font, 0.4, cv::Scalar(0, 0, 0), 1, cv::LINE_AA);
    }
    if (!png.parent_path().empty()) std::filesystem::create_directories(png.parent_path());
    if (!cv::imwrite(png.string(), img)) throw LoadError("cannot write " + png.string());
}

} // namespace badhash
