#pragma once

#include <filesystem>
#include <string>
#include <vector>

namespace badhash {

struct CsvTable {
    std::vector<std::string> header;
    // Numeric rows; rows whose first cell is not a number are skipped.
    std::vector<std::vector<double>> rows;

    std::size_t column(const std::string& name) const;
};

CsvTable read_numeric_csv(const std::filesystem::path& path);

struct PlotSpec {
    std::string title;
    std::string x_column;
    std::vector<std::string> y_columns;
    bool log_x = false;
    int width = 640;
    int height = 480;
};

// Static line plot rendered without a display. The output depends only on
// the CSV contents and the spec.
void plot_csv(const std::filesystem::path& csv, const std::filesystem::path& png, const PlotSpec& spec);

} // namespace badhash
