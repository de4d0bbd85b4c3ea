#pragma once

#include <chrono>
#include <cstdint>
#include <filesystem>
#include <map>
#include <string>
#include <vector>

#include <json.hpp>

#include "glu_ntk/core.hpp"

namespace glu_ntk {

// Shortest decimal string that parses back to the same double.
std::string format_double(double v);
double parse_double(const std::string& s);

using CsvRow = std::vector<std::string>;

struct CsvTable {
    std::string schema;  // e.g. "spectrum.v1"
    CsvRow header;
    std::vector<CsvRow> rows;

    void add(CsvRow row);
    // Column index by header name; throws FormatError when missing.
    std::size_t column(const std::string& name) const;
    std::vector<double> numeric_column(const std::string& name) const;
};

// Line 1 is "# schema: <schema>", line 2 the header, then the rows.
// Fields containing ',', '"', CR or LF are quoted with '"' doubled.
void write_csv(const std::filesystem::path& path, const CsvTable& table);
CsvTable read_csv(const std::filesystem::path& path);

struct Series {
    std::string name;
    std::vector<double> x;
    std::vector<double> y;
};

struct PlotLabels {
    std::string title;
    std::string x_label;
    std::string y_label;
    bool log_x = false;
    bool log_y = false;
};

void write_svg_lines(const std::filesystem::path& path, const PlotLabels& labels, const std::vector<Series>& series);
// Same axes and legend as the line chart, drawn as markers only.
void write_svg_scatter(const std::filesystem::path& path, const PlotLabels& labels,
                       const std::vector<Series>& groups);

struct RunManifest {
    std::vector<std::string> command_line;
    nlohmann::json config = nlohmann::json::object();
    std::map<std::string, std::uint64_t> seeds;
    std::string version;
    double duration_seconds = 0.0;
    std::vector<std::string> outputs;
    std::map<std::string, double> tolerances;
    std::map<std::string, std::string> schemas;
    nlohmann::json results = nlohmann::json::object();

    nlohmann::json to_json() const;
};

void write_manifest(const std::filesystem::path& path, const RunManifest& manifest);
RunManifest read_manifest(const std::filesystem::path& path);

std::string library_version();

}  // namespace glu_ntk
