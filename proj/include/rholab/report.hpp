#pragma once

#include <cstdint>
#include <string>
#include <variant>
#include <vector>

#include <json.hpp>

namespace rholab {

struct ConvergenceRow {
    double index = 0.0;
    double prelimit = 0.0;
    double limit = 0.0;
    double gap = 0.0;
    nlohmann::json aux = nlohmann::json::object();
};

struct ConvergenceReport {
    std::string index_name = "n";
    std::string prelimit_name = "prelimit";
    std::string limit_name = "limit";
    std::vector<ConvergenceRow> rows;
    nlohmann::json manifest = nlohmann::json::object();

    void add(double index, double prelimit, double limit, nlohmann::json aux = nlohmann::json::object());
    void sort_rows();
    // gap = |prelimit - limit| recomputed for every row.
    void recompute_gaps();
};

// Fixed-format CSV cells: doubles as %.17g, +inf as "inf".
using Cell = std::variant<double, long long, std::string, bool>;

std::string format_double(double x);
std::string format_cell(const Cell& c);
std::string csv_line(const std::vector<Cell>& cells);

struct CsvTable {
    std::vector<std::string> header;
    std::vector<std::vector<Cell>> rows;

    std::string str() const;
    void write(const std::string& path) const;
};

// Parses a CSV written by CsvTable (no quoting).
CsvTable read_csv(const std::string& path);

// 64-bit FNV-1a over a byte string.
std::uint64_t fnv1a(const std::string& bytes);
std::string hex64(std::uint64_t h);

}  // namespace rholab
