#include "rholab/report.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <sstream>

#include "rholab/errors.hpp"

namespace rholab {

void ConvergenceReport::add(double index, double prelimit, double limit, nlohmann::json aux) {
    ConvergenceRow r;
    r.index = index;
    r.prelimit = prelimit;
    r.limit = limit;
    r.gap = std::abs(prelimit - limit);
    r.aux = std::move(aux);
    rows.push_back(std::move(r));
}

void ConvergenceReport::sort_rows() {
    std::stable_sort(rows.begin(), rows.end(),
                     [](const ConvergenceRow& a, const ConvergenceRow& b) { return a.index < b.index; });
}

void ConvergenceReport::recompute_gaps() {
    for (auto& r : rows) r.gap = std::abs(r.prelimit - r.limit);
}

std::string format_double(double x) {
    if (std::isnan(x)) return "nan";
    if (std::isinf(x)) return x > 0 ? "inf" : "-inf";
    char buf[64];
    std::snprintf(buf, sizeof buf, "%.17g", x);
    return buf;
}

std::string format_cell(const Cell& c) {
    return std::visit(
        [](const auto& v) -> std::string {
            using T = std::decay_t<decltype(v)>;
            if constexpr (std::is_same_v<T, double>) {
                return format_double(v);
            } else if constexpr (std::is_same_v<T, long long>) {
                return std::to_string(v);
            } else if constexpr (std::is_same_v<T, bool>) {
                return v ? "true" : "false";
            } else {
                return v;
            }
        },
        c);
}

std::string csv_line(const std::vector<Cell>& cells) {
    std::string s;
    for (std::size_t i = 0; i < cells.size(); ++i) {
        if (i) s += ',';
        s += format_cell(cells[i]);
    }
    return s;
}

std::string CsvTable::str() const {
    std::string s;
    for (std::size_t i = 0; i < header.size(); ++i) {
        if (i) s += ',';
        s += header[i];
    }
    s += '\n';
    for (const auto& r : rows) {
        s += csv_line(r);
        s += '\n';
    }
    return s;
}

void CsvTable::write(const std::string& path) const {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw ValidationError("cannot write " + path);
    out << str();
}

CsvTable read_csv(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw ValidationError("cannot open " + path);
    CsvTable t;
    std::string line;
    auto split = [](const std::string& l) {
        std::vector<std::string> out;
        std::stringstream ss(l);
        std::string item;
        while (std::getline(ss, item, ',')) out.push_back(item);
        if (!l.empty() && l.back() == ',') out.emplace_back();
        return out;
    };
    if (!std::getline(in, line)) throw ValidationError(path + ": empty CSV");
    t.header = split(line);
    while (std::getline(in, line)) {
        if (line.empty()) continue;
        auto items = split(line);
        if (items.size() != t.header.size()) {
            throw ValidationError(path + ": row width differs from header");
        }
        std::vector<Cell> row;
        for (auto& it : items) {
            char* end = nullptr;
            double v = std::strtod(it.c_str(), &end);
            if (!it.empty() && end == it.c_str() + it.size()) {
                row.emplace_back(v);
            } else if (it == "true" || it == "false") {
                row.emplace_back(it == "true");
            } else {
                row.emplace_back(it);
            }
        }
        t.rows.push_back(std::move(row));
    }
    return t;
}

std::uint64_t fnv1a(const std::string& bytes) {
    std::uint64_t h = 14695981039346656037ull;
    for (unsigned char c : bytes) {
        h ^= c;
        h *= 1099511628211ull;
    }
    return h;
}

std::string hex64(std::uint64_t h) {
    char buf[17];
    std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(h));
    return buf;
}

}  // namespace rholab
