#include "fwaccel/csv.hpp"

#include <cstdio>
#include <fstream>
#include <sstream>

#include "fwaccel/error.hpp"

namespace fwaccel {

std::string format_number(double v) {
    char buf[40];
    std::snprintf(buf, sizeof(buf), "%.17g", v);
    return buf;
}

std::size_t CsvTable::column_index(const std::string& name) const {
    for (std::size_t i = 0; i < columns.size(); ++i)
        if (columns[i] == name) return i;
    throw Error(Errc::config_error, "missing CSV column: " + name);
}

std::vector<double> CsvTable::numeric_column(const std::string& name) const {
    const std::size_t idx = column_index(name);
    std::vector<double> out;
    out.reserve(rows.size());
    for (const auto& row : rows) out.push_back(std::stod(row.at(idx)));
    return out;
}

std::vector<std::string> CsvTable::text_column(const std::string& name) const {
    const std::size_t idx = column_index(name);
    std::vector<std::string> out;
    out.reserve(rows.size());
    for (const auto& row : rows) out.push_back(row.at(idx));
    return out;
}

double CsvTable::meta_number(const std::string& key) const {
    auto it = meta.find(key);
    if (it == meta.end())
        throw Error(Errc::config_error, "missing CSV metadata key: " + key);
    return std::stod(it->second);
}

void CsvTable::write(const std::string& path) const {
    std::ofstream out(path);
    if (!out)
        throw Error(Errc::io_error, "cannot open CSV for writing: " + path);
    for (const auto& [key, value] : meta) out << "# " << key << "=" << value << "\n";
    for (std::size_t i = 0; i < columns.size(); ++i)
        out << columns[i] << (i + 1 < columns.size() ? "," : "\n");
    for (const auto& row : rows) {
        if (row.size() != columns.size())
            throw Error(Errc::io_error, "CSV row width mismatch");
        for (std::size_t i = 0; i < row.size(); ++i)
            out << row[i] << (i + 1 < row.size() ? "," : "\n");
    }
    if (!out)
        throw Error(Errc::io_error, "failed writing CSV: " + path);
}

CsvTable CsvTable::read(const std::string& path) {
    std::ifstream in(path);
    if (!in)
        throw Error(Errc::io_error, "cannot open CSV: " + path);

    CsvTable table;
    std::string line;
    bool header_seen = false;
    while (std::getline(in, line)) {
        if (line.empty()) continue;
        if (line[0] == '#') {
            std::string body = line.substr(1);
            if (!body.empty() && body[0] == ' ') body.erase(0, 1);
            const std::size_t eq = body.find('=');
            if (eq != std::string::npos)
                table.meta[body.substr(0, eq)] = body.substr(eq + 1);
            continue;
        }
        std::vector<std::string> fields;
        std::stringstream ss(line);
        std::string field;
        while (std::getline(ss, field, ',')) fields.push_back(field);
        if (line.back() == ',') fields.push_back("");
        if (!header_seen) {
            table.columns = fields;
            header_seen = true;
        } else {
            table.rows.push_back(std::move(fields));
        }
    }
    if (!header_seen)
        throw Error(Errc::config_error, "CSV has no header row: " + path);
    return table;
}

std::vector<double> moving_average(const std::vector<double>& x, std::size_t window) {
    if (window == 0)
        throw Error(Errc::invalid_input, "moving-average window must be positive");
    std::vector<double> out(x.size(), 0.0);
    double acc = 0.0;
    for (std::size_t i = 0; i < x.size(); ++i) {
        acc += x[i];
        if (i >= window) acc -= x[i - window];
        const std::size_t n = std::min(i + 1, window);
        out[i] = acc / static_cast<double>(n);
    }
    return out;
}

}  // namespace fwaccel
