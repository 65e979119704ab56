#pragma once

#include <map>
#include <string>
#include <vector>

namespace fwaccel {

// Formats a double so it parses back to the identical value.
std::string format_number(double v);

// In-memory CSV with one '# key=value' comment block before the header.
// All scenario metrics are computed from this table, whether it was just
// produced by a run or read back from disk, so a replay reproduces the
// summary exactly.
struct CsvTable {
    std::vector<std::string> columns;
    std::vector<std::vector<std::string>> rows;
    std::map<std::string, std::string> meta;

    std::size_t column_index(const std::string& name) const;  // throws config_error
    std::vector<double> numeric_column(const std::string& name) const;
    std::vector<std::string> text_column(const std::string& name) const;
    double meta_number(const std::string& key) const;
    bool has_meta(const std::string& key) const { return meta.count(key) > 0; }

    void write(const std::string& path) const;
    static CsvTable read(const std::string& path);
};

// Trailing moving average over the previous `window` samples (fewer while
// the window fills).
std::vector<double> moving_average(const std::vector<double>& x, std::size_t window);

}  // namespace fwaccel
