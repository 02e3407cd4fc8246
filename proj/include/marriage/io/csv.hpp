#ifndef MARRIAGE_IO_CSV_HPP
#define MARRIAGE_IO_CSV_HPP

#include <charconv>
#include <cmath>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <string>
#include <string_view>
#include <vector>

#include "../errors.hpp"

namespace marriage::io {

/// Rectangular numeric table with named columns.
struct Table {
    std::vector<std::string> header;
    std::vector<std::vector<double>> rows;

    void add(std::vector<double> row) { rows.push_back(std::move(row)); }
};

class IoError : public std::runtime_error {
public:
    explicit IoError(const std::string& what) : std::runtime_error(what) {}
};

/// Shortest decimal that parses back to the same double.
inline std::string format_number(double v) {
    if (std::isnan(v)) {
        return "nan";
    }
    if (std::isinf(v)) {
        return v > 0 ? "inf" : "-inf";
    }
    char buf[64];
    const auto res = std::to_chars(buf, buf + sizeof buf, v);
    return std::string(buf, res.ptr);
}

inline std::string to_csv(const Table& table) {
    if (table.header.empty()) {
        throw ConfigError("table needs at least one column");
    }
    std::string out;
    for (std::size_t j = 0; j < table.header.size(); ++j) {
        out += (j ? "," : "") + table.header[j];
    }
    out += '\n';
    for (std::size_t r = 0; r < table.rows.size(); ++r) {
        const auto& row = table.rows[r];
        if (row.size() != table.header.size()) {
            throw ConfigError("table is not rectangular: row " + std::to_string(r) + " has " +
                              std::to_string(row.size()) + " cells for " + std::to_string(table.header.size()) +
                              " columns");
        }
        for (std::size_t j = 0; j < row.size(); ++j) {
            if (j) {
                out += ',';
            }
            out += format_number(row[j]);
        }
        out += '\n';
    }
    return out;
}

/// FNV-1a, 64 bit.
inline std::uint64_t checksum(std::string_view bytes) {
    std::uint64_t h = 0xcbf29ce484222325ULL;
    for (unsigned char c : bytes) {
        h ^= c;
        h *= 0x100000001b3ULL;
    }
    return h;
}

inline std::string hex(std::uint64_t v) {
    char buf[17];
    const auto res = std::to_chars(buf, buf + 16, v, 16);
    std::string s(buf, res.ptr);
    return std::string(16 - s.size(), '0') + s;
}

inline void write_file(const std::filesystem::path& path, std::string_view content) {
    std::ofstream f(path, std::ios::binary | std::ios::trunc);
    if (!f) {
        throw IoError("cannot open " + path.string() + " for writing");
    }
    f.write(content.data(), static_cast<std::streamsize>(content.size()));
    if (!f) {
        throw IoError("write failed for " + path.string());
    }
}

/// Writes the table and returns the checksum of the bytes written.
inline std::uint64_t export_csv(const Table& table, const std::filesystem::path& path) {
    const std::string text = to_csv(table);
    write_file(path, text);
    return checksum(text);
}

/// Reads back a numeric CSV written by export_csv.
inline Table read_csv(const std::filesystem::path& path) {
    std::ifstream f(path, std::ios::binary);
    if (!f) {
        throw IoError("cannot open " + path.string());
    }
    Table t;
    std::string line;
    bool first = true;
    while (std::getline(f, line)) {
        std::vector<std::string> cells;
        std::size_t start = 0;
        for (;;) {
            const auto comma = line.find(',', start);
            cells.push_back(line.substr(start, comma - start));
            if (comma == std::string::npos) {
                break;
            }
            start = comma + 1;
        }
        if (first) {
            t.header = cells;
            first = false;
            continue;
        }
        std::vector<double> row;
        for (const auto& c : cells) {
            double v = 0.0;
            const auto res = std::from_chars(c.data(), c.data() + c.size(), v);
            if (res.ec != std::errc{} || res.ptr != c.data() + c.size()) {
                throw IoError("bad number '" + c + "' in " + path.string());
            }
            row.push_back(v);
        }
        t.rows.push_back(std::move(row));
    }
    return t;
}

}

#endif
