#include "tailbound/csv.hpp"

#include <charconv>
#include <fstream>
#include <sstream>
#include <system_error>

namespace tailbound::csv {

std::string cell(double v) {
    char buf[64];
    const auto res = std::to_chars(buf, buf + sizeof(buf), v);
    return std::string(buf, res.ptr);
}

std::string cell(std::uint64_t v) {
    char buf[24];
    const auto res = std::to_chars(buf, buf + sizeof(buf), v);
    return std::string(buf, res.ptr);
}

std::string cell(int v) {
    char buf[16];
    const auto res = std::to_chars(buf, buf + sizeof(buf), v);
    return std::string(buf, res.ptr);
}

std::string cell(bool v) { return v ? "1" : "0"; }

std::string cell(const std::string& v) { return v; }

std::string cell(std::optional<double> v) { return v ? cell(*v) : std::string(); }

namespace {

bool needs_quoting(const std::string& s) {
    return s.find_first_of(",\"\n\r") != std::string::npos;
}

void append_cell(std::string& out, const std::string& s) {
    if (!needs_quoting(s)) {
        out += s;
        return;
    }
    out += '"';
    for (char ch : s) {
        if (ch == '"') out += '"';
        out += ch;
    }
    out += '"';
}

void append_row(std::string& out, const std::vector<std::string>& row) {
    for (std::size_t j = 0; j < row.size(); ++j) {
        if (j) out += ',';
        append_cell(out, row[j]);
    }
    out += '\n';
}

// One line into cells; quoted cells may not span lines (none of ours do).
std::vector<std::string> split_line(const std::string& line,
                                    const std::filesystem::path& path) {
    std::vector<std::string> cells;
    std::string cur;
    bool quoted = false;
    for (std::size_t i = 0; i < line.size(); ++i) {
        const char ch = line[i];
        if (quoted) {
            if (ch == '"') {
                if (i + 1 < line.size() && line[i + 1] == '"') {
                    cur += '"';
                    ++i;
                } else {
                    quoted = false;
                }
            } else {
                cur += ch;
            }
        } else if (ch == '"' && cur.empty()) {
            quoted = true;
        } else if (ch == ',') {
            cells.push_back(std::move(cur));
            cur.clear();
        } else {
            cur += ch;
        }
    }
    if (quoted)
        throw IoError("csv: unterminated quote in " + path.string());
    cells.push_back(std::move(cur));
    return cells;
}

}  // namespace

void write(const std::filesystem::path& path, const Table& table) {
    std::string out;
    append_row(out, table.header);
    for (const auto& row : table.rows) {
        if (row.size() != table.header.size())
            throw ParameterError("csv: row width " + std::to_string(row.size()) +
                                 " != header width " + std::to_string(table.header.size()) +
                                 " writing " + path.string());
        append_row(out, row);
    }
    std::ofstream f(path, std::ios::binary | std::ios::trunc);
    if (!f) throw IoError("csv: cannot open " + path.string() + " for writing");
    f.write(out.data(), static_cast<std::streamsize>(out.size()));
    f.flush();
    if (!f) throw IoError("csv: short write to " + path.string());
}

Table read(const std::filesystem::path& path) {
    std::ifstream f(path, std::ios::binary);
    if (!f) throw IoError("csv: cannot open " + path.string());
    Table table;
    std::string line;
    while (std::getline(f, line)) {
        if (!line.empty() && line.back() == '\r') line.pop_back();
        if (line.empty() && f.peek() == std::char_traits<char>::eof()) break;
        auto cells = split_line(line, path);
        if (table.header.empty()) {
            table.header = std::move(cells);
        } else {
            if (cells.size() != table.header.size())
                throw IoError("csv: ragged row in " + path.string() + " (" +
                              std::to_string(cells.size()) + " cells, header has " +
                              std::to_string(table.header.size()) + ")");
            table.rows.push_back(std::move(cells));
        }
    }
    if (table.header.empty()) throw IoError("csv: " + path.string() + " is empty");
    return table;
}

double to_double(const std::string& cell, const std::string& context) {
    double v = 0.0;
    const char* first = cell.data();
    const char* last = first + cell.size();
    const auto res = std::from_chars(first, last, v);
    if (res.ec != std::errc{} || res.ptr != last)
        throw IoError("csv: cannot parse \"" + cell + "\" as a number in " + context);
    return v;
}

}  // namespace tailbound::csv
