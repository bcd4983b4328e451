#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "tailbound/errors.hpp"

namespace tailbound::csv {

// Locale-free cell formatting.  Doubles use the shortest round-trip decimal
// form ('.' separator always); bools become 0/1; an empty optional becomes an
// empty cell.
std::string cell(double v);
std::string cell(std::uint64_t v);
std::string cell(int v);
std::string cell(bool v);
std::string cell(const std::string& v);
std::string cell(std::optional<double> v);

struct Table {
    std::vector<std::string> header;
    std::vector<std::vector<std::string>> rows;
};

// Comma-separated with RFC-4180 quoting, '\n' line endings, header row first.
// Every row must have the header's width.  Throws IoError on filesystem
// failure, ParameterError on ragged rows.
void write(const std::filesystem::path& path, const Table& table);

// Inverse of write (quoted cells are unescaped).  Throws IoError when the
// file is missing or ragged.
Table read(const std::filesystem::path& path);

// Strict full-cell parse.  `context` names the file/column for the error.
double to_double(const std::string& cell, const std::string& context);

}  // namespace tailbound::csv
