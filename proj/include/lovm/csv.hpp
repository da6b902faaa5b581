#pragma once

#include <filesystem>
#include <iosfwd>
#include <string>
#include <string_view>
#include <vector>

namespace lovm::csv {

using Row = std::vector<std::string>;

struct Table {
  Row header;
  std::vector<Row> rows;
  // 1-based line numbers of each row in the source, for error messages.
  std::vector<std::size_t> lines;

  // Column index by name; throws LovmError(Format) when absent.
  std::size_t column(std::string_view name) const;
};

// Minimal RFC 4180 reader: quoted fields, doubled quotes, CRLF tolerated.
Table read(const std::filesystem::path& path);
Table parse(std::string_view text, const std::string& source = "<memory>");

// Enforces an exact header.
void require_header(const Table& t, const std::vector<std::string>& expected,
                    const std::string& source);

std::string escape(std::string_view field);
void write_row(std::ostream& out, const Row& row);

// Shortest representation that round-trips through strtod.
std::string format_double(double v);
double parse_double(std::string_view text, const std::string& context);

}  // namespace lovm::csv
