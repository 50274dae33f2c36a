#pragma once

#include <string>
#include <string_view>
#include <vector>

namespace tbench {

// Minimal RFC 4180 reader/writer: comma separated, double-quoted fields with
// "" escapes, LF or CRLF line endings.
using CsvRow = std::vector<std::string>;

struct CsvTable {
  CsvRow header;
  std::vector<CsvRow> rows;
  std::vector<std::size_t> line_numbers;  // 1-based source line of each row

  // Index of a header column; throws naming the missing column.
  std::size_t column(std::string_view name) const;
};

CsvTable parse_csv(std::string_view text, std::string_view source = "<memory>");

std::string csv_escape(std::string_view field);
std::string csv_line(const CsvRow& fields);

// Full-precision decimal rendering ("%.17g"); round-trips exactly.
std::string format_real(double value);
double parse_real(std::string_view text, std::string_view context);

}  // namespace tbench
