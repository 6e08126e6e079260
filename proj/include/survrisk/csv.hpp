#pragma once

#include <iosfwd>
#include <string>
#include <string_view>
#include <vector>

namespace survrisk::csv {

struct Table {
  std::vector<std::string> header;
  std::vector<std::vector<std::string>> rows;
  // 1-based line number in the source file for each row.
  std::vector<std::size_t> line_numbers;

  // Index of `name` in the header, or -1.
  int column(std::string_view name) const;
};

// Comma-separated, optional double-quoted fields, header row required.
// Throws DataError when the file cannot be opened or is empty.
Table read_file(const std::string& path);
Table parse(std::istream& in, const std::string& source_name);

std::vector<std::string> split_line(std::string_view line);

// Shortest representation that parses back to the same double.
std::string format_double(double v);

void write_row(std::ostream& out, const std::vector<std::string>& fields);

}  // namespace survrisk::csv
