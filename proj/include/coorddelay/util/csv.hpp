#pragma once

#include <istream>
#include <ostream>
#include <string>
#include <string_view>
#include <vector>

namespace coorddelay::csv {

using Row = std::vector<std::string>;

// RFC 4180 style: fields containing a comma, quote, CR or LF are quoted and
// embedded quotes doubled. Rows end with "\n".
std::string escape(std::string_view field);
void write_row(std::ostream& out, const Row& row);

// Reads one record, honouring quoted fields that span lines. Returns false at
// end of input.
bool read_row(std::istream& in, Row& row);

/// Whole-table reader; the first row is returned separately as the header.
struct Table {
  Row header;
  std::vector<Row> rows;

  // Index of a header column, or -1.
  int column(std::string_view name) const;
};

Table read_table(std::istream& in);
Table read_table_file(const std::string& path);

// Shortest round-trip decimal representation of a double.
std::string format_double(double value);

}  // namespace coorddelay::csv
