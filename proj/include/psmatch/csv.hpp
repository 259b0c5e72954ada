#pragma once

#include <string>
#include <vector>

namespace psmatch {

/// Parsed delimited text: first record is the header.
struct CsvTable {
  std::vector<std::string> header;
  std::vector<std::vector<std::string>> rows;

  /// Column position for `name`, -1 when absent.
  int column(const std::string& name) const;
};

CsvTable read_csv(const std::string& path);
CsvTable parse_csv(const std::string& text);

/// One line of comma-separated fields; quotes fields containing , " or newline.
std::string csv_line(const std::vector<std::string>& fields);

/// Shortest decimal string that round-trips to the same double.
std::string format_double(double x);

double parse_double(const std::string& s, const std::string& context);

std::string trim(const std::string& s);
std::vector<std::string> split(const std::string& s, char sep);

}  // namespace psmatch
