#pragma once

#include <filesystem>
#include <string>
#include <string_view>
#include <vector>

namespace fabtip::csv {

/// Numeric CSV table with a mandatory header row.
struct Table {
  std::vector<std::string> header;
  std::vector<std::vector<double>> rows;
  /// 1-based source line of each row, for error messages.
  std::vector<std::size_t> lines;

  std::size_t column(std::string_view name) const;
  bool has_column(std::string_view name) const;
};

/// Reads a numeric CSV. Throws IoError if the file cannot be opened and
/// ValidationError (with the offending line number) on malformed rows.
/// `required` columns must appear in the header in the given order as a prefix;
/// `optional` columns may follow.
Table read(const std::filesystem::path& path, const std::vector<std::string>& required,
           const std::vector<std::string>& optional = {});

double parse_double(std::string_view text);

std::vector<std::string_view> split(std::string_view line, char sep = ',');

}  // namespace fabtip::csv
