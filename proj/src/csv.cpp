#include "fabtip/csv.hpp"

#include <algorithm>
#include <charconv>
#include <fstream>

#include "fabtip/errors.hpp"

namespace fabtip::csv {

std::size_t Table::column(std::string_view name) const {
  auto it = std::find(header.begin(), header.end(), name);
  if (it == header.end()) throw ValidationError("missing column '" + std::string(name) + "'");
  return static_cast<std::size_t>(it - header.begin());
}

bool Table::has_column(std::string_view name) const {
  return std::find(header.begin(), header.end(), name) != header.end();
}

std::vector<std::string_view> split(std::string_view line, char sep) {
  std::vector<std::string_view> out;
  std::size_t start = 0;
  while (true) {
    auto pos = line.find(sep, start);
    out.push_back(line.substr(start, pos == std::string_view::npos ? std::string_view::npos : pos - start));
    if (pos == std::string_view::npos) break;
    start = pos + 1;
  }
  return out;
}

static std::string_view trim(std::string_view s) {
  while (!s.empty() && (s.front() == ' ' || s.front() == '\t')) s.remove_prefix(1);
  while (!s.empty() && (s.back() == ' ' || s.back() == '\t' || s.back() == '\r')) s.remove_suffix(1);
  return s;
}

double parse_double(std::string_view text) {
  text = trim(text);
  double value = 0.0;
  auto [ptr, ec] = std::from_chars(text.data(), text.data() + text.size(), value);
  if (ec != std::errc() || ptr != text.data() + text.size() || text.empty())
    throw ValidationError("not a number: '" + std::string(text) + "'");
  return value;
}

Table read(const std::filesystem::path& path, const std::vector<std::string>& required,
           const std::vector<std::string>& optional) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open '" + path.string() + "'");

  Table table;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (!trim(line).empty()) break;
  }
  if (trim(line).empty()) throw ValidationError(path.string() + ": empty file");

  for (auto field : split(line)) table.header.emplace_back(trim(field));
  if (table.header.size() < required.size() ||
      !std::equal(required.begin(), required.end(), table.header.begin()))
    throw ValidationError(path.string() + ":" + std::to_string(line_no) + ": expected header starting with '" +
                          [&] {
                            std::string s;
                            for (const auto& r : required) s += (s.empty() ? "" : ",") + r;
                            return s;
                          }() +
                          "'");
  for (std::size_t i = required.size(); i < table.header.size(); ++i) {
    if (std::find(optional.begin(), optional.end(), table.header[i]) == optional.end())
      throw ValidationError(path.string() + ":" + std::to_string(line_no) + ": unexpected column '" +
                            table.header[i] + "'");
  }

  while (std::getline(in, line)) {
    ++line_no;
    if (trim(line).empty()) continue;
    auto fields = split(line);
    if (fields.size() != table.header.size())
      throw ValidationError(path.string() + ":" + std::to_string(line_no) + ": expected " +
                            std::to_string(table.header.size()) + " fields, got " + std::to_string(fields.size()));
    std::vector<double> row;
    row.reserve(fields.size());
    for (auto f : fields) {
      try {
        row.push_back(parse_double(f));
      } catch (const ValidationError& e) {
        throw ValidationError(path.string() + ":" + std::to_string(line_no) + ": " + e.what());
      }
    }
    table.rows.push_back(std::move(row));
    table.lines.push_back(line_no);
  }
  return table;
}

}  // namespace fabtip::csv
