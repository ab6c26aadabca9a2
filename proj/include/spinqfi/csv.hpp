#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <variant>
#include <vector>

namespace spinqfi {

/// Shortest decimal that parses back to the same double.
std::string format_number(double value);

using CsvCell = std::variant<double, std::int64_t, std::string>;

struct CsvTable {
  std::vector<std::string> header;
  std::vector<std::vector<CsvCell>> rows;

  void add(std::vector<CsvCell> row);
  std::string render() const;
  void write(const std::filesystem::path& path) const;
};

}  // namespace spinqfi
