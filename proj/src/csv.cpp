#include "spinqfi/csv.hpp"

#include <array>
#include <charconv>
#include <cmath>
#include <fstream>
#include <stdexcept>

namespace spinqfi {

std::string format_number(double value) {
  if (!std::isfinite(value)) throw std::invalid_argument("refusing to write a non-finite value");
  if (value == 0.0) value = 0.0;  // drop the sign of -0
  std::array<char, 64> buffer{};
  const auto [end, ec] = std::to_chars(buffer.data(), buffer.data() + buffer.size(), value);
  if (ec != std::errc{}) throw std::runtime_error("number formatting failed");
  return {buffer.data(), end};
}

void CsvTable::add(std::vector<CsvCell> row) {
  if (row.size() != header.size()) throw std::invalid_argument("row width does not match the header");
  rows.push_back(std::move(row));
}

std::string CsvTable::render() const {
  std::string out;
  for (std::size_t c = 0; c < header.size(); ++c) out += (c ? "," : "") + header[c];
  out += '\n';
  for (const auto& row : rows) {
    for (std::size_t c = 0; c < row.size(); ++c) {
      if (c) out += ',';
      if (const auto* d = std::get_if<double>(&row[c]))
        out += format_number(*d);
      else if (const auto* i = std::get_if<std::int64_t>(&row[c]))
        out += std::to_string(*i);
      else
        out += std::get<std::string>(row[c]);
    }
    out += '\n';
  }
  return out;
}

void CsvTable::write(const std::filesystem::path& path) const {
  const std::string text = render();
  std::ofstream file(path, std::ios::binary);
  if (!file) throw std::runtime_error("cannot open " + path.string());
  file << text;
  if (!file) throw std::runtime_error("write failed: " + path.string());
}

}  // namespace spinqfi
