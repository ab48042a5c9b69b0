#pragma once

// Plain CSV tables: header row, '.' decimals, '\n' line ends, doubles at 17
// significant digits so values round-trip exactly.

#include <cstdint>
#include <filesystem>
#include <fstream>
#include <initializer_list>
#include <locale>
#include <sstream>
#include <string>
#include <type_traits>
#include <variant>
#include <vector>

#include "sbd/error.hpp"

namespace sbd {

using CsvCell = std::variant<double, std::int64_t, std::uint64_t, std::string>;

inline std::string format_double(double v) {
  std::ostringstream os;
  os.imbue(std::locale::classic());
  os.precision(17);
  os << v;
  return os.str();
}

inline std::string format_cell(const CsvCell& c) {
  return std::visit(
      [](const auto& v) -> std::string {
        using T = std::decay_t<decltype(v)>;
        if constexpr (std::is_same_v<T, double>)
          return format_double(v);
        else if constexpr (std::is_same_v<T, std::string>)
          return v;
        else
          return std::to_string(v);
      },
      c);
}

class CsvTable {
 public:
  explicit CsvTable(std::vector<std::string> header) : header_(std::move(header)) {}

  template <class... Ts>
  void add(Ts&&... cells) {
    static_assert(sizeof...(Ts) > 0);
    std::vector<CsvCell> row;
    row.reserve(sizeof...(Ts));
    (row.push_back(to_cell(std::forward<Ts>(cells))), ...);
    push(std::move(row));
  }

  void push(std::vector<CsvCell> row) {
    require(row.size() == header_.size(), ErrorKind::InvalidArgument, "CSV row width does not match the header");
    rows_.push_back(std::move(row));
  }

  std::size_t size() const { return rows_.size(); }

  std::string str() const {
    std::string out;
    append_line(out, header_);
    for (const auto& r : rows_) {
      std::vector<std::string> cells;
      cells.reserve(r.size());
      for (const auto& c : r) cells.push_back(format_cell(c));
      append_line(out, cells);
    }
    return out;
  }

  void write(const std::filesystem::path& path) const {
    std::ofstream os(path, std::ios::binary);
    if (!os) fail(ErrorKind::IOError, "cannot open " + path.string() + " for writing");
    const auto s = str();
    os.write(s.data(), static_cast<std::streamsize>(s.size()));
    if (!os) fail(ErrorKind::IOError, "write failed for " + path.string());
  }

 private:
  template <class T>
  static CsvCell to_cell(T&& v) {
    using D = std::decay_t<T>;
    if constexpr (std::is_floating_point_v<D>)
      return static_cast<double>(v);
    else if constexpr (std::is_same_v<D, bool>)
      return static_cast<std::int64_t>(v ? 1 : 0);
    else if constexpr (std::is_integral_v<D> && std::is_signed_v<D>)
      return static_cast<std::int64_t>(v);
    else if constexpr (std::is_integral_v<D>)
      return static_cast<std::uint64_t>(v);
    else
      return std::string(std::forward<T>(v));
  }

  static void append_line(std::string& out, const std::vector<std::string>& cells) {
    for (std::size_t i = 0; i < cells.size(); ++i) {
      if (i) out += ',';
      out += cells[i];
    }
    out += '\n';
  }

  std::vector<std::string> header_;
  std::vector<std::vector<CsvCell>> rows_;
};

}  // namespace sbd
