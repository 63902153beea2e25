#pragma once

#include <cstdint>
#include <initializer_list>
#include <ostream>
#include <string>
#include <string_view>
#include <variant>
#include <vector>

namespace structpop {

/// Locale-independent shortest round-trip formatting.
std::string format_double(double v);

/// Minimal CSV emitter: LF endings, '.' decimal separator, stable columns.
class CsvWriter {
 public:
  using Cell = std::variant<double, std::int64_t, std::string>;

  CsvWriter(std::ostream& out, std::vector<std::string> header);

  void row(const std::vector<Cell>& cells);
  std::size_t rows() const noexcept { return rows_; }

 private:
  std::ostream& out_;
  std::size_t columns_;
  std::size_t rows_ = 0;
};

}  // namespace structpop
