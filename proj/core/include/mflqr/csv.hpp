#pragma once

#include <ostream>
#include <string>
#include <string_view>
#include <vector>

namespace mflqr {

/// Shortest round-trip text of a double at 17 significant digits; "nan",
/// "inf" and "-inf" for non-finite values.
std::string format_double(double v);

/// Minimal comma-separated writer with RFC 4180 quoting.
class CsvWriter {
 public:
  explicit CsvWriter(std::ostream& os) : os_(os) {}

  void header(const std::vector<std::string>& names);
  CsvWriter& field(std::string_view text);
  CsvWriter& field(double v);
  CsvWriter& field(long long v);
  CsvWriter& field(int v) { return field(static_cast<long long>(v)); }
  CsvWriter& empty();
  void end_row();

 private:
  std::ostream& os_;
  bool first_ = true;
};

}  // namespace mflqr
