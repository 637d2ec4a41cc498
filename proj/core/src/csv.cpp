#include "mflqr/csv.hpp"

#include <cmath>
#include <cstdio>

namespace mflqr {

std::string format_double(double v) {
  if (std::isnan(v)) return "nan";
  if (std::isinf(v)) return v > 0 ? "inf" : "-inf";
  char buf[40];
  std::snprintf(buf, sizeof(buf), "%.17g", v);
  return buf;
}

void CsvWriter::header(const std::vector<std::string>& names) {
  for (const auto& n : names) field(std::string_view(n));
  end_row();
}

CsvWriter& CsvWriter::field(std::string_view text) {
  if (!first_) os_ << ',';
  first_ = false;
  if (text.find_first_of(",\"\r\n") == std::string_view::npos) {
    os_ << text;
    return *this;
  }
  os_ << '"';
  for (char c : text) {
    if (c == '"') os_ << '"';
    os_ << c;
  }
  os_ << '"';
  return *this;
}

CsvWriter& CsvWriter::field(double v) { return field(std::string_view(format_double(v))); }

CsvWriter& CsvWriter::field(long long v) { return field(std::string_view(std::to_string(v))); }

CsvWriter& CsvWriter::empty() {
  if (!first_) os_ << ',';
  first_ = false;
  return *this;
}

void CsvWriter::end_row() {
  os_ << "\r\n";
  first_ = true;
}

}  // namespace mflqr
