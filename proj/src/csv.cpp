#include "spectrack/csv.hpp"

#include <cstdio>
#include <stdexcept>

namespace spectrack {

std::string format_real(double value) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", value);
  return buf;
}

CsvWriter::CsvWriter(const std::filesystem::path& path, const std::vector<std::string>& header)
    : out_(path) {
  if (!out_) throw std::runtime_error("cannot open " + path.string() + " for writing");
  for (const auto& h : header) field(h);
  end_row();
}

CsvWriter& CsvWriter::field(const std::string& text) {
  if (!first_) out_ << ',';
  out_ << text;
  first_ = false;
  return *this;
}

CsvWriter& CsvWriter::field(double value) { return field(format_real(value)); }
CsvWriter& CsvWriter::field(int value) { return field(std::to_string(value)); }
CsvWriter& CsvWriter::field(long value) { return field(std::to_string(value)); }

void CsvWriter::end_row() {
  out_ << '\n';
  first_ = true;
  if (!out_) throw std::runtime_error("write failed");
}

}  // namespace spectrack
