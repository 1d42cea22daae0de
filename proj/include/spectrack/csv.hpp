#pragma once

#include <filesystem>
#include <fstream>
#include <string>
#include <vector>

namespace spectrack {

// 17 significant digits, enough to round-trip a double.
std::string format_real(double value);

// Comma-separated writer. Throws std::runtime_error if the file cannot be opened.
class CsvWriter {
 public:
  CsvWriter(const std::filesystem::path& path, const std::vector<std::string>& header);

  CsvWriter& field(const std::string& text);
  CsvWriter& field(double value);
  CsvWriter& field(int value);
  CsvWriter& field(long value);
  void end_row();

 private:
  std::ofstream out_;
  bool first_ = true;
};

}  // namespace spectrack
