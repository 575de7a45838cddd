#pragma once

// Minimal CSV plumbing shared by every file format in the project. Reals are
// written with 17 significant digits so that files round-trip bit-exactly.

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

namespace sblab {

class IoError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// "%.17g" formatting.
std::string format_real(double x);

class CsvWriter {
 public:
  explicit CsvWriter(std::ostream& out) : out_(out) {}

  void header(const std::vector<std::string>& names);
  CsvWriter& field(double x);
  CsvWriter& field(int x);
  CsvWriter& field(long x);
  CsvWriter& field(long long x);
  CsvWriter& field(std::size_t x) { return field(static_cast<long long>(x)); }
  CsvWriter& field(std::string_view s);
  CsvWriter& field(const char* s) { return field(std::string_view(s)); }
  void end_row();

 private:
  void sep();
  std::ostream& out_;
  bool first_ = true;
};

struct CsvTable {
  std::vector<std::string> header;
  std::vector<std::vector<std::string>> rows;
  std::vector<int> line_numbers;  // 1-based source line of each row

  /// Index of a header column; throws IoError naming the missing column.
  std::size_t column(std::string_view name) const;
};

/// Reads a comma-separated file with a mandatory header line. Blank lines are skipped.
CsvTable read_csv(const std::filesystem::path& path);
CsvTable parse_csv(std::istream& in, const std::string& source_name);

/// Strict real parse; throws IoError mentioning `where` on malformed input.
double parse_real(std::string_view s, const std::string& where);

/// Opens `path` for writing (creating parent directories) or throws IoError with the path.
std::ofstream open_output(const std::filesystem::path& path);

}  // namespace sblab
