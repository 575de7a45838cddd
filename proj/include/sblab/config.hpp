#pragma once

// Flat `key = value` experiment files. Units live in key names (alpha_rad);
// reals are stored with 17 significant digits so that a written file parses
// back to the same doubles. Lines starting with '#' are comments, which is
// how run manifests carry provenance without affecting a re-run.

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <map>
#include <optional>
#include <string>
#include <vector>

namespace sblab {

class Config {
 public:
  void set(const std::string& key, const std::string& value);
  void set_real(const std::string& key, double value);
  void set_int(const std::string& key, long long value);

  bool has(const std::string& key) const { return entries_.count(key) != 0; }
  std::optional<std::string> get(const std::string& key) const;
  const std::map<std::string, std::string>& entries() const { return entries_; }

  /// Writes `# comment` lines first, then one `key = value` per entry in key order.
  void write(std::ostream& out, const std::vector<std::string>& comments = {}) const;

  static Config parse(std::istream& in, const std::string& source_name);
  static Config load(const std::filesystem::path& path);

 private:
  std::map<std::string, std::string> entries_;
};

/// Parses reals and π-expressions: "0.5", "pi", "-pi/6", "2*pi/3", "pi/2".
double parse_angle_expr(const std::string& text);

/// Comma-separated reals, e.g. "1e-4,-1e-5".
std::vector<double> parse_real_list(const std::string& text);
std::vector<int> parse_int_list(const std::string& text);

/// Version string baked in at configure time.
const char* build_version();

}  // namespace sblab
