#include "sblab/config.hpp"

#include "sblab/io.hpp"

#include <cctype>
#include <cmath>
#include <fstream>
#include <numbers>
#include <ostream>
#include <sstream>

#ifndef SBLAB_GIT_DESCRIBE
#define SBLAB_GIT_DESCRIBE "unknown"
#endif

namespace sblab {

namespace {

std::string trim(const std::string& s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string::npos) return "";
  const auto e = s.find_last_not_of(" \t\r");
  return s.substr(b, e - b + 1);
}

bool valid_key(const std::string& k) {
  if (k.empty()) return false;
  for (char c : k)
    if (!(std::isalnum(static_cast<unsigned char>(c)) || c == '_' || c == '-' || c == '.')) return false;
  return true;
}

}  // namespace

void Config::set(const std::string& key, const std::string& value) {
  if (!valid_key(key)) throw IoError("config: invalid key '" + key + "'");
  if (value.find('\n') != std::string::npos) throw IoError("config: value of '" + key + "' spans lines");
  entries_[key] = trim(value);
}

void Config::set_real(const std::string& key, double value) { set(key, format_real(value)); }
void Config::set_int(const std::string& key, long long value) { set(key, std::to_string(value)); }

std::optional<std::string> Config::get(const std::string& key) const {
  const auto it = entries_.find(key);
  if (it == entries_.end()) return std::nullopt;
  return it->second;
}

void Config::write(std::ostream& out, const std::vector<std::string>& comments) const {
  for (const auto& c : comments) out << "# " << c << '\n';
  for (const auto& [k, v] : entries_) out << k << " = " << v << '\n';
}

Config Config::parse(std::istream& in, const std::string& source_name) {
  Config c;
  std::string line;
  int lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    const std::string t = trim(line);
    if (t.empty() || t[0] == '#') continue;
    const auto eq = t.find('=');
    if (eq == std::string::npos)
      throw IoError(source_name + ":" + std::to_string(lineno) + ": expected 'key = value'");
    const std::string key = trim(t.substr(0, eq));
    if (!valid_key(key)) throw IoError(source_name + ":" + std::to_string(lineno) + ": invalid key '" + key + "'");
    if (c.has(key)) throw IoError(source_name + ":" + std::to_string(lineno) + ": duplicate key '" + key + "'");
    c.entries_[key] = trim(t.substr(eq + 1));
  }
  return c;
}

Config Config::load(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open " + path.string());
  return parse(in, path.string());
}

double parse_angle_expr(const std::string& text) {
  std::string s;
  for (char ch : text)
    if (!std::isspace(static_cast<unsigned char>(ch))) s += ch;
  if (s.empty()) throw IoError("empty angle expression");
  const auto p = s.find("pi");
  if (p == std::string::npos) return parse_real(s, "angle");

  // [sign][coef*]pi[/den]
  std::string pre = s.substr(0, p);
  const std::string post = s.substr(p + 2);
  double sign = 1.0;
  if (!pre.empty() && (pre[0] == '-' || pre[0] == '+')) {
    if (pre[0] == '-') sign = -1.0;
    pre.erase(0, 1);
  }
  double coef = 1.0;
  if (!pre.empty()) {
    if (pre.back() != '*') throw IoError("malformed angle expression '" + text + "'");
    pre.pop_back();
    coef = parse_real(pre, "angle coefficient");
  }
  double den = 1.0;
  if (!post.empty()) {
    if (post[0] != '/') throw IoError("malformed angle expression '" + text + "'");
    den = parse_real(post.substr(1), "angle denominator");
    if (den == 0.0) throw IoError("angle expression divides by zero");
  }
  return sign * coef * std::numbers::pi / den;
}

std::vector<double> parse_real_list(const std::string& text) {
  std::vector<double> out;
  std::stringstream ss(text);
  std::string item;
  while (std::getline(ss, item, ',')) out.push_back(parse_real(trim(item), "list"));
  if (out.empty()) throw IoError("empty list");
  return out;
}

std::vector<int> parse_int_list(const std::string& text) {
  std::vector<int> out;
  for (double x : parse_real_list(text)) {
    if (x != std::floor(x)) throw IoError("expected integers in list '" + text + "'");
    out.push_back(static_cast<int>(x));
  }
  return out;
}

const char* build_version() { return SBLAB_GIT_DESCRIBE; }

}  // namespace sblab
