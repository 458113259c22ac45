#pragma once

// Flat `key = value` text files. Blank lines and lines starting with '#' are
// ignored; a trailing `# comment` after a value is stripped.

#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <vector>

namespace vfae {

class KeyValueFile {
 public:
  static KeyValueFile parse(const std::string& text, const std::string& origin = "<string>");
  static KeyValueFile load(const std::filesystem::path& path);

  bool has(const std::string& key) const { return values_.count(key) != 0; }
  std::optional<std::string> get(const std::string& key) const;
  std::string get_or(const std::string& key, const std::string& fallback) const;
  void set(const std::string& key, std::string value, std::string comment = {});

  const std::map<std::string, std::string>& values() const { return values_; }

  /// Keys are written in sorted order so output is stable.
  std::string to_string() const;
  void save(const std::filesystem::path& path) const;

 private:
  std::map<std::string, std::string> values_;
  std::map<std::string, std::string> comments_;
};

std::string trim(const std::string& s);
std::vector<std::string> split(const std::string& s, char sep);
double parse_double(const std::string& text, const std::string& what);
long long parse_int(const std::string& text, const std::string& what);
bool parse_bool(const std::string& text, const std::string& what);
std::string format_double(double v);

}  // namespace vfae
