#pragma once

#include <filesystem>
#include <optional>
#include <string>
#include <vector>

namespace ecmirror {

// Minimal INI-style reader: "[section]" headers, "key = value" lines,
// '#' or ';' comments. Entries keep file order; keys may repeat.
struct ConfigEntry {
  std::string section;
  std::string key;
  std::string value;
  int line = 0;
};

class ConfigFile {
 public:
  static ConfigFile parse(const std::string& text, const std::string& origin = "<string>");
  static ConfigFile load(const std::filesystem::path& path);

  const std::vector<ConfigEntry>& entries() const { return entries_; }
  const std::string& origin() const { return origin_; }

  // Last value for key in section ("" = top level).
  std::optional<std::string> get(const std::string& section, const std::string& key) const;
  std::optional<double> get_double(const std::string& section, const std::string& key) const;

 private:
  std::string origin_;
  std::vector<ConfigEntry> entries_;
};

// Strict numeric parse; throws FormatError mentioning `what` on failure.
double parse_double(const std::string& text, const std::string& what);
std::vector<double> parse_double_list(const std::string& text, const std::string& what);

}  // namespace ecmirror
