#include "ecmirror/config_file.hpp"

#include <charconv>
#include <fstream>
#include <sstream>

#include "ecmirror/errors.hpp"

namespace ecmirror {
namespace {

std::string trim(std::string_view s) {
  const auto first = s.find_first_not_of(" \t\r");
  if (first == std::string_view::npos) return {};
  const auto last = s.find_last_not_of(" \t\r");
  return std::string(s.substr(first, last - first + 1));
}

}  // namespace

ConfigFile ConfigFile::parse(const std::string& text, const std::string& origin) {
  ConfigFile file;
  file.origin_ = origin;
  std::istringstream in(text);
  std::string raw;
  std::string section;
  int line_no = 0;
  while (std::getline(in, raw)) {
    ++line_no;
    std::string line = raw;
    if (auto hash = line.find_first_of("#;"); hash != std::string::npos) line.erase(hash);
    line = trim(line);
    if (line.empty()) continue;
    if (line.front() == '[') {
      if (line.back() != ']') {
        throw FormatError(origin + ":" + std::to_string(line_no) + ": unterminated section header");
      }
      section = trim(std::string_view(line).substr(1, line.size() - 2));
      continue;
    }
    const auto eq = line.find('=');
    if (eq == std::string::npos) {
      throw FormatError(origin + ":" + std::to_string(line_no) + ": expected key = value");
    }
    ConfigEntry entry{section, trim(std::string_view(line).substr(0, eq)),
                      trim(std::string_view(line).substr(eq + 1)), line_no};
    if (entry.key.empty()) {
      throw FormatError(origin + ":" + std::to_string(line_no) + ": empty key");
    }
    file.entries_.push_back(std::move(entry));
  }
  return file;
}

ConfigFile ConfigFile::load(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw FormatError("cannot open config file " + path.string());
  std::ostringstream buf;
  buf << in.rdbuf();
  return parse(buf.str(), path.string());
}

std::optional<std::string> ConfigFile::get(const std::string& section,
                                           const std::string& key) const {
  std::optional<std::string> found;
  for (const auto& e : entries_) {
    if (e.section == section && e.key == key) found = e.value;
  }
  return found;
}

std::optional<double> ConfigFile::get_double(const std::string& section,
                                             const std::string& key) const {
  auto v = get(section, key);
  if (!v) return std::nullopt;
  return parse_double(*v, origin_ + ": " + (section.empty() ? "" : section + ".") + key);
}

double parse_double(const std::string& text, const std::string& what) {
  const std::string t = trim(text);
  double value = 0.0;
  const char* begin = t.data();
  const char* end = t.data() + t.size();
  auto [ptr, ec] = std::from_chars(begin, end, value);
  if (t.empty() || ec != std::errc() || ptr != end) {
    throw FormatError(what + ": not a number: '" + text + "'");
  }
  return value;
}

std::vector<double> parse_double_list(const std::string& text, const std::string& what) {
  std::vector<double> out;
  std::string item;
  std::istringstream in(text);
  while (std::getline(in, item, ',')) out.push_back(parse_double(item, what));
  return out;
}

}  // namespace ecmirror
