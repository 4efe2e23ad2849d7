#pragma once

#include <cstdint>
#include <string>
#include <string_view>
#include <vector>

namespace comcure {

// Run configuration in INI form: `[section]` headers, `key = value` lines,
// `#` comments. Values stay strings until a typed getter is called, so the
// schema lives with the commands that consume it.
class Manifest {
 public:
  static Manifest parse_file(const std::string& path);
  static Manifest parse_string(const std::string& text, const std::string& origin);

  bool has_section(const std::string& section) const;
  bool has(const std::string& section, const std::string& key) const;

  // Missing key or section throws std::invalid_argument naming both.
  std::string get(const std::string& section, const std::string& key) const;
  std::string get_or(const std::string& section, const std::string& key,
                     const std::string& fallback) const;

  double get_double(const std::string& section, const std::string& key) const;
  double get_double_or(const std::string& section, const std::string& key,
                       double fallback) const;
  long get_int(const std::string& section, const std::string& key) const;
  long get_int_or(const std::string& section, const std::string& key,
                  long fallback) const;
  bool get_bool_or(const std::string& section, const std::string& key,
                   bool fallback) const;
  // Comma- or space-separated list of numbers.
  std::vector<double> get_double_list(const std::string& section,
                                      const std::string& key) const;
  std::vector<std::string> get_string_list(const std::string& section,
                                           const std::string& key) const;

  // Keys of a section in file order (empty if the section is absent).
  std::vector<std::string> keys(const std::string& section) const;

  // FNV-1a of the raw text, for provenance lines in output files.
  std::uint64_t hash() const { return hash_; }
  const std::string& origin() const { return origin_; }

 private:
  struct Entry {
    std::string section;
    std::string key;
    std::string value;
  };
  std::vector<Entry> entries_;  // file order
  std::string origin_;
  std::uint64_t hash_ = 0;

  const Entry* find(const std::string& section, const std::string& key) const;
};

std::uint64_t fnv1a64(std::string_view bytes);
std::uint64_t hash_file(const std::string& path);
std::string hash_hex(std::uint64_t h);

}  // namespace comcure
