#include "comcure/manifest.hpp"

#include <cmath>
#include <cstdio>
#include <fstream>
#include <sstream>
#include <stdexcept>

namespace comcure {

namespace {

std::string trim(const std::string& s) {
  std::size_t a = s.find_first_not_of(" \t\r");
  if (a == std::string::npos) return "";
  std::size_t b = s.find_last_not_of(" \t\r");
  return s.substr(a, b - a + 1);
}

}  // namespace

Manifest Manifest::parse_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::invalid_argument("cannot open manifest file: " + path);
  std::ostringstream buf;
  buf << in.rdbuf();
  return parse_string(buf.str(), path);
}

Manifest Manifest::parse_string(const std::string& text, const std::string& origin) {
  Manifest m;
  m.origin_ = origin;
  m.hash_ = fnv1a64(text);

  std::istringstream in(text);
  std::string line;
  std::string section;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    const std::string s = trim(line);
    if (s.empty() || s[0] == '#' || s[0] == ';') continue;
    if (s.front() == '[') {
      if (s.back() != ']' || s.size() < 3) {
        throw std::invalid_argument(origin + ":" + std::to_string(line_no) +
                                    ": malformed section header");
      }
      section = trim(s.substr(1, s.size() - 2));
      continue;
    }
    const std::size_t eq = s.find('=');
    if (eq == std::string::npos) {
      throw std::invalid_argument(origin + ":" + std::to_string(line_no) +
                                  ": expected key = value");
    }
    const std::string key = trim(s.substr(0, eq));
    if (key.empty()) {
      throw std::invalid_argument(origin + ":" + std::to_string(line_no) +
                                  ": empty key");
    }
    if (section.empty()) {
      throw std::invalid_argument(origin + ":" + std::to_string(line_no) +
                                  ": key outside any [section]");
    }
    if (m.find(section, key) != nullptr) {
      throw std::invalid_argument(origin + ":" + std::to_string(line_no) +
                                  ": duplicate key '" + section + "." + key + "'");
    }
    m.entries_.push_back({section, key, trim(s.substr(eq + 1))});
  }
  return m;
}

const Manifest::Entry* Manifest::find(const std::string& section,
                                      const std::string& key) const {
  for (const Entry& e : entries_) {
    if (e.section == section && e.key == key) return &e;
  }
  return nullptr;
}

bool Manifest::has_section(const std::string& section) const {
  for (const Entry& e : entries_) {
    if (e.section == section) return true;
  }
  return false;
}

bool Manifest::has(const std::string& section, const std::string& key) const {
  return find(section, key) != nullptr;
}

std::string Manifest::get(const std::string& section, const std::string& key) const {
  const Entry* e = find(section, key);
  if (!e) {
    throw std::invalid_argument(origin_ + ": missing required key '" + section +
                                "." + key + "'");
  }
  return e->value;
}

std::string Manifest::get_or(const std::string& section, const std::string& key,
                             const std::string& fallback) const {
  const Entry* e = find(section, key);
  return e ? e->value : fallback;
}

namespace {

double to_double(const std::string& s, const std::string& where) {
  std::size_t pos = 0;
  double v = 0.0;
  try {
    v = std::stod(s, &pos);
  } catch (const std::exception&) {
    pos = std::string::npos;
  }
  if (pos != s.size() || s.empty()) {
    throw std::invalid_argument(where + ": '" + s + "' is not a number");
  }
  return v;
}

}  // namespace

double Manifest::get_double(const std::string& section, const std::string& key) const {
  return to_double(get(section, key), origin_ + ": " + section + "." + key);
}

double Manifest::get_double_or(const std::string& section, const std::string& key,
                               double fallback) const {
  const Entry* e = find(section, key);
  return e ? to_double(e->value, origin_ + ": " + section + "." + key) : fallback;
}

long Manifest::get_int(const std::string& section, const std::string& key) const {
  const double v = get_double(section, key);
  if (v != std::floor(v)) {
    throw std::invalid_argument(origin_ + ": " + section + "." + key +
                                " must be an integer");
  }
  return static_cast<long>(v);
}

long Manifest::get_int_or(const std::string& section, const std::string& key,
                          long fallback) const {
  return has(section, key) ? get_int(section, key) : fallback;
}

bool Manifest::get_bool_or(const std::string& section, const std::string& key,
                           bool fallback) const {
  const Entry* e = find(section, key);
  if (!e) return fallback;
  if (e->value == "true" || e->value == "1" || e->value == "yes") return true;
  if (e->value == "false" || e->value == "0" || e->value == "no") return false;
  throw std::invalid_argument(origin_ + ": " + section + "." + key +
                              " must be true or false");
}

std::vector<double> Manifest::get_double_list(const std::string& section,
                                              const std::string& key) const {
  std::string raw = get(section, key);
  for (char& c : raw) {
    if (c == ',') c = ' ';
  }
  std::istringstream ss(raw);
  std::vector<double> out;
  std::string tok;
  while (ss >> tok) {
    out.push_back(to_double(tok, origin_ + ": " + section + "." + key));
  }
  if (out.empty()) {
    throw std::invalid_argument(origin_ + ": " + section + "." + key +
                                " must list at least one number");
  }
  return out;
}

std::vector<std::string> Manifest::get_string_list(const std::string& section,
                                                   const std::string& key) const {
  std::string raw = get(section, key);
  for (char& c : raw) {
    if (c == ',') c = ' ';
  }
  std::istringstream ss(raw);
  std::vector<std::string> out;
  std::string tok;
  while (ss >> tok) out.push_back(tok);
  return out;
}

std::vector<std::string> Manifest::keys(const std::string& section) const {
  std::vector<std::string> out;
  for (const Entry& e : entries_) {
    if (e.section == section) out.push_back(e.key);
  }
  return out;
}

std::uint64_t fnv1a64(std::string_view bytes) {
  std::uint64_t h = 14695981039346656037ull;
  for (unsigned char c : bytes) {
    h ^= c;
    h *= 1099511628211ull;
  }
  return h;
}

std::uint64_t hash_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::invalid_argument("cannot open file for hashing: " + path);
  std::ostringstream buf;
  buf << in.rdbuf();
  return fnv1a64(buf.str());
}

std::string hash_hex(std::uint64_t h) {
  char buf[20];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(h));
  return buf;
}

}  // namespace comcure
