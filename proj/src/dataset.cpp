#include "comcure/dataset.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <sstream>
#include <stdexcept>

namespace comcure {

namespace {

std::vector<std::string> split(const std::string& line, char delim) {
  std::vector<std::string> out;
  std::string field;
  std::istringstream ss(line);
  while (std::getline(ss, field, delim)) out.push_back(field);
  if (!line.empty() && line.back() == delim) out.push_back("");
  return out;
}

std::string trim(const std::string& s) {
  std::size_t a = s.find_first_not_of(" \t\r");
  if (a == std::string::npos) return "";
  std::size_t b = s.find_last_not_of(" \t\r");
  return s.substr(a, b - a + 1);
}

[[noreturn]] void fail(const std::string& path, std::size_t line_no,
                       const std::string& what) {
  throw std::invalid_argument(path + ":" + std::to_string(line_no) + ": " + what);
}

double parse_number(const std::string& raw, const std::string& path,
                    std::size_t line_no, const std::string& column) {
  const std::string s = trim(raw);
  if (s.empty()) fail(path, line_no, "empty value in column '" + column + "'");
  std::size_t pos = 0;
  double v = 0.0;
  try {
    v = std::stod(s, &pos);
  } catch (const std::exception&) {
    fail(path, line_no, "'" + s + "' in column '" + column + "' is not a number");
  }
  if (pos != s.size()) {
    fail(path, line_no, "'" + s + "' in column '" + column + "' is not a number");
  }
  return v;
}

}  // namespace

Dataset read_dataset(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::invalid_argument("cannot open dataset file: " + path);

  std::string header;
  std::size_t header_line = 0;
  while (std::getline(in, header)) {
    ++header_line;
    const std::string t = trim(header);
    if (!t.empty() && t[0] != '#') break;
    header.clear();
  }
  if (trim(header).empty()) {
    throw std::invalid_argument(path + ": no header row found");
  }
  const char delim = header.find('\t') != std::string::npos ? '\t' : ',';
  std::vector<std::string> names = split(header, delim);
  for (std::string& n : names) n = trim(n);

  int col_id = -1, col_time = -1, col_status = -1;
  int col_exposures = -1, col_count = -1;
  std::vector<int> cov_cols;
  Dataset out;
  for (std::size_t c = 0; c < names.size(); ++c) {
    const std::string& n = names[c];
    if (n == "id") col_id = static_cast<int>(c);
    else if (n == "time") col_time = static_cast<int>(c);
    else if (n == "status") col_status = static_cast<int>(c);
    else if (n == "exposures") col_exposures = static_cast<int>(c);
    else if (n == "exposure_count") col_count = static_cast<int>(c);
    else if (n.empty()) fail(path, header_line, "empty column name in header");
    else {
      cov_cols.push_back(static_cast<int>(c));
      out.covariate_names.push_back(n);
    }
  }
  if (col_id < 0 || col_time < 0 || col_status < 0) {
    fail(path, header_line, "header must contain id, time, and status columns");
  }
  if (col_exposures < 0 && col_count < 0) {
    fail(path, header_line, "header must contain an exposures or exposure_count column");
  }
  if (col_exposures >= 0 && col_count >= 0) {
    fail(path, header_line, "exposures and exposure_count columns are mutually exclusive");
  }

  std::string line;
  std::size_t line_no = header_line;
  while (std::getline(in, line)) {
    ++line_no;
    if (trim(line).empty()) continue;
    std::vector<std::string> fields = split(line, delim);
    if (fields.size() != names.size()) {
      fail(path, line_no,
           "expected " + std::to_string(names.size()) + " fields, got " +
               std::to_string(fields.size()));
    }

    Subject s{0.0, false, ExposureProfile({0.0}), {}, ""};
    s.id = trim(fields[static_cast<std::size_t>(col_id)]);
    if (s.id.empty()) fail(path, line_no, "empty id");
    s.time = parse_number(fields[static_cast<std::size_t>(col_time)], path, line_no, "time");
    if (!(s.time > 0.0) || !std::isfinite(s.time)) {
      fail(path, line_no, "time must be a positive number");
    }
    const double st = parse_number(fields[static_cast<std::size_t>(col_status)], path,
                                   line_no, "status");
    if (st != 0.0 && st != 1.0) fail(path, line_no, "status must be 0 or 1");
    s.event = st == 1.0;

    std::vector<double> times;
    if (col_exposures >= 0) {
      const std::string raw = trim(fields[static_cast<std::size_t>(col_exposures)]);
      if (raw.empty()) fail(path, line_no, "empty exposures list");
      for (const std::string& piece : split(raw, ';')) {
        times.push_back(parse_number(piece, path, line_no, "exposures"));
      }
      for (std::size_t k = 1; k < times.size(); ++k) {
        if (times[k] == times[k - 1]) {
          fail(path, line_no, "duplicate exposure time " + std::to_string(times[k]));
        }
        if (times[k] < times[k - 1]) {
          fail(path, line_no, "exposure times must be increasing");
        }
      }
      if (times.front() < 0.0) fail(path, line_no, "exposure times must be nonnegative");
    } else {
      const double cnt = parse_number(fields[static_cast<std::size_t>(col_count)], path,
                                      line_no, "exposure_count");
      if (cnt < 1.0 || cnt != std::floor(cnt)) {
        fail(path, line_no, "exposure_count must be a positive integer");
      }
      times.resize(static_cast<std::size_t>(cnt));
      for (std::size_t k = 0; k < times.size(); ++k) times[k] = static_cast<double>(k);
    }
    s.exposures = ExposureProfile(std::move(times));

    for (std::size_t j = 0; j < cov_cols.size(); ++j) {
      s.covariates[out.covariate_names[j]] = parse_number(
          fields[static_cast<std::size_t>(cov_cols[j])], path, line_no,
          out.covariate_names[j]);
    }
    out.subjects.push_back(std::move(s));
  }
  return out;
}

void write_dataset(const std::string& path, std::span<const Subject> subjects,
                   std::span<const std::string> covariate_names,
                   const std::string& header_comment) {
  std::ofstream outf(path);
  if (!outf) throw std::invalid_argument("cannot write dataset file: " + path);

  if (!header_comment.empty()) {
    outf << header_comment;
    if (header_comment.back() != '\n') outf << "\n";
  }
  outf << "id,time,status,exposures";
  for (const std::string& n : covariate_names) outf << "," << n;
  outf << "\n";

  char buf[64];
  const auto num = [&](double v) {
    std::snprintf(buf, sizeof buf, "%.17g", v);
    return std::string(buf);
  };
  for (const Subject& s : subjects) {
    outf << s.id << "," << num(s.time) << "," << (s.event ? 1 : 0) << ",";
    const std::vector<double>& ts = s.exposures.times();
    for (std::size_t k = 0; k < ts.size(); ++k) {
      if (k) outf << ";";
      outf << num(ts[k]);
    }
    for (const std::string& n : covariate_names) {
      const auto it = s.covariates.find(n);
      if (it == s.covariates.end()) {
        throw std::invalid_argument("subject " + s.id + " lacks covariate '" + n + "'");
      }
      outf << "," << num(it->second);
    }
    outf << "\n";
  }
  if (!outf) throw std::invalid_argument("write failed: " + path);
}

}  // namespace comcure
