#pragma once

#include <span>
#include <string>
#include <vector>

#include "comcure/curemodel.hpp"

namespace comcure {

// Subjects plus the covariate column names seen in the source file, in
// file order (id/time/status/exposure columns excluded).
struct Dataset {
  std::vector<Subject> subjects;
  std::vector<std::string> covariate_names;
};

// Reads a delimited text file (comma or tab, sniffed from the header).
// Leading `#` lines are skipped. Required columns: id, time, status, and
// either `exposures` (semicolon-separated offsets from the time origin,
// strictly increasing) or `exposure_count` (n daily exposures at
// 0,1,...,n-1). Every other column is a numeric covariate. Parse failures
// name the offending line.
Dataset read_dataset(const std::string& path);

// Writes subjects in the same format (comma-delimited, `exposures` column),
// with enough digits that read_dataset recovers the values exactly.
// header_comment lines (if any) are emitted verbatim before the header.
void write_dataset(const std::string& path, std::span<const Subject> subjects,
                   std::span<const std::string> covariate_names,
                   const std::string& header_comment = "");

}  // namespace comcure
