#pragma once

#include <filesystem>
#include <string>
#include <vector>

#include "hydra/common.hpp"

namespace hydra::io {

std::string read_file(const std::filesystem::path& path);

/// Writes via a temp file in the same directory, then renames into place.
void write_file_atomic(const std::filesystem::path& path, const std::string& content);

/// Splits one CSV line on commas. No quoting support; fields are trimmed.
std::vector<std::string> split_csv_line(const std::string& line);

/// Reads a CSV into rows, skipping blank lines and '#' comments.
std::vector<std::vector<std::string>> read_csv(const std::filesystem::path& path);

long parse_long(const std::string& s, const std::string& context);
double parse_double(const std::string& s, const std::string& context);

}  // namespace hydra::io
