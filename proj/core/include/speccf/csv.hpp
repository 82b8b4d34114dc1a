#pragma once

#include <filesystem>
#include <string>
#include <vector>

namespace speccf::csv {

using Row = std::vector<std::string>;

// Reads a whole CSV file. Handles RFC-4180 style double-quoted fields
// (embedded commas, doubled quotes) and both LF and CRLF line endings.
std::vector<Row> read_file(const std::filesystem::path& path);

// Quotes a field only when it contains a comma, quote or newline.
std::string escape(const std::string& field);

std::string join_row(const Row& row);

// Fixed-format double for reproducible output files.
std::string format_double(double v);

// Writes content to a temporary file in the target directory and renames it
// into place, so readers never observe a partially written file.
void atomic_write(const std::filesystem::path& path, const std::string& content);

}  // namespace speccf::csv
