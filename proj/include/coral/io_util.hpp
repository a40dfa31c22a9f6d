#pragma once

#include <string>
#include <vector>

namespace coral {

// Writes to a temporary file in the same directory, then renames over the
// target, so failures never leave partial output behind.
void atomic_write_file(const std::string& path, const std::string& content);

std::string read_file(const std::string& path);

// Shortest round-trip decimal form of a double, locale independent.
std::string format_double(double v);

// Splits one CSV line on commas. No quoting; ids must not contain commas.
std::vector<std::string> split_csv_line(const std::string& line);

std::string trim(const std::string& s);

}  // namespace coral
