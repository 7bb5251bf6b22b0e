#pragma once

#include <string>
#include <vector>

namespace am {

// Shortest round-trip decimal formatting; the CSV dialect everywhere is
// comma separator, '.' decimal point, header row, LF line endings.
std::string format_double(double v);

void write_text_file(const std::string& path, const std::string& content);
std::string read_text_file(const std::string& path);

std::string csv_line(const std::vector<std::string>& fields);

}  // namespace am
