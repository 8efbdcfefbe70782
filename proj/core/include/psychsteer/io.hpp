#pragma once

#include "psychsteer/errors.hpp"

#include <filesystem>
#include <functional>
#include <string>
#include <vector>

namespace psychsteer {

// Calls fn(line_number, line) for every line; line numbers start at 1.
// Blank lines are skipped.
void for_each_line(const std::filesystem::path& path,
                   const std::function<void(std::size_t, const std::string&)>& fn);

std::vector<std::string> read_lines(const std::filesystem::path& path);

std::string read_file(const std::filesystem::path& path);

// Writes to a sibling temp file and renames into place, so a failed writer
// never leaves a partial output file behind.
void atomic_write_file(const std::filesystem::path& path, const std::string& content);

// Doubles formatted with %.17g round-trip exactly through text.
std::string format_double(double value);

} // namespace psychsteer
