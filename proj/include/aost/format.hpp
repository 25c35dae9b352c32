#pragma once

#include <charconv>
#include <filesystem>
#include <string>

namespace aost {

/// Round-trippable decimal text for a double; fixed across runs so reports
/// can be compared byte for byte.
inline std::string format_double(double v) {
  char buf[40];
  const auto result = std::to_chars(buf, buf + sizeof(buf), v);
  return std::string(buf, result.ptr);
}

/// Writes text to a temporary sibling and renames it into place.
void write_text_atomic(const std::filesystem::path& path, const std::string& text);

std::string read_text(const std::filesystem::path& path);

}  // namespace aost
