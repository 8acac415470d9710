#pragma once

#include <string>
#include <string_view>

namespace srkit {

/// Writes to `path + ".tmp"` and renames over `path`. Throws IoError.
void write_file_atomic(const std::string& path, std::string_view bytes);
std::string read_file(const std::string& path);

}  // namespace srkit
