#pragma once

#include <cstdint>
#include <string>
#include <vector>

namespace openhybrid::io {

/// Reads a whole file; throws std::runtime_error if it cannot be opened.
std::vector<std::uint8_t> read_bytes(const std::string& path);

/// Write-temp-then-rename so rereaders never observe a partial file and a
/// failed run leaves no artifact behind.
void atomic_write_bytes(const std::string& path, const void* data, std::size_t n);
void atomic_write_text(const std::string& path, const std::string& text);

}  // namespace openhybrid::io
