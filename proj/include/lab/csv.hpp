#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <string_view>

namespace lab {

/// Shortest round-trippable decimal rendering used in every CSV artifact.
std::string fmt_g17(double x);

void write_text_file(const std::filesystem::path& path, std::string_view content);

/// FNV-1a, used to stamp artifacts with a config fingerprint.
std::uint64_t fnv1a_hash(std::string_view text);
std::string hash_hex(std::uint64_t h);

} // namespace lab
