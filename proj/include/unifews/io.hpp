#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <vector>

namespace unifews {

// Little-endian binary payloads. Reads throw InputError on missing files or
// lengths that are not a multiple of the element size.

std::vector<float> read_f32_file(const std::string& path);
std::vector<std::uint32_t> read_u32_file(const std::string& path);
std::vector<std::int32_t> read_i32_file(const std::string& path);

void write_f32_file(const std::string& path, std::span<const float> values);
void write_u32_file(const std::string& path, std::span<const std::uint32_t> values);
void write_i32_file(const std::string& path, std::span<const std::int32_t> values);

std::string read_text_file(const std::string& path);
void write_text_file(const std::string& path, const std::string& text);

}  // namespace unifews
