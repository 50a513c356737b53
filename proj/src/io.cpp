#include "unifews/io.hpp"

#include <bit>
#include <cstring>
#include <fstream>
#include <iterator>
#include <sstream>

#include "unifews/errors.hpp"

namespace unifews {

namespace {

std::vector<unsigned char> read_bytes(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw InputError("cannot open " + path);
  return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

void write_bytes(const std::string& path, const std::vector<unsigned char>& bytes) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw InputError("cannot write " + path);
  out.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
}

template <typename T>
std::vector<T> decode_le(const std::vector<unsigned char>& bytes, const std::string& path) {
  static_assert(sizeof(T) == 4);
  if (bytes.size() % 4 != 0) throw InputError(path + ": length is not a multiple of 4 bytes");
  std::vector<T> out(bytes.size() / 4);
  for (std::size_t i = 0; i < out.size(); ++i) {
    const std::uint32_t bits = static_cast<std::uint32_t>(bytes[4 * i]) |
                               static_cast<std::uint32_t>(bytes[4 * i + 1]) << 8 |
                               static_cast<std::uint32_t>(bytes[4 * i + 2]) << 16 |
                               static_cast<std::uint32_t>(bytes[4 * i + 3]) << 24;
    out[i] = std::bit_cast<T>(bits);
  }
  return out;
}

template <typename T>
std::vector<unsigned char> encode_le(std::span<const T> values) {
  std::vector<unsigned char> bytes(values.size() * 4);
  for (std::size_t i = 0; i < values.size(); ++i) {
    const auto bits = std::bit_cast<std::uint32_t>(values[i]);
    for (int b = 0; b < 4; ++b) bytes[4 * i + b] = static_cast<unsigned char>(bits >> (8 * b));
  }
  return bytes;
}

}  // namespace

std::vector<float> read_f32_file(const std::string& path) { return decode_le<float>(read_bytes(path), path); }
std::vector<std::uint32_t> read_u32_file(const std::string& path) {
  return decode_le<std::uint32_t>(read_bytes(path), path);
}
std::vector<std::int32_t> read_i32_file(const std::string& path) {
  return decode_le<std::int32_t>(read_bytes(path), path);
}

void write_f32_file(const std::string& path, std::span<const float> values) {
  write_bytes(path, encode_le(values));
}
void write_u32_file(const std::string& path, std::span<const std::uint32_t> values) {
  write_bytes(path, encode_le(values));
}
void write_i32_file(const std::string& path, std::span<const std::int32_t> values) {
  write_bytes(path, encode_le(values));
}

std::string read_text_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw InputError("cannot open " + path);
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

void write_text_file(const std::string& path, const std::string& text) {
  std::ofstream out(path, std::ios::trunc);
  if (!out) throw InputError("cannot write " + path);
  out << text;
}

}  // namespace unifews
