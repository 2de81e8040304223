// Copyright 2026 The fldebug Authors. All Rights Reserved.
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#include "fldebug/io.hpp"

#include <bit>
#include <charconv>
#include <cstdint>
#include <cstdio>
#include <cstring>
#include <fstream>
#include <limits>
#include <memory>
#include <sstream>

#include "fldebug/error.hpp"

namespace fldebug::io {

namespace {

struct FileCloser {
  void operator()(std::FILE* f) const { std::fclose(f); }
};
using File = std::unique_ptr<std::FILE, FileCloser>;

File open_or_fail(const std::filesystem::path& path, const char* mode) {
  File f(std::fopen(path.c_str(), mode));
  if (!f) fail(ErrorCode::kIo, "cannot open " + path.string());
  return f;
}

}  // namespace

void write_f32_le(const std::filesystem::path& path, std::span<const float> values) {
  File f = open_or_fail(path, "wb");
  if constexpr (std::endian::native == std::endian::little) {
    if (std::fwrite(values.data(), sizeof(float), values.size(), f.get()) != values.size())
      fail(ErrorCode::kIo, "short write to " + path.string());
  } else {
    std::vector<std::uint32_t> swapped(values.size());
    for (std::size_t i = 0; i < values.size(); ++i)
      swapped[i] = __builtin_bswap32(std::bit_cast<std::uint32_t>(values[i]));
    if (std::fwrite(swapped.data(), 4, swapped.size(), f.get()) != swapped.size())
      fail(ErrorCode::kIo, "short write to " + path.string());
  }
  if (std::fflush(f.get()) != 0) fail(ErrorCode::kIo, "flush failed for " + path.string());
}

std::vector<float> read_f32_le(const std::filesystem::path& path, std::size_t count) {
  std::error_code ec;
  const auto size = std::filesystem::file_size(path, ec);
  if (ec) fail(ErrorCode::kNotFound, "missing blob " + path.string());
  if (size != count * sizeof(float)) {
    fail(ErrorCode::kDataLoss, "blob " + path.string() + " has " + std::to_string(size) +
                                   " bytes, expected " + std::to_string(count * sizeof(float)));
  }
  File f = open_or_fail(path, "rb");
  std::vector<float> out(count);
  if (std::fread(out.data(), sizeof(float), count, f.get()) != count)
    fail(ErrorCode::kIo, "short read from " + path.string());
  if constexpr (std::endian::native != std::endian::little) {
    for (float& v : out) v = std::bit_cast<float>(__builtin_bswap32(std::bit_cast<std::uint32_t>(v)));
  }
  return out;
}

void write_text(const std::filesystem::path& path, const std::string& text) {
  File f = open_or_fail(path, "wb");
  if (std::fwrite(text.data(), 1, text.size(), f.get()) != text.size())
    fail(ErrorCode::kIo, "short write to " + path.string());
}

std::string read_text(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) fail(ErrorCode::kNotFound, "cannot read " + path.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

std::string format_exact(double value) {
  char buf[64];
  auto [ptr, ec] = std::to_chars(buf, buf + sizeof(buf), value);
  return std::string(buf, ptr);
}

std::string format_exact(float value) {
  char buf[64];
  auto [ptr, ec] = std::to_chars(buf, buf + sizeof(buf), value);
  return std::string(buf, ptr);
}

namespace {
template <typename T>
T parse_floating(const std::string& text) {
  T value{};
  const char* first = text.data();
  const char* last = text.data() + text.size();
  if (!text.empty() && *first == '+') ++first;
  auto [ptr, ec] = std::from_chars(first, last, value);
  if (ec != std::errc() || ptr != last) {
    if (text == "inf" || text == ".inf") return std::numeric_limits<T>::infinity();
    fail(ErrorCode::kInvalidArgument, "not a number: '" + text + "'");
  }
  return value;
}
}  // namespace

double parse_double(const std::string& text) { return parse_floating<double>(text); }
float parse_float(const std::string& text) { return parse_floating<float>(text); }

}  // namespace fldebug::io
