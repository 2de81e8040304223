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

#pragma once

#include <cstddef>
#include <filesystem>
#include <span>
#include <string>
#include <vector>

namespace fldebug::io {

/// Writes float32 values little-endian.
void write_f32_le(const std::filesystem::path& path, std::span<const float> values);

/// Reads exactly `count` little-endian float32 values; a size mismatch is
/// reported as kDataLoss.
std::vector<float> read_f32_le(const std::filesystem::path& path, std::size_t count);

void write_text(const std::filesystem::path& path, const std::string& text);
std::string read_text(const std::filesystem::path& path);

/// Shortest decimal text that parses back to the identical value.
std::string format_exact(double value);
std::string format_exact(float value);
double parse_double(const std::string& text);
float parse_float(const std::string& text);

}  // namespace fldebug::io
