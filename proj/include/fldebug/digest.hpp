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
#include <span>
#include <string>

namespace fldebug {

/// Lowercase hex SHA-256 of a byte range.
std::string sha256_hex(std::span<const std::byte> bytes);

template <typename T>
std::string sha256_hex_of(std::span<const T> values) {
  return sha256_hex(std::as_bytes(values));
}

}  // namespace fldebug
