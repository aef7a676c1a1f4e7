/*
 * Copyright 2026 The abtrack Authors
 *
 * Licensed under the Apache License, Version 2.0 (the "License");
 * you may not use this file except in compliance with the License.
 * You may obtain a copy of the License at
 *
 *    http://www.apache.org/licenses/LICENSE-2.0
 *
 * Unless required by applicable law or agreed to in writing, software
 * distributed under the License is distributed on an "AS IS" BASIS,
 * WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
 * See the License for the specific language governing permissions and
 * limitations under the License.
 */


#pragma once

#include <cstdint>
#include <string>
#include <vector>

namespace abtrack {

// Binary container of named tensors:
//   "ABTK", u32 version, u32 count,
//   per tensor: u16 name length, name, u8 dtype, u8 rank, u32 dims[rank], payload,
//   trailing u64 FNV-1a over every preceding byte.
// All integers little-endian.
enum class DType : std::uint8_t { F32 = 0, I32 = 1 };

inline constexpr std::uint32_t kCheckpointVersion = 1;

struct RawTensor {
  std::string name;
  DType dtype = DType::F32;
  std::vector<std::uint32_t> dims;
  std::vector<std::uint8_t> payload;

  std::size_t numel() const;
  std::vector<float> as_f32() const;
  std::vector<std::int32_t> as_i32() const;
  static RawTensor f32(std::string name, std::vector<std::uint32_t> dims, const std::vector<float>& values);
  static RawTensor i32(std::string name, const std::vector<std::int32_t>& values);
};

std::vector<std::uint8_t> encode_tensors(const std::vector<RawTensor>& tensors);
// Throws CheckpointError with the byte offset of the first problem.
std::vector<RawTensor> decode_tensors(const std::vector<std::uint8_t>& bytes);

void write_bytes(const std::string& path, const std::vector<std::uint8_t>& bytes);
std::vector<std::uint8_t> read_bytes(const std::string& path);

}  // namespace abtrack
