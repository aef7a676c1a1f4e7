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


#include "abtrack/tensor_file.hpp"

#include <cstring>
#include <fstream>
#include <iterator>

#include "abtrack/config.hpp"
#include "abtrack/errors.hpp"

namespace abtrack {

namespace {

template <class T>
void put(std::vector<std::uint8_t>& out, T v) {
  for (std::size_t i = 0; i < sizeof(T); ++i) out.push_back(static_cast<std::uint8_t>(v >> (8 * i)));
}

class Reader {
 public:
  Reader(const std::vector<std::uint8_t>& b, std::size_t end) : bytes_(b), end_(end) {}

  std::size_t offset() const { return pos_; }

  void need(std::size_t n, const char* what) {
    if (end_ - pos_ < n) {
      throw CheckpointError("truncated checkpoint: " + std::string(what) + " at offset " + std::to_string(pos_) +
                            " needs " + std::to_string(n) + " bytes, " + std::to_string(end_ - pos_) + " left");
    }
  }

  template <class T>
  T get(const char* what) {
    need(sizeof(T), what);
    T v = 0;
    for (std::size_t i = 0; i < sizeof(T); ++i) v |= static_cast<T>(static_cast<T>(bytes_[pos_ + i]) << (8 * i));
    pos_ += sizeof(T);
    return v;
  }

  std::vector<std::uint8_t> take(std::size_t n, const char* what) {
    need(n, what);
    std::vector<std::uint8_t> out(bytes_.begin() + static_cast<std::ptrdiff_t>(pos_),
                                  bytes_.begin() + static_cast<std::ptrdiff_t>(pos_ + n));
    pos_ += n;
    return out;
  }

 private:
  const std::vector<std::uint8_t>& bytes_;
  std::size_t end_;
  std::size_t pos_ = 0;
};

}  // namespace

std::size_t RawTensor::numel() const {
  std::size_t n = 1;
  for (auto d : dims) n *= d;
  return n;
}

std::vector<float> RawTensor::as_f32() const {
  if (dtype != DType::F32) throw CheckpointError(name + ": expected f32 tensor");
  std::vector<float> out(numel());
  for (std::size_t i = 0; i < out.size(); ++i) {
    std::uint32_t bits = 0;
    for (int b = 0; b < 4; ++b) bits |= static_cast<std::uint32_t>(payload[4 * i + b]) << (8 * b);
    std::memcpy(&out[i], &bits, 4);
  }
  return out;
}

std::vector<std::int32_t> RawTensor::as_i32() const {
  if (dtype != DType::I32) throw CheckpointError(name + ": expected i32 tensor");
  std::vector<std::int32_t> out(numel());
  for (std::size_t i = 0; i < out.size(); ++i) {
    std::uint32_t bits = 0;
    for (int b = 0; b < 4; ++b) bits |= static_cast<std::uint32_t>(payload[4 * i + b]) << (8 * b);
    out[i] = static_cast<std::int32_t>(bits);
  }
  return out;
}

RawTensor RawTensor::f32(std::string name, std::vector<std::uint32_t> dims, const std::vector<float>& values) {
  RawTensor t{std::move(name), DType::F32, std::move(dims), {}};
  if (t.numel() != values.size()) throw CheckpointError(t.name + ": dims do not match value count");
  t.payload.reserve(4 * values.size());
  for (float v : values) {
    std::uint32_t bits;
    std::memcpy(&bits, &v, 4);
    put(t.payload, bits);
  }
  return t;
}

RawTensor RawTensor::i32(std::string name, const std::vector<std::int32_t>& values) {
  RawTensor t{std::move(name), DType::I32, {static_cast<std::uint32_t>(values.size())}, {}};
  for (auto v : values) put(t.payload, static_cast<std::uint32_t>(v));
  return t;
}

std::vector<std::uint8_t> encode_tensors(const std::vector<RawTensor>& tensors) {
  std::vector<std::uint8_t> out{'A', 'B', 'T', 'K'};
  put(out, kCheckpointVersion);
  put(out, static_cast<std::uint32_t>(tensors.size()));
  for (const RawTensor& t : tensors) {
    if (t.name.size() > 0xffff) throw CheckpointError("tensor name too long: " + t.name);
    if (t.dims.size() > 0xff) throw CheckpointError(t.name + ": rank too large");
    if (t.payload.size() != 4 * t.numel()) throw CheckpointError(t.name + ": payload size mismatch");
    put(out, static_cast<std::uint16_t>(t.name.size()));
    out.insert(out.end(), t.name.begin(), t.name.end());
    out.push_back(static_cast<std::uint8_t>(t.dtype));
    out.push_back(static_cast<std::uint8_t>(t.dims.size()));
    for (auto d : t.dims) put(out, d);
    out.insert(out.end(), t.payload.begin(), t.payload.end());
  }
  put(out, fnv1a64(out.data(), out.size()));
  return out;
}

std::vector<RawTensor> decode_tensors(const std::vector<std::uint8_t>& bytes) {
  if (bytes.size() < 20) {
    throw CheckpointError("truncated checkpoint: " + std::to_string(bytes.size()) +
                          " bytes is shorter than the 20-byte minimum");
  }
  const std::size_t body = bytes.size() - 8;
  Reader r(bytes, bytes.size());
  if (std::memcmp(bytes.data(), "ABTK", 4) != 0) throw CheckpointError("bad magic at offset 0");
  r.take(4, "magic");
  const auto version = r.get<std::uint32_t>("version");
  if (version != kCheckpointVersion) {
    throw CheckpointError("unsupported version " + std::to_string(version) + " at offset 4 (expected " +
                          std::to_string(kCheckpointVersion) + ")");
  }
  const auto count = r.get<std::uint32_t>("tensor count");
  std::vector<RawTensor> out;
  for (std::uint32_t i = 0; i < count; ++i) {
    const std::size_t start = r.offset();
    RawTensor t;
    const auto len = r.get<std::uint16_t>("name length");
    const auto name = r.take(len, "name");
    t.name.assign(name.begin(), name.end());
    const auto code = r.get<std::uint8_t>("dtype");
    if (code > 1) throw CheckpointError("unknown dtype " + std::to_string(code) + " at offset " + std::to_string(start));
    t.dtype = static_cast<DType>(code);
    const auto rank = r.get<std::uint8_t>("rank");
    std::uint64_t numel = 1;
    for (int k = 0; k < rank; ++k) {
      t.dims.push_back(r.get<std::uint32_t>("dims"));
      numel *= t.dims.back();
      if (numel > bytes.size()) {
        throw CheckpointError("tensor '" + t.name + "' at offset " + std::to_string(start) +
                              " declares more elements than the file holds");
      }
    }
    if (r.offset() + 4 * numel > body) {
      throw CheckpointError("truncated checkpoint: payload of '" + t.name + "' at offset " +
                            std::to_string(r.offset()) + " needs " + std::to_string(4 * numel) + " bytes, " +
                            std::to_string(body - std::min(body, r.offset())) + " left before the checksum");
    }
    t.payload = r.take(4 * numel, "payload");
    out.push_back(std::move(t));
  }
  if (r.offset() != body) {
    throw CheckpointError("checkpoint has " + std::to_string(body - std::min(body, r.offset())) +
                          " unexpected bytes at offset " + std::to_string(r.offset()));
  }
  const std::uint64_t expect = r.get<std::uint64_t>("checksum");
  const std::uint64_t actual = fnv1a64(bytes.data(), body);
  if (expect != actual) {
    throw CheckpointError("checksum mismatch over bytes [0, " + std::to_string(body) + "): stored at offset " +
                          std::to_string(body) + " does not match contents");
  }
  return out;
}

void write_bytes(const std::string& path, const std::vector<std::uint8_t>& bytes) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw CheckpointError("cannot open " + path + " for writing");
  out.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
  if (!out) throw CheckpointError("write to " + path + " failed");
}

std::vector<std::uint8_t> read_bytes(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw CheckpointError("cannot open " + path);
  return std::vector<std::uint8_t>(std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>());
}

}  // namespace abtrack
