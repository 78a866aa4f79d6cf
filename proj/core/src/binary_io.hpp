#pragma once

#include <bit>
#include <cstdint>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <iterator>
#include <string>
#include <vector>

#include "tcdesc/error.hpp"

namespace tcdesc::detail {

static_assert(std::endian::native == std::endian::little ||
                  std::endian::native == std::endian::big,
              "mixed-endian platforms are not supported");

class ByteWriter {
 public:
  void bytes(const char* data, std::size_t n) {
    buffer_.insert(buffer_.end(), data, data + n);
  }
  template <typename U>
  void integer(U value) {
    for (std::size_t i = 0; i < sizeof(U); ++i) {
      buffer_.push_back(static_cast<unsigned char>((value >> (8 * i)) & 0xFF));
    }
  }
  void f32(float v) { integer(std::bit_cast<std::uint32_t>(v)); }
  void f64(double v) { integer(std::bit_cast<std::uint64_t>(v)); }

  std::vector<unsigned char>& buffer() { return buffer_; }

 private:
  std::vector<unsigned char> buffer_;
};

// Every read checks the remaining length and reports the failing offset.
class ByteReader {
 public:
  ByteReader(const std::vector<unsigned char>& data, std::string what)
      : data_(data), what_(std::move(what)) {}

  void expect_magic(const char (&magic)[5]) {
    require(4, "magic");
    if (std::memcmp(data_.data() + offset_, magic, 4) != 0) {
      throw Error(ErrorKind::kFormat, what_ + ": bad magic at offset 0 (expected '" +
                                          std::string(magic, 4) + "')");
    }
    offset_ += 4;
  }
  template <typename U>
  U integer(const char* field) {
    require(sizeof(U), field);
    U value = 0;
    for (std::size_t i = 0; i < sizeof(U); ++i) {
      value |= static_cast<U>(static_cast<U>(data_[offset_ + i]) << (8 * i));
    }
    offset_ += sizeof(U);
    return value;
  }
  float f32(const char* field) {
    return std::bit_cast<float>(integer<std::uint32_t>(field));
  }
  double f64(const char* field) {
    return std::bit_cast<double>(integer<std::uint64_t>(field));
  }
  void expect_end() const {
    if (offset_ != data_.size()) {
      throw Error(ErrorKind::kFormat,
                  what_ + ": " + std::to_string(data_.size() - offset_) +
                      " trailing bytes at offset " + std::to_string(offset_));
    }
  }
  std::size_t offset() const { return offset_; }
  std::size_t remaining() const { return data_.size() - offset_; }

 private:
  void require(std::size_t n, const char* field) const {
    if (data_.size() - offset_ < n) {
      throw Error(ErrorKind::kFormat,
                  what_ + ": truncated while reading " + field +
                      " at offset " + std::to_string(offset_));
    }
  }

  const std::vector<unsigned char>& data_;
  std::string what_;
  std::size_t offset_ = 0;
};

inline std::vector<unsigned char> read_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) {
    throw Error(ErrorKind::kIo, "cannot open '" + path.string() + "' for reading");
  }
  return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

inline void write_file(const std::filesystem::path& path,
                       const std::vector<unsigned char>& bytes) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) {
    throw Error(ErrorKind::kIo, "cannot open '" + path.string() + "' for writing");
  }
  out.write(reinterpret_cast<const char*>(bytes.data()),
            static_cast<std::streamsize>(bytes.size()));
  if (!out) {
    throw Error(ErrorKind::kIo, "write to '" + path.string() + "' failed");
  }
}

}  // namespace tcdesc::detail
