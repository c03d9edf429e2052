#pragma once

#include <bit>
#include <cstdint>
#include <cstring>
#include <string>
#include <string_view>
#include <type_traits>
#include <vector>

#include "mvc/errors.hpp"

namespace mvc {

// Little-endian byte writer.
class ByteWriter {
 public:
  template <typename T>
  void put(T value) {
    static_assert(std::is_arithmetic_v<T>);
    using U = std::conditional_t<sizeof(T) == 8, std::uint64_t,
                                 std::conditional_t<sizeof(T) == 4, std::uint32_t,
                                                    std::conditional_t<sizeof(T) == 2, std::uint16_t, std::uint8_t>>>;
    U bits;
    std::memcpy(&bits, &value, sizeof(T));
    for (std::size_t i = 0; i < sizeof(T); ++i) {
      bytes_.push_back(static_cast<char>((bits >> (8 * i)) & 0xFF));
    }
  }

  void put_bytes(std::string_view raw) { bytes_.insert(bytes_.end(), raw.begin(), raw.end()); }

  const std::vector<char>& bytes() const noexcept { return bytes_; }

 private:
  std::vector<char> bytes_;
};

// Little-endian reader over an in-memory buffer; failures name the offset.
class ByteReader {
 public:
  explicit ByteReader(std::string_view data) : data_(data) {}

  template <typename T>
  T get(const char* what) {
    static_assert(std::is_arithmetic_v<T>);
    require(sizeof(T), what);
    using U = std::conditional_t<sizeof(T) == 8, std::uint64_t,
                                 std::conditional_t<sizeof(T) == 4, std::uint32_t,
                                                    std::conditional_t<sizeof(T) == 2, std::uint16_t, std::uint8_t>>>;
    U bits = 0;
    for (std::size_t i = 0; i < sizeof(T); ++i) {
      bits |= static_cast<U>(static_cast<unsigned char>(data_[offset_ + i])) << (8 * i);
    }
    offset_ += sizeof(T);
    T value;
    std::memcpy(&value, &bits, sizeof(T));
    return value;
  }

  std::string_view get_bytes(std::size_t count, const char* what) {
    require(count, what);
    auto out = data_.substr(offset_, count);
    offset_ += count;
    return out;
  }

  // Throws unless `count` more bytes are available.
  void require(std::uint64_t count, const char* what) const {
    if (count > data_.size() - offset_) {
      throw FormatError(offset_, std::string("truncated while reading ") + what);
    }
  }

  std::uint64_t offset() const noexcept { return offset_; }
  std::uint64_t remaining() const noexcept { return data_.size() - offset_; }

 private:
  std::string_view data_;
  std::uint64_t offset_ = 0;
};

std::string read_file(const std::string& path);
void write_file(const std::string& path, const std::vector<char>& bytes);

}  // namespace mvc
