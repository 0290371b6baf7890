#pragma once

#include <bit>
#include <cstdint>
#include <istream>
#include <ostream>
#include <string>

#include "scdiff/common.hpp"
#include "scdiff/errors.hpp"

namespace scdiff {

/// Little-endian primitive writer/reader used by the checkpoint and
/// trainer-state formats. Integers are emitted byte-by-byte so the layout
/// is identical on any host.
class BinaryWriter {
 public:
  explicit BinaryWriter(std::ostream& out) : out_(out) {}

  void u32(uint32_t v) {
    for (int i = 0; i < 4; ++i) byte(static_cast<uint8_t>(v >> (8 * i)));
  }
  void u64(uint64_t v) {
    for (int i = 0; i < 8; ++i) byte(static_cast<uint8_t>(v >> (8 * i)));
  }
  void f64(double v) { u64(std::bit_cast<uint64_t>(v)); }
  void bytes(const void* data, std::size_t n) {
    out_.write(static_cast<const char*>(data), static_cast<std::streamsize>(n));
  }
  void str(const std::string& s) {  // u32 length prefix + UTF-8 bytes
    u32(static_cast<uint32_t>(s.size()));
    bytes(s.data(), s.size());
  }
  void matrix(const Matrix& m) {  // row-major f64 payload, no header
    for (Index i = 0; i < m.rows(); ++i)
      for (Index j = 0; j < m.cols(); ++j) f64(m(i, j));
  }

 private:
  void byte(uint8_t b) { out_.put(static_cast<char>(b)); }
  std::ostream& out_;
};

class BinaryReader {
 public:
  explicit BinaryReader(std::istream& in) : in_(in) {}

  uint32_t u32() {
    uint32_t v = 0;
    for (int i = 0; i < 4; ++i) v |= static_cast<uint32_t>(byte()) << (8 * i);
    return v;
  }
  uint64_t u64() {
    uint64_t v = 0;
    for (int i = 0; i < 8; ++i) v |= static_cast<uint64_t>(byte()) << (8 * i);
    return v;
  }
  double f64() { return std::bit_cast<double>(u64()); }
  std::string str() {
    const uint32_t n = u32();
    std::string s(n, '\0');
    in_.read(s.data(), n);
    check();
    return s;
  }
  void matrix_into(Matrix& m) {
    for (Index i = 0; i < m.rows(); ++i)
      for (Index j = 0; j < m.cols(); ++j) m(i, j) = f64();
  }

 private:
  uint8_t byte() {
    const int c = in_.get();
    check();
    return static_cast<uint8_t>(c);
  }
  void check() {
    if (!in_) throw ParseError("unexpected end of binary stream");
  }
  std::istream& in_;
};

/// 64-bit FNV-1a over a byte range.
inline uint64_t fnv1a64(const void* data, std::size_t n) {
  const auto* p = static_cast<const uint8_t*>(data);
  uint64_t h = 14695981039346656037ULL;
  for (std::size_t i = 0; i < n; ++i) {
    h ^= p[i];
    h *= 1099511628211ULL;
  }
  return h;
}

/// FNV-1a of a whole file, as used for the sample sidecar's checkpoint id.
uint64_t fnv1a64_file(const std::string& path);

/// 16-digit lowercase hex form of a hash.
std::string hash_hex(uint64_t h);

}  // namespace scdiff
