#pragma once

#include <cstdint>
#include <string>
#include <vector>

namespace sscl {

uint32_t crc32(const uint8_t* data, size_t len, uint32_t seed = 0);

// Append-only little-endian byte buffer.
struct ByteWriter {
  std::vector<uint8_t> bytes;

  void u8(uint8_t v) { bytes.push_back(v); }
  void u16(uint16_t v);
  void u32(uint32_t v);
  void u64(uint64_t v);
  void f64(double v);
  void raw(const void* p, size_t n);
  void str(const std::string& s);  // u32 length prefix + bytes
};

// Bounds-checked little-endian reader; throws on truncation.
class ByteReader {
 public:
  ByteReader(const uint8_t* data, size_t len) : data_(data), len_(len) {}

  uint8_t u8();
  uint16_t u16();
  uint32_t u32();
  uint64_t u64();
  double f64();
  void raw(void* p, size_t n);
  std::string str();

  size_t pos() const { return pos_; }
  size_t remaining() const { return len_ - pos_; }

 private:
  void need(size_t n) const;
  const uint8_t* data_;
  size_t len_;
  size_t pos_ = 0;
};

// Whole-file helpers. write_file_atomic writes to "<path>.tmp" then renames.
std::vector<uint8_t> read_file(const std::string& path);
void write_file_atomic(const std::string& path, const std::vector<uint8_t>& bytes);
void write_text_atomic(const std::string& path, const std::string& text);

}  // namespace sscl
