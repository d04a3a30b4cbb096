#pragma once

#include <cstdint>
#include <span>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

namespace transtrust {

using Bytes = std::vector<std::uint8_t>;
using ByteView = std::span<const std::uint8_t>;

inline Bytes bytes_of(std::string_view s) {
    return Bytes(s.begin(), s.end());
}

std::string to_hex(ByteView data);
void append(Bytes& out, ByteView more);

// Raised on truncated or trailing input while decoding wire payloads.
// Handlers catch it at the envelope boundary and reject the message.
class WireError : public std::runtime_error {
  public:
    using std::runtime_error::runtime_error;
};

// All multi-byte integers on the wire are big-endian; variable-length
// fields carry a u32 length prefix.
class ByteWriter {
  public:
    void u8(std::uint8_t v);
    void u32(std::uint32_t v);
    void u64(std::uint64_t v);
    void raw(ByteView data);
    void lp(ByteView data);
    Bytes take();

  private:
    Bytes out_;
};

class ByteReader {
  public:
    explicit ByteReader(ByteView data) : data_(data) {}

    std::uint8_t u8();
    std::uint32_t u32();
    std::uint64_t u64();
    Bytes raw(std::size_t n);
    Bytes lp();
    bool empty() const { return pos_ == data_.size(); }
    void expect_end() const;

  private:
    void need(std::size_t n) const;

    ByteView data_;
    std::size_t pos_ = 0;
};

}  // namespace transtrust
