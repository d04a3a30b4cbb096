#pragma once

#include <span>

#include "transtrust/crypto.hpp"

namespace transtrust {

// Deterministic byte stream: block i = SHA-256(key || be64(i)) where
// key = SHA-256("transtrust-rng" || be64(seed)). Every random choice in a
// run flows through one instance, which is what makes replays byte-exact.
class SeededRng {
  public:
    explicit SeededRng(std::uint64_t seed);

    void fill(std::span<std::uint8_t> out);
    Bytes next_bytes(std::size_t n);
    std::array<std::uint8_t, 32> next_seed();
    Nonce next_nonce();
    std::uint64_t next_u64();

  private:
    void refill();

    std::array<std::uint8_t, 32> key_{};
    std::uint64_t counter_ = 0;
    std::array<std::uint8_t, 32> block_{};
    std::size_t used_ = 32;  // forces refill on first use
};

}  // namespace transtrust
