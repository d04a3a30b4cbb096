#include "transtrust/rng.hpp"

namespace transtrust {

namespace {

void put_u64(Bytes& out, std::uint64_t v) {
    for (int shift = 56; shift >= 0; shift -= 8) {
        out.push_back(static_cast<std::uint8_t>(v >> shift));
    }
}

}  // namespace

SeededRng::SeededRng(std::uint64_t seed) {
    Bytes material = bytes_of("transtrust-rng");
    put_u64(material, seed);
    key_ = hash(material).bytes;
}

void SeededRng::refill() {
    Bytes material(key_.begin(), key_.end());
    put_u64(material, counter_++);
    block_ = hash(material).bytes;
    used_ = 0;
}

void SeededRng::fill(std::span<std::uint8_t> out) {
    for (std::uint8_t& b : out) {
        if (used_ == block_.size()) {
            refill();
        }
        b = block_[used_++];
    }
}

Bytes SeededRng::next_bytes(std::size_t n) {
    Bytes out(n);
    fill(out);
    return out;
}

std::array<std::uint8_t, 32> SeededRng::next_seed() {
    std::array<std::uint8_t, 32> out{};
    fill(out);
    return out;
}

Nonce SeededRng::next_nonce() {
    Nonce out{};
    fill(out);
    return out;
}

std::uint64_t SeededRng::next_u64() {
    std::array<std::uint8_t, 8> raw{};
    fill(raw);
    std::uint64_t v = 0;
    for (std::uint8_t b : raw) {
        v = (v << 8) | b;
    }
    return v;
}

}  // namespace transtrust
