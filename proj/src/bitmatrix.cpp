#include "calign/bitmatrix.hpp"

#include <bit>
#include <cstring>
#include <stdexcept>

namespace calign {

namespace {

std::uint64_t load_word(const std::uint8_t* p, std::size_t nbytes) {
    std::uint64_t w = 0;
    std::memcpy(&w, p, nbytes);
    return w;
}

template <typename F>
std::uint64_t fold_bytes(const std::uint8_t* a, std::size_t n, F&& word_op) {
    std::uint64_t acc = 0;
    std::size_t i = 0;
    for (; i + 8 <= n; i += 8) acc += std::popcount(word_op(a + i, 8));
    if (i < n) acc += std::popcount(word_op(a + i, n - i));
    return acc;
}

}  // namespace

BitMatrix::BitMatrix(std::uint32_t samples, std::uint32_t features)
    : samples_(samples),
      features_(features),
      row_bytes_((std::size_t(features) + 7) / 8),
      bits_(std::size_t(samples) * row_bytes_, 0) {}

BitMatrix BitMatrix::from_payload(std::uint32_t samples, std::uint32_t features,
                                  std::span<const std::uint8_t> payload) {
    // validate before allocating, so absurd dimensions fail cleanly
    const std::uint64_t expected =
        std::uint64_t(samples) * ((std::uint64_t(features) + 7) / 8);
    if (payload.size() != expected)
        throw std::invalid_argument("payload length mismatch: expected " +
                                    std::to_string(expected) + " bytes, got " +
                                    std::to_string(payload.size()));
    BitMatrix m(samples, features);
    std::memcpy(m.bits_.data(), payload.data(), payload.size());
    // padding bits beyond feature d-1 must be zero
    const std::uint32_t rem = features % 8;
    if (rem != 0 && m.row_bytes_ > 0) {
        const std::uint8_t pad_mask = std::uint8_t(0xFFu << rem);
        for (std::uint32_t x = 0; x < samples; ++x) {
            if (m.bits_[std::size_t(x) * m.row_bytes_ + m.row_bytes_ - 1] & pad_mask)
                throw std::invalid_argument("nonzero padding bits in sample " + std::to_string(x));
        }
    }
    return m;
}

std::uint64_t BitMatrix::popcount() const {
    return fold_bytes(bits_.data(), bits_.size(),
                      [](const std::uint8_t* p, std::size_t n) { return load_word(p, n); });
}

std::uint32_t BitMatrix::row_popcount(std::uint32_t x) const {
    return std::uint32_t(fold_bytes(
        row(x), row_bytes_, [](const std::uint8_t* p, std::size_t n) { return load_word(p, n); }));
}

bool BitMatrix::all_zero() const {
    for (std::uint8_t b : bits_)
        if (b) return false;
    return true;
}

bool BitMatrix::intersects(const BitMatrix& o) const {
    for (std::size_t i = 0; i < bits_.size(); ++i)
        if (bits_[i] & o.bits_[i]) return true;
    return false;
}

BitMatrix& BitMatrix::or_with(const BitMatrix& o) {
    for (std::size_t i = 0; i < bits_.size(); ++i) bits_[i] |= o.bits_[i];
    return *this;
}

BitMatrix& BitMatrix::and_with(const BitMatrix& o) {
    for (std::size_t i = 0; i < bits_.size(); ++i) bits_[i] &= o.bits_[i];
    return *this;
}

BitMatrix& BitMatrix::andnot_with(const BitMatrix& o) {
    // padding stays zero: our padding bits are zero and AND keeps them zero
    for (std::size_t i = 0; i < bits_.size(); ++i) bits_[i] &= std::uint8_t(~o.bits_[i]);
    return *this;
}

std::uint32_t row_popcount_and(const BitMatrix& a, const BitMatrix& b, std::uint32_t x) {
    const std::uint8_t* pa = a.row(x);
    const std::uint8_t* pb = b.row(x);
    return std::uint32_t(fold_bytes(pa, a.row_bytes_, [&](const std::uint8_t* p, std::size_t n) {
        return load_word(p, n) & load_word(pb + (p - pa), n);
    }));
}

std::uint32_t row_popcount_and3(const BitMatrix& a, const BitMatrix& b, const BitMatrix& c,
                                std::uint32_t x) {
    const std::uint8_t* pa = a.row(x);
    const std::uint8_t* pb = b.row(x);
    const std::uint8_t* pc = c.row(x);
    return std::uint32_t(fold_bytes(pa, a.row_bytes_, [&](const std::uint8_t* p, std::size_t n) {
        const std::size_t off = p - pa;
        return load_word(p, n) & load_word(pb + off, n) & load_word(pc + off, n);
    }));
}

std::uint64_t popcount_and(const BitMatrix& a, const BitMatrix& b) {
    const std::uint8_t* pa = a.bits_.data();
    const std::uint8_t* pb = b.bits_.data();
    return fold_bytes(pa, a.bits_.size(), [&](const std::uint8_t* p, std::size_t n) {
        return load_word(p, n) & load_word(pb + (p - pa), n);
    });
}

std::uint64_t popcount_or(const BitMatrix& a, const BitMatrix& b) {
    const std::uint8_t* pa = a.bits_.data();
    const std::uint8_t* pb = b.bits_.data();
    return fold_bytes(pa, a.bits_.size(), [&](const std::uint8_t* p, std::size_t n) {
        return load_word(p, n) | load_word(pb + (p - pa), n);
    });
}

}  // namespace calign
