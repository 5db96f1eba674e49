#pragma once

#include <cstdint>
#include <cstddef>
#include <span>
#include <string>
#include <vector>

namespace calign {

// S x d binary matrix, bit-packed per sample: bit j of sample x lives at
// byte x*ceil(d/8) + j/8, position j%8 (LSB first). Padding bits past
// feature d-1 are always zero; every combining operation preserves that.
class BitMatrix {
public:
    BitMatrix() = default;
    BitMatrix(std::uint32_t samples, std::uint32_t features);

    // Validates payload length and zero padding.
    static BitMatrix from_payload(std::uint32_t samples, std::uint32_t features,
                                  std::span<const std::uint8_t> payload);

    std::uint32_t samples() const { return samples_; }
    std::uint32_t features() const { return features_; }
    std::size_t row_bytes() const { return row_bytes_; }
    std::span<const std::uint8_t> payload() const { return bits_; }

    bool get(std::uint32_t x, std::uint32_t j) const {
        return (bits_[std::size_t(x) * row_bytes_ + (j >> 3)] >> (j & 7)) & 1u;
    }
    void set(std::uint32_t x, std::uint32_t j, bool v) {
        std::uint8_t& b = bits_[std::size_t(x) * row_bytes_ + (j >> 3)];
        if (v) b |= std::uint8_t(1u << (j & 7));
        else   b &= std::uint8_t(~(1u << (j & 7)));
    }

    bool same_shape(const BitMatrix& o) const {
        return samples_ == o.samples_ && features_ == o.features_;
    }

    std::uint64_t popcount() const;
    std::uint32_t row_popcount(std::uint32_t x) const;
    bool all_zero() const;
    bool intersects(const BitMatrix& o) const;  // any co-set bit

    BitMatrix& or_with(const BitMatrix& o);
    BitMatrix& and_with(const BitMatrix& o);
    BitMatrix& andnot_with(const BitMatrix& o);  // this & ~o

    bool operator==(const BitMatrix& o) const = default;

private:
    const std::uint8_t* row(std::uint32_t x) const {
        return bits_.data() + std::size_t(x) * row_bytes_;
    }

    std::uint32_t samples_ = 0;
    std::uint32_t features_ = 0;
    std::size_t row_bytes_ = 0;
    std::vector<std::uint8_t> bits_;

    friend std::uint32_t row_popcount_and(const BitMatrix&, const BitMatrix&, std::uint32_t);
    friend std::uint32_t row_popcount_and3(const BitMatrix&, const BitMatrix&, const BitMatrix&,
                                           std::uint32_t);
    friend std::uint64_t popcount_and(const BitMatrix&, const BitMatrix&);
    friend std::uint64_t popcount_or(const BitMatrix&, const BitMatrix&);
};

// Per-sample popcounts of combined rows, without materialising the result.
std::uint32_t row_popcount_and(const BitMatrix& a, const BitMatrix& b, std::uint32_t x);
std::uint32_t row_popcount_and3(const BitMatrix& a, const BitMatrix& b, const BitMatrix& c,
                                std::uint32_t x);
std::uint64_t popcount_and(const BitMatrix& a, const BitMatrix& b);
std::uint64_t popcount_or(const BitMatrix& a, const BitMatrix& b);

}  // namespace calign
