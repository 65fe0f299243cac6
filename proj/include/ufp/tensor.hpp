#pragma once

#include <cstdint>
#include <span>
#include <vector>

#include "ufp/errors.hpp"

namespace ufp {

using Shape = std::vector<std::size_t>;

std::size_t shape_numel(const Shape& shape);
std::string shape_to_string(const Shape& shape);

// Shape-carrying row-major float32 array. All non-binary math runs on these.
class DenseTensor {
public:
    DenseTensor() : shape_{}, data_(1, 0.0f) {} // rank-0 scalar
    explicit DenseTensor(Shape shape);
    DenseTensor(Shape shape, std::vector<float> data);

    static DenseTensor scalar(float v) { return DenseTensor({}, {v}); }

    const Shape& shape() const { return shape_; }
    std::size_t rank() const { return shape_.size(); }
    std::size_t size() const { return data_.size(); }

    float* data() { return data_.data(); }
    const float* data() const { return data_.data(); }
    std::span<float> values() { return data_; }
    std::span<const float> values() const { return data_; }

    float& operator[](std::size_t i) { return data_[i]; }
    float operator[](std::size_t i) const { return data_[i]; }

    bool all_finite() const;
    void require_finite(const char* context) const;

    // Same data, new shape; element counts must agree.
    DenseTensor reshaped(Shape shape) const;

    bool bit_equal(const DenseTensor& other) const;

private:
    Shape shape_;
    std::vector<float> data_;
};

// Sign bits packed into 64-bit words: bit j of word k holds element 64k + j,
// set bit = +1, clear bit = -1. Padding bits past logical_len stay zero.
class BitTensor {
public:
    static constexpr std::size_t kWordBits = 64;

    BitTensor() = default;
    explicit BitTensor(std::size_t logical_len)
        : logical_len_(logical_len), words_((logical_len + kWordBits - 1) / kWordBits, 0) {}

    std::size_t logical_len() const { return logical_len_; }
    std::size_t word_count() const { return words_.size(); }
    std::span<const std::uint64_t> words() const { return words_; }

    bool get(std::size_t i) const {
        return (words_[i / kWordBits] >> (i % kWordBits)) & 1u;
    }
    void set(std::size_t i, bool v) {
        const std::uint64_t bit = 1ULL << (i % kWordBits);
        if (v)
            words_[i / kWordBits] |= bit;
        else
            words_[i / kWordBits] &= ~bit;
    }

    bool padding_clear() const;

    bool operator==(const BitTensor& other) const = default;

private:
    friend BitTensor pack_signs(std::span<const float> values);

    std::size_t logical_len_ = 0;
    std::vector<std::uint64_t> words_;
};

// bit i set <=> t[i] >= 0 (sign(0) = +1). Throws InvalidShape on empty input.
BitTensor pack_signs(const DenseTensor& t);
BitTensor pack_signs(std::span<const float> values);

// Values in {+1, -1}; inverse of pack_signs on +-1 inputs.
DenseTensor unpack_signs(const BitTensor& b);

// Sum of elementwise products under the +-1 interpretation, computed per word
// as 2*popcount(xnor) - bits considered. Exact integer arithmetic.
std::int64_t xnor_popcount_dot(const BitTensor& a, const BitTensor& b);

// Same, but only positions with a set mask bit contribute (padding for
// convolutions); masked-off positions count as zero terms.
std::int64_t xnor_popcount_dot_masked(const BitTensor& a, const BitTensor& b,
                                      const BitTensor& mask);

// w rank-2 [rows, cols] times x rank-1 [cols].
DenseTensor dense_matvec(const DenseTensor& w, const DenseTensor& x);

bool all_plus_minus_one(std::span<const float> values);

} // namespace ufp
