#include "ufp/tensor.hpp"

#include <bit>
#include <cmath>
#include <sstream>

namespace ufp {

std::size_t shape_numel(const Shape& shape) {
    std::size_t n = 1;
    for (std::size_t e : shape) n *= e;
    return n;
}

std::string shape_to_string(const Shape& shape) {
    std::ostringstream os;
    os << '[';
    for (std::size_t i = 0; i < shape.size(); ++i) {
        if (i) os << 'x';
        os << shape[i];
    }
    os << ']';
    return os.str();
}

DenseTensor::DenseTensor(Shape shape)
    : shape_(std::move(shape)), data_(shape_numel(shape_), 0.0f) {}

DenseTensor::DenseTensor(Shape shape, std::vector<float> data)
    : shape_(std::move(shape)), data_(std::move(data)) {
    if (data_.size() != shape_numel(shape_)) {
        throw InvalidShape("DenseTensor: data length " + std::to_string(data_.size()) +
                           " does not match shape " + shape_to_string(shape_));
    }
}

bool DenseTensor::all_finite() const {
    for (float v : data_) {
        if (!std::isfinite(v)) return false;
    }
    return true;
}

void DenseTensor::require_finite(const char* context) const {
    if (!all_finite()) {
        throw InvalidShape(std::string(context) + ": tensor contains non-finite values");
    }
}

DenseTensor DenseTensor::reshaped(Shape shape) const {
    if (shape_numel(shape) != data_.size()) {
        throw ShapeMismatch("reshape: element count mismatch, have " +
                            std::to_string(data_.size()) + ", want " +
                            shape_to_string(shape));
    }
    return DenseTensor(std::move(shape), data_);
}

bool DenseTensor::bit_equal(const DenseTensor& other) const {
    if (shape_ != other.shape_) return false;
    for (std::size_t i = 0; i < data_.size(); ++i) {
        if (std::bit_cast<std::uint32_t>(data_[i]) != std::bit_cast<std::uint32_t>(other.data_[i]))
            return false;
    }
    return true;
}

bool BitTensor::padding_clear() const {
    const std::size_t rem = logical_len_ % kWordBits;
    if (rem == 0 || words_.empty()) return true;
    const std::uint64_t pad_mask = ~((rem == 0) ? ~0ULL : ((1ULL << rem) - 1));
    return (words_.back() & pad_mask) == 0;
}

BitTensor pack_signs(std::span<const float> values) {
    if (values.empty()) {
        throw InvalidShape("pack_signs: empty tensor");
    }
    BitTensor b(values.size());
    const std::size_t full_words = values.size() / BitTensor::kWordBits;
    const float* v = values.data();
    for (std::size_t k = 0; k < full_words; ++k) {
        std::uint64_t w = 0;
        for (std::size_t j = 0; j < BitTensor::kWordBits; ++j) {
            w |= static_cast<std::uint64_t>(v[k * BitTensor::kWordBits + j] >= 0.0f) << j;
        }
        b.words_[k] = w;
    }
    const std::size_t rem = values.size() % BitTensor::kWordBits;
    if (rem != 0) {
        std::uint64_t w = 0;
        for (std::size_t j = 0; j < rem; ++j) {
            w |= static_cast<std::uint64_t>(v[full_words * BitTensor::kWordBits + j] >= 0.0f)
                 << j;
        }
        b.words_[full_words] = w;
    }
    return b;
}

BitTensor pack_signs(const DenseTensor& t) { return pack_signs(t.values()); }

DenseTensor unpack_signs(const BitTensor& b) {
    const std::size_t n = b.logical_len();
    std::vector<float> out(n);
    for (std::size_t i = 0; i < n; ++i) {
        out[i] = b.get(i) ? 1.0f : -1.0f;
    }
    return DenseTensor({n}, std::move(out));
}

std::int64_t xnor_popcount_dot(const BitTensor& a, const BitTensor& b) {
    if (a.logical_len() != b.logical_len()) {
        throw ShapeMismatch("xnor_popcount_dot: lengths " + std::to_string(a.logical_len()) +
                            " vs " + std::to_string(b.logical_len()));
    }
    const std::size_t n = a.logical_len();
    const auto wa = a.words();
    const auto wb = b.words();
    std::int64_t matches = 0;
    for (std::size_t k = 0; k < wa.size(); ++k) {
        std::uint64_t x = ~(wa[k] ^ wb[k]);
        if (k + 1 == wa.size()) {
            const std::size_t rem = n % BitTensor::kWordBits;
            if (rem != 0) x &= (1ULL << rem) - 1;
        }
        matches += std::popcount(x);
    }
    return 2 * matches - static_cast<std::int64_t>(n);
}

std::int64_t xnor_popcount_dot_masked(const BitTensor& a, const BitTensor& b,
                                      const BitTensor& mask) {
    if (a.logical_len() != b.logical_len() || a.logical_len() != mask.logical_len()) {
        throw ShapeMismatch("xnor_popcount_dot_masked: length mismatch");
    }
    const auto wa = a.words();
    const auto wb = b.words();
    const auto wm = mask.words();
    std::int64_t matches = 0;
    std::int64_t considered = 0;
    for (std::size_t k = 0; k < wa.size(); ++k) {
        const std::uint64_t m = wm[k]; // mask padding bits are zero by invariant
        matches += std::popcount(~(wa[k] ^ wb[k]) & m);
        considered += std::popcount(m);
    }
    return 2 * matches - considered;
}

DenseTensor dense_matvec(const DenseTensor& w, const DenseTensor& x) {
    if (w.rank() != 2 || x.rank() != 1) {
        throw ShapeMismatch("dense_matvec: need rank-2 matrix and rank-1 vector, got " +
                            shape_to_string(w.shape()) + " and " + shape_to_string(x.shape()));
    }
    const std::size_t rows = w.shape()[0];
    const std::size_t cols = w.shape()[1];
    if (cols != x.size()) {
        throw ShapeMismatch("dense_matvec: inner extents " + std::to_string(cols) + " vs " +
                            std::to_string(x.size()));
    }
    DenseTensor y({rows});
    const float* wd = w.data();
    const float* xd = x.data();
    for (std::size_t r = 0; r < rows; ++r) {
        float acc = 0.0f;
        const float* row = wd + r * cols;
        for (std::size_t c = 0; c < cols; ++c) acc += row[c] * xd[c];
        y[r] = acc;
    }
    return y;
}

bool all_plus_minus_one(std::span<const float> values) {
    for (float v : values) {
        if (v != 1.0f && v != -1.0f) return false;
    }
    return true;
}

} // namespace ufp
