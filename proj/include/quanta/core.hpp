#pragma once

#include <cstdint>
#include <vector>

namespace quanta {

// 3D extent, t outermost / w innermost. All volumes in the toolkit are
// linearized as i = (t*h + y)*w + x.
struct Shape3 {
    std::int64_t t = 0;
    std::int64_t h = 0;
    std::int64_t w = 0;

    std::int64_t volume() const { return t * h * w; }
    bool operator==(const Shape3&) const = default;
};

// throws std::invalid_argument unless all dims >= 1 and t*h*w fits int64
void validate_shape(const Shape3& s);

struct CropSpec {
    std::int64_t t0 = 0;
    std::int64_t y0 = 0;
    std::int64_t x0 = 0;
    Shape3 size;
};

bool crop_in_bounds(const Shape3& parent, const CropSpec& c);

// Bit-packed binary 3D stack. One bit per voxel in linear order, LSB first
// within each byte; the final byte is zero-padded.
class BitVolume {
public:
    BitVolume() = default;
    explicit BitVolume(const Shape3& shape);  // all zeros
    // adopts an existing buffer; length and padding bits are validated
    BitVolume(const Shape3& shape, std::vector<std::uint8_t> bytes);

    const Shape3& shape() const { return shape_; }
    std::int64_t volume() const { return shape_.volume(); }

    int get(std::int64_t t, std::int64_t y, std::int64_t x) const;
    void set(std::int64_t t, std::int64_t y, std::int64_t x, int bit);

    int get_linear(std::int64_t i) const {
        return (bytes_[static_cast<std::size_t>(i >> 3)] >> (i & 7)) & 1;
    }
    void set_linear(std::int64_t i, int bit) {
        const std::uint8_t m = static_cast<std::uint8_t>(1u << (i & 7));
        if (bit)
            bytes_[static_cast<std::size_t>(i >> 3)] |= m;
        else
            bytes_[static_cast<std::size_t>(i >> 3)] &= static_cast<std::uint8_t>(~m);
    }

    // number of 1-voxels; padding bits never contribute
    std::int64_t popcount() const;

    const std::vector<std::uint8_t>& bytes() const { return bytes_; }
    static std::int64_t byte_size(const Shape3& s) { return (s.volume() + 7) / 8; }

private:
    std::int64_t linear(std::int64_t t, std::int64_t y, std::int64_t x) const;

    Shape3 shape_;
    std::vector<std::uint8_t> bytes_;
};

// Dense real-valued 3D stack (float storage). Rate maps are additionally
// non-negative; that is asserted where they are produced, not here.
class DenseVolume {
public:
    DenseVolume() = default;
    explicit DenseVolume(const Shape3& shape);  // zeros
    DenseVolume(const Shape3& shape, std::vector<float> values);

    const Shape3& shape() const { return shape_; }
    std::int64_t volume() const { return shape_.volume(); }

    float at(std::int64_t t, std::int64_t y, std::int64_t x) const;
    float& at(std::int64_t t, std::int64_t y, std::int64_t x);

    float operator[](std::int64_t i) const { return values_[static_cast<std::size_t>(i)]; }
    float& operator[](std::int64_t i) { return values_[static_cast<std::size_t>(i)]; }

    const std::vector<float>& values() const { return values_; }
    std::vector<float>& values() { return values_; }
    const float* data() const { return values_.data(); }
    float* data() { return values_.data(); }

    double mean() const;
    bool all_finite() const;

private:
    Shape3 shape_;
    std::vector<float> values_;
};

BitVolume crop(const BitVolume& v, const CropSpec& c);
DenseVolume crop(const DenseVolume& v, const CropSpec& c);

// bits cast to {0.0, 1.0}
DenseVolume to_dense(const BitVolume& v);

}  // namespace quanta
