#include "quanta/core.hpp"

#include <bit>
#include <cmath>
#include <limits>
#include <stdexcept>
#include <string>

namespace quanta {

void validate_shape(const Shape3& s) {
    if (s.t < 1 || s.h < 1 || s.w < 1)
        throw std::invalid_argument("shape dimensions must be >= 1");
    // overflow-safe product check
    const std::int64_t limit = std::numeric_limits<std::int64_t>::max();
    if (s.h > limit / s.w || s.t > limit / (s.h * s.w))
        throw std::invalid_argument("shape volume overflows addressable range");
}

bool crop_in_bounds(const Shape3& parent, const CropSpec& c) {
    if (c.size.t < 1 || c.size.h < 1 || c.size.w < 1) return false;
    if (c.t0 < 0 || c.y0 < 0 || c.x0 < 0) return false;
    return c.t0 + c.size.t <= parent.t && c.y0 + c.size.h <= parent.h &&
           c.x0 + c.size.w <= parent.w;
}

BitVolume::BitVolume(const Shape3& shape) : shape_(shape) {
    validate_shape(shape);
    bytes_.assign(static_cast<std::size_t>(byte_size(shape)), 0);
}

BitVolume::BitVolume(const Shape3& shape, std::vector<std::uint8_t> bytes)
    : shape_(shape), bytes_(std::move(bytes)) {
    validate_shape(shape);
    if (static_cast<std::int64_t>(bytes_.size()) != byte_size(shape))
        throw std::invalid_argument("bit buffer length does not match shape");
    const int used = static_cast<int>(shape.volume() & 7);
    if (used != 0 && (bytes_.back() >> used) != 0)
        throw std::invalid_argument("padding bits must be zero");
}

std::int64_t BitVolume::linear(std::int64_t t, std::int64_t y, std::int64_t x) const {
    if (t < 0 || t >= shape_.t || y < 0 || y >= shape_.h || x < 0 || x >= shape_.w)
        throw std::out_of_range("voxel index out of range");
    return (t * shape_.h + y) * shape_.w + x;
}

int BitVolume::get(std::int64_t t, std::int64_t y, std::int64_t x) const {
    return get_linear(linear(t, y, x));
}

void BitVolume::set(std::int64_t t, std::int64_t y, std::int64_t x, int bit) {
    set_linear(linear(t, y, x), bit);
}

std::int64_t BitVolume::popcount() const {
    std::int64_t total = 0;
    for (const std::uint8_t b : bytes_) total += std::popcount(b);
    return total;
}

DenseVolume::DenseVolume(const Shape3& shape) : shape_(shape) {
    validate_shape(shape);
    values_.assign(static_cast<std::size_t>(shape.volume()), 0.0f);
}

DenseVolume::DenseVolume(const Shape3& shape, std::vector<float> values)
    : shape_(shape), values_(std::move(values)) {
    validate_shape(shape);
    if (static_cast<std::int64_t>(values_.size()) != shape.volume())
        throw std::invalid_argument("value buffer length does not match shape");
}

float DenseVolume::at(std::int64_t t, std::int64_t y, std::int64_t x) const {
    if (t < 0 || t >= shape_.t || y < 0 || y >= shape_.h || x < 0 || x >= shape_.w)
        throw std::out_of_range("voxel index out of range");
    return values_[static_cast<std::size_t>((t * shape_.h + y) * shape_.w + x)];
}

float& DenseVolume::at(std::int64_t t, std::int64_t y, std::int64_t x) {
    if (t < 0 || t >= shape_.t || y < 0 || y >= shape_.h || x < 0 || x >= shape_.w)
        throw std::out_of_range("voxel index out of range");
    return values_[static_cast<std::size_t>((t * shape_.h + y) * shape_.w + x)];
}

double DenseVolume::mean() const {
    double sum = 0.0;
    for (const float v : values_) sum += v;
    return values_.empty() ? 0.0 : sum / static_cast<double>(values_.size());
}

bool DenseVolume::all_finite() const {
    for (const float v : values_)
        if (!std::isfinite(v)) return false;
    return true;
}

BitVolume crop(const BitVolume& v, const CropSpec& c) {
    if (!crop_in_bounds(v.shape(), c))
        throw std::invalid_argument("crop outside volume");
    BitVolume out(c.size);
    std::int64_t i = 0;
    for (std::int64_t t = 0; t < c.size.t; ++t)
        for (std::int64_t y = 0; y < c.size.h; ++y) {
            const std::int64_t base =
                ((c.t0 + t) * v.shape().h + (c.y0 + y)) * v.shape().w + c.x0;
            for (std::int64_t x = 0; x < c.size.w; ++x, ++i)
                if (v.get_linear(base + x)) out.set_linear(i, 1);
        }
    return out;
}

DenseVolume crop(const DenseVolume& v, const CropSpec& c) {
    if (!crop_in_bounds(v.shape(), c))
        throw std::invalid_argument("crop outside volume");
    DenseVolume out(c.size);
    std::int64_t i = 0;
    for (std::int64_t t = 0; t < c.size.t; ++t)
        for (std::int64_t y = 0; y < c.size.h; ++y) {
            const std::int64_t base =
                ((c.t0 + t) * v.shape().h + (c.y0 + y)) * v.shape().w + c.x0;
            for (std::int64_t x = 0; x < c.size.w; ++x, ++i) out[i] = v[base + x];
        }
    return out;
}

DenseVolume to_dense(const BitVolume& v) {
    DenseVolume out(v.shape());
    const std::int64_t n = v.volume();
    for (std::int64_t i = 0; i < n; ++i)
        if (v.get_linear(i)) out[i] = 1.0f;
    return out;
}

}  // namespace quanta
