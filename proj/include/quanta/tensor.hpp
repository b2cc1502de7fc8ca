#pragma once

#include <array>
#include <cstdint>
#include <stdexcept>
#include <vector>

namespace quanta {

// Dense 5D tensor, dims (n, c, t, h, w), w innermost. Production tensors are
// float; the double instantiation exists so tests can run the same code at
// higher precision.
template <class T>
struct Tensor5T {
    std::array<std::int64_t, 5> dims{0, 0, 0, 0, 0};
    std::vector<T> data;

    Tensor5T() = default;
    Tensor5T(std::int64_t n, std::int64_t c, std::int64_t t, std::int64_t h, std::int64_t w)
        : dims{n, c, t, h, w} {
        for (const auto d : dims)
            if (d < 1) throw std::invalid_argument("tensor dims must be >= 1");
        data.assign(static_cast<std::size_t>(numel()), T(0));
    }

    std::int64_t n() const { return dims[0]; }
    std::int64_t c() const { return dims[1]; }
    std::int64_t t() const { return dims[2]; }
    std::int64_t h() const { return dims[3]; }
    std::int64_t w() const { return dims[4]; }
    std::int64_t numel() const { return dims[0] * dims[1] * dims[2] * dims[3] * dims[4]; }
    std::int64_t plane() const { return dims[2] * dims[3] * dims[4]; }  // t*h*w

    std::int64_t index(std::int64_t n_, std::int64_t c_, std::int64_t t_, std::int64_t y_,
                       std::int64_t x_) const {
        return ((((n_ * dims[1]) + c_) * dims[2] + t_) * dims[3] + y_) * dims[4] + x_;
    }
    T& at(std::int64_t n_, std::int64_t c_, std::int64_t t_, std::int64_t y_, std::int64_t x_) {
        return data[static_cast<std::size_t>(index(n_, c_, t_, y_, x_))];
    }
    T at(std::int64_t n_, std::int64_t c_, std::int64_t t_, std::int64_t y_,
         std::int64_t x_) const {
        return data[static_cast<std::size_t>(index(n_, c_, t_, y_, x_))];
    }

    T* slab(std::int64_t n_, std::int64_t c_) {
        return data.data() + (n_ * dims[1] + c_) * plane();
    }
    const T* slab(std::int64_t n_, std::int64_t c_) const {
        return data.data() + (n_ * dims[1] + c_) * plane();
    }

    void zero() { std::fill(data.begin(), data.end(), T(0)); }

    bool same_dims(const Tensor5T& o) const { return dims == o.dims; }

    template <class U>
    Tensor5T<U> cast() const {
        Tensor5T<U> out(dims[0], dims[1], dims[2], dims[3], dims[4]);
        for (std::size_t i = 0; i < data.size(); ++i) out.data[i] = static_cast<U>(data[i]);
        return out;
    }
};

using Tensor5 = Tensor5T<float>;
using Tensor5d = Tensor5T<double>;

}  // namespace quanta
