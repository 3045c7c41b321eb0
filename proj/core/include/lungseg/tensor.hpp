#pragma once

#include <cstddef>
#include <cstdint>
#include <string>
#include <vector>

namespace lungseg::nn {

/// [batch, channels, height, width]
struct Shape {
    std::size_t n = 0, c = 0, h = 0, w = 0;

    std::size_t numel() const noexcept { return n * c * h * w; }
    std::string str() const;
    friend bool operator==(const Shape&, const Shape&) = default;
};

/// Dense NCHW array. Double precision is used for gradient checking,
/// single precision for training.
template <typename T>
struct Tensor {
    Shape shape;
    std::vector<T> data;

    Tensor() = default;
    explicit Tensor(Shape s, T fill = T{0}) : shape(s), data(s.numel(), fill) {}
    Tensor(Shape s, std::vector<T> values);

    std::size_t size() const noexcept { return data.size(); }

    std::size_t offset(std::size_t n, std::size_t c, std::size_t y, std::size_t x) const noexcept {
        return ((n * shape.c + c) * shape.h + y) * shape.w + x;
    }
    T& at(std::size_t n, std::size_t c, std::size_t y, std::size_t x) { return data[offset(n, c, y, x)]; }
    T at(std::size_t n, std::size_t c, std::size_t y, std::size_t x) const { return data[offset(n, c, y, x)]; }

    void fill(T v) { data.assign(data.size(), v); }
};

/// Trainable tensor with its gradient and Adam moments. All four share `value.shape`.
template <typename T>
struct Parameter {
    std::string name;
    Tensor<T> value;
    Tensor<T> grad;
    Tensor<T> adam_m;
    Tensor<T> adam_v;
    std::uint64_t step_count = 0;

    Parameter() = default;
    Parameter(std::string n, Shape s)
        : name(std::move(n)), value(s), grad(s), adam_m(s), adam_v(s) {}

    void zero_grad() { grad.fill(T{0}); }
};

/// Element-wise a += b. Throws ShapeMismatch.
template <typename T>
void accumulate(Tensor<T>& a, const Tensor<T>& b);

template <typename T>
Tensor<T> cast(const Tensor<float>& t);

extern template struct Tensor<float>;
extern template struct Tensor<double>;
extern template struct Tensor<long double>;

}  // namespace lungseg::nn
