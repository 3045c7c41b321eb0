#include "lungseg/losses.hpp"

#include <algorithm>
#include <cmath>
#include <type_traits>

#include "lungseg/errors.hpp"

namespace lungseg::nn {

namespace {

template <typename T>
void require_same(const Tensor<T>& a, const Tensor<T>& b, const char* op) {
    if (!(a.shape == b.shape)) throw ShapeMismatch(std::string(op) + ": " + a.shape.str() + " vs " + b.shape.str());
}

// Sums run in at least double, even for float tensors.
template <typename T>
using Acc = std::conditional_t<(sizeof(T) > sizeof(double)), T, double>;

}  // namespace

template <typename T>
T bce_loss(const Tensor<T>& pred, const Tensor<T>& target) {
    require_same(pred, target, "bce_loss");
    const T eps = static_cast<T>(kBceEpsilon);
    using A = Acc<T>;
    A sum = 0;
    for (std::size_t i = 0; i < pred.size(); ++i) {
        const A p = std::clamp(pred.data[i], eps, T{1} - eps);
        const A y = target.data[i];
        sum -= y * std::log(p) + (1 - y) * std::log(1 - p);
    }
    return static_cast<T>(sum / static_cast<A>(pred.size()));
}

template <typename T>
Tensor<T> bce_loss_backward(const Tensor<T>& pred, const Tensor<T>& target) {
    require_same(pred, target, "bce_loss_backward");
    const T eps = static_cast<T>(kBceEpsilon);
    const T inv_n = T{1} / static_cast<T>(pred.size());
    Tensor<T> g(pred.shape);
    for (std::size_t i = 0; i < pred.size(); ++i) {
        const T p = pred.data[i];
        if (p < eps || p > T{1} - eps) continue;
        const T y = target.data[i];
        g.data[i] = (p - y) / (p * (T{1} - p)) * inv_n;
    }
    return g;
}

namespace {

template <typename A>
struct DiceSums {
    A inter = 0;
    A total = 0;  // sum p + sum y
};

template <typename T>
DiceSums<Acc<T>> dice_sums(const Tensor<T>& pred, const Tensor<T>& target, std::size_t n) {
    using A = Acc<T>;
    const std::size_t per = pred.size() / pred.shape.n;
    DiceSums<A> s;
    for (std::size_t i = n * per; i < (n + 1) * per; ++i) {
        s.inter += static_cast<A>(pred.data[i]) * target.data[i];
        s.total += static_cast<A>(pred.data[i]) + target.data[i];
    }
    return s;
}

}  // namespace

template <typename T>
T soft_dice_loss(const Tensor<T>& pred, const Tensor<T>& target, T smooth) {
    require_same(pred, target, "soft_dice_loss");
    using A = Acc<T>;
    A acc = 0;
    for (std::size_t n = 0; n < pred.shape.n; ++n) {
        const auto s = dice_sums(pred, target, n);
        acc += 1 - (2 * s.inter + smooth) / (s.total + smooth);
    }
    return static_cast<T>(acc / static_cast<A>(pred.shape.n));
}

template <typename T>
Tensor<T> soft_dice_loss_backward(const Tensor<T>& pred, const Tensor<T>& target, T smooth) {
    require_same(pred, target, "soft_dice_loss_backward");
    Tensor<T> g(pred.shape);
    const std::size_t per = pred.size() / pred.shape.n;
    using A = Acc<T>;
    const A inv_batch = A{1} / static_cast<A>(pred.shape.n);
    for (std::size_t n = 0; n < pred.shape.n; ++n) {
        const auto s = dice_sums(pred, target, n);
        const A num = 2 * s.inter + smooth;
        const A den = s.total + smooth;
        // d/dp_j [1 - num/den] = -(2 y_j den - num) / den^2
        for (std::size_t i = n * per; i < (n + 1) * per; ++i) {
            const A y = target.data[i];
            g.data[i] = static_cast<T>(-(2 * y * den - num) / (den * den) * inv_batch);
        }
    }
    return g;
}

template <typename T>
LossWithGrad<T> mixed_loss(const Tensor<T>& pred, const Tensor<T>& target, double mix) {
    const T a = static_cast<T>(mix), b = static_cast<T>(1.0 - mix);
    LossWithGrad<T> out;
    out.value = a * bce_loss(pred, target) + b * soft_dice_loss(pred, target);
    out.grad = bce_loss_backward(pred, target);
    const Tensor<T> gd = soft_dice_loss_backward(pred, target);
    for (std::size_t i = 0; i < out.grad.size(); ++i) out.grad.data[i] = a * out.grad.data[i] + b * gd.data[i];
    return out;
}

#define LUNGSEG_INSTANTIATE(T)                                                          \
    template T bce_loss<T>(const Tensor<T>&, const Tensor<T>&);                         \
    template Tensor<T> bce_loss_backward<T>(const Tensor<T>&, const Tensor<T>&);        \
    template T soft_dice_loss<T>(const Tensor<T>&, const Tensor<T>&, T);                \
    template Tensor<T> soft_dice_loss_backward<T>(const Tensor<T>&, const Tensor<T>&, T); \
    template LossWithGrad<T> mixed_loss<T>(const Tensor<T>&, const Tensor<T>&, double);

LUNGSEG_INSTANTIATE(float)
LUNGSEG_INSTANTIATE(double)
LUNGSEG_INSTANTIATE(long double)

#undef LUNGSEG_INSTANTIATE

}  // namespace lungseg::nn
