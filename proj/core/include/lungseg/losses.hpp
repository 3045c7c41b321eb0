#pragma once

#include "lungseg/tensor.hpp"

namespace lungseg::nn {

inline constexpr double kBceEpsilon = 1e-7;

/// Mean over all elements of -[y ln p + (1 - y) ln(1 - p)], p clamped to
/// [1e-7, 1 - 1e-7]. Throws ShapeMismatch.
template <typename T>
T bce_loss(const Tensor<T>& pred, const Tensor<T>& target);

/// d(bce)/d(pred). Zero where the clamp is active.
template <typename T>
Tensor<T> bce_loss_backward(const Tensor<T>& pred, const Tensor<T>& target);

/// 1 - (2 sum(p y) + smooth) / (sum p + sum y + smooth), per batch item, averaged over the batch.
template <typename T>
T soft_dice_loss(const Tensor<T>& pred, const Tensor<T>& target, T smooth = T{1});

template <typename T>
Tensor<T> soft_dice_loss_backward(const Tensor<T>& pred, const Tensor<T>& target, T smooth = T{1});

template <typename T>
struct LossWithGrad {
    T value{};
    Tensor<T> grad;  // with respect to pred
};

/// mix * BCE + (1 - mix) * softDice, with its gradient.
template <typename T>
LossWithGrad<T> mixed_loss(const Tensor<T>& pred, const Tensor<T>& target, double mix);

}  // namespace lungseg::nn
