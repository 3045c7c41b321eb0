#pragma once

#include <cstdint>
#include <utility>
#include <vector>

#include "lungseg/tensor.hpp"

namespace lungseg::nn {

// Every layer is a pair of free functions: a forward pass and a backward pass
// that maps the upstream gradient to gradients of the layer's inputs. The UNet
// keeps whatever the backward pass needs from the forward pass.

/// Cross-correlation (no kernel flip). weight is [outC, inC, kH, kW], bias is
/// [outC, 1, 1, 1]. Output spatial size is (H + 2 * padding - kH) / stride + 1.
template <typename T>
Tensor<T> conv2d(const Tensor<T>& input, const Tensor<T>& weight, const Tensor<T>& bias, int padding, int stride = 1);

template <typename T>
struct Conv2dGrads {
    Tensor<T> input;
    Tensor<T> weight;
    Tensor<T> bias;
};

template <typename T>
Conv2dGrads<T> conv2d_backward(const Tensor<T>& input, const Tensor<T>& weight, const Tensor<T>& grad_out,
                               int padding, int stride = 1);

/// 2x2 stride-2 transposed convolution, no bias. weight is [inC, outC, 2, 2];
/// output is [N, outC, 2H, 2W] and each input pixel scatters into its own
/// 2x2 output block.
template <typename T>
Tensor<T> conv_transpose2d(const Tensor<T>& input, const Tensor<T>& weight, int stride = 2);

template <typename T>
struct ConvTransposeGrads {
    Tensor<T> input;
    Tensor<T> weight;
};

template <typename T>
ConvTransposeGrads<T> conv_transpose2d_backward(const Tensor<T>& input, const Tensor<T>& weight,
                                                const Tensor<T>& grad_out);

template <typename T>
struct PoolResult {
    Tensor<T> output;
    std::vector<std::uint32_t> argmax;  // flat index into the input, one per output element
};

/// 2x2 max pooling, stride 2. Ties go to the first window element in
/// row-major order. Throws OddDimension.
template <typename T>
PoolResult<T> maxpool2d(const Tensor<T>& input);

template <typename T>
Tensor<T> maxpool2d_backward(const Tensor<T>& grad_out, const std::vector<std::uint32_t>& argmax,
                             const Shape& input_shape);

template <typename T>
Tensor<T> relu(const Tensor<T>& input);

/// Gradient is passed where input > 0; relu'(0) is taken as 0.
template <typename T>
Tensor<T> relu_backward(const Tensor<T>& input, const Tensor<T>& grad_out);

/// Logistic function, clamped so every output is strictly inside (0, 1)
/// even where exp under- or overflows.
template <typename T>
Tensor<T> sigmoid(const Tensor<T>& input);

/// Uses the forward output: d/dx = s * (1 - s).
template <typename T>
Tensor<T> sigmoid_backward(const Tensor<T>& output, const Tensor<T>& grad_out);

/// Channel concatenation, `a` first. Throws SpatialMismatch.
template <typename T>
Tensor<T> concat_channels(const Tensor<T>& a, const Tensor<T>& b);

template <typename T>
Tensor<T> slice_channels(const Tensor<T>& t, std::size_t begin, std::size_t count);

/// Backward of concat_channels: splits the gradient at `a_channels`.
template <typename T>
std::pair<Tensor<T>, Tensor<T>> split_channels(const Tensor<T>& grad, std::size_t a_channels);

}  // namespace lungseg::nn
