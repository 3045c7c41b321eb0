#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "lungseg/image.hpp"
#include "lungseg/layers.hpp"
#include "lungseg/tensor.hpp"

namespace lungseg {

struct UNetConfig {
    int depth = 3;          // number of down-sampling levels
    int base_channels = 8;  // channels at the first level, doubled per level
    int in_channels = 1;
    int out_channels = 1;
    int input_size = 128;   // must be divisible by 2^depth

    /// Throws InvalidConfig.
    void validate() const;
    int channels_at(int level) const { return base_channels << level; }
};

namespace nn {

/// Encoder-decoder with skip connections. Each contracting level is two
/// same-padded 3x3 conv + ReLU followed by 2x2 max pooling; the expanding
/// path mirrors it with a 2x2 stride-2 transposed convolution, concatenation
/// with the matching encoder output, and two 3x3 conv + ReLU. A 1x1 conv and
/// a sigmoid produce the probability map.
///
/// Parameters are stored in declaration order, which is also checkpoint order:
///   enc{l}.conv{1,2}.{weight,bias}   for l = 0 .. depth-1
///   mid.conv{1,2}.{weight,bias}
///   dec{l}.up.weight, dec{l}.conv{1,2}.{weight,bias}   for l = depth-1 .. 0
///   head.weight, head.bias
template <typename T>
class UNet {
public:
    struct Level {
        Tensor<T> input;  // input of conv1 (pooled features, or the concat in the decoder)
        Tensor<T> z1, a1, z2, a2;
        Tensor<T> up_input;  // decoder only: features coming from the level below
        std::vector<std::uint32_t> pool_argmax;  // encoder only
        Shape pool_input_shape;
    };

    /// Activations kept by a training forward pass for backward().
    struct Cache {
        std::vector<Level> enc;
        Level mid;
        std::vector<Level> dec;  // dec[l] is resolution level l
        Tensor<T> logits;
        Tensor<T> output;
    };

    UNet(const UNetConfig& cfg, std::uint64_t seed);

    /// Builds an architecture with all parameters zero (used when loading).
    explicit UNet(const UNetConfig& cfg);

    const UNetConfig& config() const noexcept { return cfg_; }

    std::vector<Parameter<T>>& parameters() noexcept { return params_; }
    const std::vector<Parameter<T>>& parameters() const noexcept { return params_; }
    std::size_t parameter_count() const;

    /// [N, 1, S, S] -> [N, 1, S, S] probabilities. Throws ShapeMismatch.
    Tensor<T> forward(const Tensor<T>& x) const;
    Tensor<T> forward(const Tensor<T>& x, Cache& cache) const;

    /// Accumulates parameter gradients from d(loss)/d(output) and returns d(loss)/d(x).
    Tensor<T> backward(const Cache& cache, const Tensor<T>& grad_output);

    void zero_grad();

    // Parameter slots, for callers that assemble the network by hand.
    const Parameter<T>& enc_param(int level, int conv, bool bias) const;
    const Parameter<T>& mid_param(int conv, bool bias) const;
    const Parameter<T>& dec_up(int level) const;
    const Parameter<T>& dec_param(int level, int conv, bool bias) const;
    const Parameter<T>& head_param(bool bias) const;

private:
    std::size_t enc_index(int level) const { return static_cast<std::size_t>(4 * level); }
    std::size_t mid_index() const { return static_cast<std::size_t>(4 * cfg_.depth); }
    std::size_t dec_index(int level) const {
        return mid_index() + 4 + static_cast<std::size_t>(5 * (cfg_.depth - 1 - level));
    }
    std::size_t head_index() const { return params_.size() - 2; }

    void build();
    void double_conv_forward(const Tensor<T>& x, std::size_t first_param, Level& lv) const;
    Tensor<T> double_conv_backward(const Level& lv, std::size_t first_param, const Tensor<T>& grad_a2);

    UNetConfig cfg_;
    std::vector<Parameter<T>> params_;
};

extern template class UNet<float>;
extern template class UNet<double>;
extern template class UNet<long double>;

/// Copies weights between precisions (parameters must match one to one).
UNet<double> to_double(const UNet<float>& model);

}  // namespace nn

using Model = nn::UNet<float>;

/// Stacks images into a [N, 1, H, W] tensor.
template <typename T>
nn::Tensor<T> images_to_tensor(const std::vector<const GrayImage*>& images);

/// Stacks masks into a [N, 1, H, W] tensor of 0 / 1.
template <typename T>
nn::Tensor<T> masks_to_tensor(const std::vector<const BinaryMask*>& masks);

/// Probability map at the model's input size for an image of any size
/// (resampled bilinearly first).
GrayImage predict_probabilities(const Model& model, const GrayImage& img);

/// Pixel is lung iff probability > threshold. The mask is produced at the
/// model's input size and resampled back to the image's size by nearest neighbor.
BinaryMask predict_mask(const Model& model, const GrayImage& img, float threshold = 0.5f);

}  // namespace lungseg
