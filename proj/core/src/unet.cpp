#include "lungseg/unet.hpp"

#include <cmath>

#include "lungseg/errors.hpp"
#include "lungseg/imgio.hpp"
#include "lungseg/rng.hpp"

namespace lungseg {

void UNetConfig::validate() const {
    if (depth < 1) throw InvalidConfig("depth must be >= 1");
    if (base_channels < 1) throw InvalidConfig("base_channels must be >= 1");
    if (in_channels != 1 || out_channels != 1) throw InvalidConfig("only single-channel input and output are supported");
    if (depth > 16 || input_size < 1 || input_size % (1 << depth) != 0) {
        throw InvalidConfig("input_size " + std::to_string(input_size) + " is not divisible by 2^" +
                            std::to_string(depth));
    }
}

namespace nn {

template <typename T>
UNet<T>::UNet(const UNetConfig& cfg) : cfg_(cfg) {
    cfg_.validate();
    build();
}

template <typename T>
UNet<T>::UNet(const UNetConfig& cfg, std::uint64_t seed) : UNet(cfg) {
    // He-uniform on fan-in; biases stay zero.
    SplitMix64 rng(seed);
    for (auto& p : params_) {
        if (p.name.ends_with(".bias")) continue;
        const Shape s = p.value.shape;
        // conv weights are [out, in, kh, kw]; the transposed conv weight is
        // [in, out, 2, 2] and each output pixel sees exactly `in` inputs
        const double fan_in = p.name.ends_with(".up.weight") ? static_cast<double>(s.n)
                                                             : static_cast<double>(s.c * s.h * s.w);
        const double bound = std::sqrt(6.0 / fan_in);
        for (auto& v : p.value.data) v = static_cast<T>(rng.uniform(-bound, bound));
    }
}

template <typename T>
void UNet<T>::build() {
    auto add_conv = [&](const std::string& name, std::size_t in, std::size_t out, std::size_t k) {
        params_.emplace_back(name + ".weight", Shape{out, in, k, k});
        params_.emplace_back(name + ".bias", Shape{out, 1, 1, 1});
    };
    const auto ch = [&](int level) { return static_cast<std::size_t>(cfg_.channels_at(level)); };

    std::size_t in = static_cast<std::size_t>(cfg_.in_channels);
    for (int l = 0; l < cfg_.depth; ++l) {
        const std::string p = "enc" + std::to_string(l);
        add_conv(p + ".conv1", in, ch(l), 3);
        add_conv(p + ".conv2", ch(l), ch(l), 3);
        in = ch(l);
    }
    add_conv("mid.conv1", in, ch(cfg_.depth), 3);
    add_conv("mid.conv2", ch(cfg_.depth), ch(cfg_.depth), 3);
    for (int l = cfg_.depth - 1; l >= 0; --l) {
        const std::string p = "dec" + std::to_string(l);
        params_.emplace_back(p + ".up.weight", Shape{ch(l + 1), ch(l), 2, 2});
        add_conv(p + ".conv1", 2 * ch(l), ch(l), 3);
        add_conv(p + ".conv2", ch(l), ch(l), 3);
    }
    add_conv("head", ch(0), static_cast<std::size_t>(cfg_.out_channels), 1);
}

template <typename T>
std::size_t UNet<T>::parameter_count() const {
    std::size_t n = 0;
    for (const auto& p : params_) n += p.value.size();
    return n;
}

template <typename T>
void UNet<T>::zero_grad() {
    for (auto& p : params_) p.zero_grad();
}

template <typename T>
const Parameter<T>& UNet<T>::enc_param(int level, int conv, bool bias) const {
    return params_.at(enc_index(level) + 2 * static_cast<std::size_t>(conv - 1) + (bias ? 1 : 0));
}
template <typename T>
const Parameter<T>& UNet<T>::mid_param(int conv, bool bias) const {
    return params_.at(mid_index() + 2 * static_cast<std::size_t>(conv - 1) + (bias ? 1 : 0));
}
template <typename T>
const Parameter<T>& UNet<T>::dec_up(int level) const {
    return params_.at(dec_index(level));
}
template <typename T>
const Parameter<T>& UNet<T>::dec_param(int level, int conv, bool bias) const {
    return params_.at(dec_index(level) + 1 + 2 * static_cast<std::size_t>(conv - 1) + (bias ? 1 : 0));
}
template <typename T>
const Parameter<T>& UNet<T>::head_param(bool bias) const {
    return params_.at(head_index() + (bias ? 1 : 0));
}

template <typename T>
void UNet<T>::double_conv_forward(const Tensor<T>& x, std::size_t first, Level& lv) const {
    lv.input = x;
    lv.z1 = conv2d(lv.input, params_[first].value, params_[first + 1].value, 1);
    lv.a1 = relu(lv.z1);
    lv.z2 = conv2d(lv.a1, params_[first + 2].value, params_[first + 3].value, 1);
    lv.a2 = relu(lv.z2);
}

template <typename T>
Tensor<T> UNet<T>::double_conv_backward(const Level& lv, std::size_t first, const Tensor<T>& grad_a2) {
    auto g2 = conv2d_backward(lv.a1, params_[first + 2].value, relu_backward(lv.z2, grad_a2), 1);
    accumulate(params_[first + 2].grad, g2.weight);
    accumulate(params_[first + 3].grad, g2.bias);
    auto g1 = conv2d_backward(lv.input, params_[first].value, relu_backward(lv.z1, g2.input), 1);
    accumulate(params_[first].grad, g1.weight);
    accumulate(params_[first + 1].grad, g1.bias);
    return std::move(g1.input);
}

template <typename T>
Tensor<T> UNet<T>::forward(const Tensor<T>& x) const {
    Cache cache;
    return forward(x, cache);
}

template <typename T>
Tensor<T> UNet<T>::forward(const Tensor<T>& x, Cache& cache) const {
    const auto s = static_cast<std::size_t>(cfg_.input_size);
    if (x.shape.c != static_cast<std::size_t>(cfg_.in_channels) || x.shape.h != s || x.shape.w != s ||
        x.shape.n == 0) {
        throw ShapeMismatch("UNet expects [N," + std::to_string(cfg_.in_channels) + "," + std::to_string(s) + "," +
                            std::to_string(s) + "], got " + x.shape.str());
    }
    const auto depth = static_cast<std::size_t>(cfg_.depth);
    cache.enc.assign(depth, {});
    cache.dec.assign(depth, {});

    const Tensor<T>* cur = &x;
    Tensor<T> pooled;
    for (std::size_t l = 0; l < depth; ++l) {
        Level& lv = cache.enc[l];
        double_conv_forward(*cur, enc_index(static_cast<int>(l)), lv);
        auto pr = maxpool2d(lv.a2);
        lv.pool_argmax = std::move(pr.argmax);
        lv.pool_input_shape = lv.a2.shape;
        pooled = std::move(pr.output);
        cur = &pooled;
    }
    double_conv_forward(*cur, mid_index(), cache.mid);

    const Tensor<T>* below = &cache.mid.a2;
    for (std::size_t i = depth; i-- > 0;) {
        Level& lv = cache.dec[i];
        const std::size_t idx = dec_index(static_cast<int>(i));
        lv.up_input = *below;
        Tensor<T> up = conv_transpose2d(lv.up_input, params_[idx].value);
        double_conv_forward(concat_channels(up, cache.enc[i].a2), idx + 1, lv);
        below = &lv.a2;
    }

    cache.logits = conv2d(*below, params_[head_index()].value, params_[head_index() + 1].value, 0);
    cache.output = sigmoid(cache.logits);
    return cache.output;
}

template <typename T>
Tensor<T> UNet<T>::backward(const Cache& cache, const Tensor<T>& grad_output) {
    if (!(grad_output.shape == cache.output.shape)) throw ShapeMismatch("UNet::backward gradient shape");
    const auto depth = static_cast<std::size_t>(cfg_.depth);

    auto gh = conv2d_backward(cache.dec[0].a2, params_[head_index()].value,
                              sigmoid_backward(cache.output, grad_output), 0);
    accumulate(params_[head_index()].grad, gh.weight);
    accumulate(params_[head_index() + 1].grad, gh.bias);

    // Decoder, shallow to deep. skip_grads[l] collects gradient for enc[l].a2.
    std::vector<Tensor<T>> skip_grads(depth);
    Tensor<T> g = std::move(gh.input);
    for (std::size_t l = 0; l < depth; ++l) {
        const Level& lv = cache.dec[l];
        const std::size_t idx = dec_index(static_cast<int>(l));
        Tensor<T> g_cat = double_conv_backward(lv, idx + 1, g);
        const std::size_t up_channels = lv.input.shape.c - cache.enc[l].a2.shape.c;
        auto [g_up, g_skip] = split_channels(g_cat, up_channels);
        skip_grads[l] = std::move(g_skip);
        auto gt = conv_transpose2d_backward(lv.up_input, params_[idx].value, g_up);
        accumulate(params_[idx].grad, gt.weight);
        g = std::move(gt.input);
    }

    g = double_conv_backward(cache.mid, mid_index(), g);
    for (std::size_t l = depth; l-- > 0;) {
        const Level& lv = cache.enc[l];
        Tensor<T> g_a2 = maxpool2d_backward(g, lv.pool_argmax, lv.pool_input_shape);
        accumulate(g_a2, skip_grads[l]);
        g = double_conv_backward(lv, enc_index(static_cast<int>(l)), g_a2);
    }
    return g;
}

template class UNet<float>;
template class UNet<double>;
template class UNet<long double>;

UNet<double> to_double(const UNet<float>& model) {
    UNet<double> out(model.config());
    auto& dst = out.parameters();
    const auto& src = model.parameters();
    for (std::size_t i = 0; i < src.size(); ++i) {
        dst[i].value = cast<double>(src[i].value);
        dst[i].step_count = src[i].step_count;
    }
    return out;
}

}  // namespace nn

template <typename T>
nn::Tensor<T> images_to_tensor(const std::vector<const GrayImage*>& images) {
    if (images.empty()) throw ShapeMismatch("no images to stack");
    const auto h = static_cast<std::size_t>(images.front()->height);
    const auto w = static_cast<std::size_t>(images.front()->width);
    nn::Tensor<T> t({images.size(), 1, h, w});
    for (std::size_t n = 0; n < images.size(); ++n) {
        if (!same_dims(*images[n], *images.front())) throw ShapeMismatch("images differ in size");
        std::copy(images[n]->data.begin(), images[n]->data.end(), t.data.begin() + static_cast<std::ptrdiff_t>(n * h * w));
    }
    return t;
}

template <typename T>
nn::Tensor<T> masks_to_tensor(const std::vector<const BinaryMask*>& masks) {
    if (masks.empty()) throw ShapeMismatch("no masks to stack");
    const auto h = static_cast<std::size_t>(masks.front()->height);
    const auto w = static_cast<std::size_t>(masks.front()->width);
    nn::Tensor<T> t({masks.size(), 1, h, w});
    for (std::size_t n = 0; n < masks.size(); ++n) {
        if (!same_dims(*masks[n], *masks.front())) throw ShapeMismatch("masks differ in size");
        for (std::size_t i = 0; i < h * w; ++i) t.data[n * h * w + i] = masks[n]->data[i] ? T{1} : T{0};
    }
    return t;
}

template nn::Tensor<float> images_to_tensor<float>(const std::vector<const GrayImage*>&);
template nn::Tensor<double> images_to_tensor<double>(const std::vector<const GrayImage*>&);
template nn::Tensor<float> masks_to_tensor<float>(const std::vector<const BinaryMask*>&);
template nn::Tensor<double> masks_to_tensor<double>(const std::vector<const BinaryMask*>&);

GrayImage predict_probabilities(const Model& model, const GrayImage& img) {
    const int s = model.config().input_size;
    const GrayImage resized = (img.width == s && img.height == s) ? img : io::resize_bilinear(img, s, s);
    const nn::Tensor<float> out = model.forward(images_to_tensor<float>({&resized}));
    GrayImage prob(s, s);
    std::copy(out.data.begin(), out.data.end(), prob.data.begin());
    return prob;
}

BinaryMask predict_mask(const Model& model, const GrayImage& img, float threshold) {
    const GrayImage prob = predict_probabilities(model, img);
    BinaryMask m(prob.width, prob.height);
    for (std::size_t i = 0; i < prob.size(); ++i) m.data[i] = prob.data[i] > threshold ? 1 : 0;
    if (!same_dims(m, img)) m = io::resize_nearest(m, img.width, img.height);
    return m;
}

}  // namespace lungseg
