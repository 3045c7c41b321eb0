#include <Eigen/Core>

#include <algorithm>
#include <cmath>
#include <limits>

#include "lungseg/errors.hpp"
#include "lungseg/layers.hpp"
#include "lungseg/tensor.hpp"

namespace lungseg::nn {

std::string Shape::str() const {
    return "(" + std::to_string(n) + "," + std::to_string(c) + "," + std::to_string(h) + "," + std::to_string(w) + ")";
}

template <typename T>
Tensor<T>::Tensor(Shape s, std::vector<T> values) : shape(s), data(std::move(values)) {
    if (data.size() != shape.numel()) {
        throw ShapeMismatch("tensor " + shape.str() + " given " + std::to_string(data.size()) + " values");
    }
}

template <typename T>
void accumulate(Tensor<T>& a, const Tensor<T>& b) {
    if (!(a.shape == b.shape)) throw ShapeMismatch("accumulate " + a.shape.str() + " += " + b.shape.str());
    for (std::size_t i = 0; i < a.size(); ++i) a.data[i] += b.data[i];
}

template <typename T>
Tensor<T> cast(const Tensor<float>& t) {
    Tensor<T> out(t.shape);
    std::copy(t.data.begin(), t.data.end(), out.data.begin());
    return out;
}

namespace {

template <typename T>
using RowMat = Eigen::Matrix<T, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
template <typename T>
using MapMat = Eigen::Map<RowMat<T>>;
template <typename T>
using ConstMapMat = Eigen::Map<const RowMat<T>>;

struct ConvGeometry {
    std::size_t in_c, in_h, in_w;
    std::size_t k_h, k_w;
    std::size_t out_h, out_w;
    int pad, stride;

    std::size_t rows() const { return in_c * k_h * k_w; }
    std::size_t cols() const { return out_h * out_w; }
    bool pointwise() const { return k_h == 1 && k_w == 1 && pad == 0 && stride == 1; }
};

template <typename T>
ConvGeometry conv_geometry(const Tensor<T>& input, const Tensor<T>& weight, int padding, int stride) {
    if (stride < 1) throw ShapeMismatch("conv2d stride must be >= 1");
    if (padding < 0) throw ShapeMismatch("conv2d padding must be >= 0");
    if (input.shape.c != weight.shape.c) {
        throw ShapeMismatch("conv2d input channels " + std::to_string(input.shape.c) + " != weight inC " +
                            std::to_string(weight.shape.c));
    }
    const auto span_h = static_cast<long>(input.shape.h) + 2L * padding - static_cast<long>(weight.shape.h);
    const auto span_w = static_cast<long>(input.shape.w) + 2L * padding - static_cast<long>(weight.shape.w);
    if (span_h < 0 || span_w < 0) throw ShapeMismatch("conv2d kernel larger than padded input");
    return {input.shape.c,
            input.shape.h,
            input.shape.w,
            weight.shape.h,
            weight.shape.w,
            static_cast<std::size_t>(span_h / stride + 1),
            static_cast<std::size_t>(span_w / stride + 1),
            padding,
            stride};
}

// Output rows [oy0, oy1) of the im2col matrix:
// cols[(c*kh + ky)*kw + kx][(oy - oy0)*ow + ox] = in[c][oy*s - p + ky][ox*s - p + kx]
template <typename T>
void im2col(const T* in, const ConvGeometry& g, std::size_t oy0, std::size_t oy1, T* cols) {
    const long H = static_cast<long>(g.in_h), W = static_cast<long>(g.in_w);
    const std::size_t ow = g.out_w, chunk = (oy1 - oy0) * ow;
    for (std::size_t c = 0; c < g.in_c; ++c) {
        const T* plane = in + c * g.in_h * g.in_w;
        for (std::size_t ky = 0; ky < g.k_h; ++ky) {
            for (std::size_t kx = 0; kx < g.k_w; ++kx) {
                T* row = cols + ((c * g.k_h + ky) * g.k_w + kx) * chunk;
                const long shift = static_cast<long>(kx) - g.pad;
                // ox range whose source column lies inside the image (stride 1 fast path)
                const long lo = std::clamp(-shift, 0L, static_cast<long>(ow));
                const long hi = std::clamp(W - shift, lo, static_cast<long>(ow));
                for (std::size_t oy = oy0; oy < oy1; ++oy) {
                    const long iy = static_cast<long>(oy) * g.stride - g.pad + static_cast<long>(ky);
                    T* dst = row + (oy - oy0) * ow;
                    if (iy < 0 || iy >= H) {
                        std::fill(dst, dst + ow, T{0});
                        continue;
                    }
                    const T* src = plane + iy * W;
                    if (g.stride == 1) {
                        std::fill(dst, dst + lo, T{0});
                        std::copy(src + lo + shift, src + hi + shift, dst + lo);
                        std::fill(dst + hi, dst + ow, T{0});
                    } else {
                        for (std::size_t ox = 0; ox < ow; ++ox) {
                            const long ix = static_cast<long>(ox) * g.stride + shift;
                            dst[ox] = (ix >= 0 && ix < W) ? src[ix] : T{0};
                        }
                    }
                }
            }
        }
    }
}

template <typename T>
void col2im_add(const T* cols, const ConvGeometry& g, std::size_t oy0, std::size_t oy1, T* in) {
    const long H = static_cast<long>(g.in_h), W = static_cast<long>(g.in_w);
    const std::size_t ow = g.out_w, chunk = (oy1 - oy0) * ow;
    for (std::size_t c = 0; c < g.in_c; ++c) {
        T* plane = in + c * g.in_h * g.in_w;
        for (std::size_t ky = 0; ky < g.k_h; ++ky) {
            for (std::size_t kx = 0; kx < g.k_w; ++kx) {
                const T* row = cols + ((c * g.k_h + ky) * g.k_w + kx) * chunk;
                const long shift = static_cast<long>(kx) - g.pad;
                const long lo = std::clamp(-shift, 0L, static_cast<long>(ow));
                const long hi = std::clamp(W - shift, lo, static_cast<long>(ow));
                for (std::size_t oy = oy0; oy < oy1; ++oy) {
                    const long iy = static_cast<long>(oy) * g.stride - g.pad + static_cast<long>(ky);
                    if (iy < 0 || iy >= H) continue;
                    const T* src = row + (oy - oy0) * ow;
                    T* dst = plane + iy * W;
                    if (g.stride == 1) {
                        for (long ox = lo; ox < hi; ++ox) dst[ox + shift] += src[ox];
                    } else {
                        for (std::size_t ox = 0; ox < ow; ++ox) {
                            const long ix = static_cast<long>(ox) * g.stride + shift;
                            if (ix >= 0 && ix < W) dst[ix] += src[ox];
                        }
                    }
                }
            }
        }
    }
}

// Output rows per im2col tile, sized so one tile stays cache resident.
std::size_t tile_rows(const ConvGeometry& g, std::size_t elem_size) {
    constexpr std::size_t budget = 256 * 1024;
    const std::size_t row_bytes = g.rows() * g.out_w * elem_size;
    return std::clamp<std::size_t>(budget / std::max<std::size_t>(row_bytes, 1), 1, g.out_h);
}

}  // namespace

template <typename T>
Tensor<T> conv2d(const Tensor<T>& input, const Tensor<T>& weight, const Tensor<T>& bias, int padding, int stride) {
    const ConvGeometry g = conv_geometry(input, weight, padding, stride);
    const std::size_t out_c = weight.shape.n;
    if (bias.size() != out_c) throw ShapeMismatch("conv2d bias length != outC");

    Tensor<T> out({input.shape.n, out_c, g.out_h, g.out_w});
    const std::size_t rows_per_tile = tile_rows(g, sizeof(T));
    std::vector<T> cols(g.pointwise() ? 0 : g.rows() * rows_per_tile * g.out_w);
    ConstMapMat<T> wm(weight.data.data(), static_cast<Eigen::Index>(out_c), static_cast<Eigen::Index>(g.rows()));
    Eigen::Map<const Eigen::Matrix<T, Eigen::Dynamic, 1>> bv(bias.data.data(), static_cast<Eigen::Index>(out_c));

    const std::size_t in_stride = g.in_c * g.in_h * g.in_w;
    const std::size_t out_stride = out_c * g.cols();
    for (std::size_t n = 0; n < input.shape.n; ++n) {
        const T* src = input.data.data() + n * in_stride;
        MapMat<T> om(out.data.data() + n * out_stride, static_cast<Eigen::Index>(out_c),
                     static_cast<Eigen::Index>(g.cols()));
        if (g.pointwise()) {
            ConstMapMat<T> cm(src, static_cast<Eigen::Index>(g.rows()), static_cast<Eigen::Index>(g.cols()));
            om.noalias() = wm * cm;
        } else {
            for (std::size_t oy0 = 0; oy0 < g.out_h; oy0 += rows_per_tile) {
                const std::size_t oy1 = std::min(g.out_h, oy0 + rows_per_tile);
                const auto pc = static_cast<Eigen::Index>((oy1 - oy0) * g.out_w);
                im2col(src, g, oy0, oy1, cols.data());
                ConstMapMat<T> cm(cols.data(), static_cast<Eigen::Index>(g.rows()), pc);
                om.middleCols(static_cast<Eigen::Index>(oy0 * g.out_w), pc).noalias() = wm * cm;
            }
        }
        om.colwise() += bv;
    }
    return out;
}

template <typename T>
Conv2dGrads<T> conv2d_backward(const Tensor<T>& input, const Tensor<T>& weight, const Tensor<T>& grad_out,
                               int padding, int stride) {
    const ConvGeometry g = conv_geometry(input, weight, padding, stride);
    const std::size_t out_c = weight.shape.n;
    if (!(grad_out.shape == Shape{input.shape.n, out_c, g.out_h, g.out_w})) {
        throw ShapeMismatch("conv2d_backward grad_out " + grad_out.shape.str());
    }

    Conv2dGrads<T> grads{Tensor<T>(input.shape), Tensor<T>(weight.shape), Tensor<T>({out_c, 1, 1, 1})};
    const std::size_t rows_per_tile = tile_rows(g, sizeof(T));
    const std::size_t tile = g.pointwise() ? 0 : g.rows() * rows_per_tile * g.out_w;
    std::vector<T> cols(tile), dcols(tile);

    ConstMapMat<T> wm(weight.data.data(), static_cast<Eigen::Index>(out_c), static_cast<Eigen::Index>(g.rows()));
    MapMat<T> dwm(grads.weight.data.data(), static_cast<Eigen::Index>(out_c), static_cast<Eigen::Index>(g.rows()));
    Eigen::Map<Eigen::Matrix<T, Eigen::Dynamic, 1>> dbv(grads.bias.data.data(), static_cast<Eigen::Index>(out_c));

    const std::size_t in_stride = g.in_c * g.in_h * g.in_w;
    const std::size_t out_stride = out_c * g.cols();
    for (std::size_t n = 0; n < input.shape.n; ++n) {
        const T* src = input.data.data() + n * in_stride;
        T* din = grads.input.data.data() + n * in_stride;
        ConstMapMat<T> gm(grad_out.data.data() + n * out_stride, static_cast<Eigen::Index>(out_c),
                          static_cast<Eigen::Index>(g.cols()));
        // plain loop: Eigen's vectorized row sum peels by pointer alignment,
        // which makes the summation order depend on where the heap put grad_out
        const T* gp = grad_out.data.data() + n * out_stride;
        for (std::size_t c = 0; c < out_c; ++c) {
            T acc = 0;
            for (std::size_t p = 0; p < g.cols(); ++p) acc += gp[c * g.cols() + p];
            dbv(static_cast<Eigen::Index>(c)) += acc;
        }
        if (g.pointwise()) {
            ConstMapMat<T> cm(src, static_cast<Eigen::Index>(g.rows()), static_cast<Eigen::Index>(g.cols()));
            dwm.noalias() += gm * cm.transpose();
            MapMat<T> dm(din, static_cast<Eigen::Index>(g.rows()), static_cast<Eigen::Index>(g.cols()));
            dm.noalias() = wm.transpose() * gm;
            continue;
        }
        for (std::size_t oy0 = 0; oy0 < g.out_h; oy0 += rows_per_tile) {
            const std::size_t oy1 = std::min(g.out_h, oy0 + rows_per_tile);
            const auto pc = static_cast<Eigen::Index>((oy1 - oy0) * g.out_w);
            const auto p0 = static_cast<Eigen::Index>(oy0 * g.out_w);
            im2col(src, g, oy0, oy1, cols.data());
            ConstMapMat<T> cm(cols.data(), static_cast<Eigen::Index>(g.rows()), pc);
            dwm.noalias() += gm.middleCols(p0, pc) * cm.transpose();
            MapMat<T> dm(dcols.data(), static_cast<Eigen::Index>(g.rows()), pc);
            dm.noalias() = wm.transpose() * gm.middleCols(p0, pc);
            col2im_add(dcols.data(), g, oy0, oy1, din);
        }
    }
    return grads;
}

namespace {

template <typename T>
void check_transpose_args(const Tensor<T>& input, const Tensor<T>& weight) {
    if (weight.shape.h != 2 || weight.shape.w != 2) throw ShapeMismatch("conv_transpose2d expects a 2x2 kernel");
    if (input.shape.c != weight.shape.n) {
        throw ShapeMismatch("conv_transpose2d input channels " + std::to_string(input.shape.c) +
                            " != weight inC " + std::to_string(weight.shape.n));
    }
}

}  // namespace

template <typename T>
Tensor<T> conv_transpose2d(const Tensor<T>& input, const Tensor<T>& weight, int stride) {
    if (stride != 2) throw ShapeMismatch("conv_transpose2d supports stride 2 only");
    check_transpose_args(input, weight);
    const std::size_t ci = input.shape.c, co = weight.shape.c, H = input.shape.h, W = input.shape.w;
    const auto hw = static_cast<Eigen::Index>(H * W);

    Tensor<T> out({input.shape.n, co, 2 * H, 2 * W});
    RowMat<T> y(static_cast<Eigen::Index>(co * 4), hw);
    ConstMapMat<T> wm(weight.data.data(), static_cast<Eigen::Index>(ci), static_cast<Eigen::Index>(co * 4));
    for (std::size_t n = 0; n < input.shape.n; ++n) {
        ConstMapMat<T> xm(input.data.data() + n * ci * H * W, static_cast<Eigen::Index>(ci), hw);
        y.noalias() = wm.transpose() * xm;
        for (std::size_t o = 0; o < co; ++o) {
            for (std::size_t k = 0; k < 4; ++k) {
                const std::size_t ky = k / 2, kx = k % 2;
                const T* row = y.data() + (o * 4 + k) * H * W;
                for (std::size_t iy = 0; iy < H; ++iy) {
                    for (std::size_t ix = 0; ix < W; ++ix) out.at(n, o, 2 * iy + ky, 2 * ix + kx) = row[iy * W + ix];
                }
            }
        }
    }
    return out;
}

template <typename T>
ConvTransposeGrads<T> conv_transpose2d_backward(const Tensor<T>& input, const Tensor<T>& weight,
                                                const Tensor<T>& grad_out) {
    check_transpose_args(input, weight);
    const std::size_t ci = input.shape.c, co = weight.shape.c, H = input.shape.h, W = input.shape.w;
    if (!(grad_out.shape == Shape{input.shape.n, co, 2 * H, 2 * W})) {
        throw ShapeMismatch("conv_transpose2d_backward grad_out " + grad_out.shape.str());
    }
    const auto hw = static_cast<Eigen::Index>(H * W);

    ConvTransposeGrads<T> grads{Tensor<T>(input.shape), Tensor<T>(weight.shape)};
    RowMat<T> gathered(static_cast<Eigen::Index>(co * 4), hw);
    ConstMapMat<T> wm(weight.data.data(), static_cast<Eigen::Index>(ci), static_cast<Eigen::Index>(co * 4));
    MapMat<T> dwm(grads.weight.data.data(), static_cast<Eigen::Index>(ci), static_cast<Eigen::Index>(co * 4));
    for (std::size_t n = 0; n < input.shape.n; ++n) {
        for (std::size_t o = 0; o < co; ++o) {
            for (std::size_t k = 0; k < 4; ++k) {
                const std::size_t ky = k / 2, kx = k % 2;
                T* row = gathered.data() + (o * 4 + k) * H * W;
                for (std::size_t iy = 0; iy < H; ++iy) {
                    for (std::size_t ix = 0; ix < W; ++ix) row[iy * W + ix] = grad_out.at(n, o, 2 * iy + ky, 2 * ix + kx);
                }
            }
        }
        ConstMapMat<T> xm(input.data.data() + n * ci * H * W, static_cast<Eigen::Index>(ci), hw);
        MapMat<T> dxm(grads.input.data.data() + n * ci * H * W, static_cast<Eigen::Index>(ci), hw);
        dxm.noalias() = wm * gathered;
        dwm.noalias() += xm * gathered.transpose();
    }
    return grads;
}

template <typename T>
PoolResult<T> maxpool2d(const Tensor<T>& input) {
    const Shape s = input.shape;
    if (s.h % 2 != 0 || s.w % 2 != 0) throw OddDimension("maxpool2d input " + s.str());
    PoolResult<T> r{Tensor<T>({s.n, s.c, s.h / 2, s.w / 2}), {}};
    r.argmax.resize(r.output.size());
    std::size_t k = 0;
    for (std::size_t n = 0; n < s.n; ++n) {
        for (std::size_t c = 0; c < s.c; ++c) {
            for (std::size_t oy = 0; oy < s.h / 2; ++oy) {
                for (std::size_t ox = 0; ox < s.w / 2; ++ox, ++k) {
                    std::size_t best = input.offset(n, c, 2 * oy, 2 * ox);
                    for (std::size_t d = 1; d < 4; ++d) {
                        const std::size_t idx = input.offset(n, c, 2 * oy + d / 2, 2 * ox + d % 2);
                        if (input.data[idx] > input.data[best]) best = idx;
                    }
                    r.output.data[k] = input.data[best];
                    r.argmax[k] = static_cast<std::uint32_t>(best);
                }
            }
        }
    }
    return r;
}

template <typename T>
Tensor<T> maxpool2d_backward(const Tensor<T>& grad_out, const std::vector<std::uint32_t>& argmax,
                             const Shape& input_shape) {
    if (argmax.size() != grad_out.size()) throw ShapeMismatch("maxpool2d_backward argmax length");
    Tensor<T> g(input_shape);
    for (std::size_t i = 0; i < argmax.size(); ++i) g.data[argmax[i]] += grad_out.data[i];
    return g;
}

template <typename T>
Tensor<T> relu(const Tensor<T>& input) {
    Tensor<T> out(input.shape);
    for (std::size_t i = 0; i < input.size(); ++i) out.data[i] = input.data[i] > T{0} ? input.data[i] : T{0};
    return out;
}

template <typename T>
Tensor<T> relu_backward(const Tensor<T>& input, const Tensor<T>& grad_out) {
    if (!(input.shape == grad_out.shape)) throw ShapeMismatch("relu_backward");
    Tensor<T> g(input.shape);
    for (std::size_t i = 0; i < input.size(); ++i) g.data[i] = input.data[i] > T{0} ? grad_out.data[i] : T{0};
    return g;
}

template <typename T>
Tensor<T> sigmoid(const Tensor<T>& input) {
    constexpr T lo = std::numeric_limits<T>::min();
    constexpr T hi = T{1} - std::numeric_limits<T>::epsilon() / 2;  // largest value below 1
    Tensor<T> out(input.shape);
    for (std::size_t i = 0; i < input.size(); ++i) {
        const T x = input.data[i];
        T s;
        if (x >= T{0}) {
            s = T{1} / (T{1} + std::exp(-x));
        } else {
            const T e = std::exp(x);
            s = e / (T{1} + e);
        }
        out.data[i] = std::clamp(s, lo, hi);
    }
    return out;
}

template <typename T>
Tensor<T> sigmoid_backward(const Tensor<T>& output, const Tensor<T>& grad_out) {
    if (!(output.shape == grad_out.shape)) throw ShapeMismatch("sigmoid_backward");
    Tensor<T> g(output.shape);
    for (std::size_t i = 0; i < output.size(); ++i) {
        const T s = output.data[i];
        g.data[i] = grad_out.data[i] * s * (T{1} - s);
    }
    return g;
}

template <typename T>
Tensor<T> concat_channels(const Tensor<T>& a, const Tensor<T>& b) {
    if (a.shape.n != b.shape.n || a.shape.h != b.shape.h || a.shape.w != b.shape.w) {
        throw SpatialMismatch("concat " + a.shape.str() + " with " + b.shape.str());
    }
    Tensor<T> out({a.shape.n, a.shape.c + b.shape.c, a.shape.h, a.shape.w});
    const std::size_t plane = a.shape.h * a.shape.w;
    const std::size_t na = a.shape.c * plane, nb = b.shape.c * plane;
    auto dst = out.data.begin();
    for (std::size_t n = 0; n < a.shape.n; ++n) {
        dst = std::copy_n(a.data.begin() + static_cast<std::ptrdiff_t>(n * na), na, dst);
        dst = std::copy_n(b.data.begin() + static_cast<std::ptrdiff_t>(n * nb), nb, dst);
    }
    return out;
}

template <typename T>
Tensor<T> slice_channels(const Tensor<T>& t, std::size_t begin, std::size_t count) {
    if (begin + count > t.shape.c) throw ShapeMismatch("slice_channels beyond " + t.shape.str());
    Tensor<T> out({t.shape.n, count, t.shape.h, t.shape.w});
    const std::size_t plane = t.shape.h * t.shape.w;
    for (std::size_t n = 0; n < t.shape.n; ++n) {
        std::copy_n(t.data.begin() + static_cast<std::ptrdiff_t>(t.offset(n, begin, 0, 0)), count * plane,
                    out.data.begin() + static_cast<std::ptrdiff_t>(n * count * plane));
    }
    return out;
}

template <typename T>
std::pair<Tensor<T>, Tensor<T>> split_channels(const Tensor<T>& grad, std::size_t a_channels) {
    return {slice_channels(grad, 0, a_channels), slice_channels(grad, a_channels, grad.shape.c - a_channels)};
}

#define LUNGSEG_INSTANTIATE(T)                                                                                 \
    template struct Tensor<T>;                                                                                 \
    template void accumulate<T>(Tensor<T>&, const Tensor<T>&);                                                 \
    template Tensor<T> cast<T>(const Tensor<float>&);                                                          \
    template Tensor<T> conv2d<T>(const Tensor<T>&, const Tensor<T>&, const Tensor<T>&, int, int);             \
    template Conv2dGrads<T> conv2d_backward<T>(const Tensor<T>&, const Tensor<T>&, const Tensor<T>&, int, int); \
    template Tensor<T> conv_transpose2d<T>(const Tensor<T>&, const Tensor<T>&, int);                          \
    template ConvTransposeGrads<T> conv_transpose2d_backward<T>(const Tensor<T>&, const Tensor<T>&,           \
                                                                const Tensor<T>&);                            \
    template PoolResult<T> maxpool2d<T>(const Tensor<T>&);                                                     \
    template Tensor<T> maxpool2d_backward<T>(const Tensor<T>&, const std::vector<std::uint32_t>&, const Shape&); \
    template Tensor<T> relu<T>(const Tensor<T>&);                                                              \
    template Tensor<T> relu_backward<T>(const Tensor<T>&, const Tensor<T>&);                                   \
    template Tensor<T> sigmoid<T>(const Tensor<T>&);                                                           \
    template Tensor<T> sigmoid_backward<T>(const Tensor<T>&, const Tensor<T>&);                                \
    template Tensor<T> concat_channels<T>(const Tensor<T>&, const Tensor<T>&);                                 \
    template Tensor<T> slice_channels<T>(const Tensor<T>&, std::size_t, std::size_t);                          \
    template std::pair<Tensor<T>, Tensor<T>> split_channels<T>(const Tensor<T>&, std::size_t);

LUNGSEG_INSTANTIATE(float)
LUNGSEG_INSTANTIATE(double)
LUNGSEG_INSTANTIATE(long double)

#undef LUNGSEG_INSTANTIATE

}  // namespace lungseg::nn
