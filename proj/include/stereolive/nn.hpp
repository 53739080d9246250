#pragma once

// Minimal tensor engine for the depth-map liveness network: convolution,
// max-pooling, dense layers, ReLU/Sigmoid, BCE loss and Adam, with exact
// hand-written backward passes. All math is 64-bit.
//
// Tensors are row-major; feature maps use (height, width, channels) order.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <functional>
#include <limits>
#include <numeric>
#include <span>
#include <string>
#include <variant>
#include <vector>

#include "binary_io.hpp"
#include "errors.hpp"
#include "imaging.hpp"
#include "random.hpp"

namespace stereolive::nn {

using Shape = std::vector<std::size_t>;

inline std::string shape_str(const Shape& s) {
    std::string out;
    for (std::size_t i = 0; i < s.size(); ++i) out += (i ? "x" : "") + std::to_string(s[i]);
    return out;
}

struct Tensor {
    Shape shape;
    std::vector<double> data;

    Tensor() = default;
    explicit Tensor(Shape s, double fill = 0.0) : shape(std::move(s)), data(element_count(shape), fill) {}
    Tensor(Shape s, std::vector<double> d) : shape(std::move(s)), data(std::move(d)) {
        detail::require(data.size() == element_count(shape), "Tensor: data length != product of shape");
    }

    static std::size_t element_count(const Shape& s) {
        return std::accumulate(s.begin(), s.end(), std::size_t{1}, std::multiplies<>());
    }

    std::size_t size() const noexcept { return data.size(); }
    double& operator[](std::size_t i) noexcept { return data[i]; }
    double operator[](std::size_t i) const noexcept { return data[i]; }

    friend bool operator==(const Tensor&, const Tensor&) = default;
};

/// Input tensor (h, w, 1) from a grayscale image.
inline Tensor image_tensor(const GrayImage& img) {
    return Tensor({img.height(), img.width(), 1}, std::vector<double>(img.data().begin(), img.data().end()));
}

// ---------------------------------------------------------------------------
// Layer parameters

struct ConvLayer {
    Tensor kernels;  // (kh, kw, c_in, c_out)
    Tensor bias;     // (c_out)
    std::size_t stride = 1;
    std::size_t padding = 0;

    std::size_t kh() const { return kernels.shape[0]; }
    std::size_t kw() const { return kernels.shape[1]; }
    std::size_t c_in() const { return kernels.shape[2]; }
    std::size_t c_out() const { return kernels.shape[3]; }

    friend bool operator==(const ConvLayer&, const ConvLayer&) = default;
};

struct PoolLayer {
    std::size_t kernel = 2;
    std::size_t stride = 2;

    friend bool operator==(const PoolLayer&, const PoolLayer&) = default;
};

struct DenseLayer {
    Tensor weights;  // (n_in, n_out)
    Tensor bias;     // (n_out)

    std::size_t n_in() const { return weights.shape[0]; }
    std::size_t n_out() const { return weights.shape[1]; }

    friend bool operator==(const DenseLayer&, const DenseLayer&) = default;
};

using Layer = std::variant<ConvLayer, PoolLayer, DenseLayer>;

/// Ordered layer chain. Every conv and every dense layer except the last is
/// followed by ReLU; the last dense layer is followed by Sigmoid.
struct ModelParams {
    std::vector<Layer> layers;

    friend bool operator==(const ModelParams&, const ModelParams&) = default;
};

/// Same structure as ModelParams, holding d(loss)/d(parameter).
using Gradients = ModelParams;

/// Every trainable tensor in layer order (kernels/weights before bias).
inline std::vector<Tensor*> parameter_tensors(ModelParams& p) {
    std::vector<Tensor*> out;
    for (auto& layer : p.layers) {
        if (auto* c = std::get_if<ConvLayer>(&layer)) {
            out.push_back(&c->kernels);
            out.push_back(&c->bias);
        } else if (auto* d = std::get_if<DenseLayer>(&layer)) {
            out.push_back(&d->weights);
            out.push_back(&d->bias);
        }
    }
    return out;
}

inline std::vector<const Tensor*> parameter_tensors(const ModelParams& p) {
    std::vector<const Tensor*> out;
    for (Tensor* t : parameter_tensors(const_cast<ModelParams&>(p))) out.push_back(t);
    return out;
}

inline std::size_t parameter_count(const ModelParams& p) {
    std::size_t n = 0;
    for (const Tensor* t : parameter_tensors(p)) n += t->size();
    return n;
}

/// Copy of `p` with every parameter set to zero.
inline Gradients zeros_like(const ModelParams& p) {
    Gradients g = p;
    for (Tensor* t : parameter_tensors(g)) std::fill(t->data.begin(), t->data.end(), 0.0);
    return g;
}

inline void require_congruent(const ModelParams& a, const ModelParams& b, const char* what) {
    const auto ta = parameter_tensors(a);
    const auto tb = parameter_tensors(b);
    bool ok = a.layers.size() == b.layers.size() && ta.size() == tb.size();
    for (std::size_t i = 0; ok && i < ta.size(); ++i) ok = ta[i]->shape == tb[i]->shape;
    for (std::size_t i = 0; ok && i < a.layers.size(); ++i) ok = a.layers[i].index() == b.layers[i].index();
    detail::require(ok, std::string(what) + ": parameter structures are not shape-congruent");
}

// ---------------------------------------------------------------------------
// Convolution (stride 1, zero padding)

inline Tensor conv2d(const Tensor& in, const ConvLayer& layer) {
    detail::require(in.shape.size() == 3, "conv2d: input must be (h, w, c)");
    detail::require(layer.kernels.shape.size() == 4 && layer.bias.shape == Shape{layer.c_out()}, "conv2d: malformed layer");
    detail::require(in.shape[2] == layer.c_in(), "conv2d: input has " + std::to_string(in.shape[2]) +
                                                     " channels, kernel expects " + std::to_string(layer.c_in()));
    detail::require(layer.stride == 1, "conv2d: only stride 1 is supported");
    detail::require(2 * layer.padding + 1 == layer.kh() && layer.kh() == layer.kw(),
                    "conv2d: only square kernels with 'same' padding (k-1)/2 are supported");

    const std::size_t H = in.shape[0], W = in.shape[1], ci_n = layer.c_in(), co_n = layer.c_out();
    const std::size_t K = layer.kh(), P = layer.padding;
    Tensor out({H, W, co_n});
    for (std::size_t y = 0; y < H; ++y) {
        for (std::size_t x = 0; x < W; ++x) {
            double* o = out.data.data() + (y * W + x) * co_n;
            std::copy(layer.bias.data.begin(), layer.bias.data.end(), o);
            for (std::size_t ky = 0; ky < K; ++ky) {
                const std::ptrdiff_t iy = static_cast<std::ptrdiff_t>(y + ky) - static_cast<std::ptrdiff_t>(P);
                if (iy < 0 || iy >= static_cast<std::ptrdiff_t>(H)) continue;
                for (std::size_t kx = 0; kx < K; ++kx) {
                    const std::ptrdiff_t ix = static_cast<std::ptrdiff_t>(x + kx) - static_cast<std::ptrdiff_t>(P);
                    if (ix < 0 || ix >= static_cast<std::ptrdiff_t>(W)) continue;
                    const double* ip = in.data.data() + (static_cast<std::size_t>(iy) * W + static_cast<std::size_t>(ix)) * ci_n;
                    const double* kp = layer.kernels.data.data() + (ky * K + kx) * ci_n * co_n;
                    for (std::size_t ci = 0; ci < ci_n; ++ci) {
                        const double v = ip[ci];
                        const double* kr = kp + ci * co_n;
                        for (std::size_t co = 0; co < co_n; ++co) o[co] += v * kr[co];
                    }
                }
            }
        }
    }
    return out;
}

/// Accumulates kernel/bias gradients into `grad`; writes d(loss)/d(input)
/// into `d_in` when non-null.
inline void conv2d_backward(const Tensor& in, const ConvLayer& layer, const Tensor& d_out, ConvLayer& grad, Tensor* d_in) {
    const std::size_t H = in.shape[0], W = in.shape[1], ci_n = layer.c_in(), co_n = layer.c_out();
    const std::size_t K = layer.kh(), P = layer.padding;
    if (d_in) *d_in = Tensor(in.shape);
    for (std::size_t y = 0; y < H; ++y) {
        for (std::size_t x = 0; x < W; ++x) {
            const double* g = d_out.data.data() + (y * W + x) * co_n;
            for (std::size_t co = 0; co < co_n; ++co) grad.bias.data[co] += g[co];
            for (std::size_t ky = 0; ky < K; ++ky) {
                const std::ptrdiff_t iy = static_cast<std::ptrdiff_t>(y + ky) - static_cast<std::ptrdiff_t>(P);
                if (iy < 0 || iy >= static_cast<std::ptrdiff_t>(H)) continue;
                for (std::size_t kx = 0; kx < K; ++kx) {
                    const std::ptrdiff_t ix = static_cast<std::ptrdiff_t>(x + kx) - static_cast<std::ptrdiff_t>(P);
                    if (ix < 0 || ix >= static_cast<std::ptrdiff_t>(W)) continue;
                    const std::size_t in_off = (static_cast<std::size_t>(iy) * W + static_cast<std::size_t>(ix)) * ci_n;
                    const std::size_t k_off = (ky * K + kx) * ci_n * co_n;
                    const double* ip = in.data.data() + in_off;
                    const double* kp = layer.kernels.data.data() + k_off;
                    double* gk = grad.kernels.data.data() + k_off;
                    for (std::size_t ci = 0; ci < ci_n; ++ci) {
                        const double v = ip[ci];
                        double* gkr = gk + ci * co_n;
                        for (std::size_t co = 0; co < co_n; ++co) gkr[co] += v * g[co];
                    }
                    if (d_in) {
                        double* dp = d_in->data.data() + in_off;
                        for (std::size_t ci = 0; ci < ci_n; ++ci) {
                            const double* kr = kp + ci * co_n;
                            double s = 0.0;
                            for (std::size_t co = 0; co < co_n; ++co) s += kr[co] * g[co];
                            dp[ci] += s;
                        }
                    }
                }
            }
        }
    }
}

// ---------------------------------------------------------------------------
// Max pooling

/// Output (h/s, w/s, c). `argmax`, when given, receives the flat input index
/// of each window's winner (first in scan order on ties).
inline Tensor maxpool(const Tensor& in, std::size_t kernel, std::size_t stride, std::vector<std::uint32_t>* argmax = nullptr) {
    detail::require(in.shape.size() == 3, "maxpool: input must be (h, w, c)");
    detail::require(kernel >= 1 && stride >= 1, "maxpool: kernel and stride must be >= 1");
    const std::size_t H = in.shape[0], W = in.shape[1], C = in.shape[2];
    detail::require(H % stride == 0 && W % stride == 0 && kernel <= stride,
                    "maxpool: " + std::to_string(H) + "x" + std::to_string(W) + " input does not tile with kernel " +
                        std::to_string(kernel) + " stride " + std::to_string(stride));
    const std::size_t OH = H / stride, OW = W / stride;
    Tensor out({OH, OW, C});
    if (argmax) argmax->assign(out.size(), 0);
    for (std::size_t oy = 0; oy < OH; ++oy)
        for (std::size_t ox = 0; ox < OW; ++ox)
            for (std::size_t c = 0; c < C; ++c) {
                std::size_t best = ((oy * stride) * W + ox * stride) * C + c;
                for (std::size_t ky = 0; ky < kernel; ++ky)
                    for (std::size_t kx = 0; kx < kernel; ++kx) {
                        const std::size_t idx = ((oy * stride + ky) * W + ox * stride + kx) * C + c;
                        if (in.data[idx] > in.data[best]) best = idx;
                    }
                const std::size_t o = (oy * OW + ox) * C + c;
                out.data[o] = in.data[best];
                if (argmax) (*argmax)[o] = static_cast<std::uint32_t>(best);
            }
    return out;
}

inline Tensor maxpool_backward(const Shape& in_shape, const std::vector<std::uint32_t>& argmax, const Tensor& d_out) {
    Tensor d_in(in_shape);
    for (std::size_t o = 0; o < d_out.size(); ++o) d_in.data[argmax[o]] += d_out.data[o];
    return d_in;
}

// ---------------------------------------------------------------------------
// Dense

inline Tensor dense(const Tensor& in, const DenseLayer& layer) {
    detail::require(in.size() == layer.n_in(), "dense: input length " + std::to_string(in.size()) +
                                                   " != n_in " + std::to_string(layer.n_in()));
    const std::size_t n_out = layer.n_out();
    Tensor out({n_out}, layer.bias.data);
    for (std::size_t i = 0; i < in.size(); ++i) {
        const double v = in.data[i];
        if (v == 0.0) continue;
        const double* w = layer.weights.data.data() + i * n_out;
        for (std::size_t j = 0; j < n_out; ++j) out.data[j] += v * w[j];
    }
    return out;
}

inline void dense_backward(const Tensor& in, const DenseLayer& layer, const Tensor& d_out, DenseLayer& grad, Tensor* d_in) {
    const std::size_t n_out = layer.n_out();
    for (std::size_t j = 0; j < n_out; ++j) grad.bias.data[j] += d_out.data[j];
    if (d_in) *d_in = Tensor(in.shape);
    for (std::size_t i = 0; i < in.size(); ++i) {
        const double v = in.data[i];
        const double* w = layer.weights.data.data() + i * n_out;
        double* gw = grad.weights.data.data() + i * n_out;
        double s = 0.0;
        for (std::size_t j = 0; j < n_out; ++j) {
            gw[j] += v * d_out.data[j];
            s += w[j] * d_out.data[j];
        }
        if (d_in) d_in->data[i] = s;
    }
}

// ---------------------------------------------------------------------------
// Activations and loss

inline double relu(double x) noexcept { return x > 0.0 ? x : 0.0; }

/// d relu / dx, defined as 0 at x == 0.
inline double relu_grad(double x) noexcept { return x > 0.0 ? 1.0 : 0.0; }

inline constexpr double kSigmoidFloor = std::numeric_limits<double>::min();
inline constexpr double kSigmoidCeil = 1.0 - 0x1.0p-52;

/// Logistic function, clamped to [DBL_MIN, 1 - 2^-52] so the result stays
/// strictly inside (0, 1) even when the exact value rounds to 0 or 1.
inline double sigmoid(double x) noexcept {
    const double s = x >= 0.0 ? 1.0 / (1.0 + std::exp(-x)) : std::exp(x) / (1.0 + std::exp(x));
    return std::clamp(s, kSigmoidFloor, kSigmoidCeil);
}

/// Derivative expressed through the forward output s = sigmoid(x).
inline double sigmoid_grad_from_output(double s) noexcept { return s * (1.0 - s); }

inline void relu_inplace(Tensor& t) noexcept {
    for (double& v : t.data) v = relu(v);
}

struct LossAndGrad {
    double loss;
    double dloss_dp;
};

inline constexpr double kBceClamp = 1e-12;

/// Binary cross-entropy on p clamped to [1e-12, 1 - 1e-12]. The derivative
/// is zero where the clamp is active.
inline LossAndGrad bce_loss(double p, int y) {
    detail::require(y == 0 || y == 1, "bce_loss: label must be 0 or 1");
    const double pc = std::clamp(p, kBceClamp, 1.0 - kBceClamp);
    const bool clamped = pc != p;
    if (y == 1) return {-std::log(pc), clamped ? 0.0 : -1.0 / pc};
    return {-std::log1p(-pc), clamped ? 0.0 : 1.0 / (1.0 - pc)};
}

// ---------------------------------------------------------------------------
// Forward / backward over the layer chain

/// Activations recorded by `forward`: `inputs[i]` is the input to layer i and
/// `inputs.back()` is the network output (after the final Sigmoid).
struct ForwardTrace {
    std::vector<Tensor> inputs;
    std::vector<std::vector<std::uint32_t>> argmax;  // per layer; empty unless pooling

    double probability() const { return inputs.back().data[0]; }
};

inline std::size_t last_dense_index(const ModelParams& p) {
    for (std::size_t i = p.layers.size(); i-- > 0;)
        if (std::holds_alternative<DenseLayer>(p.layers[i])) return i;
    return p.layers.size();
}

inline ForwardTrace forward(const ModelParams& params, Tensor input) {
    const std::size_t last = last_dense_index(params);
    detail::require(last < params.layers.size(), "forward: model has no dense output layer");
    ForwardTrace tr;
    tr.inputs.reserve(params.layers.size() + 1);
    tr.argmax.resize(params.layers.size());
    tr.inputs.push_back(std::move(input));
    for (std::size_t i = 0; i < params.layers.size(); ++i) {
        const Tensor& x = tr.inputs.back();
        Tensor y;
        if (const auto* c = std::get_if<ConvLayer>(&params.layers[i])) {
            y = conv2d(x, *c);
            relu_inplace(y);
        } else if (const auto* pl = std::get_if<PoolLayer>(&params.layers[i])) {
            y = maxpool(x, pl->kernel, pl->stride, &tr.argmax[i]);
        } else {
            y = dense(x, std::get<DenseLayer>(params.layers[i]));
            if (i == last) {
                for (double& v : y.data) v = sigmoid(v);
            } else {
                relu_inplace(y);
            }
        }
        tr.inputs.push_back(std::move(y));
    }
    return tr;
}

inline ForwardTrace forward(const ModelParams& params, const GrayImage& img) { return forward(params, image_tensor(img)); }

/// Probability that `img` is a real-face depth map.
inline double predict(const ModelParams& params, const GrayImage& img) { return forward(params, img).probability(); }

/// Backpropagates d(loss)/d(output) through the chain, adding parameter
/// gradients into `grads` (which must be congruent with `params`).
inline void backward(const ModelParams& params, const ForwardTrace& tr, const Tensor& d_output, Gradients& grads) {
    const std::size_t last = last_dense_index(params);
    Tensor g = d_output;
    for (std::size_t i = params.layers.size(); i-- > 0;) {
        const Tensor& x = tr.inputs[i];
        const Tensor& y = tr.inputs[i + 1];
        const bool need_d_in = i > 0;
        Tensor d_in;
        if (const auto* c = std::get_if<ConvLayer>(&params.layers[i])) {
            for (std::size_t k = 0; k < g.size(); ++k) g.data[k] *= relu_grad(y.data[k]);
            conv2d_backward(x, *c, g, std::get<ConvLayer>(grads.layers[i]), need_d_in ? &d_in : nullptr);
        } else if (std::holds_alternative<PoolLayer>(params.layers[i])) {
            d_in = maxpool_backward(x.shape, tr.argmax[i], g);
        } else {
            if (i == last) {
                for (std::size_t k = 0; k < g.size(); ++k) g.data[k] *= sigmoid_grad_from_output(y.data[k]);
            } else {
                for (std::size_t k = 0; k < g.size(); ++k) g.data[k] *= relu_grad(y.data[k]);
            }
            dense_backward(x, std::get<DenseLayer>(params.layers[i]), g, std::get<DenseLayer>(grads.layers[i]),
                           need_d_in ? &d_in : nullptr);
        }
        g = std::move(d_in);
    }
}

struct SampleLoss {
    double loss;
    double probability;
};

/// BCE loss of one sample, accumulating `scale` times its gradient into
/// `grads`.
inline SampleLoss loss_and_gradient(const ModelParams& params, const GrayImage& img, int label, Gradients& grads,
                                     double scale = 1.0) {
    const auto tr = forward(params, img);
    const double p = tr.probability();
    const auto lg = bce_loss(p, label);
    backward(params, tr, Tensor({1}, std::vector<double>{lg.dloss_dp * scale}), grads);
    return {lg.loss, p};
}

// ---------------------------------------------------------------------------
// The liveness architecture

struct LayerSpec {
    const char* name;
    Shape in;
    Shape out;
    std::size_t kernel;  // 0 for dense
};

/// Size-in / size-out chain of the liveness network.
inline const std::vector<LayerSpec>& liveness_architecture() {
    static const std::vector<LayerSpec> spec = {
        {"conv1", {96, 96, 1}, {96, 96, 8}, 5},   {"pool1", {96, 96, 8}, {32, 32, 8}, 3},
        {"conv2", {32, 32, 8}, {32, 32, 16}, 3},  {"pool2", {32, 32, 16}, {16, 16, 16}, 2},
        {"conv3", {16, 16, 16}, {16, 16, 32}, 3}, {"pool3", {16, 16, 32}, {8, 8, 32}, 2},
        {"fc1", {8, 8, 32}, {128}, 0},            {"fc2", {128}, {32}, 0},
        {"fc3", {32}, {1}, 0},
    };
    return spec;
}

/// Throws ArgumentError unless `p` matches the liveness architecture layer
/// for layer (kinds, kernel sizes, channel counts, pool strides).
inline void validate_architecture(const ModelParams& p) {
    const auto& spec = liveness_architecture();
    detail::require(p.layers.size() == spec.size(), "architecture: expected " + std::to_string(spec.size()) + " layers, got " +
                                                        std::to_string(p.layers.size()));
    for (std::size_t i = 0; i < spec.size(); ++i) {
        const auto& s = spec[i];
        const std::string where = std::string("architecture: layer ") + s.name;
        const char kind = s.name[0];
        if (kind == 'c') {
            const auto* c = std::get_if<ConvLayer>(&p.layers[i]);
            detail::require(c != nullptr, where + " must be a convolution");
            detail::require(c->kernels.shape == Shape{s.kernel, s.kernel, s.in[2], s.out[2]} && c->bias.shape == Shape{s.out[2]},
                            where + " has kernel shape " + shape_str(c->kernels.shape));
            detail::require(c->stride == 1 && c->padding == (s.kernel - 1) / 2, where + " must be stride 1 with same padding");
        } else if (kind == 'p') {
            const auto* pl = std::get_if<PoolLayer>(&p.layers[i]);
            detail::require(pl != nullptr, where + " must be a pooling layer");
            detail::require(pl->kernel == s.kernel && pl->stride == s.in[0] / s.out[0], where + " has wrong kernel/stride");
        } else {
            const auto* d = std::get_if<DenseLayer>(&p.layers[i]);
            detail::require(d != nullptr, where + " must be dense");
            const std::size_t n_in = Tensor::element_count(s.in);
            detail::require(d->weights.shape == Shape{n_in, s.out[0]} && d->bias.shape == Shape{s.out[0]},
                            where + " has weight shape " + shape_str(d->weights.shape));
        }
    }
}

/// Fresh liveness network. Conv and hidden dense weights are He-uniform
/// (+-sqrt(6/fan_in)), the output layer Xavier-uniform
/// (+-sqrt(6/(fan_in+fan_out))); biases start at zero.
inline ModelParams build_model(std::uint64_t seed) {
    Rng rng(seed);
    ModelParams p;
    const auto& spec = liveness_architecture();
    for (std::size_t i = 0; i < spec.size(); ++i) {
        const auto& s = spec[i];
        if (s.name[0] == 'c') {
            ConvLayer c{Tensor({s.kernel, s.kernel, s.in[2], s.out[2]}), Tensor({s.out[2]}), 1, (s.kernel - 1) / 2};
            const double limit = std::sqrt(6.0 / static_cast<double>(s.kernel * s.kernel * s.in[2]));
            for (double& w : c.kernels.data) w = rng.uniform(-limit, limit);
            p.layers.emplace_back(std::move(c));
        } else if (s.name[0] == 'p') {
            p.layers.emplace_back(PoolLayer{s.kernel, s.in[0] / s.out[0]});
        } else {
            const std::size_t n_in = Tensor::element_count(s.in), n_out = s.out[0];
            DenseLayer d{Tensor({n_in, n_out}), Tensor({n_out})};
            const bool output_layer = i + 1 == spec.size();
            const double limit = output_layer ? std::sqrt(6.0 / static_cast<double>(n_in + n_out))
                                              : std::sqrt(6.0 / static_cast<double>(n_in));
            for (double& w : d.weights.data) w = rng.uniform(-limit, limit);
            p.layers.emplace_back(std::move(d));
        }
    }
    return p;
}

// ---------------------------------------------------------------------------
// Adam

struct AdamState {
    ModelParams m;
    ModelParams v;
    std::uint64_t t = 0;
    double lr = 1e-3;
    double beta1 = 0.9;
    double beta2 = 0.999;
    double eps = 1e-8;

    static AdamState for_model(const ModelParams& p, double lr = 1e-3) {
        AdamState s;
        s.m = zeros_like(p);
        s.v = zeros_like(p);
        s.lr = lr;
        return s;
    }
};

/// One bias-corrected Adam update of `params` in place.
inline void adam_step(ModelParams& params, const Gradients& grads, AdamState& st) {
    require_congruent(params, grads, "adam_step");
    require_congruent(params, st.m, "adam_step");
    require_congruent(params, st.v, "adam_step");
    st.t += 1;
    const double bc1 = 1.0 - std::pow(st.beta1, static_cast<double>(st.t));
    const double bc2 = 1.0 - std::pow(st.beta2, static_cast<double>(st.t));
    auto pt = parameter_tensors(params);
    const auto gt = parameter_tensors(grads);
    auto mt = parameter_tensors(st.m);
    auto vt = parameter_tensors(st.v);
    for (std::size_t k = 0; k < pt.size(); ++k) {
        auto& theta = pt[k]->data;
        const auto& g = gt[k]->data;
        auto& m = mt[k]->data;
        auto& v = vt[k]->data;
        for (std::size_t i = 0; i < theta.size(); ++i) {
            m[i] = st.beta1 * m[i] + (1.0 - st.beta1) * g[i];
            v[i] = st.beta2 * v[i] + (1.0 - st.beta2) * g[i] * g[i];
            const double m_hat = m[i] / bc1;
            const double v_hat = v[i] / bc2;
            theta[i] -= st.lr * m_hat / (std::sqrt(v_hat) + st.eps);
        }
    }
}

// ---------------------------------------------------------------------------
// SLNN weight files
//
//   "SLNN" | u32 version (1) | u32 layer count | layers...
//   conv  : u32 tag 1 | u32 kh, kw, c_in, c_out, stride, padding | kernels f64 | bias f64
//   pool  : u32 tag 2 | u32 kernel, stride
//   dense : u32 tag 3 | u32 n_in, n_out | weights f64 | bias f64
// All integers and reals little-endian.

inline constexpr std::uint32_t kWeightFormatVersion = 1;

inline Bytes encode_weights(const ModelParams& p) {
    detail::LeWriter w;
    w.bytes("SLNN");
    w.u32(kWeightFormatVersion);
    w.u32(static_cast<std::uint32_t>(p.layers.size()));
    const auto put = [&](const Tensor& t) {
        for (double v : t.data) w.f64(v);
    };
    for (const auto& layer : p.layers) {
        if (const auto* c = std::get_if<ConvLayer>(&layer)) {
            w.u32(1);
            for (std::size_t v : {c->kh(), c->kw(), c->c_in(), c->c_out(), c->stride, c->padding}) w.u32(static_cast<std::uint32_t>(v));
            put(c->kernels);
            put(c->bias);
        } else if (const auto* pl = std::get_if<PoolLayer>(&layer)) {
            w.u32(2);
            w.u32(static_cast<std::uint32_t>(pl->kernel));
            w.u32(static_cast<std::uint32_t>(pl->stride));
        } else {
            const auto& d = std::get<DenseLayer>(layer);
            w.u32(3);
            w.u32(static_cast<std::uint32_t>(d.n_in()));
            w.u32(static_cast<std::uint32_t>(d.n_out()));
            put(d.weights);
            put(d.bias);
        }
    }
    return w.take();
}

/// Parses a weight file and checks it against the liveness architecture.
inline ModelParams decode_weights(std::span<const std::uint8_t> bytes) {
    detail::LeReader r(bytes);
    r.expect_magic("SLNN", "weights");
    const auto version = r.u32("weights version");
    if (version != kWeightFormatVersion)
        throw DecodeError("weights: unsupported format version " + std::to_string(version), 4);
    const auto n_layers = r.u32("weights layer count");
    if (n_layers > 64) throw DecodeError("weights: implausible layer count", 8);
    const auto take = [&](Shape shape) {
        Tensor t(std::move(shape));
        if (t.size() > (1u << 24)) throw DecodeError("weights: implausible tensor size", r.offset());
        for (double& v : t.data) {
            v = r.f64("weights payload");
            if (!std::isfinite(v)) throw DecodeError("weights: non-finite parameter", r.offset() - 8);
        }
        return t;
    };
    ModelParams p;
    for (std::uint32_t i = 0; i < n_layers; ++i) {
        const std::size_t tag_at = r.offset();
        const auto tag = r.u32("weights layer tag");
        if (tag == 1) {
            std::size_t dims[6];
            for (auto& d : dims) d = r.u32("conv dims");
            ConvLayer c;
            c.kernels = take({dims[0], dims[1], dims[2], dims[3]});
            c.bias = take({dims[3]});
            c.stride = dims[4];
            c.padding = dims[5];
            p.layers.emplace_back(std::move(c));
        } else if (tag == 2) {
            PoolLayer pl;
            pl.kernel = r.u32("pool kernel");
            pl.stride = r.u32("pool stride");
            p.layers.emplace_back(pl);
        } else if (tag == 3) {
            const std::size_t n_in = r.u32("dense n_in"), n_out = r.u32("dense n_out");
            DenseLayer d;
            d.weights = take({n_in, n_out});
            d.bias = take({n_out});
            p.layers.emplace_back(std::move(d));
        } else {
            throw DecodeError("weights: unknown layer tag " + std::to_string(tag), tag_at);
        }
    }
    if (!r.at_end()) throw DecodeError("weights: trailing bytes", r.offset());
    try {
        validate_architecture(p);
    } catch (const ArgumentError& e) {
        throw DecodeError(std::string("weights: ") + e.what(), 0);
    }
    return p;
}

inline void save_weights(const std::filesystem::path& path, const ModelParams& p) { write_file(path, encode_weights(p)); }

inline ModelParams load_weights(const std::filesystem::path& path) { return decode_weights(read_file(path)); }

}  // namespace stereolive::nn
