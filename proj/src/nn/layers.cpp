#include "ctwin/nn/layers.hpp"

#include <cmath>

#include "ctwin/rng.hpp"

namespace ctwin::nn {

namespace {

constexpr double kBnEps = 1e-5;      // variance floor
constexpr double kBnMomentum = 0.1;  // running-statistics update rate

std::string at_layer(std::size_t idx, const LayerSpec &spec) {
    return "layer " + std::to_string(idx) + " (" + layer_kind_name(spec.kind) + ")";
}

void require(bool cond, const std::string &msg) {
    if (!cond)
        throw dimension_error(msg);
}

std::size_t conv_out_len(std::size_t len, std::size_t k, std::size_t s) {
    const std::size_t pad = (k - 1) / 2;
    return (len + 2 * pad - k) / s + 1;
}

std::size_t convt_out_len(std::size_t len, std::size_t k, std::size_t s) {
    const std::size_t pad = (k - 1) / 2;
    return (len - 1) * s + k - 2 * pad + (s - 1);
}

} // namespace

const char *layer_kind_name(LayerKind k) {
    switch (k) {
    case LayerKind::conv1d: return "conv1d";
    case LayerKind::conv1d_transpose: return "conv1d_transpose";
    case LayerKind::batchnorm: return "batchnorm";
    case LayerKind::relu: return "relu";
    case LayerKind::dense: return "dense";
    }
    return "?";
}

LayerSpec LayerSpec::conv1d(std::size_t out_channels, std::size_t kernel, std::size_t stride) {
    if (out_channels == 0 || kernel == 0 || kernel % 2 == 0 || stride == 0)
        throw dimension_error("conv1d spec: kernel_count and stride must be positive, kernel_size odd");
    return {LayerKind::conv1d, out_channels, kernel, stride, 0};
}

LayerSpec LayerSpec::conv1d_transpose(std::size_t out_channels, std::size_t kernel, std::size_t stride) {
    if (out_channels == 0 || kernel == 0 || kernel % 2 == 0 || stride == 0)
        throw dimension_error("conv1d_transpose spec: kernel_count and stride must be positive, kernel_size odd");
    return {LayerKind::conv1d_transpose, out_channels, kernel, stride, 0};
}

LayerSpec LayerSpec::batchnorm() { return {LayerKind::batchnorm, 0, 0, 1, 0}; }
LayerSpec LayerSpec::relu() { return {LayerKind::relu, 0, 0, 1, 0}; }

LayerSpec LayerSpec::dense(std::size_t output_width) {
    if (output_width == 0)
        throw dimension_error("dense spec: output_width must be positive");
    return {LayerKind::dense, 0, 0, 1, output_width};
}

std::vector<std::size_t> infer_output_shape(const LayerSpec &spec, const std::vector<std::size_t> &in,
                                            std::size_t layer_index) {
    switch (spec.kind) {
    case LayerKind::conv1d:
        require(in.size() == 2, at_layer(layer_index, spec) + ": expected [channels, length] input, got rank " +
                                    std::to_string(in.size()));
        return {spec.kernel_count, conv_out_len(in[1], spec.kernel_size, spec.stride)};
    case LayerKind::conv1d_transpose:
        require(in.size() == 2, at_layer(layer_index, spec) + ": expected [channels, length] input, got rank " +
                                    std::to_string(in.size()));
        return {spec.kernel_count, convt_out_len(in[1], spec.kernel_size, spec.stride)};
    case LayerKind::batchnorm:
    case LayerKind::relu:
        return in;
    case LayerKind::dense: {
        std::size_t m = 1;
        for (std::size_t d : in)
            m *= d;
        require(m > 0, at_layer(layer_index, spec) + ": empty input");
        return {spec.output_width};
    }
    }
    throw dimension_error("unknown layer kind");
}

ModelParams build_model(const std::vector<LayerSpec> &specs, const std::vector<std::size_t> &input_shape,
                        std::uint64_t seed) {
    ModelParams params;
    Rng rng(seed);
    std::vector<std::size_t> shape = input_shape;
    for (std::size_t i = 0; i < specs.size(); ++i) {
        const LayerSpec &s = specs[i];
        Layer layer;
        layer.spec = s;
        switch (s.kind) {
        case LayerKind::conv1d: {
            const std::size_t cin = shape.at(0);
            const std::size_t fan_in = cin * s.kernel_size;
            const double std_dev = std::sqrt(2.0 / static_cast<double>(fan_in));
            layer.weights = Tensor::zeros({s.kernel_count, cin, s.kernel_size});
            for (auto &w : layer.weights.data)
                w = std_dev * rng.normal();
            layer.bias = Tensor::zeros({s.kernel_count});
            break;
        }
        case LayerKind::conv1d_transpose: {
            const std::size_t cin = shape.at(0);
            const std::size_t fan_in = cin * s.kernel_size;
            const double std_dev = std::sqrt(2.0 / static_cast<double>(fan_in));
            layer.weights = Tensor::zeros({cin, s.kernel_count, s.kernel_size});
            for (auto &w : layer.weights.data)
                w = std_dev * rng.normal();
            layer.bias = Tensor::zeros({s.kernel_count});
            break;
        }
        case LayerKind::batchnorm: {
            const std::size_t c = shape.at(0);
            layer.weights = Tensor::full({c}, 1.0); // gamma
            layer.bias = Tensor::zeros({c});        // beta
            layer.running_mean = Tensor::zeros({c});
            layer.running_var = Tensor::full({c}, 1.0);
            break;
        }
        case LayerKind::relu:
            break;
        case LayerKind::dense: {
            std::size_t m = 1;
            for (std::size_t d : shape)
                m *= d;
            const double std_dev = std::sqrt(2.0 / static_cast<double>(m));
            layer.weights = Tensor::zeros({s.output_width, m});
            for (auto &w : layer.weights.data)
                w = std_dev * rng.normal();
            layer.bias = Tensor::zeros({s.output_width});
            break;
        }
        }
        shape = infer_output_shape(s, shape, i);
        params.layers.push_back(std::move(layer));
    }
    return params;
}

namespace {

// ---- per-layer forward kernels; x is [B, ...] ----

Tensor conv1d_fwd(const Layer &ly, const Tensor &x, std::size_t idx) {
    require(x.rank() == 3, at_layer(idx, ly.spec) + ": expected [batch, channels, length] input, got rank " +
                               std::to_string(x.rank()));
    const std::size_t B = x.dim(0), C = x.dim(1), L = x.dim(2);
    const std::size_t OC = ly.spec.kernel_count, K = ly.spec.kernel_size, S = ly.spec.stride;
    require(C == ly.weights.dim(1), at_layer(idx, ly.spec) + ": input has " + std::to_string(C) +
                                        " channels, weights expect " + std::to_string(ly.weights.dim(1)));
    const std::size_t pad = (K - 1) / 2;
    const std::size_t Lo = conv_out_len(L, K, S);
    Tensor y = Tensor::zeros({B, OC, Lo});
    const double *xd = x.data.data();
    const double *wd = ly.weights.data.data();
    double *yd = y.data.data();
    for (std::size_t b = 0; b < B; ++b)
        for (std::size_t oc = 0; oc < OC; ++oc) {
            const double bias = ly.bias.data[oc];
            double *yrow = yd + (b * OC + oc) * Lo;
            for (std::size_t j = 0; j < Lo; ++j)
                yrow[j] = bias;
            for (std::size_t ic = 0; ic < C; ++ic) {
                const double *xrow = xd + (b * C + ic) * L;
                const double *wrow = wd + (oc * C + ic) * K;
                for (std::size_t j = 0; j < Lo; ++j) {
                    const std::ptrdiff_t base = static_cast<std::ptrdiff_t>(j * S) - static_cast<std::ptrdiff_t>(pad);
                    double acc = 0.0;
                    for (std::size_t t = 0; t < K; ++t) {
                        const std::ptrdiff_t n = base + static_cast<std::ptrdiff_t>(t);
                        if (n >= 0 && n < static_cast<std::ptrdiff_t>(L))
                            acc += wrow[t] * xrow[n];
                    }
                    yrow[j] += acc;
                }
            }
        }
    return y;
}

Tensor convt_fwd(const Layer &ly, const Tensor &x, std::size_t idx) {
    require(x.rank() == 3, at_layer(idx, ly.spec) + ": expected [batch, channels, length] input, got rank " +
                               std::to_string(x.rank()));
    const std::size_t B = x.dim(0), C = x.dim(1), L = x.dim(2);
    const std::size_t OC = ly.spec.kernel_count, K = ly.spec.kernel_size, S = ly.spec.stride;
    require(C == ly.weights.dim(0), at_layer(idx, ly.spec) + ": input has " + std::to_string(C) +
                                        " channels, weights expect " + std::to_string(ly.weights.dim(0)));
    const std::size_t pad = (K - 1) / 2;
    const std::size_t Lo = convt_out_len(L, K, S);
    Tensor y = Tensor::zeros({B, OC, Lo});
    for (std::size_t b = 0; b < B; ++b) {
        for (std::size_t oc = 0; oc < OC; ++oc) {
            double *yrow = y.data.data() + (b * OC + oc) * Lo;
            const double bias = ly.bias.data[oc];
            for (std::size_t j = 0; j < Lo; ++j)
                yrow[j] = bias;
        }
        for (std::size_t ic = 0; ic < C; ++ic) {
            const double *xrow = x.data.data() + (b * C + ic) * L;
            for (std::size_t oc = 0; oc < OC; ++oc) {
                const double *wrow = ly.weights.data.data() + (ic * OC + oc) * K;
                double *yrow = y.data.data() + (b * OC + oc) * Lo;
                for (std::size_t i = 0; i < L; ++i) {
                    const double xv = xrow[i];
                    if (xv == 0.0)
                        continue;
                    const std::ptrdiff_t base = static_cast<std::ptrdiff_t>(i * S) - static_cast<std::ptrdiff_t>(pad);
                    for (std::size_t t = 0; t < K; ++t) {
                        const std::ptrdiff_t j = base + static_cast<std::ptrdiff_t>(t);
                        if (j >= 0 && j < static_cast<std::ptrdiff_t>(Lo))
                            yrow[j] += xv * wrow[t];
                    }
                }
            }
        }
    }
    return y;
}

// Channel count and per-channel element count for batchnorm over [B,C,L] or [B,F].
void bn_dims(const Tensor &x, std::size_t &channels, std::size_t &inner, std::size_t idx, const Layer &ly) {
    require(x.rank() == 2 || x.rank() == 3,
            at_layer(idx, ly.spec) + ": expected rank-2 or rank-3 input, got rank " + std::to_string(x.rank()));
    channels = x.dim(1);
    inner = x.rank() == 3 ? x.dim(2) : 1;
    require(channels == ly.weights.dim(0), at_layer(idx, ly.spec) + ": input has " + std::to_string(channels) +
                                               " channels, parameters expect " + std::to_string(ly.weights.dim(0)));
}

Tensor batchnorm_fwd(Layer &ly, const Tensor &x, Mode mode, std::size_t idx, Tensor *mean_out, Tensor *var_out) {
    std::size_t C, I;
    bn_dims(x, C, I, idx, ly);
    const std::size_t B = x.dim(0);
    const std::size_t N = B * I;
    Tensor mean = Tensor::zeros({C});
    Tensor var = Tensor::zeros({C});
    if (mode == Mode::train) {
        for (std::size_t b = 0; b < B; ++b)
            for (std::size_t c = 0; c < C; ++c) {
                const double *row = x.data.data() + (b * C + c) * I;
                double s = 0.0;
                for (std::size_t i = 0; i < I; ++i)
                    s += row[i];
                mean.data[c] += s;
            }
        for (std::size_t c = 0; c < C; ++c)
            mean.data[c] /= static_cast<double>(N);
        for (std::size_t b = 0; b < B; ++b)
            for (std::size_t c = 0; c < C; ++c) {
                const double *row = x.data.data() + (b * C + c) * I;
                const double m = mean.data[c];
                double s = 0.0;
                for (std::size_t i = 0; i < I; ++i) {
                    const double d = row[i] - m;
                    s += d * d;
                }
                var.data[c] += s;
            }
        for (std::size_t c = 0; c < C; ++c)
            var.data[c] /= static_cast<double>(N);
        for (std::size_t c = 0; c < C; ++c) {
            ly.running_mean.data[c] = (1.0 - kBnMomentum) * ly.running_mean.data[c] + kBnMomentum * mean.data[c];
            ly.running_var.data[c] = (1.0 - kBnMomentum) * ly.running_var.data[c] + kBnMomentum * var.data[c];
        }
    } else {
        mean = ly.running_mean;
        var = ly.running_var;
    }
    Tensor y = Tensor::zeros(x.shape);
    for (std::size_t b = 0; b < B; ++b)
        for (std::size_t c = 0; c < C; ++c) {
            const double *row = x.data.data() + (b * C + c) * I;
            double *yrow = y.data.data() + (b * C + c) * I;
            const double m = mean.data[c];
            const double inv = 1.0 / std::sqrt(var.data[c] + kBnEps);
            const double g = ly.weights.data[c];
            const double be = ly.bias.data[c];
            for (std::size_t i = 0; i < I; ++i)
                yrow[i] = g * (row[i] - m) * inv + be;
        }
    if (mean_out)
        *mean_out = std::move(mean);
    if (var_out)
        *var_out = std::move(var);
    return y;
}

Tensor relu_fwd(const Tensor &x) {
    Tensor y = x;
    for (auto &v : y.data)
        v = v > 0.0 ? v : 0.0;
    return y;
}

Tensor dense_fwd(const Layer &ly, const Tensor &x, std::size_t idx) {
    require(x.rank() >= 2, at_layer(idx, ly.spec) + ": expected batched input, got rank " + std::to_string(x.rank()));
    const std::size_t B = x.dim(0);
    const std::size_t M = x.size() / B;
    require(M == ly.weights.dim(1), at_layer(idx, ly.spec) + ": input flattens to " + std::to_string(M) +
                                        " features, weights expect " + std::to_string(ly.weights.dim(1)));
    const std::size_t W = ly.spec.output_width;
    Tensor y = Tensor::zeros({B, W});
    for (std::size_t b = 0; b < B; ++b) {
        const double *xr = x.data.data() + b * M;
        for (std::size_t o = 0; o < W; ++o) {
            const double *wr = ly.weights.data.data() + o * M;
            double acc = ly.bias.data[o];
            for (std::size_t m = 0; m < M; ++m)
                acc += wr[m] * xr[m];
            y.data[b * W + o] = acc;
        }
    }
    return y;
}

} // namespace

Tensor forward(ModelParams &params, const Tensor &input, Mode mode, ForwardTrace *trace) {
    if (input.rank() < 2)
        throw dimension_error("forward: input must carry a leading batch dimension");
    if (trace) {
        *trace = ForwardTrace{};
        trace->mode = mode;
        trace->batch_mean.resize(params.layers.size());
        trace->batch_var.resize(params.layers.size());
    }
    Tensor x = input;
    for (std::size_t i = 0; i < params.layers.size(); ++i) {
        Layer &ly = params.layers[i];
        if (trace)
            trace->inputs.push_back(x);
        switch (ly.spec.kind) {
        case LayerKind::conv1d:
            x = conv1d_fwd(ly, x, i);
            break;
        case LayerKind::conv1d_transpose:
            x = convt_fwd(ly, x, i);
            break;
        case LayerKind::batchnorm:
            x = batchnorm_fwd(ly, x, mode, i, trace ? &trace->batch_mean[i] : nullptr,
                              trace ? &trace->batch_var[i] : nullptr);
            break;
        case LayerKind::relu:
            x = relu_fwd(x);
            break;
        case LayerKind::dense:
            x = dense_fwd(ly, x, i);
            break;
        }
    }
    if (trace) {
        trace->output = x;
        trace->valid = true;
    }
    return x;
}

Tensor infer(const ModelParams &params, const Tensor &input) {
    // Infer mode never touches running statistics, so the const_cast is safe.
    return forward(const_cast<ModelParams &>(params), input, Mode::infer, nullptr);
}

Gradients zero_gradients(const ModelParams &params) {
    Gradients g;
    g.layers.reserve(params.layers.size());
    for (const Layer &ly : params.layers) {
        LayerGrads lg;
        if (!ly.weights.shape.empty())
            lg.weights = Tensor::zeros(ly.weights.shape);
        if (!ly.bias.shape.empty())
            lg.bias = Tensor::zeros(ly.bias.shape);
        g.layers.push_back(std::move(lg));
    }
    return g;
}

Gradients backward(const ModelParams &params, const ForwardTrace &trace, const Tensor &grad_output) {
    if (!trace.valid || trace.inputs.size() != params.layers.size())
        throw state_error("backward: no retained forward pass for this model");
    if (trace.mode != Mode::train)
        throw state_error("backward: forward pass must be run in train mode");
    if (!grad_output.same_shape(trace.output))
        throw dimension_error("backward: grad_output shape does not match forward output");

    Gradients grads = zero_gradients(params);
    Tensor g = grad_output;

    for (std::size_t ii = params.layers.size(); ii-- > 0;) {
        const Layer &ly = params.layers[ii];
        const Tensor &x = trace.inputs[ii];
        switch (ly.spec.kind) {
        case LayerKind::conv1d: {
            const std::size_t B = x.dim(0), C = x.dim(1), L = x.dim(2);
            const std::size_t OC = ly.spec.kernel_count, K = ly.spec.kernel_size, S = ly.spec.stride;
            const std::size_t pad = (K - 1) / 2;
            const std::size_t Lo = g.dim(2);
            Tensor gin = Tensor::zeros(x.shape);
            for (std::size_t b = 0; b < B; ++b)
                for (std::size_t oc = 0; oc < OC; ++oc) {
                    const double *grow = g.data.data() + (b * OC + oc) * Lo;
                    double bsum = 0.0;
                    for (std::size_t j = 0; j < Lo; ++j)
                        bsum += grow[j];
                    grads.layers[ii].bias.data[oc] += bsum;
                    for (std::size_t ic = 0; ic < C; ++ic) {
                        const double *xrow = x.data.data() + (b * C + ic) * L;
                        const double *wrow = ly.weights.data.data() + (oc * C + ic) * K;
                        double *gwrow = grads.layers[ii].weights.data.data() + (oc * C + ic) * K;
                        double *girow = gin.data.data() + (b * C + ic) * L;
                        for (std::size_t j = 0; j < Lo; ++j) {
                            const double gv = grow[j];
                            if (gv == 0.0)
                                continue;
                            const std::ptrdiff_t base =
                                static_cast<std::ptrdiff_t>(j * S) - static_cast<std::ptrdiff_t>(pad);
                            for (std::size_t t = 0; t < K; ++t) {
                                const std::ptrdiff_t n = base + static_cast<std::ptrdiff_t>(t);
                                if (n >= 0 && n < static_cast<std::ptrdiff_t>(L)) {
                                    gwrow[t] += gv * xrow[n];
                                    girow[n] += gv * wrow[t];
                                }
                            }
                        }
                    }
                }
            g = std::move(gin);
            break;
        }
        case LayerKind::conv1d_transpose: {
            const std::size_t B = x.dim(0), C = x.dim(1), L = x.dim(2);
            const std::size_t OC = ly.spec.kernel_count, K = ly.spec.kernel_size, S = ly.spec.stride;
            const std::size_t pad = (K - 1) / 2;
            const std::size_t Lo = g.dim(2);
            Tensor gin = Tensor::zeros(x.shape);
            for (std::size_t b = 0; b < B; ++b) {
                for (std::size_t oc = 0; oc < OC; ++oc) {
                    const double *grow = g.data.data() + (b * OC + oc) * Lo;
                    double bsum = 0.0;
                    for (std::size_t j = 0; j < Lo; ++j)
                        bsum += grow[j];
                    grads.layers[ii].bias.data[oc] += bsum;
                }
                for (std::size_t ic = 0; ic < C; ++ic) {
                    const double *xrow = x.data.data() + (b * C + ic) * L;
                    double *girow = gin.data.data() + (b * C + ic) * L;
                    for (std::size_t oc = 0; oc < OC; ++oc) {
                        const double *grow = g.data.data() + (b * OC + oc) * Lo;
                        const double *wrow = ly.weights.data.data() + (ic * OC + oc) * K;
                        double *gwrow = grads.layers[ii].weights.data.data() + (ic * OC + oc) * K;
                        for (std::size_t i = 0; i < L; ++i) {
                            const std::ptrdiff_t base =
                                static_cast<std::ptrdiff_t>(i * S) - static_cast<std::ptrdiff_t>(pad);
                            const double xv = xrow[i];
                            double acc = 0.0;
                            for (std::size_t t = 0; t < K; ++t) {
                                const std::ptrdiff_t j = base + static_cast<std::ptrdiff_t>(t);
                                if (j >= 0 && j < static_cast<std::ptrdiff_t>(Lo)) {
                                    const double gv = grow[j];
                                    acc += gv * wrow[t];
                                    gwrow[t] += gv * xv;
                                }
                            }
                            girow[i] += acc;
                        }
                    }
                }
            }
            g = std::move(gin);
            break;
        }
        case LayerKind::batchnorm: {
            const std::size_t B = x.dim(0), C = x.dim(1);
            const std::size_t I = x.rank() == 3 ? x.dim(2) : 1;
            const double N = static_cast<double>(B * I);
            const Tensor &mean = trace.batch_mean[ii];
            const Tensor &var = trace.batch_var[ii];
            Tensor gin = Tensor::zeros(x.shape);
            for (std::size_t c = 0; c < C; ++c) {
                const double m = mean.data[c];
                const double inv = 1.0 / std::sqrt(var.data[c] + kBnEps);
                const double gamma = ly.weights.data[c];
                double sum_g = 0.0, sum_gx = 0.0;
                for (std::size_t b = 0; b < B; ++b) {
                    const double *xrow = x.data.data() + (b * C + c) * I;
                    const double *grow = g.data.data() + (b * C + c) * I;
                    for (std::size_t i = 0; i < I; ++i) {
                        const double xh = (xrow[i] - m) * inv;
                        sum_g += grow[i];
                        sum_gx += grow[i] * xh;
                    }
                }
                grads.layers[ii].weights.data[c] += sum_gx;
                grads.layers[ii].bias.data[c] += sum_g;
                const double mg = sum_g / N;
                const double mgx = sum_gx / N;
                for (std::size_t b = 0; b < B; ++b) {
                    const double *xrow = x.data.data() + (b * C + c) * I;
                    const double *grow = g.data.data() + (b * C + c) * I;
                    double *girow = gin.data.data() + (b * C + c) * I;
                    for (std::size_t i = 0; i < I; ++i) {
                        const double xh = (xrow[i] - m) * inv;
                        girow[i] = gamma * inv * (grow[i] - mg - xh * mgx);
                    }
                }
            }
            g = std::move(gin);
            break;
        }
        case LayerKind::relu: {
            Tensor gin = g;
            for (std::size_t n = 0; n < gin.size(); ++n)
                if (x.data[n] <= 0.0)
                    gin.data[n] = 0.0;
            g = std::move(gin);
            break;
        }
        case LayerKind::dense: {
            const std::size_t B = x.dim(0);
            const std::size_t M = x.size() / B;
            const std::size_t W = ly.spec.output_width;
            Tensor gin = Tensor::zeros(x.shape);
            for (std::size_t b = 0; b < B; ++b) {
                const double *xr = x.data.data() + b * M;
                const double *gr = g.data.data() + b * W;
                double *gir = gin.data.data() + b * M;
                for (std::size_t o = 0; o < W; ++o) {
                    const double gv = gr[o];
                    grads.layers[ii].bias.data[o] += gv;
                    if (gv == 0.0)
                        continue;
                    const double *wr = ly.weights.data.data() + o * M;
                    double *gw = grads.layers[ii].weights.data.data() + o * M;
                    for (std::size_t m = 0; m < M; ++m) {
                        gw[m] += gv * xr[m];
                        gir[m] += gv * wr[m];
                    }
                }
            }
            g = std::move(gin);
            break;
        }
        }
    }
    grads.input = std::move(g);
    return grads;
}

MseResult mse_loss(const Tensor &pred, const Tensor &target) {
    if (!pred.same_shape(target))
        throw dimension_error("mse_loss: shape mismatch between prediction and target");
    const double n = static_cast<double>(pred.size());
    MseResult r;
    r.grad = Tensor::zeros(pred.shape);
    double acc = 0.0;
    for (std::size_t i = 0; i < pred.size(); ++i) {
        const double d = pred.data[i] - target.data[i];
        acc += d * d;
        r.grad.data[i] = 2.0 * d / n;
    }
    r.loss = acc / n;
    return r;
}

} // namespace ctwin::nn
