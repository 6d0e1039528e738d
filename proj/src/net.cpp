#include "holo/net.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>
#include <fstream>

#include "holo/rng.hpp"

namespace holo {

namespace {

#ifndef NDEBUG
void debug_check_finite(const Tensor4& t, const char* where) {
    for (double x : t.v)
        if (!std::isfinite(x)) fail_runtime("NonFiniteValue", std::string("non-finite value after ") + where);
}
#else
void debug_check_finite(const Tensor4&, const char*) {}
#endif

// ---- small dense kernels (row-major, contiguous) ----

// C(m x n) (+)= A(m x k) * B(k x n). Tiled over n so the active C row
// segment stays in L1 while the k loop streams B.
void gemm_nn(int m, int k, int n, const double* A, const double* B, double* C, bool accum) {
    constexpr int kTile = 512;
    for (int j0 = 0; j0 < n; j0 += kTile) {
        const int jn = std::min(n - j0, kTile);
        for (int i = 0; i < m; ++i) {
            double* __restrict ci = C + static_cast<size_t>(i) * n + j0;
            if (!accum) std::memset(ci, 0, sizeof(double) * jn);
            const double* ai = A + static_cast<size_t>(i) * k;
            for (int kk = 0; kk < k; ++kk) {
                const double a = ai[kk];
                const double* __restrict bk = B + static_cast<size_t>(kk) * n + j0;
                for (int j = 0; j < jn; ++j) ci[j] += a * bk[j];
            }
        }
    }
}

// C(m x n) (+)= A(m x k) * B^T, B stored (n x k)
void gemm_nt(int m, int k, int n, const double* A, const double* B, double* C, bool accum) {
    for (int i = 0; i < m; ++i) {
        const double* ai = A + static_cast<size_t>(i) * k;
        double* ci = C + static_cast<size_t>(i) * n;
        for (int j = 0; j < n; ++j) {
            const double* bj = B + static_cast<size_t>(j) * k;
            double s = 0.0;
            for (int kk = 0; kk < k; ++kk) s += ai[kk] * bj[kk];
            ci[j] = accum ? ci[j] + s : s;
        }
    }
}

thread_local std::vector<double> g_col_scratch;

// unfolds one item (ic x h x w) into (ic*kh*kw) x (oh*ow)
void im2col(const double* x, int ic, int h, int w, int kh, int kw, int stride, int pad, int oh,
            int ow, double* col) {
    const size_t J = static_cast<size_t>(oh) * ow;
    for (int c = 0; c < ic; ++c) {
        const double* xc = x + static_cast<size_t>(c) * h * w;
        for (int ky = 0; ky < kh; ++ky) {
            for (int kx = 0; kx < kw; ++kx) {
                double* row = col + ((static_cast<size_t>(c) * kh + ky) * kw + kx) * J;
                for (int oy = 0; oy < oh; ++oy) {
                    const int iy = oy * stride + ky - pad;
                    double* seg = row + static_cast<size_t>(oy) * ow;
                    if (iy < 0 || iy >= h) {
                        std::memset(seg, 0, sizeof(double) * ow);
                        continue;
                    }
                    const double* xr = xc + static_cast<size_t>(iy) * w;
                    for (int ox = 0; ox < ow; ++ox) {
                        const int ix = ox * stride + kx - pad;
                        seg[ox] = (ix >= 0 && ix < w) ? xr[ix] : 0.0;
                    }
                }
            }
        }
    }
}

// scatter-add inverse of im2col
void col2im(const double* col, int ic, int h, int w, int kh, int kw, int stride, int pad, int oh,
            int ow, double* x) {
    const size_t J = static_cast<size_t>(oh) * ow;
    for (int c = 0; c < ic; ++c) {
        double* xc = x + static_cast<size_t>(c) * h * w;
        for (int ky = 0; ky < kh; ++ky) {
            for (int kx = 0; kx < kw; ++kx) {
                const double* row = col + ((static_cast<size_t>(c) * kh + ky) * kw + kx) * J;
                for (int oy = 0; oy < oh; ++oy) {
                    const int iy = oy * stride + ky - pad;
                    if (iy < 0 || iy >= h) continue;
                    double* xr = xc + static_cast<size_t>(iy) * w;
                    const double* seg = row + static_cast<size_t>(oy) * ow;
                    for (int ox = 0; ox < ow; ++ox) {
                        const int ix = ox * stride + kx - pad;
                        if (ix >= 0 && ix < w) xr[ix] += seg[ox];
                    }
                }
            }
        }
    }
}

void conv_shape(const Tensor4& x, const Tensor4& kernel, int stride, int pad, int& oh, int& ow) {
    require(stride >= 1 && pad >= 0, "BadParams", "conv2d stride must be >= 1, pad >= 0");
    require(kernel.c == x.c, "ShapeMismatch", "kernel input channels do not match input");
    oh = (x.h + 2 * pad - kernel.h) / stride + 1;
    ow = (x.w + 2 * pad - kernel.w) / stride + 1;
    require(oh >= 1 && ow >= 1, "ShapeMismatch", "conv2d output would be empty");
}

}  // namespace

Tensor4 conv2d(const Tensor4& x, const Tensor4& kernel, const Tensor4& bias, int stride, int pad) {
    int oh, ow;
    conv_shape(x, kernel, stride, pad, oh, ow);
    const int oc = kernel.n;
    require(bias.count() == static_cast<size_t>(oc), "ShapeMismatch", "bias size must equal output channels");

    const int R = kernel.c * kernel.h * kernel.w;
    const size_t J = static_cast<size_t>(oh) * ow;
    Tensor4 out(x.n, oc, oh, ow);
    g_col_scratch.resize(static_cast<size_t>(R) * J);

    for (int item = 0; item < x.n; ++item) {
        const double* xi = x.v.data() + static_cast<size_t>(item) * x.c * x.h * x.w;
        im2col(xi, x.c, x.h, x.w, kernel.h, kernel.w, stride, pad, oh, ow, g_col_scratch.data());
        double* oi = out.v.data() + static_cast<size_t>(item) * oc * J;
        gemm_nn(oc, R, static_cast<int>(J), kernel.v.data(), g_col_scratch.data(), oi, false);
        for (int c = 0; c < oc; ++c) {
            const double b = bias.v[c];
            double* row = oi + static_cast<size_t>(c) * J;
            for (size_t j = 0; j < J; ++j) row[j] += b;
        }
    }
    debug_check_finite(out, "conv2d");
    return out;
}

void conv2d_backward(const Tensor4& x, const Tensor4& kernel, const Tensor4& grad_out, int stride,
                     int pad, Tensor4* grad_x, Tensor4* grad_kernel, Tensor4* grad_bias) {
    int oh, ow;
    conv_shape(x, kernel, stride, pad, oh, ow);
    require(grad_out.n == x.n && grad_out.c == kernel.n && grad_out.h == oh && grad_out.w == ow,
            "ShapeMismatch", "grad_out shape does not match conv2d output");
    const int oc = kernel.n;
    const int R = kernel.c * kernel.h * kernel.w;
    const size_t J = static_cast<size_t>(oh) * ow;

    if (grad_x) {
        require(grad_x->same_shape(x), "ShapeMismatch", "grad_x shape mismatch");
        std::fill(grad_x->v.begin(), grad_x->v.end(), 0.0);
    }
    std::vector<double> colgrad, wt;
    if (grad_x) colgrad.resize(static_cast<size_t>(R) * J);
    g_col_scratch.resize(static_cast<size_t>(R) * J);

    for (int item = 0; item < x.n; ++item) {
        const double* gi = grad_out.v.data() + static_cast<size_t>(item) * oc * J;
        if (grad_bias) {
            for (int c = 0; c < oc; ++c) {
                const double* row = gi + static_cast<size_t>(c) * J;
                double s = 0.0;
                for (size_t j = 0; j < J; ++j) s += row[j];
                grad_bias->v[c] += s;
            }
        }
        if (grad_kernel) {
            const double* xi = x.v.data() + static_cast<size_t>(item) * x.c * x.h * x.w;
            im2col(xi, x.c, x.h, x.w, kernel.h, kernel.w, stride, pad, oh, ow, g_col_scratch.data());
            gemm_nt(oc, static_cast<int>(J), R, gi, g_col_scratch.data(), grad_kernel->v.data(), true);
        }
        if (grad_x) {
            // colgrad(R x J) = W^T(R x oc) * gi(oc x J); materialize W^T once
            if (item == 0) {
                wt.resize(static_cast<size_t>(R) * oc);
                for (int c = 0; c < oc; ++c)
                    for (int r = 0; r < R; ++r)
                        wt[static_cast<size_t>(r) * oc + c] = kernel.v[static_cast<size_t>(c) * R + r];
            }
            gemm_nn(R, oc, static_cast<int>(J), wt.data(), gi, colgrad.data(), false);
            double* xg = grad_x->v.data() + static_cast<size_t>(item) * x.c * x.h * x.w;
            col2im(colgrad.data(), x.c, x.h, x.w, kernel.h, kernel.w, stride, pad, oh, ow, xg);
        }
    }
}

Tensor4 leaky_relu(const Tensor4& x, double slope) {
    Tensor4 out = x;
    for (double& v : out.v) v = v >= 0.0 ? v : slope * v;
    return out;
}

Tensor4 leaky_relu_backward(const Tensor4& x, const Tensor4& grad_out, double slope) {
    require(x.same_shape(grad_out), "ShapeMismatch", "leaky_relu_backward shape mismatch");
    Tensor4 out = grad_out;
    for (size_t i = 0; i < out.v.size(); ++i)
        if (x.v[i] < 0.0) out.v[i] *= slope;
    return out;
}

Tensor4 upsample_nearest(const Tensor4& x, int factor) {
    require(factor >= 1, "BadParams", "upsample factor must be >= 1");
    Tensor4 out(x.n, x.c, x.h * factor, x.w * factor);
    for (int in = 0; in < x.n; ++in)
        for (int c = 0; c < x.c; ++c)
            for (int y = 0; y < out.h; ++y)
                for (int xx = 0; xx < out.w; ++xx)
                    out.at(in, c, y, xx) = x.at(in, c, y / factor, xx / factor);
    return out;
}

Tensor4 upsample_nearest_backward(const Tensor4& grad_out, int factor) {
    require(factor >= 1, "BadParams", "upsample factor must be >= 1");
    require(grad_out.h % factor == 0 && grad_out.w % factor == 0, "ShapeMismatch",
            "grad shape not divisible by factor");
    Tensor4 out(grad_out.n, grad_out.c, grad_out.h / factor, grad_out.w / factor);
    for (int in = 0; in < grad_out.n; ++in)
        for (int c = 0; c < grad_out.c; ++c)
            for (int y = 0; y < grad_out.h; ++y)
                for (int xx = 0; xx < grad_out.w; ++xx)
                    out.at(in, c, y / factor, xx / factor) += grad_out.at(in, c, y, xx);
    return out;
}

Tensor4 tanh_out(const Tensor4& x) {
    Tensor4 out = x;
    for (double& v : out.v) v = std::tanh(v);
    return out;
}

Tensor4 tanh_backward(const Tensor4& y, const Tensor4& grad_out) {
    require(y.same_shape(grad_out), "ShapeMismatch", "tanh_backward shape mismatch");
    Tensor4 out = grad_out;
    for (size_t i = 0; i < out.v.size(); ++i) out.v[i] *= 1.0 - y.v[i] * y.v[i];
    return out;
}

Tensor4 sigmoid(const Tensor4& x) {
    Tensor4 out = x;
    for (double& v : out.v) v = 1.0 / (1.0 + std::exp(-v));
    return out;
}

Tensor4 sigmoid_backward(const Tensor4& y, const Tensor4& grad_out) {
    require(y.same_shape(grad_out), "ShapeMismatch", "sigmoid_backward shape mismatch");
    Tensor4 out = grad_out;
    for (size_t i = 0; i < out.v.size(); ++i) out.v[i] *= y.v[i] * (1.0 - y.v[i]);
    return out;
}

Tensor4 concat_channels(const Tensor4& a, const Tensor4& b) {
    require(a.n == b.n && a.h == b.h && a.w == b.w, "ShapeMismatch",
            "concat_channels requires matching n/h/w");
    Tensor4 out(a.n, a.c + b.c, a.h, a.w);
    const size_t plane = static_cast<size_t>(a.h) * a.w;
    for (int in = 0; in < a.n; ++in) {
        std::memcpy(&out.v[(static_cast<size_t>(in) * out.c) * plane],
                    &a.v[(static_cast<size_t>(in) * a.c) * plane], a.c * plane * sizeof(double));
        std::memcpy(&out.v[(static_cast<size_t>(in) * out.c + a.c) * plane],
                    &b.v[(static_cast<size_t>(in) * b.c) * plane], b.c * plane * sizeof(double));
    }
    return out;
}

void split_channels_backward(const Tensor4& grad_out, int c_a, Tensor4& grad_a, Tensor4& grad_b) {
    require(c_a > 0 && c_a < grad_out.c, "ShapeMismatch", "bad split channel count");
    const int c_b = grad_out.c - c_a;
    grad_a = Tensor4(grad_out.n, c_a, grad_out.h, grad_out.w);
    grad_b = Tensor4(grad_out.n, c_b, grad_out.h, grad_out.w);
    const size_t plane = static_cast<size_t>(grad_out.h) * grad_out.w;
    for (int in = 0; in < grad_out.n; ++in) {
        std::memcpy(&grad_a.v[(static_cast<size_t>(in) * c_a) * plane],
                    &grad_out.v[(static_cast<size_t>(in) * grad_out.c) * plane],
                    c_a * plane * sizeof(double));
        std::memcpy(&grad_b.v[(static_cast<size_t>(in) * c_b) * plane],
                    &grad_out.v[(static_cast<size_t>(in) * grad_out.c + c_a) * plane],
                    c_b * plane * sizeof(double));
    }
}

// ---- layers ----

Tensor4 Conv2dLayer::forward(const Tensor4& x) {
    cached_input = x;
    return conv2d(x, weight, bias, stride, pad);
}

Tensor4 Conv2dLayer::backward(const Tensor4& grad_out, bool need_input_grad) {
    weight.ensure_grad();
    bias.ensure_grad();
    Tensor4 gw(weight.n, weight.c, weight.h, weight.w);
    gw.v.swap(weight.g);
    Tensor4 gb(bias.n, bias.c, bias.h, bias.w);
    gb.v.swap(bias.g);
    Tensor4 gx;
    if (need_input_grad)
        gx = Tensor4(cached_input.n, cached_input.c, cached_input.h, cached_input.w);
    conv2d_backward(cached_input, weight, grad_out, stride, pad, need_input_grad ? &gx : nullptr,
                    &gw, &gb);
    weight.g.swap(gw.v);
    bias.g.swap(gb.v);
    return gx;
}

namespace {

Conv2dLayer make_conv(int ic, int oc, int stride, Rng& rng) {
    Conv2dLayer layer;
    layer.weight = Tensor4(oc, ic, 3, 3);
    layer.bias = Tensor4(oc, 1, 1, 1);
    layer.stride = stride;
    layer.pad = 1;
    const double b = std::sqrt(1.0 / (ic * 9.0));
    for (double& v : layer.weight.v) v = rng.uniform(-b, b);
    return layer;
}

void add_into(Tensor4& dst, const Tensor4& src) {
    if (dst.count() == 0) {
        dst = src;
        return;
    }
    require(dst.same_shape(src), "ShapeMismatch", "gradient accumulation shape mismatch");
    for (size_t i = 0; i < dst.v.size(); ++i) dst.v[i] += src.v[i];
}

}  // namespace

// ---- generator ----

Generator::Generator(const GeneratorConfig& cfg, uint64_t init_seed) : cfg_(cfg) {
    require(cfg.depth >= 1, "BadParams", "generator depth must be >= 1");
    require(cfg.base_width >= 4, "BadParams", "generator base_width must be >= 4");
    Rng rng(derive_seed(init_seed, "generator-init"));
    int ch = cfg.in_channels;
    for (int i = 0; i < cfg.depth; ++i) {
        const int oc = cfg.base_width << i;
        enc_.push_back(make_conv(ch, oc, 2, rng));
        ch = oc;
    }
    for (int j = 0; j < cfg.depth; ++j) {
        const int oc = cfg.base_width << std::max(cfg.depth - 2 - j, 0);
        dec_.push_back(make_conv(ch, oc, 1, rng));
        const int partner = cfg.depth - 2 - j;
        const int partner_ch = partner >= 0 ? (cfg.base_width << partner) : cfg.in_channels;
        ch = cfg.skip_connections ? oc + partner_ch : oc;
    }
    head_ = make_conv(ch, cfg.out_channels, 1, rng);
    enc_pre_.resize(cfg.depth);
    enc_act_.resize(cfg.depth);
    dec_up_.resize(cfg.depth);
    dec_pre_.resize(cfg.depth);
    dec_act_.resize(cfg.depth);
    dec_cat_.resize(cfg.depth);
}

Tensor4 Generator::forward(const Tensor4& x) {
    require(x.c == cfg_.in_channels, "ShapeMismatch", "generator input channel mismatch");
    const int div = 1 << cfg_.depth;
    require(x.h % div == 0 && x.w % div == 0, "ShapeMismatch",
            "generator input spatial size must be divisible by 2^depth");
    x_ = x;
    Tensor4 cur = x;
    for (int i = 0; i < cfg_.depth; ++i) {
        enc_pre_[i] = enc_[i].forward(cur);
        enc_act_[i] = leaky_relu(enc_pre_[i]);
        cur = enc_act_[i];
    }
    for (int j = 0; j < cfg_.depth; ++j) {
        dec_up_[j] = upsample_nearest(cur);
        dec_pre_[j] = dec_[j].forward(dec_up_[j]);
        dec_act_[j] = leaky_relu(dec_pre_[j]);
        if (cfg_.skip_connections) {
            const int partner = cfg_.depth - 2 - j;
            dec_cat_[j] = concat_channels(dec_act_[j], partner >= 0 ? enc_act_[partner] : x_);
        } else {
            dec_cat_[j] = dec_act_[j];
        }
        cur = dec_cat_[j];
    }
    Tensor4 head_pre = head_.forward(cur);
    t_ = tanh_out(head_pre);
    Tensor4 y = t_;
    for (double& v : y.v) v = 0.5 * (v + 1.0);
    return y;
}

Tensor4 Generator::backward(const Tensor4& grad_output) {
    Tensor4 grad_t = grad_output;
    for (double& v : grad_t.v) v *= 0.5;
    Tensor4 g = head_.backward(tanh_backward(t_, grad_t));

    std::vector<Tensor4> grad_enc_act(cfg_.depth);
    Tensor4 grad_x;
    for (int j = cfg_.depth - 1; j >= 0; --j) {
        Tensor4 grad_act, grad_skip;
        if (cfg_.skip_connections) {
            split_channels_backward(g, dec_act_[j].c, grad_act, grad_skip);
            const int partner = cfg_.depth - 2 - j;
            if (partner >= 0)
                add_into(grad_enc_act[partner], grad_skip);
            else
                add_into(grad_x, grad_skip);
        } else {
            grad_act = g;
        }
        Tensor4 grad_up = dec_[j].backward(leaky_relu_backward(dec_pre_[j], grad_act));
        Tensor4 grad_prev = upsample_nearest_backward(grad_up);
        if (j > 0)
            g = grad_prev;
        else
            add_into(grad_enc_act[cfg_.depth - 1], grad_prev);
    }
    for (int i = cfg_.depth - 1; i >= 0; --i) {
        Tensor4 gin = enc_[i].backward(leaky_relu_backward(enc_pre_[i], grad_enc_act[i]));
        if (i > 0)
            add_into(grad_enc_act[i - 1], gin);
        else
            add_into(grad_x, gin);
    }
    return grad_x;
}

std::vector<ParamRef> Generator::params() {
    std::vector<ParamRef> out;
    for (size_t i = 0; i < enc_.size(); ++i) {
        out.push_back({"g.enc" + std::to_string(i) + ".w", &enc_[i].weight});
        out.push_back({"g.enc" + std::to_string(i) + ".b", &enc_[i].bias});
    }
    for (size_t j = 0; j < dec_.size(); ++j) {
        out.push_back({"g.dec" + std::to_string(j) + ".w", &dec_[j].weight});
        out.push_back({"g.dec" + std::to_string(j) + ".b", &dec_[j].bias});
    }
    out.push_back({"g.head.w", &head_.weight});
    out.push_back({"g.head.b", &head_.bias});
    return out;
}

void Generator::zero_grads() {
    for (auto& p : params()) p.tensor->zero_grad();
}

// ---- discriminator ----

Discriminator::Discriminator(const DiscriminatorConfig& cfg, uint64_t init_seed) : cfg_(cfg) {
    require(cfg.layers >= 1, "BadParams", "discriminator layers must be >= 1");
    Rng rng(derive_seed(init_seed, "discriminator-init"));
    int ch = cfg.in_channels;
    for (int i = 0; i < cfg.layers; ++i) {
        const int oc = cfg.base_width << i;
        convs_.push_back(make_conv(ch, oc, 2, rng));
        ch = oc;
    }
    head_ = make_conv(ch, 1, 1, rng);
    pre_.resize(cfg.layers);
}

Tensor4 Discriminator::forward(const Tensor4& xy) {
    require(xy.c == cfg_.in_channels, "ShapeMismatch", "discriminator input channel mismatch");
    Tensor4 cur = xy;
    for (int i = 0; i < cfg_.layers; ++i) {
        pre_[i] = convs_[i].forward(cur);
        cur = leaky_relu(pre_[i]);
    }
    return head_.forward(cur);
}

Tensor4 Discriminator::backward(const Tensor4& grad_scores) {
    Tensor4 g = head_.backward(grad_scores);
    for (int i = cfg_.layers - 1; i >= 0; --i)
        g = convs_[i].backward(leaky_relu_backward(pre_[i], g));
    return g;
}

std::vector<ParamRef> Discriminator::params() {
    std::vector<ParamRef> out;
    for (size_t i = 0; i < convs_.size(); ++i) {
        out.push_back({"d.conv" + std::to_string(i) + ".w", &convs_[i].weight});
        out.push_back({"d.conv" + std::to_string(i) + ".b", &convs_[i].bias});
    }
    out.push_back({"d.head.w", &head_.weight});
    out.push_back({"d.head.b", &head_.bias});
    return out;
}

void Discriminator::zero_grads() {
    for (auto& p : params()) p.tensor->zero_grad();
}

// ---- optimizer ----

void adam_step(std::vector<ParamRef>& params, AdamState& state, double lr, double beta1,
               double beta2) {
    constexpr double eps = 1e-8;
    if (state.m.empty()) {
        state.m.resize(params.size());
        state.v.resize(params.size());
        for (size_t i = 0; i < params.size(); ++i) {
            state.m[i].assign(params[i].tensor->count(), 0.0);
            state.v[i].assign(params[i].tensor->count(), 0.0);
        }
    }
    require(state.m.size() == params.size(), "ShapeMismatch", "adam state size mismatch");
    state.t += 1;
    const double bc1 = 1.0 - std::pow(beta1, static_cast<double>(state.t));
    const double bc2 = 1.0 - std::pow(beta2, static_cast<double>(state.t));
    for (size_t i = 0; i < params.size(); ++i) {
        Tensor4& p = *params[i].tensor;
        require(p.g.size() == p.count(), "ShapeMismatch", "parameter gradient missing");
        require(state.m[i].size() == p.count(), "ShapeMismatch", "adam moment size mismatch");
        for (size_t j = 0; j < p.count(); ++j) {
            const double g = p.g[j];
            state.m[i][j] = beta1 * state.m[i][j] + (1.0 - beta1) * g;
            state.v[i][j] = beta2 * state.v[i][j] + (1.0 - beta2) * g * g;
            const double mhat = state.m[i][j] / bc1;
            const double vhat = state.v[i][j] / bc2;
            p.v[j] -= lr * mhat / (std::sqrt(vhat) + eps);
        }
    }
}

// ---- losses ----

GanLosses gan_losses(const Tensor4& g_out, const Tensor4& target, const Tensor4& d_real_scores,
                     const Tensor4& d_fake_scores, const TrainConfig& cfg) {
    require(g_out.same_shape(target), "ShapeMismatch", "generator output/target shape mismatch");
    require(d_real_scores.same_shape(d_fake_scores), "ShapeMismatch", "score map shape mismatch");
    GanLosses out;
    double l1 = 0.0;
    for (size_t i = 0; i < g_out.v.size(); ++i) l1 += std::abs(g_out.v[i] - target.v[i]);
    l1 /= static_cast<double>(g_out.v.size());
    double adv = 0.0, real_term = 0.0, fake_term = 0.0;
    for (size_t i = 0; i < d_fake_scores.v.size(); ++i) {
        const double df = d_fake_scores.v[i];
        const double dr = d_real_scores.v[i];
        adv += (df - 1.0) * (df - 1.0);
        real_term += (dr - 1.0) * (dr - 1.0);
        fake_term += df * df;
    }
    const double ns = static_cast<double>(d_fake_scores.v.size());
    out.l1 = l1;
    out.loss_g = cfg.lambda_adv * adv / ns + cfg.lambda_l1 * l1;
    out.loss_d = 0.5 * real_term / ns + 0.5 * fake_term / ns;
    return out;
}

// ---- training ----

namespace {

Tensor4 make_batch(const PairedPatchSet& ds, const std::vector<uint32_t>& idx, size_t from,
                   size_t count, bool targets) {
    const int S = ds.patches.front().size;
    const int C = targets ? 3 : 2;
    Tensor4 t(static_cast<int>(count), C, S, S);
    const size_t stride = static_cast<size_t>(C) * S * S;
    for (size_t i = 0; i < count; ++i) {
        const PairedPatch& p = ds.patches[idx[from + i]];
        const std::vector<double>& src = targets ? p.target : p.input;
        std::memcpy(t.v.data() + i * stride, src.data(), stride * sizeof(double));
    }
    return t;
}

double validation_l1(const PairedPatchSet& ds, Generator& gen, int batch_size) {
    if (ds.val.empty()) return -1.0;
    double abs_sum = 0.0;
    size_t n_elems = 0;
    for (size_t from = 0; from < ds.val.size(); from += batch_size) {
        const size_t count = std::min(static_cast<size_t>(batch_size), ds.val.size() - from);
        Tensor4 x = make_batch(ds, ds.val, from, count, false);
        Tensor4 y = make_batch(ds, ds.val, from, count, true);
        Tensor4 out = gen.forward(x);
        for (size_t i = 0; i < out.v.size(); ++i) abs_sum += std::abs(out.v[i] - y.v[i]);
        n_elems += out.v.size();
    }
    return abs_sum / static_cast<double>(n_elems);
}

}  // namespace

TrainResult train(const PairedPatchSet& ds, Generator& gen, Discriminator& dis,
                  const TrainConfig& cfg) {
    if (ds.train.empty()) fail("EmptyDataset", "train split is empty");
    require(cfg.batch_size >= 1, "BadParams", "batch_size must be >= 1");
    require(cfg.steps >= 0, "BadParams", "steps must be >= 0");

    TrainResult result;
    auto g_params = gen.params();
    auto d_params = dis.params();
    AdamState g_state, d_state;

    Rng shuffle_rng(derive_seed(cfg.seed, "epoch-shuffle"));
    std::vector<uint32_t> order = ds.train;
    auto reshuffle = [&]() {
        for (size_t i = order.size(); i > 1; --i)
            std::swap(order[i - 1], order[shuffle_rng.below(i)]);
    };
    reshuffle();
    size_t pos = 0;
    std::vector<uint32_t> batch(cfg.batch_size);
    auto next_batch = [&]() {
        for (int i = 0; i < cfg.batch_size; ++i) {
            if (pos >= order.size()) {
                reshuffle();
                pos = 0;
            }
            batch[i] = order[pos++];
        }
    };

    if (cfg.steps > 0) {
        HistoryRow row;
        row.step = 0;
        row.val_l1 = validation_l1(ds, gen, cfg.batch_size);
        result.history.push_back(row);
    }

    for (int step = 1; step <= cfg.steps; ++step) {
        next_batch();
        Tensor4 x = make_batch(ds, batch, 0, batch.size(), false);
        Tensor4 y = make_batch(ds, batch, 0, batch.size(), true);

        // --- discriminator step ---
        dis.zero_grads();
        Tensor4 g_out = gen.forward(x);  // fake sample, generator not updated here
        Tensor4 d_real = dis.forward(concat_channels(x, y));
        const double ns = static_cast<double>(d_real.count());
        Tensor4 grad_real = d_real;
        for (double& v : grad_real.v) v = (v - 1.0) / ns;
        dis.backward(grad_real);
        Tensor4 d_fake = dis.forward(concat_channels(x, g_out));
        Tensor4 grad_fake = d_fake;
        for (double& v : grad_fake.v) v /= ns;
        dis.backward(grad_fake);
        GanLosses d_losses = gan_losses(g_out, y, d_real, d_fake, cfg);
        adam_step(d_params, d_state, cfg.learning_rate, cfg.adam_beta1, cfg.adam_beta2);

        // --- generator step ---
        gen.zero_grads();
        dis.zero_grads();  // discriminator grads below are discarded
        g_out = gen.forward(x);
        Tensor4 d_fake2 = dis.forward(concat_channels(x, g_out));
        GanLosses g_losses = gan_losses(g_out, y, d_real, d_fake2, cfg);
        Tensor4 grad_scores = d_fake2;
        for (double& v : grad_scores.v) v = 2.0 * cfg.lambda_adv * (v - 1.0) / ns;
        Tensor4 grad_d_input = dis.backward(grad_scores);
        Tensor4 grad_gout(g_out.n, g_out.c, g_out.h, g_out.w);
        const size_t plane = static_cast<size_t>(g_out.h) * g_out.w;
        for (int in = 0; in < g_out.n; ++in) {
            // adversarial gradient arrives on channels [in_channels, in_channels+3)
            for (int c = 0; c < 3; ++c) {
                const double* src =
                    grad_d_input.v.data() +
                    ((static_cast<size_t>(in) * grad_d_input.c) + x.c + c) * plane;
                double* dst = grad_gout.v.data() + ((static_cast<size_t>(in) * 3) + c) * plane;
                std::memcpy(dst, src, plane * sizeof(double));
            }
        }
        const double nl = static_cast<double>(g_out.count());
        for (size_t i = 0; i < grad_gout.v.size(); ++i) {
            const double d = g_out.v[i] - y.v[i];
            grad_gout.v[i] += cfg.lambda_l1 * (d > 0.0 ? 1.0 : (d < 0.0 ? -1.0 : 0.0)) / nl;
        }
        gen.backward(grad_gout);
        adam_step(g_params, g_state, cfg.learning_rate, cfg.adam_beta1, cfg.adam_beta2);

        HistoryRow row;
        row.step = step;
        row.loss_g = g_losses.loss_g;
        row.loss_d = d_losses.loss_d;
        row.has_losses = true;
        if (step % cfg.val_interval == 0 || step == cfg.steps)
            row.val_l1 = validation_l1(ds, gen, cfg.batch_size);
        result.history.push_back(row);
    }
    if (!result.history.empty()) {
        for (auto it = result.history.rbegin(); it != result.history.rend(); ++it)
            if (it->val_l1 >= 0.0) {
                result.final_val_l1 = it->val_l1;
                break;
            }
    }
    return result;
}

std::string history_csv(const std::vector<HistoryRow>& rows) {
    std::string out = "step,loss_g,loss_d,val_l1\n";
    char buf[160];
    for (const auto& r : rows) {
        if (r.has_losses && r.val_l1 >= 0.0)
            std::snprintf(buf, sizeof(buf), "%d,%.9g,%.9g,%.9g\n", r.step, r.loss_g, r.loss_d, r.val_l1);
        else if (r.has_losses)
            std::snprintf(buf, sizeof(buf), "%d,%.9g,%.9g,\n", r.step, r.loss_g, r.loss_d);
        else if (r.val_l1 >= 0.0)
            std::snprintf(buf, sizeof(buf), "%d,,,%.9g\n", r.step, r.val_l1);
        else
            std::snprintf(buf, sizeof(buf), "%d,,,\n", r.step);
        out += buf;
    }
    return out;
}

// ---- inference ----

namespace {

cplx field_border_mean(const ComplexField& f) {
    cplx sum(0.0, 0.0);
    size_t count = 0;
    for (int x = 0; x < f.width; ++x) {
        sum += f.at(x, 0) + f.at(x, f.height - 1);
        count += 2;
    }
    for (int y = 1; y < f.height - 1; ++y) {
        sum += f.at(0, y) + f.at(f.width - 1, y);
        count += 2;
    }
    return sum / static_cast<double>(count);
}

std::vector<int> tile_positions(int extent, int tile, int stride) {
    std::vector<int> xs;
    for (int x = 0; x + tile <= extent; x += stride) xs.push_back(x);
    if (xs.empty() || xs.back() != extent - tile) xs.push_back(extent - tile);
    return xs;
}

}  // namespace

RealImage infer(Generator& gen, const ComplexField& bp_field, int tile_size) {
    const int div = 1 << gen.config().depth;
    if (tile_size < div || tile_size % div != 0)
        fail("BadDims", "tile size must be a positive multiple of 2^depth");

    // fields smaller than one tile are padded with their border mean and cropped back
    if (bp_field.width < tile_size || bp_field.height < tile_size) {
        ComplexField padded =
            pad_to(bp_field, std::max(bp_field.width, tile_size), std::max(bp_field.height, tile_size),
                   field_border_mean(bp_field));
        RealImage full = infer(gen, padded, tile_size);
        RealImage out(bp_field.width, bp_field.height, 3);
        const int ox = (padded.width - bp_field.width) / 2;
        const int oy = (padded.height - bp_field.height) / 2;
        for (int y = 0; y < out.height; ++y)
            for (int x = 0; x < out.width; ++x)
                for (int c = 0; c < 3; ++c) out.at(x, y, c) = full.at(x + ox, y + oy, c);
        return out;
    }

    const int overlap = tile_size / 4;
    const int stride = tile_size - overlap;
    const std::vector<int> xs = tile_positions(bp_field.width, tile_size, stride);
    const std::vector<int> ys = tile_positions(bp_field.height, tile_size, stride);

    // linear feather: ramp across the overlap band, flat interior
    std::vector<double> feather(tile_size);
    for (int t = 0; t < tile_size; ++t)
        feather[t] = static_cast<double>(std::min({t + 1, tile_size - t, overlap + 1})) /
                     static_cast<double>(overlap + 1);

    RealImage acc(bp_field.width, bp_field.height, 3, 0.0);
    std::vector<double> wsum(static_cast<size_t>(bp_field.width) * bp_field.height, 0.0);
    Tensor4 x(1, 2, tile_size, tile_size);
    const size_t plane = static_cast<size_t>(tile_size) * tile_size;
    for (int ty : ys) {
        for (int tx : xs) {
            for (int y = 0; y < tile_size; ++y) {
                for (int xx = 0; xx < tile_size; ++xx) {
                    const cplx v = bp_field.at(tx + xx, ty + y);
                    x.v[static_cast<size_t>(y) * tile_size + xx] = v.real();
                    x.v[plane + static_cast<size_t>(y) * tile_size + xx] = v.imag();
                }
            }
            Tensor4 out = gen.forward(x);
            for (int y = 0; y < tile_size; ++y) {
                for (int xx = 0; xx < tile_size; ++xx) {
                    const double wgt = feather[y] * feather[xx];
                    wsum[static_cast<size_t>(ty + y) * bp_field.width + tx + xx] += wgt;
                    for (int c = 0; c < 3; ++c)
                        acc.at(tx + xx, ty + y, c) +=
                            wgt * out.v[(static_cast<size_t>(c)) * plane +
                                        static_cast<size_t>(y) * tile_size + xx];
                }
            }
        }
    }
    for (int y = 0; y < acc.height; ++y)
        for (int xx = 0; xx < acc.width; ++xx)
            for (int c = 0; c < 3; ++c)
                acc.at(xx, y, c) = std::clamp(
                    acc.at(xx, y, c) / wsum[static_cast<size_t>(y) * acc.width + xx], 0.0, 1.0);
    return acc;
}

RealImage infer_patch(Generator& gen, const PairedPatch& patch) {
    const int S = patch.size;
    Tensor4 x(1, 2, S, S);
    std::memcpy(x.v.data(), patch.input.data(), patch.input.size() * sizeof(double));
    Tensor4 out = gen.forward(x);
    RealImage img(S, S, 3);
    const size_t plane = static_cast<size_t>(S) * S;
    for (int y = 0; y < S; ++y)
        for (int xx = 0; xx < S; ++xx)
            for (int c = 0; c < 3; ++c)
                img.at(xx, y, c) =
                    std::clamp(out.v[c * plane + static_cast<size_t>(y) * S + xx], 0.0, 1.0);
    return img;
}

// ---- weights serialization ----

namespace {

constexpr char kWeightsMagic[4] = {'C', 'M', 'W', 'T'};
constexpr uint32_t kWeightsVersion = 1;

}  // namespace

void save_weights(const std::vector<ParamRef>& params, const std::filesystem::path& path) {
    std::ofstream f(path, std::ios::binary);
    if (!f) fail_runtime("IoError", "cannot open for writing: " + path.string());
    f.write(kWeightsMagic, 4);
    uint32_t version = kWeightsVersion;
    f.write(reinterpret_cast<const char*>(&version), 4);
    for (const auto& p : params) {
        const uint16_t len = static_cast<uint16_t>(p.name.size());
        f.write(reinterpret_cast<const char*>(&len), 2);
        f.write(p.name.data(), len);
        const uint32_t shape[4] = {static_cast<uint32_t>(p.tensor->n), static_cast<uint32_t>(p.tensor->c),
                                   static_cast<uint32_t>(p.tensor->h), static_cast<uint32_t>(p.tensor->w)};
        f.write(reinterpret_cast<const char*>(shape), 16);
        f.write(reinterpret_cast<const char*>(p.tensor->v.data()),
                static_cast<std::streamsize>(p.tensor->v.size() * 8));
    }
    if (!f) fail_runtime("IoError", "write failed: " + path.string());
}

void load_weights(std::vector<ParamRef> params, const std::filesystem::path& path) {
    std::ifstream f(path, std::ios::binary);
    if (!f) fail("IoError", "cannot open: " + path.string());
    char magic[4];
    f.read(magic, 4);
    if (f.gcount() != 4 || std::memcmp(magic, kWeightsMagic, 4) != 0)
        fail("BadMagic", "not a CMWT weights file: " + path.string());
    uint32_t version = 0;
    f.read(reinterpret_cast<char*>(&version), 4);
    if (version != kWeightsVersion) fail("SchemaMismatch", "unsupported weights version");

    std::map<std::string, std::vector<double>> tensors;
    std::map<std::string, std::array<uint32_t, 4>> shapes;
    while (true) {
        uint16_t len = 0;
        f.read(reinterpret_cast<char*>(&len), 2);
        if (f.gcount() == 0) break;  // clean EOF
        if (f.gcount() != 2) fail("TruncatedPayload", "truncated weights file");
        std::string name(len, '\0');
        f.read(name.data(), len);
        std::array<uint32_t, 4> shape{};
        f.read(reinterpret_cast<char*>(shape.data()), 16);
        if (!f) fail("TruncatedPayload", "truncated weights file");
        const size_t count = static_cast<size_t>(shape[0]) * shape[1] * shape[2] * shape[3];
        std::vector<double> payload(count);
        f.read(reinterpret_cast<char*>(payload.data()), static_cast<std::streamsize>(count * 8));
        if (f.gcount() != static_cast<std::streamsize>(count * 8))
            fail("TruncatedPayload", "truncated weights payload");
        tensors[name] = std::move(payload);
        shapes[name] = shape;
    }
    for (auto& p : params) {
        auto it = tensors.find(p.name);
        if (it == tensors.end()) fail("SchemaMismatch", "weights file is missing tensor " + p.name);
        const auto& shape = shapes[p.name];
        require(static_cast<int>(shape[0]) == p.tensor->n && static_cast<int>(shape[1]) == p.tensor->c &&
                    static_cast<int>(shape[2]) == p.tensor->h && static_cast<int>(shape[3]) == p.tensor->w,
                "ShapeMismatch", "weights shape mismatch for " + p.name);
        p.tensor->v = it->second;
    }
}

// ---- gradient checks ----

namespace {

constexpr double kFdStep = 1e-5;

double rel_err(double fd, double an) {
    return std::abs(fd - an) / std::max(1e-8, std::abs(fd) + std::abs(an));
}

// central finite differences over every entry of `values`
template <typename LossFn>
double max_rel_err_over(std::vector<double>& values, const std::vector<double>& analytic,
                        LossFn loss) {
    double worst = 0.0;
    for (size_t i = 0; i < values.size(); ++i) {
        const double keep = values[i];
        values[i] = keep + kFdStep;
        const double lp = loss();
        values[i] = keep - kFdStep;
        const double lm = loss();
        values[i] = keep;
        worst = std::max(worst, rel_err((lp - lm) / (2.0 * kFdStep), analytic[i]));
    }
    return worst;
}

Tensor4 random_tensor(int n, int c, int h, int w, Rng& rng, double lo = -1.0, double hi = 1.0) {
    Tensor4 t(n, c, h, w);
    for (double& v : t.v) v = rng.uniform(lo, hi);
    return t;
}

}  // namespace

double gradient_check_conv2d(uint64_t seed) {
    Rng rng(derive_seed(seed, "gc-conv"));
    Tensor4 x = random_tensor(2, 3, 5, 5, rng);
    Tensor4 k = random_tensor(4, 3, 3, 3, rng);
    Tensor4 b = random_tensor(4, 1, 1, 1, rng);
    Tensor4 proj = random_tensor(2, 4, 3, 3, rng);  // stride 2, pad 1 -> 3x3 output

    auto loss = [&]() {
        Tensor4 out = conv2d(x, k, b, 2, 1);
        double s = 0.0;
        for (size_t i = 0; i < out.v.size(); ++i) s += out.v[i] * proj.v[i];
        return s;
    };
    Tensor4 gx(2, 3, 5, 5), gk(4, 3, 3, 3), gb(4, 1, 1, 1);
    conv2d_backward(x, k, proj, 2, 1, &gx, &gk, &gb);

    double worst = max_rel_err_over(x.v, gx.v, loss);
    worst = std::max(worst, max_rel_err_over(k.v, gk.v, loss));
    worst = std::max(worst, max_rel_err_over(b.v, gb.v, loss));
    return worst;
}

double gradient_check_leaky_relu(uint64_t seed) {
    Rng rng(derive_seed(seed, "gc-lrelu"));
    Tensor4 x(2, 2, 4, 4);
    for (double& v : x.v) {
        // keep away from the kink per the check's contract
        double u = rng.uniform(1e-3, 1.0);
        v = rng.uniform01() < 0.5 ? -u : u;
    }
    Tensor4 proj = random_tensor(2, 2, 4, 4, rng);
    auto loss = [&]() {
        Tensor4 out = leaky_relu(x);
        double s = 0.0;
        for (size_t i = 0; i < out.v.size(); ++i) s += out.v[i] * proj.v[i];
        return s;
    };
    Tensor4 gx = leaky_relu_backward(x, proj);
    return max_rel_err_over(x.v, gx.v, loss);
}

double gradient_check_upsample(uint64_t seed) {
    Rng rng(derive_seed(seed, "gc-upsample"));
    Tensor4 x = random_tensor(2, 3, 4, 4, rng);
    Tensor4 proj = random_tensor(2, 3, 8, 8, rng);
    auto loss = [&]() {
        Tensor4 out = upsample_nearest(x);
        double s = 0.0;
        for (size_t i = 0; i < out.v.size(); ++i) s += out.v[i] * proj.v[i];
        return s;
    };
    Tensor4 gx = upsample_nearest_backward(proj);
    return max_rel_err_over(x.v, gx.v, loss);
}

double gradient_check_tanh(uint64_t seed) {
    Rng rng(derive_seed(seed, "gc-tanh"));
    Tensor4 x = random_tensor(2, 2, 4, 4, rng, -2.0, 2.0);
    Tensor4 proj = random_tensor(2, 2, 4, 4, rng);
    auto loss = [&]() {
        Tensor4 out = tanh_out(x);
        double s = 0.0;
        for (size_t i = 0; i < out.v.size(); ++i) s += out.v[i] * proj.v[i];
        return s;
    };
    Tensor4 y = tanh_out(x);
    Tensor4 gx = tanh_backward(y, proj);
    return max_rel_err_over(x.v, gx.v, loss);
}

double gradient_check_sigmoid(uint64_t seed) {
    Rng rng(derive_seed(seed, "gc-sigmoid"));
    Tensor4 x = random_tensor(2, 2, 4, 4, rng, -2.0, 2.0);
    Tensor4 proj = random_tensor(2, 2, 4, 4, rng);
    auto loss = [&]() {
        Tensor4 out = sigmoid(x);
        double s = 0.0;
        for (size_t i = 0; i < out.v.size(); ++i) s += out.v[i] * proj.v[i];
        return s;
    };
    Tensor4 y = sigmoid(x);
    Tensor4 gx = sigmoid_backward(y, proj);
    return max_rel_err_over(x.v, gx.v, loss);
}

double gradient_check_generator(uint64_t seed) {
    GeneratorConfig cfg;
    cfg.in_channels = 2;
    cfg.out_channels = 3;
    cfg.base_width = 4;
    cfg.depth = 2;
    Generator gen(cfg, seed);
    Rng rng(derive_seed(seed, "gc-generator"));
    Tensor4 x = random_tensor(1, 2, 8, 8, rng);
    Tensor4 proj = random_tensor(1, 3, 8, 8, rng);

    auto loss = [&]() {
        Tensor4 out = gen.forward(x);
        double s = 0.0;
        for (size_t i = 0; i < out.v.size(); ++i) s += out.v[i] * proj.v[i];
        return s;
    };
    gen.zero_grads();
    gen.forward(x);
    gen.backward(proj);

    double worst = 0.0;
    for (auto& p : gen.params()) {
        std::vector<double> analytic = p.tensor->g;
        worst = std::max(worst, max_rel_err_over(p.tensor->v, analytic, loss));
    }
    return worst;
}

}  // namespace holo
