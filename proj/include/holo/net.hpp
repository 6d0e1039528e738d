#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <string>
#include <vector>

#include "holo/dataset.hpp"
#include "holo/field.hpp"

namespace holo {

// N x C x H x W array of doubles with an optional same-shape gradient buffer.
struct Tensor4 {
    int n = 0, c = 0, h = 0, w = 0;
    std::vector<double> v;
    std::vector<double> g;

    Tensor4() = default;
    Tensor4(int n_, int c_, int h_, int w_, double fill = 0.0)
        : n(n_), c(c_), h(h_), w(w_), v(static_cast<size_t>(n_) * c_ * h_ * w_, fill) {}

    size_t count() const { return static_cast<size_t>(n) * c * h * w; }
    bool same_shape(const Tensor4& o) const {
        return n == o.n && c == o.c && h == o.h && w == o.w;
    }
    double& at(int in, int ic, int iy, int ix) {
        return v[((static_cast<size_t>(in) * c + ic) * h + iy) * w + ix];
    }
    double at(int in, int ic, int iy, int ix) const {
        return v[((static_cast<size_t>(in) * c + ic) * h + iy) * w + ix];
    }
    void ensure_grad() { if (g.size() != count()) g.assign(count(), 0.0); }
    void zero_grad() { g.assign(count(), 0.0); }
};

// ---- differentiable ops (cross-correlation semantics, zero padding) ----

// out shape: floor((h + 2*pad - kh)/stride) + 1. kernel is (oc, ic, kh, kw),
// bias has oc entries (bias.count() == oc).
Tensor4 conv2d(const Tensor4& x, const Tensor4& kernel, const Tensor4& bias, int stride, int pad);
// any of the grad outputs may be null; grad_kernel/grad_bias are accumulated into
void conv2d_backward(const Tensor4& x, const Tensor4& kernel, const Tensor4& grad_out, int stride,
                     int pad, Tensor4* grad_x, Tensor4* grad_kernel, Tensor4* grad_bias);

Tensor4 leaky_relu(const Tensor4& x, double slope = 0.2);
Tensor4 leaky_relu_backward(const Tensor4& x, const Tensor4& grad_out, double slope = 0.2);

Tensor4 upsample_nearest(const Tensor4& x, int factor = 2);
Tensor4 upsample_nearest_backward(const Tensor4& grad_out, int factor = 2);

Tensor4 tanh_out(const Tensor4& x);
Tensor4 tanh_backward(const Tensor4& y, const Tensor4& grad_out);  // y = tanh(x)

Tensor4 sigmoid(const Tensor4& x);
Tensor4 sigmoid_backward(const Tensor4& y, const Tensor4& grad_out);  // y = sigmoid(x)

Tensor4 concat_channels(const Tensor4& a, const Tensor4& b);
void split_channels_backward(const Tensor4& grad_out, int c_a, Tensor4& grad_a, Tensor4& grad_b);

// ---- networks ----

struct GeneratorConfig {
    int in_channels = 2;
    int out_channels = 3;
    int base_width = 16;
    int depth = 3;  // down/up levels; input h,w must be divisible by 2^depth
    bool skip_connections = true;
};

struct DiscriminatorConfig {
    int in_channels = 5;  // generator input (2) + image (3)
    int base_width = 16;
    int layers = 3;
};

struct TrainConfig {
    double lambda_l1 = 100.0;
    double lambda_adv = 1.0;
    double learning_rate = 1e-4;
    double adam_beta1 = 0.5;
    double adam_beta2 = 0.999;
    int batch_size = 4;
    int steps = 0;
    int val_interval = 100;
    uint64_t seed = 0;
};

struct Conv2dLayer {
    Tensor4 weight;  // (oc, ic, kh, kw)
    Tensor4 bias;    // (oc, 1, 1, 1)
    int stride = 1;
    int pad = 1;
    Tensor4 cached_input;

    Tensor4 forward(const Tensor4& x);
    Tensor4 backward(const Tensor4& grad_out, bool need_input_grad = true);
};

// Named parameter tensors in a fixed (serialization and update) order.
struct ParamRef {
    std::string name;
    Tensor4* tensor;
};

// Encoder-decoder with skip concatenations; output in [0,1] via (tanh+1)/2.
class Generator {
public:
    Generator(const GeneratorConfig& cfg, uint64_t init_seed);

    Tensor4 forward(const Tensor4& x);
    // propagates grad_output back; parameter grads accumulate; returns grad on x
    Tensor4 backward(const Tensor4& grad_output);

    std::vector<ParamRef> params();
    const GeneratorConfig& config() const { return cfg_; }
    void zero_grads();

private:
    GeneratorConfig cfg_;
    std::vector<Conv2dLayer> enc_, dec_;
    Conv2dLayer head_;
    // forward caches
    Tensor4 x_, t_;
    std::vector<Tensor4> enc_pre_, enc_act_, dec_up_, dec_pre_, dec_act_, dec_cat_;
};

// Strided conv stack producing a raw patch score map (no output nonlinearity;
// least-squares GAN regresses scores to 0/1).
class Discriminator {
public:
    Discriminator(const DiscriminatorConfig& cfg, uint64_t init_seed);

    Tensor4 forward(const Tensor4& xy);
    Tensor4 backward(const Tensor4& grad_scores);  // returns grad on the input

    std::vector<ParamRef> params();
    void zero_grads();

private:
    DiscriminatorConfig cfg_;
    std::vector<Conv2dLayer> convs_;
    Conv2dLayer head_;
    std::vector<Tensor4> pre_;
};

// ---- optimizer ----

struct AdamState {
    std::vector<std::vector<double>> m, v;
    int64_t t = 0;
};

// Standard Adam with bias correction, epsilon 1e-8. `grads[i]` must match
// `params[i]` in size; state is created lazily on first use.
void adam_step(std::vector<ParamRef>& params, AdamState& state, double lr, double beta1,
               double beta2);

// ---- losses ----

struct GanLosses {
    double loss_g = 0.0;
    double loss_d = 0.0;
    double l1 = 0.0;
};

// Least-squares GAN objective:
//   loss_g = lambda_adv * mean((D_fake - 1)^2) + lambda_l1 * mean|G(x) - y|
//   loss_d = 0.5 * mean((D_real - 1)^2) + 0.5 * mean(D_fake^2)
GanLosses gan_losses(const Tensor4& g_out, const Tensor4& target, const Tensor4& d_real_scores,
                     const Tensor4& d_fake_scores, const TrainConfig& cfg);

// ---- training / inference ----

struct HistoryRow {
    int step = 0;
    double loss_g = 0.0;
    double loss_d = 0.0;
    double val_l1 = -1.0;  // < 0 when not evaluated at this step
    bool has_losses = false;
};

struct TrainResult {
    std::vector<HistoryRow> history;
    double final_val_l1 = -1.0;
};

// Alternating D/G steps over seeded epoch shuffles of the train split.
// Validation L1 is recorded at step 0, every cfg.val_interval steps, and at
// the final step. Throws EmptyDataset when the train split is empty.
TrainResult train(const PairedPatchSet& ds, Generator& gen, Discriminator& dis,
                  const TrainConfig& cfg);

std::string history_csv(const std::vector<HistoryRow>& rows);

// Tiled inference over a back-propagated field: overlapping tiles (overlap =
// tile/4) blended with linear feathering, output clamped to [0,1].
RealImage infer(Generator& gen, const ComplexField& bp_field, int tile_size = 64);

// Runs the generator on a single already-tiled 2xSxS input patch.
RealImage infer_patch(Generator& gen, const PairedPatch& patch);

// ---- weights serialization ----
// "CMWT" | version u32=1 | per tensor: name_len u16, name bytes, shape 4*u32,
// payload f64. Tensors appear in params() order.
void save_weights(const std::vector<ParamRef>& params, const std::filesystem::path& path);
void load_weights(std::vector<ParamRef> params, const std::filesystem::path& path);

// ---- verification ----

// Central finite differences (step 1e-5) against analytic gradients on small
// shapes; returns max over checked values of |fd-an|/max(1e-8,|fd|+|an|).
double gradient_check_conv2d(uint64_t seed);
double gradient_check_leaky_relu(uint64_t seed);
double gradient_check_upsample(uint64_t seed);
double gradient_check_tanh(uint64_t seed);
double gradient_check_sigmoid(uint64_t seed);
double gradient_check_generator(uint64_t seed);  // tiny config, composed net

}  // namespace holo
