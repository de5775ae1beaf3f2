#ifndef LPDM_LAYERS_H
#define LPDM_LAYERS_H

#include <memory>
#include <string>
#include <vector>

#include "lpdm/rng.h"
#include "lpdm/tensor.h"

// Trainable layers composed from the kernels. Every layer owns its parameters
// (with matching gradient buffers) and the activation caches its backward
// pass needs; caches are only populated when forward runs with training=true.
// Parameter gradients accumulate across backward calls until zero_grad.

namespace lpdm {

/// Named parameter array plus its gradient buffer.
struct ParamTensor {
    std::string name;
    std::vector<int> shape;
    std::vector<float> w;
    std::vector<float> g;

    ParamTensor() = default;
    ParamTensor(std::string n, std::vector<int> s);
    size_t numel() const { return w.size(); }
    void zero_grad() { std::fill(g.begin(), g.end(), 0.0f); }
};

/// U(-1/sqrt(fan_in), 1/sqrt(fan_in)) draw for every element.
void fan_in_uniform_init(ParamTensor& p, int fan_in, Rng& rng);

struct Conv2d {
    Conv2d(const std::string& name, int in_c, int out_c, int k, int stride, int pad,
           Rng& rng, bool zero_init = false);
    Tensor forward(const Tensor& x, bool training);
    Tensor backward(const Tensor& gy);
    void collect(std::vector<ParamTensor*>& out);

    int in_c, out_c, k, stride, pad;
    ParamTensor weight, bias;
    Tensor cached_x;
};

struct GroupNorm {
    GroupNorm(const std::string& name, int channels, int groups, float eps = 1e-5f);
    Tensor forward(const Tensor& x, bool training);
    Tensor backward(const Tensor& gy);
    void collect(std::vector<ParamTensor*>& out);

    int channels, groups;
    float eps;
    ParamTensor gamma, beta;
    Tensor cached_x;
    std::vector<float> mean, invstd;
};

struct Linear {
    Linear(const std::string& name, int in, int out, Rng& rng, bool zero_init = false);
    std::vector<float> forward(const std::vector<float>& x, bool training);
    /// Returns the input gradient (empty when want_gx is false).
    std::vector<float> backward(const std::vector<float>& gy, bool want_gx = true);
    void collect(std::vector<ParamTensor*>& out);

    int in, out;
    ParamTensor weight, bias;
    std::vector<float> cached_x;
};

Tensor silu(const Tensor& x);
Tensor silu_backward(const Tensor& pre, const Tensor& gy);

/// [sin(t*w_0).. sin(t*w_{d/2-1}), cos(t*w_0).. cos(t*w_{d/2-1})] with
/// w_k = exp(-k ln(10000) / (d/2 - 1)).
std::vector<float> sinusoidal_embedding(int t, int dim);

struct TimeEmbedding {
    TimeEmbedding(const std::string& name, int base_dim, int embed_dim, Rng& rng);
    std::vector<float> forward(int t, bool training);
    void backward(const std::vector<float>& gy);
    void collect(std::vector<ParamTensor*>& out);

    int base_dim, embed_dim;
    Linear l1, l2;
    std::vector<float> cached_h1;  // l1 output, pre-SiLU
};

/// GroupNorm -> SiLU -> 3x3 conv -> +time projection -> GroupNorm -> SiLU ->
/// 3x3 conv (zero-init) -> + skip (1x1 conv when channel counts differ).
struct ResidualBlock {
    ResidualBlock(const std::string& name, int in_c, int out_c, int groups,
                  int temb_dim, Rng& rng);
    Tensor forward(const Tensor& x, const std::vector<float>& temb, bool training);
    /// Adds this block's contribution to the shared time-embedding gradient.
    Tensor backward(const Tensor& gy, std::vector<float>& gtemb);
    void collect(std::vector<ParamTensor*>& out);

    int in_c, out_c;
    GroupNorm gn1, gn2;
    Conv2d conv1, conv2;
    Linear temb_proj;
    std::unique_ptr<Conv2d> skip;  // present iff in_c != out_c
    Tensor cached_gn1_out, cached_gn2_out;
};

/// Pre-normalized multi-head self-attention over the flattened spatial grid,
/// residual-added: x + proj(attend(qkv(norm(x)))).
struct AttentionBlock {
    AttentionBlock(const std::string& name, int channels, int heads, int groups,
                   Rng& rng);
    Tensor forward(const Tensor& x, bool training);
    Tensor backward(const Tensor& gy);
    void collect(std::vector<ParamTensor*>& out);

    int channels, heads;
    GroupNorm gn;
    Conv2d qkv, proj;
    // Token-major per-head caches from the last training forward.
    std::vector<std::vector<float>> cached_q, cached_k, cached_v, cached_p;
    int cached_h = 0, cached_w = 0;
};

/// Stride-2 3x3 conv halving both spatial dims.
struct Downsample {
    Downsample(const std::string& name, int channels, Rng& rng);
    Tensor forward(const Tensor& x, bool training);
    Tensor backward(const Tensor& gy);
    void collect(std::vector<ParamTensor*>& out);

    Conv2d conv;
};

/// Nearest-neighbor x2 followed by a 3x3 conv.
struct Upsample {
    Upsample(const std::string& name, int channels, Rng& rng);
    Tensor forward(const Tensor& x, bool training);
    Tensor backward(const Tensor& gy);
    void collect(std::vector<ParamTensor*>& out);

    Conv2d conv;
};

}  // namespace lpdm

#endif
