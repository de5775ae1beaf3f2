#include "lpdm/layers.h"

#include <cmath>
#include <stdexcept>

#include "lpdm/errors.h"
#include "lpdm/kernels.h"

namespace lpdm {

namespace {

size_t shape_numel(const std::vector<int>& shape) {
    size_t n = 1;
    for (int d : shape) n *= static_cast<size_t>(d);
    return n;
}

void check_channels(const char* who, int got, int want) {
    if (got != want)
        throw std::invalid_argument(std::string(who) + ": expected " +
                                    std::to_string(want) + " channels, got " +
                                    std::to_string(got));
}

// out[n][d] = channel-major plane block starting at channel c0.
void to_token_major(const Tensor& x, int c0, int dh, std::vector<float>& out) {
    const int n = x.plane();
    out.resize(static_cast<size_t>(n) * dh);
    for (int d = 0; d < dh; ++d) {
        const float* src = x.data() + static_cast<size_t>(c0 + d) * n;
        for (int i = 0; i < n; ++i) out[static_cast<size_t>(i) * dh + d] = src[i];
    }
}

void from_token_major(const std::vector<float>& in, int c0, int dh, Tensor& x) {
    const int n = x.plane();
    for (int d = 0; d < dh; ++d) {
        float* dst = x.data() + static_cast<size_t>(c0 + d) * n;
        for (int i = 0; i < n; ++i) dst[i] = in[static_cast<size_t>(i) * dh + d];
    }
}

std::vector<float> transpose(const std::vector<float>& m, int rows, int cols) {
    std::vector<float> out(m.size());
    for (int r = 0; r < rows; ++r)
        for (int j = 0; j < cols; ++j)
            out[static_cast<size_t>(j) * rows + r] = m[static_cast<size_t>(r) * cols + j];
    return out;
}

}  // namespace

ParamTensor::ParamTensor(std::string n, std::vector<int> s)
    : name(std::move(n)),
      shape(std::move(s)),
      w(shape_numel(shape), 0.0f),
      g(shape_numel(shape), 0.0f) {}

void fan_in_uniform_init(ParamTensor& p, int fan_in, Rng& rng) {
    const double bound = 1.0 / std::sqrt(static_cast<double>(fan_in));
    for (float& x : p.w) x = static_cast<float>((2.0 * rng.uniform() - 1.0) * bound);
}

// ---------------------------------------------------------------------------
// Conv2d

Conv2d::Conv2d(const std::string& name, int in_c_, int out_c_, int k_, int stride_,
               int pad_, Rng& rng, bool zero_init)
    : in_c(in_c_),
      out_c(out_c_),
      k(k_),
      stride(stride_),
      pad(pad_),
      weight(name + ".weight", {out_c_, in_c_, k_, k_}),
      bias(name + ".bias", {out_c_}) {
    if (!zero_init) fan_in_uniform_init(weight, in_c * k * k, rng);
}

Tensor Conv2d::forward(const Tensor& x, bool training) {
    check_channels(weight.name.c_str(), x.c, in_c);
    const int oh = kernels::conv_out_dim(x.h, k, stride, pad);
    const int ow = kernels::conv_out_dim(x.w, k, stride, pad);
    Tensor y(out_c, oh, ow);
    kernels::conv2d_forward(x.data(), in_c, x.h, x.w, weight.w.data(), bias.w.data(),
                            out_c, k, stride, pad, y.data(), oh, ow);
    if (training) cached_x = x;
    return y;
}

Tensor Conv2d::backward(const Tensor& gy) {
    const Tensor& x = cached_x;
    kernels::conv2d_backward_filter(x.data(), in_c, x.h, x.w, gy.data(), out_c, gy.h,
                                    gy.w, k, stride, pad, weight.g.data(),
                                    bias.g.data());
    Tensor gx(in_c, x.h, x.w);
    kernels::conv2d_backward_data(gy.data(), out_c, gy.h, gy.w, weight.w.data(), in_c,
                                  k, stride, pad, gx.data(), x.h, x.w);
    return gx;
}

void Conv2d::collect(std::vector<ParamTensor*>& out) {
    out.push_back(&weight);
    out.push_back(&bias);
}

// ---------------------------------------------------------------------------
// GroupNorm

GroupNorm::GroupNorm(const std::string& name, int channels_, int groups_, float eps_)
    : channels(channels_),
      groups(groups_),
      eps(eps_),
      gamma(name + ".gamma", {channels_}),
      beta(name + ".beta", {channels_}),
      mean(groups_),
      invstd(groups_) {
    if (channels % groups != 0)
        throw ConfigError("group norm: " + std::to_string(channels_) +
                          " channels not divisible by " + std::to_string(groups_) +
                          " groups");
    std::fill(gamma.w.begin(), gamma.w.end(), 1.0f);
}

Tensor GroupNorm::forward(const Tensor& x, bool training) {
    check_channels(gamma.name.c_str(), x.c, channels);
    Tensor y(x.c, x.h, x.w);
    kernels::group_norm_forward(x.data(), channels, x.plane(), groups, eps,
                                gamma.w.data(), beta.w.data(), y.data(), mean.data(),
                                invstd.data());
    if (training) cached_x = x;
    return y;
}

Tensor GroupNorm::backward(const Tensor& gy) {
    const Tensor& x = cached_x;
    Tensor gx(x.c, x.h, x.w);
    kernels::group_norm_backward(x.data(), gy.data(), channels, x.plane(), groups,
                                 gamma.w.data(), mean.data(), invstd.data(), gx.data(),
                                 gamma.g.data(), beta.g.data());
    return gx;
}

void GroupNorm::collect(std::vector<ParamTensor*>& out) {
    out.push_back(&gamma);
    out.push_back(&beta);
}

// ---------------------------------------------------------------------------
// Linear

Linear::Linear(const std::string& name, int in_, int out_, Rng& rng, bool zero_init)
    : in(in_),
      out(out_),
      weight(name + ".weight", {out_, in_}),
      bias(name + ".bias", {out_}) {
    if (!zero_init) fan_in_uniform_init(weight, in, rng);
}

std::vector<float> Linear::forward(const std::vector<float>& x, bool training) {
    if (static_cast<int>(x.size()) != in)
        throw std::invalid_argument(weight.name + ": expected input size " +
                                    std::to_string(in));
    std::vector<float> y(out);
    kernels::linear_forward(x.data(), in, weight.w.data(), bias.w.data(), out,
                            y.data());
    if (training) cached_x = x;
    return y;
}

std::vector<float> Linear::backward(const std::vector<float>& gy, bool want_gx) {
    std::vector<float> gx(want_gx ? in : 0);
    kernels::linear_backward(cached_x.data(), gy.data(), in, out, weight.w.data(),
                             want_gx ? gx.data() : nullptr, weight.g.data(),
                             bias.g.data());
    return gx;
}

void Linear::collect(std::vector<ParamTensor*>& out_) {
    out_.push_back(&weight);
    out_.push_back(&bias);
}

// ---------------------------------------------------------------------------
// SiLU

Tensor silu(const Tensor& x) {
    Tensor y(x.c, x.h, x.w);
    kernels::silu_forward(x.data(), x.numel(), y.data());
    return y;
}

Tensor silu_backward(const Tensor& pre, const Tensor& gy) {
    Tensor gx(pre.c, pre.h, pre.w);
    kernels::silu_backward(pre.data(), gy.data(), pre.numel(), gx.data());
    return gx;
}

// ---------------------------------------------------------------------------
// Time embedding

std::vector<float> sinusoidal_embedding(int t, int dim) {
    if (dim <= 0 || dim % 2 != 0)
        throw ConfigError("sinusoidal embedding dim must be positive and even, got " +
                          std::to_string(dim));
    if (t < 0) throw ConfigError("timestep must be >= 0, got " + std::to_string(t));
    const int half = dim / 2;
    const double denom = half > 1 ? static_cast<double>(half - 1) : 1.0;
    std::vector<float> e(dim);
    for (int k = 0; k < half; ++k) {
        const double omega = std::exp(-static_cast<double>(k) * std::log(10000.0) / denom);
        const double arg = static_cast<double>(t) * omega;
        e[k] = static_cast<float>(std::sin(arg));
        e[half + k] = static_cast<float>(std::cos(arg));
    }
    return e;
}

TimeEmbedding::TimeEmbedding(const std::string& name, int base_dim_, int embed_dim_,
                             Rng& rng)
    : base_dim(base_dim_),
      embed_dim(embed_dim_),
      l1(name + ".l1", base_dim_, embed_dim_, rng),
      l2(name + ".l2", embed_dim_, embed_dim_, rng) {}

std::vector<float> TimeEmbedding::forward(int t, bool training) {
    std::vector<float> h1 = l1.forward(sinusoidal_embedding(t, base_dim), training);
    if (training) cached_h1 = h1;
    std::vector<float> a(h1.size());
    kernels::silu_forward(h1.data(), h1.size(), a.data());
    return l2.forward(a, training);
}

void TimeEmbedding::backward(const std::vector<float>& gy) {
    std::vector<float> ga = l2.backward(gy);
    std::vector<float> gh1(ga.size());
    kernels::silu_backward(cached_h1.data(), ga.data(), ga.size(), gh1.data());
    l1.backward(gh1, /*want_gx=*/false);
}

void TimeEmbedding::collect(std::vector<ParamTensor*>& out) {
    l1.collect(out);
    l2.collect(out);
}

// ---------------------------------------------------------------------------
// Residual block

ResidualBlock::ResidualBlock(const std::string& name, int in_c_, int out_c_,
                             int groups, int temb_dim, Rng& rng)
    : in_c(in_c_),
      out_c(out_c_),
      gn1(name + ".gn1", in_c_, groups),
      gn2(name + ".gn2", out_c_, groups),
      conv1(name + ".conv1", in_c_, out_c_, 3, 1, 1, rng),
      conv2(name + ".conv2", out_c_, out_c_, 3, 1, 1, rng, /*zero_init=*/true),
      temb_proj(name + ".temb_proj", temb_dim, out_c_, rng) {
    if (in_c != out_c)
        skip = std::make_unique<Conv2d>(name + ".skip", in_c, out_c, 1, 1, 0, rng);
}

Tensor ResidualBlock::forward(const Tensor& x, const std::vector<float>& temb,
                              bool training) {
    Tensor a = gn1.forward(x, training);
    if (training) cached_gn1_out = a;
    Tensor b = conv1.forward(silu(a), training);
    const std::vector<float> tproj = temb_proj.forward(temb, training);
    for (int ch = 0; ch < out_c; ++ch) {
        float* p = b.data() + static_cast<size_t>(ch) * b.plane();
        for (int i = 0; i < b.plane(); ++i) p[i] += tproj[ch];
    }
    Tensor c2 = gn2.forward(b, training);
    if (training) cached_gn2_out = c2;
    Tensor d = conv2.forward(silu(c2), training);
    Tensor s = skip ? skip->forward(x, training) : x;
    for (size_t i = 0; i < d.numel(); ++i) d.v[i] += s.v[i];
    return d;
}

Tensor ResidualBlock::backward(const Tensor& gy, std::vector<float>& gtemb) {
    Tensor g_s2 = conv2.backward(gy);
    Tensor g_c = silu_backward(cached_gn2_out, g_s2);
    Tensor g_b = gn2.backward(g_c);

    std::vector<float> gproj(out_c, 0.0f);
    for (int ch = 0; ch < out_c; ++ch) {
        const float* p = g_b.data() + static_cast<size_t>(ch) * g_b.plane();
        float acc = 0.0f;
        for (int i = 0; i < g_b.plane(); ++i) acc += p[i];
        gproj[ch] = acc;
    }
    std::vector<float> gt = temb_proj.backward(gproj);
    for (size_t i = 0; i < gt.size(); ++i) gtemb[i] += gt[i];

    Tensor g_s = conv1.backward(g_b);
    Tensor g_a = silu_backward(cached_gn1_out, g_s);
    Tensor gx = gn1.backward(g_a);

    if (skip) {
        Tensor g_skip = skip->backward(gy);
        for (size_t i = 0; i < gx.numel(); ++i) gx.v[i] += g_skip.v[i];
    } else {
        for (size_t i = 0; i < gx.numel(); ++i) gx.v[i] += gy.v[i];
    }
    return gx;
}

void ResidualBlock::collect(std::vector<ParamTensor*>& out) {
    gn1.collect(out);
    conv1.collect(out);
    temb_proj.collect(out);
    gn2.collect(out);
    conv2.collect(out);
    if (skip) skip->collect(out);
}

// ---------------------------------------------------------------------------
// Attention block

AttentionBlock::AttentionBlock(const std::string& name, int channels_, int heads_,
                               int groups, Rng& rng)
    : channels(channels_),
      heads(heads_),
      gn(name + ".gn", channels_, groups),
      qkv(name + ".qkv", channels_, 3 * channels_, 1, 1, 0, rng),
      proj(name + ".proj", channels_, channels_, 1, 1, 0, rng) {
    if (channels % heads != 0)
        throw ConfigError("attention: " + std::to_string(channels_) +
                          " channels not divisible by " + std::to_string(heads_) +
                          " heads");
}

Tensor AttentionBlock::forward(const Tensor& x, bool training) {
    check_channels("attention", x.c, channels);
    Tensor a = gn.forward(x, training);
    Tensor qkv_out = qkv.forward(a, training);
    const int n = x.plane();
    const int dh = channels / heads;
    const float scale = 1.0f / std::sqrt(static_cast<float>(dh));

    if (training) {
        cached_q.assign(heads, {});
        cached_k.assign(heads, {});
        cached_v.assign(heads, {});
        cached_p.assign(heads, {});
        cached_h = x.h;
        cached_w = x.w;
    }
    Tensor attn(channels, x.h, x.w);
    std::vector<float> q, k, v, p(static_cast<size_t>(n) * n), o(static_cast<size_t>(n) * dh);
    for (int hd = 0; hd < heads; ++hd) {
        to_token_major(qkv_out, hd * dh, dh, q);
        to_token_major(qkv_out, channels + hd * dh, dh, k);
        to_token_major(qkv_out, 2 * channels + hd * dh, dh, v);
        kernels::matmul_nt(q.data(), k.data(), n, dh, n, scale, p.data());
        kernels::softmax_rows(p.data(), n, n);
        kernels::matmul_nn(p.data(), v.data(), n, n, dh, 1.0f, o.data());
        from_token_major(o, hd * dh, dh, attn);
        if (training) {
            cached_q[hd] = q;
            cached_k[hd] = k;
            cached_v[hd] = v;
            cached_p[hd] = p;
        }
    }
    Tensor y = proj.forward(attn, training);
    for (size_t i = 0; i < y.numel(); ++i) y.v[i] += x.v[i];
    return y;
}

Tensor AttentionBlock::backward(const Tensor& gy) {
    Tensor g_attn = proj.backward(gy);
    const int n = cached_h * cached_w;
    const int dh = channels / heads;
    const float scale = 1.0f / std::sqrt(static_cast<float>(dh));

    Tensor g_qkv(3 * channels, cached_h, cached_w);
    std::vector<float> go, dp(static_cast<size_t>(n) * n), ds(static_cast<size_t>(n) * n);
    std::vector<float> dq(static_cast<size_t>(n) * dh), dk(dq.size()), dv(dq.size());
    for (int hd = 0; hd < heads; ++hd) {
        to_token_major(g_attn, hd * dh, dh, go);
        const auto& p = cached_p[hd];
        kernels::matmul_nt(go.data(), cached_v[hd].data(), n, dh, n, 1.0f, dp.data());
        for (int r = 0; r < n; ++r) {
            const float* pr = p.data() + static_cast<size_t>(r) * n;
            const float* dpr = dp.data() + static_cast<size_t>(r) * n;
            float* dsr = ds.data() + static_cast<size_t>(r) * n;
            double row_dot = 0.0;
            for (int j = 0; j < n; ++j) row_dot += static_cast<double>(dpr[j]) * pr[j];
            const float rd = static_cast<float>(row_dot);
            for (int j = 0; j < n; ++j) dsr[j] = pr[j] * (dpr[j] - rd);
        }
        kernels::matmul_nn(ds.data(), cached_k[hd].data(), n, n, dh, scale, dq.data());
        const std::vector<float> dst = transpose(ds, n, n);
        kernels::matmul_nn(dst.data(), cached_q[hd].data(), n, n, dh, scale, dk.data());
        const std::vector<float> pt = transpose(p, n, n);
        kernels::matmul_nn(pt.data(), go.data(), n, n, dh, 1.0f, dv.data());
        from_token_major(dq, hd * dh, dh, g_qkv);
        from_token_major(dk, channels + hd * dh, dh, g_qkv);
        from_token_major(dv, 2 * channels + hd * dh, dh, g_qkv);
    }
    Tensor g_a = qkv.backward(g_qkv);
    Tensor gx = gn.backward(g_a);
    for (size_t i = 0; i < gx.numel(); ++i) gx.v[i] += gy.v[i];
    return gx;
}

void AttentionBlock::collect(std::vector<ParamTensor*>& out) {
    gn.collect(out);
    qkv.collect(out);
    proj.collect(out);
}

// ---------------------------------------------------------------------------
// Resampling

Downsample::Downsample(const std::string& name, int channels, Rng& rng)
    : conv(name + ".conv", channels, channels, 3, 2, 1, rng) {}

Tensor Downsample::forward(const Tensor& x, bool training) {
    return conv.forward(x, training);
}

Tensor Downsample::backward(const Tensor& gy) { return conv.backward(gy); }

void Downsample::collect(std::vector<ParamTensor*>& out) { conv.collect(out); }

Upsample::Upsample(const std::string& name, int channels, Rng& rng)
    : conv(name + ".conv", channels, channels, 3, 1, 1, rng) {}

Tensor Upsample::forward(const Tensor& x, bool training) {
    Tensor up(x.c, 2 * x.h, 2 * x.w);
    kernels::nearest_upsample2x_forward(x.data(), x.c, x.h, x.w, up.data());
    return conv.forward(up, training);
}

Tensor Upsample::backward(const Tensor& gy) {
    Tensor g_up = conv.backward(gy);
    Tensor gx(g_up.c, g_up.h / 2, g_up.w / 2);
    kernels::nearest_upsample2x_backward(g_up.data(), g_up.c, gx.h, gx.w, gx.data());
    return gx;
}

void Upsample::collect(std::vector<ParamTensor*>& out) { conv.collect(out); }

}  // namespace lpdm
