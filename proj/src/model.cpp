#include "lpdm/model.h"

#include <cmath>

#include "lpdm/errors.h"
#include "lpdm/kernels.h"
#include "lpdm/log.h"

namespace lpdm {

namespace {

// One spatial halving per encoder stage.
constexpr int kStages = 4;
constexpr int kDivisor = 1 << kStages;

void split_channels(const Tensor& g, int c_first, Tensor& g_first, Tensor& g_second) {
    g_first = Tensor(c_first, g.h, g.w);
    g_second = Tensor(g.c - c_first, g.h, g.w);
    std::copy(g.v.begin(), g.v.begin() + g_first.numel(), g_first.v.begin());
    std::copy(g.v.begin() + g_first.numel(), g.v.end(), g_second.v.begin());
}

void add_into(Tensor& dst, const Tensor& src) {
    for (size_t i = 0; i < dst.numel(); ++i) dst.v[i] += src.v[i];
}

}  // namespace

void UNetConfig::validate() const {
    if (in_channels <= 0 || out_channels <= 0)
        throw ConfigError("channel counts must be positive");
    if (stage_channels.size() != 4)
        throw ConfigError("stage_channels must have exactly 4 entries, got " +
                          std::to_string(stage_channels.size()));
    if (blocks_per_stage < 1) throw ConfigError("blocks_per_stage must be >= 1");
    if (groupnorm_groups < 1) throw ConfigError("groupnorm_groups must be >= 1");
    if (attention_heads < 1) throw ConfigError("attention_heads must be >= 1");
    for (int c : stage_channels) {
        if (c <= 0) throw ConfigError("stage channels must be positive");
        if (c % groupnorm_groups != 0)
            throw ConfigError("stage channel count " + std::to_string(c) +
                              " not divisible by groupnorm_groups " +
                              std::to_string(groupnorm_groups));
    }
    if (stage_channels[3] % attention_heads != 0)
        throw ConfigError("latent channels " + std::to_string(stage_channels[3]) +
                          " not divisible by attention_heads " +
                          std::to_string(attention_heads));
    if (time_embed_base_dim < 2 || time_embed_base_dim % 2 != 0)
        throw ConfigError("time_embed_base_dim must be even and >= 2");
    if (time_embed_dim < 1) throw ConfigError("time_embed_dim must be >= 1");
}

UNetModel::UNetModel(const UNetConfig& config, uint64_t init_seed) : cfg_(config) {
    cfg_.validate();
    Rng rng = Rng::substream(init_seed, /*a=*/0, /*b=*/0, /*purpose=*/2);
    const auto& sc = cfg_.stage_channels;
    const int g = cfg_.groupnorm_groups;
    const int td = cfg_.time_embed_dim;

    temb_ = std::make_unique<TimeEmbedding>("temb", cfg_.time_embed_base_dim, td, rng);
    conv_in_ = std::make_unique<Conv2d>("conv_in", cfg_.in_channels, sc[0], 3, 1, 1, rng);

    for (int s = 0; s < kStages; ++s) {
        EncoderStage stage;
        const int c_in = s == 0 ? sc[0] : sc[s - 1];
        for (int b = 0; b < cfg_.blocks_per_stage; ++b) {
            const std::string name =
                "enc" + std::to_string(s) + ".rb" + std::to_string(b);
            stage.blocks.emplace_back(name, b == 0 ? c_in : sc[s], sc[s], g, td, rng);
        }
        stage.down =
            std::make_unique<Downsample>("enc" + std::to_string(s) + ".down", sc[s], rng);
        enc_.push_back(std::move(stage));
    }

    mid_a_ = std::make_unique<ResidualBlock>("mid.rb0", sc[3], sc[3], g, td, rng);
    mid_attn_ =
        std::make_unique<AttentionBlock>("mid.attn", sc[3], cfg_.attention_heads, g, rng);
    mid_b_ = std::make_unique<ResidualBlock>("mid.rb1", sc[3], sc[3], g, td, rng);

    for (int s = kStages - 1; s >= 0; --s) {
        DecoderStage stage;
        stage.below_channels = s == kStages - 1 ? sc[3] : sc[s + 1];
        const std::string prefix = "dec" + std::to_string(s);
        stage.up = std::make_unique<Upsample>(prefix + ".up", stage.below_channels, rng);
        for (int b = 0; b < cfg_.blocks_per_stage; ++b) {
            const int c_in = b == 0 ? stage.below_channels + sc[s] : sc[s];
            stage.blocks.emplace_back(prefix + ".rb" + std::to_string(b), c_in, sc[s],
                                      g, td, rng);
        }
        dec_.push_back(std::move(stage));
    }

    head_gn_ = std::make_unique<GroupNorm>("head.gn", sc[0], g);
    head_conv_ = std::make_unique<Conv2d>("head.conv", sc[0], cfg_.out_channels, 3, 1,
                                          1, rng, /*zero_init=*/true);
    log_debug("model built: " + std::to_string(param_count()) + " parameters");
}

Tensor UNetModel::run(const Tensor& x, int t, bool training) {
    if (x.c != cfg_.in_channels)
        throw DataError("model input has " + std::to_string(x.c) +
                        " channels, expected " + std::to_string(cfg_.in_channels));
    if (x.h % kDivisor != 0 || x.w % kDivisor != 0)
        throw DataError("model input " + std::to_string(x.h) + "x" +
                        std::to_string(x.w) + " not divisible by " +
                        std::to_string(kDivisor));
    if (t < 0) throw ConfigError("timestep must be >= 0, got " + std::to_string(t));

    const std::vector<float> temb = temb_->forward(t, training);
    Tensor h = conv_in_->forward(x, training);
    std::vector<Tensor> skips;
    for (auto& stage : enc_) {
        for (auto& rb : stage.blocks) h = rb.forward(h, temb, training);
        skips.push_back(h);
        h = stage.down->forward(h, training);
    }
    h = mid_a_->forward(h, temb, training);
    h = mid_attn_->forward(h, training);
    h = mid_b_->forward(h, temb, training);
    for (size_t d = 0; d < dec_.size(); ++d) {
        auto& stage = dec_[d];
        h = stage.up->forward(h, training);
        h = concat_channels(h, skips[kStages - 1 - d]);
        for (auto& rb : stage.blocks) h = rb.forward(h, temb, training);
    }
    Tensor gn_out = head_gn_->forward(h, training);
    if (training) head_gn_out_ = gn_out;
    return head_conv_->forward(silu(gn_out), training);
}

void UNetModel::backward(const Tensor& gy) {
    std::vector<float> gtemb(cfg_.time_embed_dim, 0.0f);

    Tensor g = head_conv_->backward(gy);
    g = head_gn_->backward(silu_backward(head_gn_out_, g));

    std::vector<Tensor> skip_grads(kStages);
    for (size_t d = dec_.size(); d-- > 0;) {
        auto& stage = dec_[d];
        for (size_t b = stage.blocks.size(); b-- > 0;)
            g = stage.blocks[b].backward(g, gtemb);
        Tensor g_below, g_skip;
        split_channels(g, stage.below_channels, g_below, g_skip);
        skip_grads[kStages - 1 - d] = std::move(g_skip);
        g = stage.up->backward(g_below);
    }

    g = mid_b_->backward(g, gtemb);
    g = mid_attn_->backward(g);
    g = mid_a_->backward(g, gtemb);

    for (size_t s = enc_.size(); s-- > 0;) {
        auto& stage = enc_[s];
        g = stage.down->backward(g);
        add_into(g, skip_grads[s]);
        for (size_t b = stage.blocks.size(); b-- > 0;)
            g = stage.blocks[b].backward(g, gtemb);
    }
    conv_in_->backward(g);
    temb_->backward(gtemb);
}

std::vector<ParamTensor*> UNetModel::params() {
    std::vector<ParamTensor*> out;
    temb_->collect(out);
    conv_in_->collect(out);
    for (auto& stage : enc_) {
        for (auto& rb : stage.blocks) rb.collect(out);
        stage.down->collect(out);
    }
    mid_a_->collect(out);
    mid_attn_->collect(out);
    mid_b_->collect(out);
    for (auto& stage : dec_) {
        stage.up->collect(out);
        for (auto& rb : stage.blocks) rb.collect(out);
    }
    head_gn_->collect(out);
    head_conv_->collect(out);
    return out;
}

size_t UNetModel::param_count() const {
    size_t n = 0;
    for (auto* p : const_cast<UNetModel*>(this)->params()) n += p->numel();
    return n;
}

}  // namespace lpdm
