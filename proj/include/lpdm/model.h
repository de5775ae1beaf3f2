#ifndef LPDM_MODEL_H
#define LPDM_MODEL_H

#include <atomic>
#include <cstdint>
#include <memory>
#include <string>
#include <vector>

#include "lpdm/layers.h"
#include "lpdm/tensor.h"

namespace lpdm {

struct UNetConfig {
    int in_channels = 6;
    int out_channels = 3;
    std::vector<int> stage_channels = {128, 256, 512, 512};
    int blocks_per_stage = 2;
    int time_embed_base_dim = 128;
    int time_embed_dim = 512;
    int attention_heads = 8;
    int groupnorm_groups = 32;

    void validate() const;  // throws ConfigError
    bool operator==(const UNetConfig&) const = default;
};

/// Interface the trainer and the postprocessor program against; lets tests
/// substitute analytically-known stubs for the real network. forward() counts
/// every invocation so the one-pass guarantee is checkable for any model.
struct NoiseModel {
    virtual ~NoiseModel() = default;
    virtual int input_channels() const = 0;
    virtual void backward(const Tensor& gy) = 0;
    virtual std::vector<ParamTensor*> params() = 0;

    Tensor forward(const Tensor& x, int t, bool training) {
        forward_calls_.fetch_add(1, std::memory_order_relaxed);
        return run(x, t, training);
    }
    uint64_t forward_calls() const { return forward_calls_.load(); }

  protected:
    virtual Tensor run(const Tensor& x, int t, bool training) = 0;

  private:
    std::atomic<uint64_t> forward_calls_{0};
};

/// Timestep-conditioned U-Net noise predictor. Four encoder stages each end
/// in a stride-2 downsample (256 -> 16 latent), the middle block is
/// residual/attention/residual at the deepest width, and each decoder stage
/// upsamples then concatenates the matching encoder stage output.
class UNetModel : public NoiseModel {
  public:
    UNetModel(const UNetConfig& config, uint64_t init_seed);

    int input_channels() const override { return cfg_.in_channels; }
    void backward(const Tensor& gy) override;
    std::vector<ParamTensor*> params() override;

    const UNetConfig& config() const { return cfg_; }
    size_t param_count() const;

  protected:
    Tensor run(const Tensor& x, int t, bool training) override;

  private:
    struct EncoderStage {
        std::vector<ResidualBlock> blocks;
        std::unique_ptr<Downsample> down;
    };
    struct DecoderStage {
        std::unique_ptr<Upsample> up;
        std::vector<ResidualBlock> blocks;
        int below_channels = 0;  // channels arriving from below, pre-concat
    };

    UNetConfig cfg_;
    std::unique_ptr<TimeEmbedding> temb_;
    std::unique_ptr<Conv2d> conv_in_;
    std::vector<EncoderStage> enc_;
    std::unique_ptr<ResidualBlock> mid_a_, mid_b_;
    std::unique_ptr<AttentionBlock> mid_attn_;
    std::vector<DecoderStage> dec_;  // deepest stage first
    std::unique_ptr<GroupNorm> head_gn_;
    std::unique_ptr<Conv2d> head_conv_;

    Tensor head_gn_out_;  // cache for the final SiLU backward
    std::atomic<uint64_t> forward_calls_{0};
};

}  // namespace lpdm

#endif
