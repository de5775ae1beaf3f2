#ifndef LPDM_TRAIN_H
#define LPDM_TRAIN_H

#include <cstdint>
#include <functional>
#include <string>
#include <vector>

#include "lpdm/checkpoint.h"
#include "lpdm/dataset.h"
#include "lpdm/model.h"
#include "lpdm/rng.h"
#include "lpdm/schedule.h"

namespace lpdm {

/// How the model is wired to the diffusion pair:
///   LPDM   6-channel input (x_t ++ c), predicts the added noise.
///   DLPDM  6-channel input, timestep pinned to 0, predicts x0 directly.
///   ULPDM  3-channel input (x_t only), predicts the added noise.
enum class Variant { LPDM, DLPDM, ULPDM };

Variant variant_from_string(const std::string& s);  // throws ConfigError
std::string to_string(Variant v);
int variant_input_channels(Variant v);

/// Substream purpose codes: one RNG tree keyed by (seed, step, sample, use).
inline constexpr uint64_t kRngUseAugment = 0;
inline constexpr uint64_t kRngUseNoise = 1;
inline constexpr uint64_t kRngUseInit = 2;

struct TrainConfig {
    int total_steps = 6000;
    double lr = 1e-6;
    double adamw_beta1 = 0.9;
    double adamw_beta2 = 0.999;
    double weight_decay = 0.01;
    int micro_batch = 4;
    int accumulation = 8;
    int crop_size = 256;
    double hflip_prob = 0.5;
    uint64_t seed = 0;
    int checkpoint_every = 1000;
    int threads = 1;  // data-loader workers; 1 = strict single-threaded
    Variant variant = Variant::LPDM;

    int effective_batch() const { return micro_batch * accumulation; }
    void validate() const;  // throws ConfigError
};

/// Decoupled-weight-decay Adam with bias-corrected moments. The decay is
/// applied multiplicatively (w *= 1 - lr*wd) before the gradient term, so a
/// zero-gradient step shrinks parameters by exactly that factor.
class AdamW {
  public:
    AdamW(std::vector<ParamTensor*> params, double lr, double beta1, double beta2,
          double weight_decay, double eps = 1e-8);
    void step();
    void zero_grad();

    int steps_taken() const { return t_; }
    const std::vector<ParamTensor*>& params() const { return params_; }
    const std::vector<std::vector<float>>& m() const { return m_; }
    const std::vector<std::vector<float>>& v() const { return v_; }
    void restore(int t, std::vector<std::vector<float>> m,
                 std::vector<std::vector<float>> v);

  private:
    std::vector<ParamTensor*> params_;
    double lr_, b1_, b2_, wd_, eps_;
    int t_ = 0;
    std::vector<std::vector<float>> m_, v_;
};

/// Per-sample diffusion draw: t ~ U{1..T}, eps ~ N(0,1) elementwise, derived
/// from (seed, step, sample index) so batch layout cannot change the draws.
struct SampleDraw {
    int t = 0;
    Tensor eps;
};
SampleDraw draw_sample_noise(uint64_t seed, int step, int sample_idx, int T, int c,
                             int h, int w);

/// Forms x_t, runs the model per the variant, accumulates parameter gradients
/// scaled by grad_scale, and returns this sample's MSE loss.
double train_sample(NoiseModel& model, const DiffusionSchedule& sched,
                    const PairedSample& s, const SampleDraw& draw, Variant variant,
                    double grad_scale);

/// Runs the optimization loop, appending "step,loss,wall_time" rows to
/// loss_csv_path and invoking on_checkpoint at the checkpoint cadence and at
/// the final step. start_step > 1 resumes an earlier run (the CSV is appended
/// to). Returns the last step's loss.
double train_loop(NoiseModel& model, AdamW& opt, const TrainDataset& data,
                  const DiffusionSchedule& sched, const TrainConfig& cfg,
                  const std::string& loss_csv_path,
                  const std::function<void(int step)>& on_checkpoint,
                  int start_step = 1);

/// Checkpoint glue: model parameters plus optimizer moments and the config
/// needed to rebuild both sides exactly.
Checkpoint build_train_checkpoint(UNetModel& model, const AdamW& opt,
                                  const TrainConfig& cfg,
                                  const DiffusionSchedule& sched, int step);
/// Restores parameters and moments into a model/optimizer pair built from the
/// checkpoint's own config. Returns the stored step.
int restore_train_checkpoint(const Checkpoint& ck, UNetModel& model, AdamW& opt);
/// Restores model parameters only (inference use).
void restore_model_params(const Checkpoint& ck, UNetModel& model);

}  // namespace lpdm

#endif
