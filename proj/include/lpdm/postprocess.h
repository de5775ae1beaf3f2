#ifndef LPDM_POSTPROCESS_H
#define LPDM_POSTPROCESS_H

#include <string>

#include "lpdm/model.h"
#include "lpdm/schedule.h"
#include "lpdm/train.h"

namespace lpdm {

struct PostprocessConfig {
    int phi = 300;
    int s = 30;
    Variant variant = Variant::LPDM;

    /// Requires 0 <= s < phi < T; warns when s > phi/2.
    void validate(int T) const;
};

/// Reflect-pads right/bottom to the next multiples of `multiple`.
Tensor pad_to_multiple(const Tensor& x, int multiple, int& orig_h, int& orig_w);
Tensor crop_to_original(const Tensor& x, int orig_h, int orig_w);

/// One forward pass estimating the degradation noise present in x_eta at
/// detection timestep phi. No noise is added to x_eta. c may be null for
/// 3-channel models.
Tensor estimate_noise(NoiseModel& model, const Tensor& x_eta, const Tensor* c,
                      int phi);

/// Full correction: pads to the model's granularity, runs exactly one model
/// forward, applies the schedule correction at strength s (skipped for the
/// direct-prediction variant), crops back and clamps to [-1,1].
Tensor postprocess_image(NoiseModel& model, const DiffusionSchedule& sched,
                         const Tensor& x_eta, const Tensor* c,
                         const PostprocessConfig& cfg);

/// Directory runner: enhanced images (and conditioning images for 6-channel
/// variants) matched by filename; corrected PNGs written to out_dir. Returns
/// the number of images written.
int postprocess_directory(NoiseModel& model, const DiffusionSchedule& sched,
                          const std::string& enhanced_dir, const std::string& cond_dir,
                          const std::string& out_dir, const PostprocessConfig& cfg,
                          int threads);

}  // namespace lpdm

#endif
