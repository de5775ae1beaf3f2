#ifndef LPDM_BASELINE_H
#define LPDM_BASELINE_H

#include <functional>
#include <string>
#include <vector>

#include "lpdm/tensor.h"

// Illumination-weighted denoising baseline: denoise only the luma channel of
// a result image R, then blend R_f = R.*T + R_d.*(1-T) where T is a per-pixel
// illumination map in [0,1]. All images here live in the [0,1] domain.

namespace lpdm {

/// Filters one 2-D luma plane; must return h*w values.
using DenoiserPlugin =
    std::function<std::vector<float>(const std::vector<float>& luma, int h, int w,
                                     double strength)>;

DenoiserPlugin identity_denoiser();
/// Separable Gaussian blur with sigma = strength / 10, reflect boundaries.
DenoiserPlugin gaussian_denoiser();

/// BT.601 full-range transforms on [0,1] RGB; Y in [0,1], U/V in [-0.5,0.5].
Tensor rgb_to_yuv(const Tensor& x);
Tensor yuv_to_rgb(const Tensor& x);

/// Per-pixel illumination weights, same H x W as the image they blend.
struct IlluminationMap {
    int h = 0, w = 0;
    std::vector<float> v;  // in [0,1]
};

IlluminationMap illumination_from_tensor(const Tensor& gray01);

Tensor illumination_weighted_denoise(const Tensor& R, const IlluminationMap& T_map,
                                     const DenoiserPlugin& denoiser, double strength);

}  // namespace lpdm

#endif
