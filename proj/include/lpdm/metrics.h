#ifndef LPDM_METRICS_H
#define LPDM_METRICS_H

#include <string>
#include <vector>

#include "lpdm/tensor.h"

// Full-reference metrics. Inputs are [-1,1] image tensors; every metric is
// computed in the [0,1] domain in double precision.

namespace lpdm {

/// 10*log10(1/MSE); +infinity when the images are identical.
double psnr(const Tensor& a, const Tensor& b);

/// Gaussian-windowed SSIM (11x11, sigma 1.5, K1=0.01, K2=0.03, L=1), valid
/// windows only, computed per channel and averaged. Needs min(H,W) >= 11.
double ssim(const Tensor& a, const Tensor& b);

double mae(const Tensor& a, const Tensor& b);

struct MetricRow {
    std::string filename;
    double psnr_db = 0, ssim = 0, mae = 0;
};

struct MetricReport {
    std::vector<MetricRow> per_image;  // sorted by filename
    double mean_psnr = 0, mean_ssim = 0, mean_mae = 0;
    int psnr_excluded = 0;                // infinite-PSNR rows left out of the mean
    std::vector<std::string> unmatched;   // files missing a counterpart
    std::vector<std::string> failed;      // pairs that could not be evaluated

    bool clean() const { return unmatched.empty() && failed.empty(); }
    /// "filename,psnr_db,ssim,mae" rows plus a final __mean__ row.
    std::string csv() const;
};

MetricReport evaluate_dirs(const std::string& results_dir,
                           const std::string& truth_dir);

}  // namespace lpdm

#endif
