#ifndef LPDM_SCHEDULE_H
#define LPDM_SCHEDULE_H

#include <string>
#include <vector>

#include "lpdm/tensor.h"

namespace lpdm {

enum class ScheduleMode {
    Linear,        // beta interpolated linearly between the endpoints
    ScaledLinear,  // sqrt(beta) interpolated linearly, then squared
};

ScheduleMode schedule_mode_from_string(const std::string& s);
std::string to_string(ScheduleMode mode);

/// Per-timestep constants of the forward diffusion process, precomputed in
/// double precision. Index convention: beta(t) and alpha(t) take t in [1, T];
/// alpha_bar(t) takes t in [0, T] with alpha_bar(0) == 1.
struct DiffusionSchedule {
    int T = 0;
    double beta_start = 0.0;
    double beta_end = 0.0;
    ScheduleMode mode = ScheduleMode::Linear;
    std::vector<double> betas;       // betas[t-1] = beta_t
    std::vector<double> alphas;      // alphas[t-1] = 1 - beta_t
    std::vector<double> alpha_bars;  // alpha_bars[t] = prod_{s<=t} alpha_s, alpha_bars[0] = 1

    double beta(int t) const;
    double alpha(int t) const;
    double alpha_bar(int t) const;
};

DiffusionSchedule build_linear_schedule(int T, double beta_start, double beta_end,
                                        ScheduleMode mode = ScheduleMode::Linear);

/// x_t = sqrt(alpha_bar_t) * x0 + sqrt(1 - alpha_bar_t) * eps, t in [1, T].
Tensor q_sample(const DiffusionSchedule& sched, const Tensor& x0, int t, const Tensor& eps);

/// x0_hat = xt / sqrt(alpha_bar_t) - sqrt(1/alpha_bar_t - 1) * eps_hat, t in [1, T].
Tensor estimate_x0(const DiffusionSchedule& sched, const Tensor& xt, const Tensor& eps_hat, int t);

/// Correction operator: x_eta / sqrt(alpha_bar_s) - sqrt(1/alpha_bar_s - 1) * n_phi,
/// s in [0, T]. s = 0 is the identity. Caller clamps to [-1, 1] before encoding.
Tensor correct(const DiffusionSchedule& sched, const Tensor& x_eta, const Tensor& n_phi, int s);

/// CSV table "t,beta_t,alpha_bar_t" for t = 1..T, full double precision.
std::string schedule_csv(const DiffusionSchedule& sched);

}  // namespace lpdm

#endif
