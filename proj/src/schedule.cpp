#include "lpdm/schedule.h"

#include <cmath>
#include <cstdio>
#include <stdexcept>

#include "lpdm/errors.h"

namespace lpdm {

ScheduleMode schedule_mode_from_string(const std::string& s) {
    if (s == "linear") return ScheduleMode::Linear;
    if (s == "scaled_linear") return ScheduleMode::ScaledLinear;
    throw ConfigError("unknown schedule mode '" + s + "' (expected linear or scaled_linear)");
}

std::string to_string(ScheduleMode mode) {
    return mode == ScheduleMode::Linear ? "linear" : "scaled_linear";
}

double DiffusionSchedule::beta(int t) const {
    if (t < 1 || t > T) throw std::out_of_range("beta: t out of [1, T]");
    return betas[t - 1];
}

double DiffusionSchedule::alpha(int t) const {
    if (t < 1 || t > T) throw std::out_of_range("alpha: t out of [1, T]");
    return alphas[t - 1];
}

double DiffusionSchedule::alpha_bar(int t) const {
    if (t < 0 || t > T) throw std::out_of_range("alpha_bar: t out of [0, T]");
    return alpha_bars[t];
}

DiffusionSchedule build_linear_schedule(int T, double beta_start, double beta_end,
                                        ScheduleMode mode) {
    if (T < 1) throw ConfigError("schedule: T must be >= 1");
    if (!std::isfinite(beta_start) || !std::isfinite(beta_end))
        throw ConfigError("schedule: non-finite beta endpoint");
    if (!(beta_start > 0.0 && beta_start <= beta_end && beta_end < 1.0))
        throw ConfigError("schedule: need 0 < beta_start <= beta_end < 1");

    DiffusionSchedule s;
    s.T = T;
    s.beta_start = beta_start;
    s.beta_end = beta_end;
    s.mode = mode;
    s.betas.resize(T);
    s.alphas.resize(T);
    s.alpha_bars.resize(T + 1);
    s.alpha_bars[0] = 1.0;

    const double r0 = std::sqrt(beta_start);
    const double r1 = std::sqrt(beta_end);
    for (int t = 1; t <= T; ++t) {
        const double frac = T > 1 ? static_cast<double>(t - 1) / (T - 1) : 0.0;
        double beta;
        if (mode == ScheduleMode::Linear) {
            beta = beta_start + frac * (beta_end - beta_start);
        } else {
            const double r = r0 + frac * (r1 - r0);
            beta = r * r;
        }
        s.betas[t - 1] = beta;
        s.alphas[t - 1] = 1.0 - beta;
        s.alpha_bars[t] = s.alpha_bars[t - 1] * s.alphas[t - 1];
    }
    return s;
}

namespace {

void check_shapes(const Tensor& a, const Tensor& b, const char* op) {
    if (!a.same_shape(b))
        throw std::invalid_argument(std::string(op) + ": tensor shape mismatch");
}

// Shared form of q_sample inverse / correction: a*x + b*y computed per pixel
// in double, stored as float.
Tensor affine_combine(const Tensor& x, const Tensor& y, double a, double b) {
    Tensor out(x.c, x.h, x.w);
    const size_t n = x.numel();
    for (size_t i = 0; i < n; ++i)
        out.v[i] = static_cast<float>(a * static_cast<double>(x.v[i]) +
                                      b * static_cast<double>(y.v[i]));
    return out;
}

}  // namespace

Tensor q_sample(const DiffusionSchedule& sched, const Tensor& x0, int t, const Tensor& eps) {
    check_shapes(x0, eps, "q_sample");
    if (t < 1 || t > sched.T) throw std::out_of_range("q_sample: t out of [1, T]");
    const double ab = sched.alpha_bar(t);
    return affine_combine(x0, eps, std::sqrt(ab), std::sqrt(1.0 - ab));
}

Tensor estimate_x0(const DiffusionSchedule& sched, const Tensor& xt, const Tensor& eps_hat,
                   int t) {
    check_shapes(xt, eps_hat, "estimate_x0");
    if (t < 1 || t > sched.T) throw std::out_of_range("estimate_x0: t out of [1, T]");
    const double ab = sched.alpha_bar(t);
    return affine_combine(xt, eps_hat, 1.0 / std::sqrt(ab), -std::sqrt(1.0 / ab - 1.0));
}

Tensor correct(const DiffusionSchedule& sched, const Tensor& x_eta, const Tensor& n_phi,
               int s) {
    check_shapes(x_eta, n_phi, "correct");
    if (s < 0 || s > sched.T) throw std::out_of_range("correct: s out of [0, T]");
    if (s == 0) return x_eta;
    const double ab = sched.alpha_bar(s);
    return affine_combine(x_eta, n_phi, 1.0 / std::sqrt(ab), -std::sqrt(1.0 / ab - 1.0));
}

std::string schedule_csv(const DiffusionSchedule& sched) {
    std::string out = "t,beta_t,alpha_bar_t\n";
    char line[96];
    for (int t = 1; t <= sched.T; ++t) {
        std::snprintf(line, sizeof(line), "%d,%.17g,%.17g\n", t, sched.beta(t),
                      sched.alpha_bar(t));
        out += line;
    }
    return out;
}

}  // namespace lpdm
