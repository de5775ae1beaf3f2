#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <vector>

#include "lpdm/errors.h"
#include "lpdm/rng.h"
#include "lpdm/schedule.h"

using namespace lpdm;

namespace {

// Independent double-precision oracle: recompute the running product from the
// interpolation formula alone, without touching DiffusionSchedule internals.
struct ScheduleOracle {
    std::vector<double> beta, abar;
    ScheduleOracle(int T, double b0, double b1) {
        beta.resize(T);
        abar.resize(T + 1);
        abar[0] = 1.0;
        for (int t = 1; t <= T; ++t) {
            beta[t - 1] = T > 1 ? b0 + (double(t - 1) / (T - 1)) * (b1 - b0) : b0;
            abar[t] = abar[t - 1] * (1.0 - beta[t - 1]);
        }
    }
};

Tensor random_tensor(int c, int h, int w, Rng& rng, float scale = 1.0f) {
    Tensor t(c, h, w);
    for (float& x : t.v) x = scale * rng.normal();
    return t;
}

double max_abs_diff(const Tensor& a, const Tensor& b) {
    double m = 0.0;
    for (size_t i = 0; i < a.numel(); ++i)
        m = std::max(m, std::abs(double(a.v[i]) - double(b.v[i])));
    return m;
}

}  // namespace

TEST_CASE("linear schedule endpoints and running product match the oracle") {
    auto s = build_linear_schedule(1000, 0.00085, 0.012);
    ScheduleOracle o(1000, 0.00085, 0.012);

    CHECK(s.beta(1) == doctest::Approx(0.00085).epsilon(1e-15));
    CHECK(s.beta(1000) == doctest::Approx(0.012).epsilon(1e-15));
    CHECK(s.alpha_bar(1) == doctest::Approx(0.99915).epsilon(1e-12));

    for (int t = 1; t <= 1000; ++t) {
        CHECK(s.beta(t) == doctest::Approx(o.beta[t - 1]).epsilon(1e-14));
        CHECK(s.alpha_bar(t) == doctest::Approx(o.abar[t]).epsilon(1e-12));
    }
    // x_T is near pure noise for the default configuration
    CHECK(s.alpha_bar(1000) < 0.01);
    CHECK(s.alpha_bar(1000) == doctest::Approx(1.6e-3).epsilon(0.10));
}

TEST_CASE("alpha_bar is 1 at t=0 and strictly decreasing") {
    auto s = build_linear_schedule(1000, 0.00085, 0.012);
    CHECK(s.alpha_bar(0) == 1.0);
    for (int t = 1; t <= 1000; ++t) {
        CHECK(s.alpha_bar(t) < s.alpha_bar(t - 1));
        CHECK(s.beta(t) > 0.0);
        CHECK(s.beta(t) < 1.0);
        if (t > 1) CHECK(s.beta(t) >= s.beta(t - 1));
    }
}

TEST_CASE("scaled_linear mode interpolates sqrt(beta)") {
    auto s = build_linear_schedule(10, 0.00085, 0.012, ScheduleMode::ScaledLinear);
    CHECK(s.beta(1) == doctest::Approx(0.00085).epsilon(1e-15));
    CHECK(s.beta(10) == doctest::Approx(0.012).epsilon(1e-15));
    double r0 = std::sqrt(0.00085), r1 = std::sqrt(0.012);
    double mid = r0 + (4.0 / 9.0) * (r1 - r0);
    CHECK(s.beta(5) == doctest::Approx(mid * mid).epsilon(1e-14));
}

TEST_CASE("schedule rejects bad arguments") {
    CHECK_THROWS_AS(build_linear_schedule(0, 0.001, 0.01), ConfigError);
    CHECK_THROWS_AS(build_linear_schedule(10, -0.001, 0.01), ConfigError);
    CHECK_THROWS_AS(build_linear_schedule(10, 0.02, 0.01), ConfigError);
    CHECK_THROWS_AS(build_linear_schedule(10, 0.001, 1.0), ConfigError);
    CHECK_THROWS_AS(build_linear_schedule(10, std::nan(""), 0.01), ConfigError);
    CHECK_NOTHROW(build_linear_schedule(1, 0.5, 0.5));
}

TEST_CASE("q_sample special cases and scalar-loop oracle") {
    auto s = build_linear_schedule(1000, 0.00085, 0.012);
    Rng rng(7);
    Tensor x0 = random_tensor(3, 8, 8, rng);
    Tensor zero(3, 8, 8);

    SUBCASE("eps = 0 reduces to sqrt(abar)*x0") {
        Tensor xt = q_sample(s, x0, 250, zero);
        const float coef = float(std::sqrt(s.alpha_bar(250)));
        for (size_t i = 0; i < x0.numel(); ++i)
            CHECK(xt.v[i] == doctest::Approx(coef * x0.v[i]).epsilon(1e-6));
    }
    SUBCASE("x0 = 0 reduces to sqrt(1-abar)*eps") {
        Tensor eps = random_tensor(3, 8, 8, rng);
        Tensor xt = q_sample(s, zero, 250, eps);
        const float coef = float(std::sqrt(1.0 - s.alpha_bar(250)));
        for (size_t i = 0; i < eps.numel(); ++i)
            CHECK(xt.v[i] == doctest::Approx(coef * eps.v[i]).epsilon(1e-6));
    }
    SUBCASE("matches per-pixel scalar oracle at t=500") {
        Tensor eps = random_tensor(3, 8, 8, rng);
        Tensor xt = q_sample(s, x0, 500, eps);
        const double ab = s.alpha_bar(500);
        for (size_t i = 0; i < x0.numel(); ++i) {
            double want = std::sqrt(ab) * x0.v[i] + std::sqrt(1.0 - ab) * eps.v[i];
            CHECK(std::abs(xt.v[i] - want) < 1e-6);
        }
    }
    SUBCASE("rejects shape mismatch and t out of range") {
        Tensor bad(3, 4, 4);
        CHECK_THROWS_AS(q_sample(s, x0, 10, bad), std::invalid_argument);
        CHECK_THROWS_AS(q_sample(s, x0, 0, zero), std::out_of_range);
        CHECK_THROWS_AS(q_sample(s, x0, 1001, zero), std::out_of_range);
    }
}

TEST_CASE("estimate_x0 special cases and scalar-loop oracle") {
    auto s = build_linear_schedule(1000, 0.00085, 0.012);
    Rng rng(11);
    Tensor xt = random_tensor(3, 8, 8, rng);
    Tensor zero(3, 8, 8);

    SUBCASE("eps_hat = 0 only rescales") {
        Tensor x0 = estimate_x0(s, xt, zero, 300);
        const double inv = 1.0 / std::sqrt(s.alpha_bar(300));
        for (size_t i = 0; i < xt.numel(); ++i)
            CHECK(x0.v[i] == doctest::Approx(float(inv * xt.v[i])).epsilon(1e-6));
    }
    SUBCASE("matches per-pixel scalar oracle at t=300") {
        Tensor eps = random_tensor(3, 8, 8, rng);
        Tensor x0 = estimate_x0(s, xt, eps, 300);
        const double ab = s.alpha_bar(300);
        for (size_t i = 0; i < xt.numel(); ++i) {
            double want = xt.v[i] / std::sqrt(ab) - std::sqrt(1.0 / ab - 1.0) * eps.v[i];
            CHECK(std::abs(x0.v[i] - want) < 1e-6);
        }
    }
}

TEST_CASE("round trip: estimate_x0(q_sample(x0,t,eps), eps, t) recovers x0") {
    auto s = build_linear_schedule(1000, 0.00085, 0.012);
    Rng rng(13);
    // stratified sample of timesteps plus random draws
    std::vector<int> ts = {1, 2, 10, 50, 100, 250, 500, 750, 900, 999, 1000};
    for (int rep = 0; rep < 20; ++rep) ts.push_back(rng.uniform_int(1, 1000));
    for (int t : ts) {
        Tensor x0 = random_tensor(3, 6, 6, rng);
        Tensor eps = random_tensor(3, 6, 6, rng);
        Tensor back = estimate_x0(s, q_sample(s, x0, t, eps), eps, t);
        float scale = 0.0f;
        for (float x : x0.v) scale = std::max(scale, std::abs(x));
        CHECK(max_abs_diff(back, x0) < 1e-5 * std::max(scale, 1.0f));
    }
}

TEST_CASE("correct: identity at s=0, rescale at n=0, oracle at s=30") {
    auto s = build_linear_schedule(1000, 0.00085, 0.012);
    Rng rng(17);
    Tensor x = random_tensor(3, 8, 8, rng, 0.5f);
    Tensor n = random_tensor(3, 8, 8, rng);
    Tensor zero(3, 8, 8);

    Tensor same = correct(s, x, n, 0);
    for (size_t i = 0; i < x.numel(); ++i) CHECK(same.v[i] == x.v[i]);

    Tensor scaled = correct(s, x, zero, 40);
    const double inv = 1.0 / std::sqrt(s.alpha_bar(40));
    for (size_t i = 0; i < x.numel(); ++i)
        CHECK(scaled.v[i] == doctest::Approx(float(inv * x.v[i])).epsilon(1e-6));

    Tensor out = correct(s, x, n, 30);
    const double ab = s.alpha_bar(30);
    for (size_t i = 0; i < x.numel(); ++i) {
        double want = x.v[i] / std::sqrt(ab) - std::sqrt(1.0 / ab - 1.0) * n.v[i];
        CHECK(std::abs(out.v[i] - want) < 1e-6);
    }

    CHECK_THROWS_AS(correct(s, x, n, -1), std::out_of_range);
    CHECK_THROWS_AS(correct(s, x, n, 1001), std::out_of_range);
}

TEST_CASE("subtraction coefficient strictly increases with s") {
    auto s = build_linear_schedule(1000, 0.00085, 0.012);
    double prev = 0.0;
    for (int t = 1; t <= 1000; ++t) {
        double coef = std::sqrt(1.0 / s.alpha_bar(t) - 1.0);
        CHECK(coef > prev);
        prev = coef;
    }
}

TEST_CASE("schedule csv has T rows and full-precision values") {
    auto s = build_linear_schedule(16, 0.001, 0.02);
    std::string csv = schedule_csv(s);
    size_t rows = 0;
    for (char ch : csv)
        if (ch == '\n') ++rows;
    CHECK(rows == 17);  // header + 16
    CHECK(csv.rfind("t,beta_t,alpha_bar_t\n", 0) == 0);
    double b, ab;
    int t;
    CHECK(std::sscanf(csv.c_str() + csv.find('\n') + 1, "%d,%lg,%lg", &t, &b, &ab) == 3);
    CHECK(t == 1);
    CHECK(b == s.beta(1));
    CHECK(ab == s.alpha_bar(1));
}
