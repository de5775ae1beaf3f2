// Times the OpenMP kernels against their serial reference implementations on
// shapes representative of the network (feature maps at the outer and middle
// resolutions, the attention matmuls, the time-embedding linears).

#include <chrono>
#include <cstdio>
#include <functional>
#include <string>
#include <vector>

#include "lpdm/kernels.h"
#include "lpdm/rng.h"

namespace {

std::vector<float> random_vec(size_t n, lpdm::Rng& rng) {
    std::vector<float> v(n);
    for (auto& x : v) x = static_cast<float>(rng.normal());
    return v;
}

double time_ms(const std::function<void()>& fn, int reps) {
    fn();  // warm up
    const auto t0 = std::chrono::steady_clock::now();
    for (int i = 0; i < reps; ++i) fn();
    const auto t1 = std::chrono::steady_clock::now();
    return std::chrono::duration<double, std::milli>(t1 - t0).count() / reps;
}

void report(const std::string& name, double serial_ms, double omp_ms) {
    std::printf("%-34s %10.3f %10.3f %8.2fx\n", name.c_str(), serial_ms, omp_ms,
                serial_ms / omp_ms);
}

}  // namespace

int main() {
    namespace K = lpdm::kernels;
    namespace S = lpdm::kernels::serial;
    lpdm::Rng rng = lpdm::Rng::substream(12345, 0);

    std::printf("%-34s %10s %10s %9s\n", "kernel", "serial ms", "omp ms", "speedup");

    {
        const int ic = 128, oc = 128, h = 64, w = 64, k = 3;
        auto x = random_vec(static_cast<size_t>(ic) * h * w, rng);
        auto wt = random_vec(static_cast<size_t>(oc) * ic * k * k, rng);
        auto b = random_vec(oc, rng);
        std::vector<float> y(static_cast<size_t>(oc) * h * w);
        auto run = [&](auto fn) {
            fn(x.data(), ic, h, w, wt.data(), b.data(), oc, k, 1, 1, y.data(), h, w);
        };
        report("conv3x3 128->128 @64x64",
               time_ms([&] { run(S::conv2d_forward); }, 2),
               time_ms([&] { run(K::conv2d_forward); }, 2));
    }
    {
        const int ic = 512, oc = 512, h = 16, w = 16, k = 3;
        auto x = random_vec(static_cast<size_t>(ic) * h * w, rng);
        auto wt = random_vec(static_cast<size_t>(oc) * ic * k * k, rng);
        auto b = random_vec(oc, rng);
        std::vector<float> y(static_cast<size_t>(oc) * h * w);
        auto run = [&](auto fn) {
            fn(x.data(), ic, h, w, wt.data(), b.data(), oc, k, 1, 1, y.data(), h, w);
        };
        report("conv3x3 512->512 @16x16",
               time_ms([&] { run(S::conv2d_forward); }, 3),
               time_ms([&] { run(K::conv2d_forward); }, 3));
    }
    {
        const int ic = 128, oc = 128, h = 64, w = 64, k = 3;
        auto gy = random_vec(static_cast<size_t>(oc) * h * w, rng);
        auto wt = random_vec(static_cast<size_t>(oc) * ic * k * k, rng);
        std::vector<float> gx(static_cast<size_t>(ic) * h * w);
        auto run = [&](auto fn) {
            fn(gy.data(), oc, h, w, wt.data(), ic, k, 1, 1, gx.data(), h, w);
        };
        report("conv3x3 backward-data @64x64",
               time_ms([&] { run(S::conv2d_backward_data); }, 2),
               time_ms([&] { run(K::conv2d_backward_data); }, 2));
    }
    {
        const int ic = 128, oc = 128, h = 64, w = 64, k = 3;
        auto x = random_vec(static_cast<size_t>(ic) * h * w, rng);
        auto gy = random_vec(static_cast<size_t>(oc) * h * w, rng);
        std::vector<float> gw(static_cast<size_t>(oc) * ic * k * k);
        std::vector<float> gb(oc);
        auto run = [&](auto fn) {
            fn(x.data(), ic, h, w, gy.data(), oc, h, w, k, 1, 1, gw.data(), gb.data());
        };
        report("conv3x3 backward-filter @64x64",
               time_ms([&] { run(S::conv2d_backward_filter); }, 2),
               time_ms([&] { run(K::conv2d_backward_filter); }, 2));
    }
    {
        const int c = 512, hw = 16 * 16, groups = 32;
        auto x = random_vec(static_cast<size_t>(c) * hw, rng);
        auto gamma = random_vec(c, rng);
        auto beta = random_vec(c, rng);
        std::vector<float> y(x.size());
        std::vector<float> mean(groups), invstd(groups);
        auto run = [&](auto fn) {
            fn(x.data(), c, hw, groups, 1e-5f, gamma.data(), beta.data(), y.data(),
               mean.data(), invstd.data());
        };
        report("groupnorm 512ch @16x16",
               time_ms([&] { run(S::group_norm_forward); }, 20),
               time_ms([&] { run(K::group_norm_forward); }, 20));
    }
    {
        const size_t n = static_cast<size_t>(256) * 256 * 256;
        auto x = random_vec(n, rng);
        std::vector<float> y(n);
        report("silu 256ch @256x256",
               time_ms([&] { S::silu_forward(x.data(), n, y.data()); }, 3),
               time_ms([&] { K::silu_forward(x.data(), n, y.data()); }, 3));
    }
    {
        const int m = 256, k = 64, n = 256;
        auto a = random_vec(static_cast<size_t>(m) * k, rng);
        auto b = random_vec(static_cast<size_t>(n) * k, rng);
        std::vector<float> out(static_cast<size_t>(m) * n);
        report("matmul_nt 256x64x256 (attention)",
               time_ms([&] { S::matmul_nt(a.data(), b.data(), m, k, n, 0.125f, out.data()); }, 20),
               time_ms([&] { K::matmul_nt(a.data(), b.data(), m, k, n, 0.125f, out.data()); }, 20));
    }
    {
        const int in = 512, out_dim = 512;
        auto x = random_vec(in, rng);
        auto wt = random_vec(static_cast<size_t>(out_dim) * in, rng);
        auto b = random_vec(out_dim, rng);
        std::vector<float> y(out_dim);
        report("linear 512->512",
               time_ms([&] { S::linear_forward(x.data(), in, wt.data(), b.data(), out_dim, y.data()); }, 200),
               time_ms([&] { K::linear_forward(x.data(), in, wt.data(), b.data(), out_dim, y.data()); }, 200));
    }
    return 0;
}
