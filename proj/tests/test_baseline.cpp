#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <vector>

#include "lpdm/baseline.h"
#include "lpdm/errors.h"
#include "lpdm/rng.h"

using namespace lpdm;

namespace {

Tensor random_unit_image(int h, int w, uint64_t seed) {
    Rng rng = Rng::substream(seed, 80);
    Tensor t(3, h, w);
    for (auto& v : t.v) v = static_cast<float>(rng.uniform());
    return t;
}

IlluminationMap constant_map(int h, int w, float value) {
    IlluminationMap m;
    m.h = h;
    m.w = w;
    m.v.assign(static_cast<size_t>(h) * w, value);
    return m;
}

double max_abs_diff(const Tensor& a, const Tensor& b) {
    double m = 0;
    for (size_t i = 0; i < a.numel(); ++i)
        m = std::max(m, std::fabs(static_cast<double>(a.v[i]) - b.v[i]));
    return m;
}

}  // namespace

TEST_CASE("luma and chroma transforms invert each other") {
    const Tensor x = random_unit_image(13, 9, 1);
    CHECK(max_abs_diff(yuv_to_rgb(rgb_to_yuv(x)), x) < 1e-5);
}

TEST_CASE("gray pixels carry all energy in luma") {
    Tensor x(3, 2, 2);
    for (int c = 0; c < 3; ++c)
        for (int i = 0; i < 4; ++i) x.plane(c)[i] = 0.25f * static_cast<float>(i);
    const Tensor yuv = rgb_to_yuv(x);
    for (int i = 0; i < 4; ++i) {
        CHECK(yuv.plane(0)[i] == doctest::Approx(0.25 * i).epsilon(1e-6));
        CHECK(std::fabs(yuv.plane(1)[i]) < 1e-6);
        CHECK(std::fabs(yuv.plane(2)[i]) < 1e-6);
    }
}

TEST_CASE("primary colors produce the standard luma weights") {
    Tensor x(3, 1, 3);
    x.at(0, 0, 0) = 1;  // red pixel
    x.at(1, 0, 1) = 1;  // green pixel
    x.at(2, 0, 2) = 1;  // blue pixel
    const Tensor yuv = rgb_to_yuv(x);
    CHECK(yuv.at(0, 0, 0) == doctest::Approx(0.299));
    CHECK(yuv.at(0, 0, 1) == doctest::Approx(0.587));
    CHECK(yuv.at(0, 0, 2) == doctest::Approx(0.114));
}

TEST_CASE("transforms insist on three channels") {
    CHECK_THROWS_AS(rgb_to_yuv(Tensor(1, 4, 4)), DataError);
    CHECK_THROWS_AS(yuv_to_rgb(Tensor(4, 4, 4)), DataError);
}

TEST_CASE("full illumination keeps the original image bitwise") {
    const Tensor R = random_unit_image(12, 16, 2);
    const Tensor out = illumination_weighted_denoise(R, constant_map(12, 16, 1.0f),
                                                     gaussian_denoiser(), 25.0);
    CHECK(out.v == R.v);
}

TEST_CASE("zero illumination yields the denoised image bitwise") {
    const Tensor R = random_unit_image(12, 16, 3);
    const auto plugin = gaussian_denoiser();
    const Tensor out =
        illumination_weighted_denoise(R, constant_map(12, 16, 0.0f), plugin, 25.0);

    Tensor yuv = rgb_to_yuv(R);
    const std::vector<float> luma(yuv.plane(0), yuv.plane(0) + yuv.plane());
    const std::vector<float> filtered = plugin(luma, R.h, R.w, 25.0);
    std::copy(filtered.begin(), filtered.end(), yuv.plane(0));
    const Tensor R_d = yuv_to_rgb(yuv);
    CHECK(out.v == R_d.v);
    CHECK(max_abs_diff(out, R) > 1e-4);  // the blur actually did something
}

TEST_CASE("a do-nothing plugin is a bitwise identity for any map") {
    const Tensor R = random_unit_image(10, 10, 4);
    IlluminationMap m = constant_map(10, 10, 0.0f);
    Rng rng = Rng::substream(5, 80);
    for (auto& v : m.v) v = static_cast<float>(rng.uniform());
    const Tensor out = illumination_weighted_denoise(R, m, identity_denoiser(), 15.0);
    CHECK(out.v == R.v);
}

TEST_CASE("intermediate illumination blends convexly") {
    const Tensor R = random_unit_image(12, 12, 6);
    const auto plugin = gaussian_denoiser();
    const Tensor lo = illumination_weighted_denoise(R, constant_map(12, 12, 0.0f),
                                                    plugin, 30.0);
    const Tensor hi = illumination_weighted_denoise(R, constant_map(12, 12, 1.0f),
                                                    plugin, 30.0);
    const Tensor mid = illumination_weighted_denoise(R, constant_map(12, 12, 0.25f),
                                                     plugin, 30.0);
    for (size_t i = 0; i < R.numel(); ++i) {
        const float expect = 0.25f * hi.v[i] + 0.75f * lo.v[i];
        CHECK(mid.v[i] == doctest::Approx(expect).epsilon(1e-5));
    }
}

TEST_CASE("only luma is filtered; chroma passes through") {
    const Tensor R = random_unit_image(14, 14, 7);
    const Tensor out = illumination_weighted_denoise(R, constant_map(14, 14, 0.0f),
                                                     gaussian_denoiser(), 40.0);
    const Tensor before = rgb_to_yuv(R);
    const Tensor after = rgb_to_yuv(out);
    double chroma_diff = 0, luma_diff = 0;
    for (int i = 0; i < R.plane(); ++i) {
        luma_diff = std::max(
            luma_diff, std::fabs(static_cast<double>(after.plane(0)[i]) -
                                 before.plane(0)[i]));
        chroma_diff = std::max(
            chroma_diff, std::fabs(static_cast<double>(after.plane(1)[i]) -
                                   before.plane(1)[i]));
        chroma_diff = std::max(
            chroma_diff, std::fabs(static_cast<double>(after.plane(2)[i]) -
                                   before.plane(2)[i]));
    }
    CHECK(luma_diff > 1e-3);
    CHECK(chroma_diff < 1e-5);
}

TEST_CASE("gaussian strength zero degenerates to identity") {
    const Tensor R = random_unit_image(8, 8, 8);
    const Tensor out = illumination_weighted_denoise(R, constant_map(8, 8, 0.5f),
                                                     gaussian_denoiser(), 0.0);
    CHECK(out.v == R.v);
}

TEST_CASE("gaussian filtering preserves a constant plane") {
    std::vector<float> flat(64, 0.375f);
    const auto out = gaussian_denoiser()(flat, 8, 8, 20.0);
    for (float v : out) CHECK(v == doctest::Approx(0.375f).epsilon(1e-6));
}

TEST_CASE("stronger blur moves the luma further") {
    const Tensor R = random_unit_image(16, 16, 9);
    const auto plugin = gaussian_denoiser();
    const Tensor weak = illumination_weighted_denoise(R, constant_map(16, 16, 0.0f),
                                                      plugin, 5.0);
    const Tensor strong = illumination_weighted_denoise(R, constant_map(16, 16, 0.0f),
                                                        plugin, 50.0);
    CHECK(max_abs_diff(strong, R) > max_abs_diff(weak, R));
}

TEST_CASE("input contracts are enforced") {
    const Tensor R = random_unit_image(8, 8, 10);
    CHECK_THROWS_AS(illumination_weighted_denoise(Tensor(1, 8, 8),
                                                  constant_map(8, 8, 0.5f),
                                                  identity_denoiser(), 1.0),
                    DataError);
    CHECK_THROWS_AS(illumination_weighted_denoise(R, constant_map(4, 4, 0.5f),
                                                  identity_denoiser(), 1.0),
                    DataError);
    CHECK_THROWS_AS(illumination_weighted_denoise(R, constant_map(8, 8, 0.5f),
                                                  identity_denoiser(), -2.0),
                    ConfigError);
    const DenoiserPlugin broken = [](const std::vector<float>&, int, int, double) {
        return std::vector<float>{1.0f};
    };
    CHECK_THROWS_AS(
        illumination_weighted_denoise(R, constant_map(8, 8, 0.5f), broken, 1.0),
        DataError);
}

TEST_CASE("illumination maps must stay in the unit interval") {
    Tensor g(1, 2, 2);
    g.v = {0.0f, 0.5f, 1.0f, 0.25f};
    const IlluminationMap m = illumination_from_tensor(g);
    CHECK(m.h == 2);
    CHECK(m.v == g.v);
    g.v[1] = 1.5f;
    CHECK_THROWS_AS(illumination_from_tensor(g), DataError);
    g.v[1] = -0.1f;
    CHECK_THROWS_AS(illumination_from_tensor(g), DataError);
}
