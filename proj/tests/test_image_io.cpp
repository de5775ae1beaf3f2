#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>
#include <png.h>

#include <cstring>
#include <filesystem>
#include <fstream>
#include <string>
#include <vector>

#include "lpdm/errors.h"
#include "lpdm/image_io.h"
#include "lpdm/rng.h"

using namespace lpdm;
namespace fs = std::filesystem;

namespace {

std::string temp_path(const std::string& stem) {
    static int counter = 0;
    return (fs::temp_directory_path() /
            ("lpdm_img_" + stem + "_" + std::to_string(counter++) + ".png"))
        .string();
}

ImageU8 random_image(int h, int w, uint64_t seed) {
    ImageU8 im;
    im.h = h;
    im.w = w;
    im.rgb.resize(static_cast<size_t>(h) * w * 3);
    Rng rng = Rng::substream(seed, 40);
    for (auto& b : im.rgb) b = static_cast<unsigned char>(rng.uniform_int(0, 255));
    return im;
}

// Writes a non-RGB-format PNG directly so reads exercise format conversion.
void write_raw_png(const std::string& path, png_uint_32 format, int h, int w,
                   const std::vector<unsigned char>& pixels) {
    png_image img;
    std::memset(&img, 0, sizeof(img));
    img.version = PNG_IMAGE_VERSION;
    img.width = static_cast<png_uint_32>(w);
    img.height = static_cast<png_uint_32>(h);
    img.format = format;
    REQUIRE(png_image_write_to_file(&img, path.c_str(), 0, pixels.data(), 0, nullptr));
}

}  // namespace

TEST_CASE("png write then read round-trips bytes exactly") {
    const ImageU8 im = random_image(21, 13, 1);
    const auto path = temp_path("rt");
    write_png(path, im);
    const ImageU8 back = read_png(path);
    CHECK(back.h == im.h);
    CHECK(back.w == im.w);
    CHECK(back.rgb == im.rgb);
}

TEST_CASE("decode then encode recovers every 8-bit level") {
    ImageU8 im;
    im.h = 16;
    im.w = 16;
    im.rgb.resize(16 * 16 * 3);
    for (int i = 0; i < 256; ++i)
        for (int ch = 0; ch < 3; ++ch) im.rgb[3 * i + ch] = static_cast<unsigned char>(i);
    const ImageU8 back = encode_image(decode_image(im));
    CHECK(back.rgb == im.rgb);
}

TEST_CASE("decode maps endpoints to the signed range") {
    ImageU8 im;
    im.h = 1;
    im.w = 2;
    im.rgb = {0, 0, 0, 255, 255, 255};
    const Tensor t = decode_image(im);
    CHECK(t.c == 3);
    CHECK(t.at(0, 0, 0) == doctest::Approx(-1.0f));
    CHECK(t.at(0, 0, 1) == doctest::Approx(1.0f));
}

TEST_CASE("encode clamps out-of-range values") {
    Tensor t(3, 1, 1);
    t.fill(2.5f);
    CHECK(encode_image(t).rgb[0] == 255);
    t.fill(-7.0f);
    CHECK(encode_image(t).rgb[0] == 0);
}

TEST_CASE("encode rejects non-3-channel tensors") {
    CHECK_THROWS_AS(encode_image(Tensor(1, 4, 4)), DataError);
}

TEST_CASE("grayscale png expands to equal rgb channels") {
    std::vector<unsigned char> gray = {0, 64, 128, 255};
    const auto path = temp_path("gray");
    write_raw_png(path, PNG_FORMAT_GRAY, 2, 2, gray);
    const ImageU8 im = read_png(path);
    REQUIRE(im.rgb.size() == 12);
    for (int i = 0; i < 4; ++i) {
        CHECK(im.rgb[3 * i + 0] == gray[i]);
        CHECK(im.rgb[3 * i + 1] == gray[i]);
        CHECK(im.rgb[3 * i + 2] == gray[i]);
    }
}

TEST_CASE("alpha channel is dropped without compositing") {
    // Half-transparent saturated red must stay saturated red.
    std::vector<unsigned char> rgba = {255, 0, 0, 128, 10, 20, 30, 0};
    const auto path = temp_path("rgba");
    write_raw_png(path, PNG_FORMAT_RGBA, 1, 2, rgba);
    const ImageU8 im = read_png(path);
    REQUIRE(im.rgb.size() == 6);
    CHECK(im.rgb[0] == 255);
    CHECK(im.rgb[1] == 0);
    CHECK(im.rgb[2] == 0);
    CHECK(im.rgb[3] == 10);
    CHECK(im.rgb[4] == 20);
    CHECK(im.rgb[5] == 30);
}

TEST_CASE("missing and corrupt files raise data errors") {
    CHECK_THROWS_AS(read_png("/nonexistent/image.png"), DataError);
    const auto path = temp_path("corrupt");
    std::ofstream(path) << "this is not a png";
    CHECK_THROWS_AS(read_png(path), DataError);
}

TEST_CASE("write rejects inconsistent buffers") {
    ImageU8 im;
    im.h = 4;
    im.w = 4;
    im.rgb.resize(7);
    CHECK_THROWS_AS(write_png(temp_path("bad"), im), DataError);
}

TEST_CASE("tensor file round trip preserves quantized pixels") {
    Rng rng = Rng::substream(2, 40);
    Tensor t(3, 9, 7);
    for (auto& v : t.v) v = static_cast<float>(rng.uniform() * 2 - 1);
    const auto path = temp_path("tensor");
    write_image_tensor(path, t);
    const Tensor back = read_image_tensor(path);
    REQUIRE(back.same_shape(t));
    // One quantization step is 2/255; the round trip may differ by half that.
    for (size_t i = 0; i < t.numel(); ++i)
        CHECK(std::fabs(back.v[i] - t.v[i]) <= 1.0f / 255);
    // A second round trip is exact: the grid is a fixed point.
    write_image_tensor(path, back);
    CHECK(read_image_tensor(path).v == back.v);
}
