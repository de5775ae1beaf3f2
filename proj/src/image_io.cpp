#include "lpdm/image_io.h"

#include <png.h>

#include <cmath>
#include <cstring>

#include "lpdm/errors.h"

namespace lpdm {

ImageU8 read_png(const std::string& path) {
    png_image img;
    std::memset(&img, 0, sizeof(img));
    img.version = PNG_IMAGE_VERSION;
    if (!png_image_begin_read_from_file(&img, path.c_str()))
        throw DataError("cannot read PNG '" + path + "': " + img.message);
    // Ask for RGBA so libpng never needs a compositing background, then drop
    // the alpha bytes ourselves.
    img.format = PNG_FORMAT_RGBA;
    std::vector<unsigned char> rgba(PNG_IMAGE_SIZE(img));
    if (!png_image_finish_read(&img, nullptr, rgba.data(), 0, nullptr)) {
        png_image_free(&img);
        throw DataError("cannot decode PNG '" + path + "': " + img.message);
    }
    ImageU8 out;
    out.h = static_cast<int>(img.height);
    out.w = static_cast<int>(img.width);
    out.rgb.resize(static_cast<size_t>(out.h) * out.w * 3);
    const size_t n = static_cast<size_t>(out.h) * out.w;
    for (size_t i = 0; i < n; ++i) {
        out.rgb[i * 3 + 0] = rgba[i * 4 + 0];
        out.rgb[i * 3 + 1] = rgba[i * 4 + 1];
        out.rgb[i * 3 + 2] = rgba[i * 4 + 2];
    }
    return out;
}

void write_png(const std::string& path, const ImageU8& im) {
    if (im.h <= 0 || im.w <= 0 ||
        im.rgb.size() != static_cast<size_t>(im.h) * im.w * 3)
        throw DataError("malformed image buffer for '" + path + "'");
    png_image img;
    std::memset(&img, 0, sizeof(img));
    img.version = PNG_IMAGE_VERSION;
    img.width = static_cast<png_uint_32>(im.w);
    img.height = static_cast<png_uint_32>(im.h);
    img.format = PNG_FORMAT_RGB;
    if (!png_image_write_to_file(&img, path.c_str(), 0, im.rgb.data(), 0, nullptr))
        throw DataError("cannot write PNG '" + path + "': " + img.message);
}

Tensor decode_image(const ImageU8& im) {
    Tensor t(3, im.h, im.w);
    for (int c = 0; c < 3; ++c) {
        float* p = t.plane(c);
        const unsigned char* src = im.rgb.data() + c;
        const size_t n = static_cast<size_t>(im.h) * im.w;
        for (size_t i = 0; i < n; ++i) p[i] = src[i * 3] / 127.5f - 1.0f;
    }
    return t;
}

ImageU8 encode_image(const Tensor& t) {
    if (t.c != 3) throw DataError("encode expects 3 channels, got " + std::to_string(t.c));
    ImageU8 im;
    im.h = t.h;
    im.w = t.w;
    im.rgb.resize(static_cast<size_t>(t.h) * t.w * 3);
    const size_t n = static_cast<size_t>(t.h) * t.w;
    for (int c = 0; c < 3; ++c) {
        const float* p = t.plane(c);
        for (size_t i = 0; i < n; ++i) {
            const float v = std::min(1.0f, std::max(-1.0f, p[i]));
            const long q = std::lround(v * 127.5f + 127.5f);
            im.rgb[i * 3 + c] = static_cast<unsigned char>(std::min(255L, std::max(0L, q)));
        }
    }
    return im;
}

Tensor read_image_tensor(const std::string& path) { return decode_image(read_png(path)); }

void write_image_tensor(const std::string& path, const Tensor& t) {
    write_png(path, encode_image(t));
}

}  // namespace lpdm
