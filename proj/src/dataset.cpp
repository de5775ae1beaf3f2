#include "lpdm/dataset.h"

#include <algorithm>
#include <filesystem>

#include "lpdm/errors.h"
#include "lpdm/image_io.h"
#include "lpdm/log.h"

namespace fs = std::filesystem;

namespace lpdm {

DirectoryDataset::DirectoryDataset(const std::string& low_dir,
                                   const std::string& high_dir)
    : low_dir_(low_dir), high_dir_(high_dir) {
    if (!fs::is_directory(low_dir_))
        throw DataError("low-light directory does not exist: " + low_dir_);
    if (!fs::is_directory(high_dir_))
        throw DataError("normal-light directory does not exist: " + high_dir_);
    for (const auto& e : fs::directory_iterator(low_dir_)) {
        if (!e.is_regular_file()) continue;
        const std::string name = e.path().filename().string();
        if (!fs::exists(fs::path(high_dir_) / name))
            throw DataError("no counterpart for '" + (fs::path(low_dir_) / name).string() +
                            "' in " + high_dir_);
        names_.push_back(name);
    }
    std::sort(names_.begin(), names_.end());
    if (names_.empty())
        log_info("warning: no image pairs found under " + low_dir_);
}

PairedSample DirectoryDataset::get(size_t i) const {
    const std::string low = (fs::path(low_dir_) / names_[i]).string();
    const std::string high = (fs::path(high_dir_) / names_[i]).string();
    PairedSample s;
    s.c = read_image_tensor(low);
    s.x0 = read_image_tensor(high);
    if (!s.c.same_shape(s.x0))
        throw DataError("size mismatch between '" + low + "' (" + std::to_string(s.c.w) +
                        "x" + std::to_string(s.c.h) + ") and '" + high + "' (" +
                        std::to_string(s.x0.w) + "x" + std::to_string(s.x0.h) + ")");
    return s;
}

namespace {

// Triangle-wave reflection without edge repeat: ...2,1,0,1,2...n-1,n-2...
int reflect_index(int q, int n) {
    if (n == 1) return 0;
    const int period = 2 * n - 2;
    int m = q % period;
    return m < n ? m : period - m;
}

}  // namespace

Tensor reflect_pad_to(const Tensor& x, int min_h, int min_w) {
    const int nh = std::max(x.h, min_h), nw = std::max(x.w, min_w);
    if (nh == x.h && nw == x.w) return x;
    Tensor y(x.c, nh, nw);
    for (int c = 0; c < x.c; ++c)
        for (int oy = 0; oy < nh; ++oy) {
            const int sy = reflect_index(oy, x.h);
            for (int ox = 0; ox < nw; ++ox)
                y.at(c, oy, ox) = x.at(c, sy, reflect_index(ox, x.w));
        }
    return y;
}

Tensor crop(const Tensor& x, int y0, int x0, int h, int w) {
    if (y0 < 0 || x0 < 0 || y0 + h > x.h || x0 + w > x.w)
        throw DataError("crop window out of bounds");
    Tensor y(x.c, h, w);
    for (int c = 0; c < x.c; ++c)
        for (int oy = 0; oy < h; ++oy)
            std::copy_n(x.plane(c) + static_cast<size_t>(y0 + oy) * x.w + x0, w,
                        y.plane(c) + static_cast<size_t>(oy) * w);
    return y;
}

Tensor hflip(const Tensor& x) {
    Tensor y(x.c, x.h, x.w);
    for (int c = 0; c < x.c; ++c)
        for (int oy = 0; oy < x.h; ++oy)
            for (int ox = 0; ox < x.w; ++ox) y.at(c, oy, ox) = x.at(c, oy, x.w - 1 - ox);
    return y;
}

PairedSample augment_pair(const PairedSample& s, int crop_size, double hflip_prob,
                          Rng& rng) {
    if (!s.x0.same_shape(s.c)) throw DataError("paired images differ in shape");
    PairedSample out;
    out.x0 = reflect_pad_to(s.x0, crop_size, crop_size);
    out.c = reflect_pad_to(s.c, crop_size, crop_size);
    const int y0 = rng.uniform_int(0, out.x0.h - crop_size);
    const int x0 = rng.uniform_int(0, out.x0.w - crop_size);
    out.x0 = crop(out.x0, y0, x0, crop_size, crop_size);
    out.c = crop(out.c, y0, x0, crop_size, crop_size);
    if (rng.uniform() < hflip_prob) {
        out.x0 = hflip(out.x0);
        out.c = hflip(out.c);
    }
    return out;
}

}  // namespace lpdm
