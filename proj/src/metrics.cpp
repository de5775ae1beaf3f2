#include "lpdm/metrics.h"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <limits>
#include <set>

#include "lpdm/errors.h"
#include "lpdm/image_io.h"
#include "lpdm/log.h"

namespace fs = std::filesystem;

namespace lpdm {

namespace {

void check_shapes(const Tensor& a, const Tensor& b) {
    if (!a.same_shape(b))
        throw DataError("metric inputs differ in shape: " + std::to_string(a.c) + "x" +
                        std::to_string(a.h) + "x" + std::to_string(a.w) + " vs " +
                        std::to_string(b.c) + "x" + std::to_string(b.h) + "x" +
                        std::to_string(b.w));
}

constexpr int kWin = 11;
constexpr double kSigma = 1.5;
constexpr double kC1 = 0.01 * 0.01;
constexpr double kC2 = 0.03 * 0.03;

std::vector<double> gaussian_window() {
    std::vector<double> k(kWin);
    double sum = 0;
    for (int i = 0; i < kWin; ++i) {
        const double d = i - (kWin - 1) / 2.0;
        k[i] = std::exp(-0.5 * d * d / (kSigma * kSigma));
        sum += k[i];
    }
    for (auto& v : k) v /= sum;
    return k;
}

/// Valid-mode separable Gaussian filtering of an h x w double plane.
std::vector<double> filter_valid(const std::vector<double>& img, int h, int w,
                                 const std::vector<double>& k) {
    const int oh = h - kWin + 1, ow = w - kWin + 1;
    std::vector<double> tmp(static_cast<size_t>(h) * ow);
    for (int y = 0; y < h; ++y)
        for (int x = 0; x < ow; ++x) {
            double acc = 0;
            for (int i = 0; i < kWin; ++i) acc += k[i] * img[static_cast<size_t>(y) * w + x + i];
            tmp[static_cast<size_t>(y) * ow + x] = acc;
        }
    std::vector<double> out(static_cast<size_t>(oh) * ow);
    for (int y = 0; y < oh; ++y)
        for (int x = 0; x < ow; ++x) {
            double acc = 0;
            for (int i = 0; i < kWin; ++i) acc += k[i] * tmp[static_cast<size_t>(y + i) * ow + x];
            out[static_cast<size_t>(y) * ow + x] = acc;
        }
    return out;
}

}  // namespace

double psnr(const Tensor& a, const Tensor& b) {
    check_shapes(a, b);
    double acc = 0;
    for (size_t i = 0; i < a.numel(); ++i) {
        const double av = 0.5 * (static_cast<double>(a.v[i]) + 1.0);
        const double bv = 0.5 * (static_cast<double>(b.v[i]) + 1.0);
        acc += (av - bv) * (av - bv);
    }
    const double mse = acc / static_cast<double>(a.numel());
    if (mse == 0.0) return std::numeric_limits<double>::infinity();
    return 10.0 * std::log10(1.0 / mse);
}

double ssim(const Tensor& a, const Tensor& b) {
    check_shapes(a, b);
    if (a.h < kWin || a.w < kWin)
        throw DataError("ssim needs at least " + std::to_string(kWin) + "x" +
                        std::to_string(kWin) + " pixels, got " + std::to_string(a.w) +
                        "x" + std::to_string(a.h));
    const auto k = gaussian_window();
    const int n = a.plane();
    double channel_sum = 0;
    for (int c = 0; c < a.c; ++c) {
        std::vector<double> pa(n), pb(n), paa(n), pbb(n), pab(n);
        const float *fa = a.plane(c), *fb = b.plane(c);
        for (int i = 0; i < n; ++i) {
            pa[i] = 0.5 * (static_cast<double>(fa[i]) + 1.0);
            pb[i] = 0.5 * (static_cast<double>(fb[i]) + 1.0);
            paa[i] = pa[i] * pa[i];
            pbb[i] = pb[i] * pb[i];
            pab[i] = pa[i] * pb[i];
        }
        const auto mu_a = filter_valid(pa, a.h, a.w, k);
        const auto mu_b = filter_valid(pb, a.h, a.w, k);
        const auto m_aa = filter_valid(paa, a.h, a.w, k);
        const auto m_bb = filter_valid(pbb, a.h, a.w, k);
        const auto m_ab = filter_valid(pab, a.h, a.w, k);
        double acc = 0;
        for (size_t i = 0; i < mu_a.size(); ++i) {
            const double va = m_aa[i] - mu_a[i] * mu_a[i];
            const double vb = m_bb[i] - mu_b[i] * mu_b[i];
            const double cov = m_ab[i] - mu_a[i] * mu_b[i];
            acc += ((2.0 * mu_a[i] * mu_b[i] + kC1) * (2.0 * cov + kC2)) /
                   ((mu_a[i] * mu_a[i] + mu_b[i] * mu_b[i] + kC1) * (va + vb + kC2));
        }
        channel_sum += acc / static_cast<double>(mu_a.size());
    }
    return channel_sum / a.c;
}

double mae(const Tensor& a, const Tensor& b) {
    check_shapes(a, b);
    double acc = 0;
    for (size_t i = 0; i < a.numel(); ++i) {
        const double av = 0.5 * (static_cast<double>(a.v[i]) + 1.0);
        const double bv = 0.5 * (static_cast<double>(b.v[i]) + 1.0);
        acc += std::fabs(av - bv);
    }
    return acc / static_cast<double>(a.numel());
}

std::string MetricReport::csv() const {
    std::string out = "filename,psnr_db,ssim,mae\n";
    char buf[256];
    for (const auto& r : per_image) {
        std::snprintf(buf, sizeof(buf), "%s,%.9g,%.9g,%.9g\n", r.filename.c_str(),
                      r.psnr_db, r.ssim, r.mae);
        out += buf;
    }
    std::snprintf(buf, sizeof(buf), "__mean__,%.9g,%.9g,%.9g\n", mean_psnr, mean_ssim,
                  mean_mae);
    out += buf;
    return out;
}

MetricReport evaluate_dirs(const std::string& results_dir,
                           const std::string& truth_dir) {
    if (!fs::is_directory(results_dir))
        throw DataError("results directory does not exist: " + results_dir);
    if (!fs::is_directory(truth_dir))
        throw DataError("ground-truth directory does not exist: " + truth_dir);

    std::set<std::string> res, tru;
    for (const auto& e : fs::directory_iterator(results_dir))
        if (e.is_regular_file()) res.insert(e.path().filename().string());
    for (const auto& e : fs::directory_iterator(truth_dir))
        if (e.is_regular_file()) tru.insert(e.path().filename().string());

    MetricReport rep;
    for (const auto& n : res)
        if (!tru.count(n)) rep.unmatched.push_back(n);
    for (const auto& n : tru)
        if (!res.count(n)) rep.unmatched.push_back(n);
    for (const auto& n : rep.unmatched)
        log_info("warning: unmatched file " + n);

    double sp = 0, ss = 0, sm = 0;
    int psnr_count = 0;
    for (const auto& n : res) {
        if (!tru.count(n)) continue;
        try {
            const Tensor a = read_image_tensor((fs::path(results_dir) / n).string());
            const Tensor b = read_image_tensor((fs::path(truth_dir) / n).string());
            MetricRow row{n, psnr(a, b), ssim(a, b), mae(a, b)};
            if (std::isinf(row.psnr_db)) {
                log_info("warning: identical pair " + n +
                         " has infinite PSNR; excluded from the PSNR mean");
                ++rep.psnr_excluded;
            } else {
                sp += row.psnr_db;
                ++psnr_count;
            }
            ss += row.ssim;
            sm += row.mae;
            rep.per_image.push_back(std::move(row));
        } catch (const std::exception& e) {
            log_error(std::string("cannot evaluate ") + n + ": " + e.what());
            rep.failed.push_back(n);
        }
    }
    std::sort(rep.per_image.begin(), rep.per_image.end(),
              [](const MetricRow& x, const MetricRow& y) { return x.filename < y.filename; });
    const auto cnt = static_cast<double>(rep.per_image.size());
    if (!rep.per_image.empty()) {
        rep.mean_psnr = psnr_count ? sp / psnr_count : 0.0;
        rep.mean_ssim = ss / cnt;
        rep.mean_mae = sm / cnt;
    }
    return rep;
}

}  // namespace lpdm
