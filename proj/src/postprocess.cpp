#include "lpdm/postprocess.h"

#include <omp.h>

#include <algorithm>
#include <filesystem>

#include "lpdm/dataset.h"
#include "lpdm/errors.h"
#include "lpdm/image_io.h"
#include "lpdm/log.h"

namespace fs = std::filesystem;

namespace lpdm {

void PostprocessConfig::validate(int T) const {
    if (s < 0) throw ConfigError("s must be >= 0");
    if (s >= phi)
        throw ConfigError("s (" + std::to_string(s) + ") must be strictly less than phi (" +
                          std::to_string(phi) + ")");
    if (phi >= T)
        throw ConfigError("phi (" + std::to_string(phi) + ") must be strictly less than T (" +
                          std::to_string(T) + ")");
    if (s > phi / 2)
        log_info("warning: s=" + std::to_string(s) + " exceeds phi/2=" +
                 std::to_string(phi / 2) +
                 "; the correction strength should sit well below the detection timestep");
}

Tensor pad_to_multiple(const Tensor& x, int multiple, int& orig_h, int& orig_w) {
    orig_h = x.h;
    orig_w = x.w;
    const int nh = (x.h + multiple - 1) / multiple * multiple;
    const int nw = (x.w + multiple - 1) / multiple * multiple;
    return reflect_pad_to(x, nh, nw);
}

Tensor crop_to_original(const Tensor& x, int orig_h, int orig_w) {
    if (x.h == orig_h && x.w == orig_w) return x;
    return crop(x, 0, 0, orig_h, orig_w);
}

Tensor estimate_noise(NoiseModel& model, const Tensor& x_eta, const Tensor* c,
                      int phi) {
    Tensor input;
    if (c != nullptr) {
        if (!x_eta.same_shape(*c))
            throw DataError("enhanced image " + std::to_string(x_eta.w) + "x" +
                            std::to_string(x_eta.h) + " and conditioning image " +
                            std::to_string(c->w) + "x" + std::to_string(c->h) +
                            " differ in shape");
        input = concat_channels(x_eta, *c);
    } else {
        input = x_eta;
    }
    if (input.c != model.input_channels())
        throw ConfigError("model expects " + std::to_string(model.input_channels()) +
                          " input channels, got " + std::to_string(input.c));
    return model.forward(input, phi, false);
}

Tensor postprocess_image(NoiseModel& model, const DiffusionSchedule& sched,
                         const Tensor& x_eta, const Tensor* c,
                         const PostprocessConfig& cfg) {
    cfg.validate(sched.T);
    const bool conditioned = cfg.variant != Variant::ULPDM;
    if (conditioned && c == nullptr)
        throw ConfigError("variant " + to_string(cfg.variant) +
                          " needs a conditioning image");
    if (model.input_channels() != variant_input_channels(cfg.variant))
        throw ConfigError("variant " + to_string(cfg.variant) + " needs a " +
                          std::to_string(variant_input_channels(cfg.variant)) +
                          "-channel model, checkpoint has " +
                          std::to_string(model.input_channels()));

    int oh = 0, ow = 0;
    const Tensor x_pad = pad_to_multiple(x_eta, 16, oh, ow);
    Tensor c_pad;
    if (conditioned) {
        int choh = 0, chow = 0;
        c_pad = pad_to_multiple(*c, 16, choh, chow);
    }

    Tensor out;
    if (cfg.variant == Variant::DLPDM) {
        // The direct-prediction model is the whole correction: one forward at
        // t = 0, no schedule step.
        out = model.forward(concat_channels(x_pad, c_pad), 0, false);
    } else {
        const Tensor n_phi =
            estimate_noise(model, x_pad, conditioned ? &c_pad : nullptr, cfg.phi);
        out = correct(sched, x_pad, n_phi, cfg.s);
    }
    return clamped(crop_to_original(out, oh, ow), -1.0f, 1.0f);
}

int postprocess_directory(NoiseModel& model, const DiffusionSchedule& sched,
                          const std::string& enhanced_dir, const std::string& cond_dir,
                          const std::string& out_dir, const PostprocessConfig& cfg,
                          int threads) {
    if (!fs::is_directory(enhanced_dir))
        throw DataError("enhanced-image directory does not exist: " + enhanced_dir);
    const bool conditioned = cfg.variant != Variant::ULPDM;
    if (conditioned && !fs::is_directory(cond_dir))
        throw DataError("conditioning directory does not exist: " + cond_dir);
    fs::create_directories(out_dir);
    if (threads >= 1) omp_set_num_threads(threads);

    std::vector<std::string> names;
    for (const auto& e : fs::directory_iterator(enhanced_dir))
        if (e.is_regular_file()) names.push_back(e.path().filename().string());
    std::sort(names.begin(), names.end());
    if (names.empty()) log_info("warning: no images found under " + enhanced_dir);

    // Images run in order through the one shared model; kernel-level OpenMP
    // provides the parallelism.
    int written = 0;
    for (const auto& name : names) {
        const Tensor x_eta = read_image_tensor((fs::path(enhanced_dir) / name).string());
        Tensor c;
        if (conditioned) {
            const fs::path cpath = fs::path(cond_dir) / name;
            if (!fs::exists(cpath))
                throw DataError("no conditioning image for '" + name + "' in " + cond_dir);
            c = read_image_tensor(cpath.string());
        }
        const Tensor out =
            postprocess_image(model, sched, x_eta, conditioned ? &c : nullptr, cfg);
        write_image_tensor((fs::path(out_dir) / name).string(), out);
        ++written;
        log_debug("postprocessed " + name);
    }
    return written;
}

}  // namespace lpdm
