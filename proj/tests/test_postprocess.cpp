#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <filesystem>
#include <string>
#include <vector>

#include "lpdm/dataset.h"
#include "lpdm/errors.h"
#include "lpdm/image_io.h"
#include "lpdm/postprocess.h"
#include "lpdm/rng.h"
#include "lpdm/schedule.h"

using namespace lpdm;
namespace fs = std::filesystem;

namespace {

Tensor random_tensor(int c, int h, int w, uint64_t seed, float scale = 1.0f) {
    Rng rng = Rng::substream(seed, 70);
    Tensor t(c, h, w);
    for (auto& v : t.v) v = scale * static_cast<float>(rng.uniform() * 2 - 1);
    return t;
}

/// Strictly local stub: 3x3 box mean of the first three input channels (zero
/// halo outside the frame), scaled by a timestep factor so t is observable.
class BoxModel : public NoiseModel {
  public:
    explicit BoxModel(int in_c) : in_c_(in_c) {}
    int input_channels() const override { return in_c_; }
    void backward(const Tensor&) override {}
    std::vector<ParamTensor*> params() override { return {}; }

    Tensor last_input;
    int last_t = -1;

  protected:
    Tensor run(const Tensor& x, int t, bool) override {
        last_input = x;
        last_t = t;
        Tensor y(3, x.h, x.w);
        const float scale = 0.1f * (1.0f + static_cast<float>(t) / 1000.0f);
        for (int c = 0; c < 3; ++c)
            for (int yy = 0; yy < x.h; ++yy)
                for (int xx = 0; xx < x.w; ++xx) {
                    float acc = 0;
                    for (int dy = -1; dy <= 1; ++dy)
                        for (int dx = -1; dx <= 1; ++dx) {
                            const int sy = yy + dy, sx = xx + dx;
                            if (sy >= 0 && sy < x.h && sx >= 0 && sx < x.w)
                                acc += x.at(c, sy, sx);
                        }
                    y.at(c, yy, xx) = scale * acc / 9.0f;
                }
        return y;
    }

  private:
    int in_c_;
};

fs::path fresh_dir(const std::string& stem) {
    static int counter = 0;
    const auto p =
        fs::temp_directory_path() / ("lpdm_pp_" + stem + std::to_string(counter++));
    fs::remove_all(p);
    fs::create_directories(p);
    return p;
}

}  // namespace

TEST_CASE("timestep ordering is validated") {
    const DiffusionSchedule sched = build_linear_schedule(1000, 0.00085, 0.012);
    PostprocessConfig cfg;
    CHECK_NOTHROW(cfg.validate(sched.T));
    cfg.s = 0;
    CHECK_NOTHROW(cfg.validate(sched.T));
    cfg.s = -1;
    CHECK_THROWS_AS(cfg.validate(sched.T), ConfigError);
    cfg.s = 300;
    cfg.phi = 300;
    CHECK_THROWS_AS(cfg.validate(sched.T), ConfigError);
    cfg.s = 30;
    cfg.phi = 1000;
    CHECK_THROWS_AS(cfg.validate(sched.T), ConfigError);
    cfg.phi = 999;
    CHECK_NOTHROW(cfg.validate(sched.T));
}

TEST_CASE("padding to a multiple only grows the right and bottom") {
    int oh = 0, ow = 0;
    const Tensor a = random_tensor(3, 600, 400, 1);
    const Tensor ap = pad_to_multiple(a, 16, oh, ow);
    CHECK(oh == 600);
    CHECK(ow == 400);
    CHECK(ap.h == 608);
    CHECK(ap.w == 400);
    const Tensor b = random_tensor(3, 17, 17, 2);
    const Tensor bp = pad_to_multiple(b, 16, oh, ow);
    CHECK(bp.h == 32);
    CHECK(bp.w == 32);
    // Crop-back inverts the padding bit for bit.
    CHECK(crop_to_original(bp, 17, 17).v == b.v);
    CHECK(crop_to_original(ap, 600, 400).v == a.v);
}

TEST_CASE("noise estimation runs at phi on the unaltered input") {
    BoxModel model(6);
    const Tensor x = random_tensor(3, 32, 32, 3, 0.5f);
    const Tensor c = random_tensor(3, 32, 32, 4, 0.5f);
    estimate_noise(model, x, &c, 300);
    CHECK(model.last_t == 300);
    REQUIRE(model.last_input.c == 6);
    for (size_t i = 0; i < x.numel(); ++i) {
        CHECK(model.last_input.v[i] == x.v[i]);
        CHECK(model.last_input.v[x.numel() + i] == c.v[i]);
    }

    const Tensor bad = random_tensor(3, 32, 16, 5);
    CHECK_THROWS_AS(estimate_noise(model, x, &bad, 300), DataError);
    BoxModel model3(3);
    CHECK_THROWS_AS(estimate_noise(model3, x, &c, 300), ConfigError);
}

TEST_CASE("zero correction strength returns the input untouched") {
    BoxModel model(6);
    const DiffusionSchedule sched = build_linear_schedule(1000, 0.00085, 0.012);
    const Tensor x = random_tensor(3, 17, 21, 6, 0.9f);
    const Tensor c = random_tensor(3, 17, 21, 7, 0.9f);
    PostprocessConfig cfg;
    cfg.s = 0;
    const Tensor out = postprocess_image(model, sched, x, &c, cfg);
    REQUIRE(out.same_shape(x));
    CHECK(out.v == x.v);
    CHECK(model.forward_calls() == 1);
}

TEST_CASE("larger strength subtracts more") {
    BoxModel model(6);
    const DiffusionSchedule sched = build_linear_schedule(1000, 0.00085, 0.012);
    const Tensor x = random_tensor(3, 32, 32, 8, 0.5f);
    const Tensor c = random_tensor(3, 32, 32, 9, 0.5f);
    double prev = -1;
    for (int s : {1, 10, 50, 100}) {
        PostprocessConfig cfg;
        cfg.s = s;
        const Tensor out = postprocess_image(model, sched, x, &c, cfg);
        double move = 0;
        for (size_t i = 0; i < x.numel(); ++i)
            move += std::fabs(static_cast<double>(out.v[i]) - x.v[i]);
        CHECK(move > prev);
        prev = move;
    }
}

TEST_CASE("every processed image costs exactly one forward pass") {
    BoxModel model(6);
    const DiffusionSchedule sched = build_linear_schedule(1000, 0.00085, 0.012);
    PostprocessConfig cfg;
    for (int i = 1; i <= 3; ++i) {
        const Tensor x = random_tensor(3, 32, 32, 10 + i, 0.5f);
        const Tensor c = random_tensor(3, 32, 32, 20 + i, 0.5f);
        postprocess_image(model, sched, x, &c, cfg);
        CHECK(model.forward_calls() == static_cast<uint64_t>(i));
    }
}

TEST_CASE("variant wiring is enforced and honored") {
    const DiffusionSchedule sched = build_linear_schedule(1000, 0.00085, 0.012);
    const Tensor x = random_tensor(3, 32, 32, 30, 0.5f);
    const Tensor c = random_tensor(3, 32, 32, 31, 0.5f);

    BoxModel model6(6);
    PostprocessConfig cfg;
    cfg.variant = Variant::ULPDM;  // needs a 3-channel model
    CHECK_THROWS_AS(postprocess_image(model6, sched, x, &c, cfg), ConfigError);
    cfg.variant = Variant::LPDM;  // needs a conditioning image
    CHECK_THROWS_AS(postprocess_image(model6, sched, x, nullptr, cfg), ConfigError);

    // The unconditioned variant gives the same answer with or without c.
    BoxModel model3(3);
    cfg.variant = Variant::ULPDM;
    const Tensor u1 = postprocess_image(model3, sched, x, nullptr, cfg);
    const Tensor u2 = postprocess_image(model3, sched, x, &c, cfg);
    CHECK(u1.v == u2.v);
    CHECK(model3.last_t == cfg.phi);

    // Direct prediction: the model output at t = 0 is the answer itself.
    BoxModel direct(6);
    cfg.variant = Variant::DLPDM;
    const Tensor d = postprocess_image(direct, sched, x, &c, cfg);
    CHECK(direct.last_t == 0);
    BoxModel ref(6);
    const Tensor expect =
        clamped(ref.forward(concat_channels(x, c), 0, false), -1.0f, 1.0f);
    CHECK(d.v == expect.v);
}

TEST_CASE("results away from the border do not depend on the padding") {
    // A strictly local model must produce identical interior output whether
    // the image is processed as-is or embedded in a larger padded frame.
    const DiffusionSchedule sched = build_linear_schedule(1000, 0.00085, 0.012);
    const Tensor x = random_tensor(3, 32, 32, 40, 0.5f);
    const Tensor c = random_tensor(3, 32, 32, 41, 0.5f);
    PostprocessConfig cfg;

    BoxModel model(6);
    const Tensor small = postprocess_image(model, sched, x, &c, cfg);

    BoxModel model2(6);
    const Tensor xp = reflect_pad_to(x, 48, 48);
    const Tensor cp = reflect_pad_to(c, 48, 48);
    const Tensor padded = postprocess_image(model2, sched, xp, &cp, cfg);
    for (int ch = 0; ch < 3; ++ch)
        for (int y = 0; y < 31; ++y)
            for (int xx = 0; xx < 31; ++xx)
                CHECK(padded.at(ch, y, xx) == small.at(ch, y, xx));
}

TEST_CASE("shape mismatch between image and conditioning is a data error") {
    BoxModel model(6);
    const DiffusionSchedule sched = build_linear_schedule(1000, 0.00085, 0.012);
    const Tensor x = random_tensor(3, 32, 32, 50);
    const Tensor c = random_tensor(3, 48, 32, 51);
    CHECK_THROWS_AS(postprocess_image(model, sched, x, &c, PostprocessConfig{}),
                    DataError);
}

TEST_CASE("directory runner writes one output per matched input") {
    const auto enh = fresh_dir("enh"), cond = fresh_dir("cond"), out = fresh_dir("out");
    for (const char* name : {"a.png", "b.png", "c.png"}) {
        write_image_tensor((enh / name).string(), random_tensor(3, 24, 20, 60, 0.5f));
        write_image_tensor((cond / name).string(), random_tensor(3, 24, 20, 61, 0.5f));
    }
    BoxModel model(6);
    const DiffusionSchedule sched = build_linear_schedule(1000, 0.00085, 0.012);
    const int n = postprocess_directory(model, sched, enh.string(), cond.string(),
                                        out.string(), PostprocessConfig{}, 1);
    CHECK(n == 3);
    CHECK(model.forward_calls() == 3);
    for (const char* name : {"a.png", "b.png", "c.png"}) CHECK(fs::exists(out / name));
}

TEST_CASE("directory runner demands a conditioning partner per image") {
    const auto enh = fresh_dir("enh"), cond = fresh_dir("cond"), out = fresh_dir("out");
    write_image_tensor((enh / "a.png").string(), random_tensor(3, 16, 16, 62, 0.5f));
    BoxModel model(6);
    const DiffusionSchedule sched = build_linear_schedule(1000, 0.00085, 0.012);
    CHECK_THROWS_AS(postprocess_directory(model, sched, enh.string(), cond.string(),
                                          out.string(), PostprocessConfig{}, 1),
                    DataError);
    CHECK_THROWS_AS(postprocess_directory(model, sched, "/nonexistent", cond.string(),
                                          out.string(), PostprocessConfig{}, 1),
                    DataError);
}

TEST_CASE("unconditioned directory runs need no conditioning directory") {
    const auto enh = fresh_dir("enh"), out = fresh_dir("out");
    write_image_tensor((enh / "a.png").string(), random_tensor(3, 16, 16, 63, 0.5f));
    BoxModel model(3);
    const DiffusionSchedule sched = build_linear_schedule(1000, 0.00085, 0.012);
    PostprocessConfig cfg;
    cfg.variant = Variant::ULPDM;
    const int n =
        postprocess_directory(model, sched, enh.string(), "", out.string(), cfg, 1);
    CHECK(n == 1);
    CHECK(fs::exists(out / "a.png"));
}

TEST_CASE("output stays inside the displayable range") {
    class HugeModel : public NoiseModel {
      public:
        int input_channels() const override { return 6; }
        void backward(const Tensor&) override {}
        std::vector<ParamTensor*> params() override { return {}; }

      protected:
        Tensor run(const Tensor& x, int, bool) override {
            Tensor y(3, x.h, x.w);
            y.fill(50.0f);
            return y;
        }
    };
    HugeModel model;
    const DiffusionSchedule sched = build_linear_schedule(1000, 0.00085, 0.012);
    const Tensor x = random_tensor(3, 16, 16, 64, 0.5f);
    const Tensor c = random_tensor(3, 16, 16, 65, 0.5f);
    const Tensor out = postprocess_image(model, sched, x, &c, PostprocessConfig{});
    for (float v : out.v) {
        CHECK(v >= -1.0f);
        CHECK(v <= 1.0f);
    }
}
