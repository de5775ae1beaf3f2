#include "lpdm/train.h"

#include <chrono>
#include <cmath>
#include <condition_variable>
#include <cstdio>
#include <map>
#include <memory>
#include <mutex>
#include <thread>

#include "lpdm/errors.h"
#include "lpdm/log.h"

namespace lpdm {

Variant variant_from_string(const std::string& s) {
    if (s == "lpdm") return Variant::LPDM;
    if (s == "dlpdm") return Variant::DLPDM;
    if (s == "ulpdm") return Variant::ULPDM;
    throw ConfigError("unknown variant '" + s + "' (expected lpdm, dlpdm or ulpdm)");
}

std::string to_string(Variant v) {
    switch (v) {
        case Variant::LPDM: return "lpdm";
        case Variant::DLPDM: return "dlpdm";
        case Variant::ULPDM: return "ulpdm";
    }
    return "lpdm";
}

int variant_input_channels(Variant v) { return v == Variant::ULPDM ? 3 : 6; }

void TrainConfig::validate() const {
    if (total_steps < 1) throw ConfigError("total_steps must be >= 1");
    if (!(lr > 0)) throw ConfigError("lr must be positive");
    if (adamw_beta1 < 0 || adamw_beta1 >= 1 || adamw_beta2 < 0 || adamw_beta2 >= 1)
        throw ConfigError("adamw betas must lie in [0, 1)");
    if (weight_decay < 0) throw ConfigError("weight_decay must be >= 0");
    if (micro_batch < 1 || accumulation < 1)
        throw ConfigError("micro_batch and accumulation must be >= 1");
    if (crop_size < 16 || crop_size % 16 != 0)
        throw ConfigError("crop_size must be a positive multiple of 16");
    if (hflip_prob < 0 || hflip_prob > 1)
        throw ConfigError("hflip_prob must lie in [0, 1]");
    if (checkpoint_every < 1) throw ConfigError("checkpoint_every must be >= 1");
    if (threads < 1) throw ConfigError("threads must be >= 1");
}

AdamW::AdamW(std::vector<ParamTensor*> params, double lr, double beta1, double beta2,
             double weight_decay, double eps)
    : params_(std::move(params)), lr_(lr), b1_(beta1), b2_(beta2), wd_(weight_decay),
      eps_(eps) {
    m_.reserve(params_.size());
    v_.reserve(params_.size());
    for (const auto* p : params_) {
        m_.emplace_back(p->numel(), 0.0f);
        v_.emplace_back(p->numel(), 0.0f);
    }
}

void AdamW::step() {
    ++t_;
    const float bc1 = static_cast<float>(1.0 - std::pow(b1_, t_));
    const float bc2 = static_cast<float>(1.0 - std::pow(b2_, t_));
    const float b1 = static_cast<float>(b1_), b2 = static_cast<float>(b2_);
    const float lr = static_cast<float>(lr_), eps = static_cast<float>(eps_);
    const float decay = static_cast<float>(1.0 - lr_ * wd_);
    for (size_t pi = 0; pi < params_.size(); ++pi) {
        float* w = params_[pi]->w.data();
        const float* g = params_[pi]->g.data();
        float* m = m_[pi].data();
        float* v = v_[pi].data();
        const size_t n = params_[pi]->numel();
#pragma omp parallel for simd if (n > 16384)
        for (size_t i = 0; i < n; ++i) {
            m[i] = b1 * m[i] + (1.0f - b1) * g[i];
            v[i] = b2 * v[i] + (1.0f - b2) * g[i] * g[i];
            w[i] *= decay;
            w[i] -= lr * ((m[i] / bc1) / (std::sqrt(v[i] / bc2) + eps));
        }
    }
}

void AdamW::zero_grad() {
    for (auto* p : params_) p->zero_grad();
}

void AdamW::restore(int t, std::vector<std::vector<float>> m,
                    std::vector<std::vector<float>> v) {
    if (m.size() != params_.size() || v.size() != params_.size())
        throw DataError("optimizer state tensor count mismatch");
    for (size_t i = 0; i < params_.size(); ++i)
        if (m[i].size() != params_[i]->numel() || v[i].size() != params_[i]->numel())
            throw DataError("optimizer state shape mismatch for " + params_[i]->name);
    t_ = t;
    m_ = std::move(m);
    v_ = std::move(v);
}

SampleDraw draw_sample_noise(uint64_t seed, int step, int sample_idx, int T, int c,
                             int h, int w) {
    Rng rng = Rng::substream(seed, static_cast<uint64_t>(step),
                             static_cast<uint64_t>(sample_idx), kRngUseNoise);
    SampleDraw d;
    d.t = rng.uniform_int(1, T);
    d.eps = Tensor(c, h, w);
    for (auto& v : d.eps.v) v = rng.normal();
    return d;
}

double train_sample(NoiseModel& model, const DiffusionSchedule& sched,
                    const PairedSample& s, const SampleDraw& draw, Variant variant,
                    double grad_scale) {
    const Tensor x_t = q_sample(sched, s.x0, draw.t, draw.eps);
    const Tensor& target = variant == Variant::DLPDM ? s.x0 : draw.eps;
    const int model_t = variant == Variant::DLPDM ? 0 : draw.t;
    const Tensor input =
        variant == Variant::ULPDM ? x_t : concat_channels(x_t, s.c);

    const Tensor out = model.forward(input, model_t, true);
    const size_t n = out.numel();
    Tensor gy(out.c, out.h, out.w);
    double loss = 0;
    const float scale = static_cast<float>(2.0 * grad_scale / static_cast<double>(n));
    for (size_t i = 0; i < n; ++i) {
        const float d = out.v[i] - target.v[i];
        loss += static_cast<double>(d) * d;
        gy.v[i] = scale * d;
    }
    model.backward(gy);
    return loss / static_cast<double>(n);
}

namespace {

struct Prepared {
    PairedSample sample;
    SampleDraw draw;
};

Prepared prepare_sample(const TrainDataset& data, const DiffusionSchedule& sched,
                        const TrainConfig& cfg, int step, int idx) {
    Rng aug = Rng::substream(cfg.seed, static_cast<uint64_t>(step),
                             static_cast<uint64_t>(idx), kRngUseAugment);
    const size_t di = static_cast<size_t>(
        aug.uniform_int(0, static_cast<int>(data.size()) - 1));
    Prepared p;
    p.sample = augment_pair(data.get(di), cfg.crop_size, cfg.hflip_prob, aug);
    p.draw = draw_sample_noise(cfg.seed, step, idx, sched.T, 3, cfg.crop_size,
                               cfg.crop_size);
    return p;
}

/// Workers fill an ordered bounded buffer of prepared samples; the training
/// loop consumes them strictly in global-index order, so the worker count
/// never affects results.
class Prefetcher {
  public:
    Prefetcher(const TrainDataset& data, const DiffusionSchedule& sched,
               const TrainConfig& cfg, uint64_t first, uint64_t total)
        : data_(data), sched_(sched), cfg_(cfg), total_(total),
          capacity_(static_cast<size_t>(2 * cfg.micro_batch)), next_consumed_(first) {
        const int workers = cfg.threads - 1;
        for (int wk = 0; wk < workers; ++wk)
            threads_.emplace_back([this, first, wk, workers] {
                run(first + static_cast<uint64_t>(wk), workers);
            });
    }

    ~Prefetcher() {
        {
            std::lock_guard<std::mutex> lk(mu_);
            stop_ = true;
        }
        space_.notify_all();
        ready_.notify_all();
        for (auto& t : threads_) t.join();
    }

    Prepared next() {
        if (threads_.empty()) {
            const uint64_t g = next_consumed_++;
            const int step = static_cast<int>(g / cfg_.effective_batch()) + 1;
            const int idx = static_cast<int>(g % cfg_.effective_batch());
            return prepare_sample(data_, sched_, cfg_, step, idx);
        }
        std::unique_lock<std::mutex> lk(mu_);
        const uint64_t g = next_consumed_;
        ready_.wait(lk, [&] { return buffer_.count(g) != 0 || error_ != nullptr; });
        if (buffer_.count(g) == 0 && error_) std::rethrow_exception(error_);
        Prepared p = std::move(buffer_[g]);
        buffer_.erase(g);
        ++next_consumed_;
        space_.notify_all();
        return p;
    }

  private:
    void run(uint64_t start, int workers) {
        for (uint64_t g = start; g < total_; g += static_cast<uint64_t>(workers)) {
            const int step = static_cast<int>(g / cfg_.effective_batch()) + 1;
            const int idx = static_cast<int>(g % cfg_.effective_batch());
            Prepared p;
            try {
                p = prepare_sample(data_, sched_, cfg_, step, idx);
            } catch (...) {
                std::lock_guard<std::mutex> lk(mu_);
                error_ = std::current_exception();
                stop_ = true;
                ready_.notify_all();
                space_.notify_all();
                return;
            }
            std::unique_lock<std::mutex> lk(mu_);
            space_.wait(lk, [&] { return stop_ || g < next_consumed_ + capacity_; });
            if (stop_) return;
            buffer_.emplace(g, std::move(p));
            ready_.notify_all();
        }
    }

    const TrainDataset& data_;
    const DiffusionSchedule& sched_;
    const TrainConfig& cfg_;
    const uint64_t total_;
    const size_t capacity_;
    std::vector<std::thread> threads_;
    std::mutex mu_;
    std::condition_variable ready_, space_;
    std::map<uint64_t, Prepared> buffer_;
    uint64_t next_consumed_ = 0;
    bool stop_ = false;
    std::exception_ptr error_;
};

}  // namespace

double train_loop(NoiseModel& model, AdamW& opt, const TrainDataset& data,
                  const DiffusionSchedule& sched, const TrainConfig& cfg,
                  const std::string& loss_csv_path,
                  const std::function<void(int step)>& on_checkpoint, int start_step) {
    cfg.validate();
    if (start_step < 1) throw ConfigError("start_step must be >= 1");
    if (data.size() == 0) throw DataError("training dataset is empty");
    if (model.input_channels() != variant_input_channels(cfg.variant))
        throw ConfigError("model has " + std::to_string(model.input_channels()) +
                          " input channels but variant " + to_string(cfg.variant) +
                          " needs " + std::to_string(variant_input_channels(cfg.variant)));
    if (start_step > cfg.total_steps) {
        log_info("nothing to train: start step " + std::to_string(start_step) +
                 " is past total_steps " + std::to_string(cfg.total_steps));
        return 0;
    }

    const std::unique_ptr<std::FILE, int (*)(std::FILE*)> csv(
        std::fopen(loss_csv_path.c_str(), start_step == 1 ? "w" : "a"), &std::fclose);
    if (!csv) throw DataError("cannot open loss log '" + loss_csv_path + "'");
    if (start_step == 1) std::fprintf(csv.get(), "step,loss,wall_time\n");

    const int b_eff = cfg.effective_batch();
    const double grad_scale = 1.0 / static_cast<double>(b_eff);
    Prefetcher prefetch(data, sched, cfg,
                        static_cast<uint64_t>(start_step - 1) *
                            static_cast<uint64_t>(b_eff),
                        static_cast<uint64_t>(cfg.total_steps) *
                            static_cast<uint64_t>(b_eff));
    const auto start = std::chrono::steady_clock::now();
    double loss = 0;
    for (int step = start_step; step <= cfg.total_steps; ++step) {
        opt.zero_grad();
        loss = 0;
        for (int idx = 0; idx < b_eff; ++idx) {
            const Prepared p = prefetch.next();
            loss += grad_scale * train_sample(model, sched, p.sample, p.draw,
                                              cfg.variant, grad_scale);
        }
        if (!std::isfinite(loss))
            throw NumericError("non-finite loss at step " + std::to_string(step));
        opt.step();
        const double wall =
            std::chrono::duration<double>(std::chrono::steady_clock::now() - start)
                .count();
        std::fprintf(csv.get(), "%d,%.9g,%.3f\n", step, loss, wall);
        std::fflush(csv.get());
        if (step % cfg.checkpoint_every == 0 || step == cfg.total_steps)
            if (on_checkpoint) on_checkpoint(step);
        if (step == start_step || step % 100 == 0 || step == cfg.total_steps)
            log_info("step " + std::to_string(step) + " loss " + std::to_string(loss));
    }
    return loss;
}

Checkpoint build_train_checkpoint(UNetModel& model, const AdamW& opt,
                                  const TrainConfig& cfg,
                                  const DiffusionSchedule& sched, int step) {
    Checkpoint ck;
    meta_set_unet_config(ck, model.config());
    ck.meta["step"] = std::to_string(step);
    ck.meta["seed"] = std::to_string(cfg.seed);
    ck.meta["variant"] = to_string(cfg.variant);
    ck.meta["schedule.T"] = std::to_string(sched.T);
    char buf[64];
    std::snprintf(buf, sizeof(buf), "%.17g", sched.beta_start);
    ck.meta["schedule.beta_start"] = buf;
    std::snprintf(buf, sizeof(buf), "%.17g", sched.beta_end);
    ck.meta["schedule.beta_end"] = buf;
    ck.meta["schedule.mode"] = to_string(sched.mode);

    const auto ps = model.params();
    for (const auto* p : ps) ck.tensors.push_back({p->name, p->shape, p->w});
    for (size_t i = 0; i < ps.size(); ++i)
        ck.tensors.push_back({"opt.m/" + ps[i]->name, ps[i]->shape, opt.m()[i]});
    for (size_t i = 0; i < ps.size(); ++i)
        ck.tensors.push_back({"opt.v/" + ps[i]->name, ps[i]->shape, opt.v()[i]});
    return ck;
}

void restore_model_params(const Checkpoint& ck, UNetModel& model) {
    for (auto* p : model.params()) {
        const TensorRecord* w = ck.find(p->name);
        if (!w) throw DataError("checkpoint missing tensor '" + p->name + "'");
        if (w->data.size() != p->numel())
            throw DataError("checkpoint tensor '" + p->name + "' has wrong size");
        p->w = w->data;
    }
}

int restore_train_checkpoint(const Checkpoint& ck, UNetModel& model, AdamW& opt) {
    const int step = std::stoi(ck.require("step"));
    auto ps = model.params();
    std::vector<std::vector<float>> m, v;
    for (auto* p : ps) {
        const TensorRecord* w = ck.find(p->name);
        if (!w) throw DataError("checkpoint missing tensor '" + p->name + "'");
        if (w->data.size() != p->numel())
            throw DataError("checkpoint tensor '" + p->name + "' has wrong size");
        p->w = w->data;
        const TensorRecord* mr = ck.find("opt.m/" + p->name);
        const TensorRecord* vr = ck.find("opt.v/" + p->name);
        if (!mr || !vr)
            throw DataError("checkpoint missing optimizer state for '" + p->name + "'");
        m.push_back(mr->data);
        v.push_back(vr->data);
    }
    opt.restore(step, std::move(m), std::move(v));
    return step;
}

}  // namespace lpdm
