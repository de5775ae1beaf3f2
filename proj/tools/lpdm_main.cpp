#include <omp.h>

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <numeric>
#include <sstream>

#include "CLI11.hpp"
#include "lpdm/baseline.h"
#include "lpdm/checkpoint.h"
#include "lpdm/config.h"
#include "lpdm/dataset.h"
#include "lpdm/errors.h"
#include "lpdm/image_io.h"
#include "lpdm/log.h"
#include "lpdm/metrics.h"
#include "lpdm/model.h"
#include "lpdm/postprocess.h"
#include "lpdm/schedule.h"
#include "lpdm/train.h"

namespace fs = std::filesystem;
using namespace lpdm;

namespace {

std::vector<int> parse_int_list(const std::string& s, const std::string& what) {
    std::vector<int> out;
    std::istringstream ss(s);
    std::string item;
    while (std::getline(ss, item, ',')) {
        try {
            size_t used = 0;
            const int v = std::stoi(item, &used);
            if (used != item.size()) throw std::invalid_argument(item);
            out.push_back(v);
        } catch (const std::exception&) {
            throw ConfigError("cannot parse " + what + " entry '" + item + "'");
        }
    }
    if (out.empty()) throw ConfigError(what + " list is empty");
    return out;
}

/// Overrides not-given flags from a parsed config file; flags always win.
class FileOverrides {
  public:
    explicit FileOverrides(const std::map<std::string, std::string>& kv) : kv_(kv) {}

    template <typename T>
    void apply(const CLI::Option* opt, const std::string& key, T& var) {
        seen_.insert(key);
        if (opt->count() > 0) return;
        const auto it = kv_.find(key);
        if (it == kv_.end()) return;
        std::istringstream ss(it->second);
        T v{};
        if constexpr (std::is_same_v<T, std::string>) {
            v = it->second;
        } else {
            ss >> v;
            if (ss.fail() || !ss.eof())
                throw ConfigError("config value '" + it->second + "' is invalid for " + key);
        }
        var = v;
    }

    void reject_unknown() const {
        for (const auto& [k, v] : kv_)
            if (!seen_.count(k)) throw ConfigError("unknown config file key '" + k + "'");
    }

  private:
    const std::map<std::string, std::string>& kv_;
    std::set<std::string> seen_;
};

struct ModelFlags {
    std::string stage_channels = "128,256,512,512";
    int blocks_per_stage = 2;
    int time_embed_base_dim = 128;
    int time_embed_dim = 512;
    int attention_heads = 8;
    int groupnorm_groups = 32;
};

void add_model_flags(CLI::App* cmd, ModelFlags& mf,
                     std::map<std::string, CLI::Option*>& opts) {
    opts["stage_channels"] = cmd->add_option("--stage-channels", mf.stage_channels,
                                             "Channel widths of the stages, comma list")
                                 ->capture_default_str();
    opts["blocks_per_stage"] =
        cmd->add_option("--blocks-per-stage", mf.blocks_per_stage)->capture_default_str();
    opts["time_embed_base_dim"] =
        cmd->add_option("--time-embed-base-dim", mf.time_embed_base_dim)
            ->capture_default_str();
    opts["time_embed_dim"] =
        cmd->add_option("--time-embed-dim", mf.time_embed_dim)->capture_default_str();
    opts["attention_heads"] =
        cmd->add_option("--attention-heads", mf.attention_heads)->capture_default_str();
    opts["groupnorm_groups"] =
        cmd->add_option("--groupnorm-groups", mf.groupnorm_groups,
                        "Defaults to the largest power of two <= 32 dividing every stage")
            ->capture_default_str();
}

UNetConfig resolve_model_config(const ModelFlags& mf, bool groups_explicit,
                                Variant variant) {
    UNetConfig mc;
    mc.in_channels = variant_input_channels(variant);
    mc.stage_channels = parse_int_list(mf.stage_channels, "--stage-channels");
    mc.blocks_per_stage = mf.blocks_per_stage;
    mc.time_embed_base_dim = mf.time_embed_base_dim;
    mc.time_embed_dim = mf.time_embed_dim;
    mc.attention_heads = mf.attention_heads;
    mc.groupnorm_groups = mf.groupnorm_groups;
    if (!groups_explicit) {
        int g = std::accumulate(mc.stage_channels.begin(), mc.stage_channels.end(),
                                mf.groupnorm_groups, std::gcd<int, int>);
        if (g >= 1) mc.groupnorm_groups = g;
    }
    mc.validate();
    return mc;
}

struct ScheduleFlags {
    int T = 1000;
    double beta_start = 0.00085;
    double beta_end = 0.012;
    std::string mode = "linear";
};

void add_schedule_flags(CLI::App* cmd, ScheduleFlags& sf,
                        std::map<std::string, CLI::Option*>& opts) {
    opts["T"] = cmd->add_option("--T", sf.T, "Diffusion timestep count")
                    ->capture_default_str();
    opts["beta_start"] =
        cmd->add_option("--beta-start", sf.beta_start)->capture_default_str();
    opts["beta_end"] = cmd->add_option("--beta-end", sf.beta_end)->capture_default_str();
    opts["schedule_mode"] =
        cmd->add_option("--schedule-mode", sf.mode, "linear or scaled_linear")
            ->capture_default_str();
}

void echo_config(const std::vector<std::pair<std::string, std::string>>& kv) {
    for (const auto& [k, v] : kv) log_info("config " + k + " = " + v);
}

// ---------------------------------------------------------------- train ----

struct TrainCli {
    std::string low_dir, high_dir, out_dir = ".", config_path, resume, variant = "lpdm";
    TrainConfig tc;
    ModelFlags mf;
    ScheduleFlags sf;
    std::map<std::string, CLI::Option*> opts;
};

void setup_train(CLI::App* cmd, TrainCli& a) {
    cmd->add_option("--low-dir", a.low_dir, "Directory of under-exposed inputs")
        ->required();
    cmd->add_option("--high-dir", a.high_dir, "Directory of normally-exposed targets")
        ->required();
    cmd->add_option("--out-dir", a.out_dir, "Checkpoints and loss log go here")
        ->capture_default_str();
    cmd->add_option("--config", a.config_path, "key = value config file");
    cmd->add_option("--resume", a.resume, "Checkpoint to continue from");
    a.opts["variant"] = cmd->add_option("--variant", a.variant, "lpdm, dlpdm or ulpdm")
                            ->capture_default_str();
    a.opts["total_steps"] =
        cmd->add_option("--total-steps", a.tc.total_steps)->capture_default_str();
    a.opts["lr"] = cmd->add_option("--lr", a.tc.lr)->capture_default_str();
    a.opts["adamw_beta1"] =
        cmd->add_option("--adamw-beta1", a.tc.adamw_beta1)->capture_default_str();
    a.opts["adamw_beta2"] =
        cmd->add_option("--adamw-beta2", a.tc.adamw_beta2)->capture_default_str();
    a.opts["weight_decay"] =
        cmd->add_option("--weight-decay", a.tc.weight_decay)->capture_default_str();
    a.opts["micro_batch"] =
        cmd->add_option("--micro-batch", a.tc.micro_batch)->capture_default_str();
    a.opts["accumulation"] =
        cmd->add_option("--accumulation", a.tc.accumulation)->capture_default_str();
    a.opts["crop_size"] =
        cmd->add_option("--crop-size", a.tc.crop_size)->capture_default_str();
    a.opts["hflip_prob"] =
        cmd->add_option("--hflip-prob", a.tc.hflip_prob)->capture_default_str();
    a.opts["seed"] = cmd->add_option("--seed", a.tc.seed)->capture_default_str();
    a.opts["checkpoint_every"] =
        cmd->add_option("--checkpoint-every", a.tc.checkpoint_every)
            ->capture_default_str();
    a.opts["threads"] = cmd->add_option("--threads", a.tc.threads)->capture_default_str();
    add_model_flags(cmd, a.mf, a.opts);
    add_schedule_flags(cmd, a.sf, a.opts);
}

int run_train(TrainCli& a) {
    if (!a.config_path.empty()) {
        const auto kv = parse_config_file(a.config_path);
        FileOverrides fo(kv);
        fo.apply(a.opts["variant"], "variant", a.variant);
        fo.apply(a.opts["total_steps"], "total_steps", a.tc.total_steps);
        fo.apply(a.opts["lr"], "lr", a.tc.lr);
        fo.apply(a.opts["adamw_beta1"], "adamw_beta1", a.tc.adamw_beta1);
        fo.apply(a.opts["adamw_beta2"], "adamw_beta2", a.tc.adamw_beta2);
        fo.apply(a.opts["weight_decay"], "weight_decay", a.tc.weight_decay);
        fo.apply(a.opts["micro_batch"], "micro_batch", a.tc.micro_batch);
        fo.apply(a.opts["accumulation"], "accumulation", a.tc.accumulation);
        fo.apply(a.opts["crop_size"], "crop_size", a.tc.crop_size);
        fo.apply(a.opts["hflip_prob"], "hflip_prob", a.tc.hflip_prob);
        fo.apply(a.opts["seed"], "seed", a.tc.seed);
        fo.apply(a.opts["checkpoint_every"], "checkpoint_every", a.tc.checkpoint_every);
        fo.apply(a.opts["threads"], "threads", a.tc.threads);
        fo.apply(a.opts["stage_channels"], "stage_channels", a.mf.stage_channels);
        fo.apply(a.opts["blocks_per_stage"], "blocks_per_stage", a.mf.blocks_per_stage);
        fo.apply(a.opts["time_embed_base_dim"], "time_embed_base_dim",
                 a.mf.time_embed_base_dim);
        fo.apply(a.opts["time_embed_dim"], "time_embed_dim", a.mf.time_embed_dim);
        fo.apply(a.opts["attention_heads"], "attention_heads", a.mf.attention_heads);
        fo.apply(a.opts["groupnorm_groups"], "groupnorm_groups", a.mf.groupnorm_groups);
        fo.apply(a.opts["T"], "T", a.sf.T);
        fo.apply(a.opts["beta_start"], "beta_start", a.sf.beta_start);
        fo.apply(a.opts["beta_end"], "beta_end", a.sf.beta_end);
        fo.apply(a.opts["schedule_mode"], "schedule_mode", a.sf.mode);
        fo.reject_unknown();
    }

    a.tc.variant = variant_from_string(a.variant);
    a.tc.validate();
    const bool groups_explicit = a.opts["groupnorm_groups"]->count() > 0 ||
                                 (!a.config_path.empty() &&
                                  parse_config_file(a.config_path).count("groupnorm_groups"));
    const UNetConfig mc = resolve_model_config(a.mf, groups_explicit, a.tc.variant);
    const DiffusionSchedule sched = build_linear_schedule(
        a.sf.T, a.sf.beta_start, a.sf.beta_end, schedule_mode_from_string(a.sf.mode));

    echo_config({{"variant", to_string(a.tc.variant)},
                 {"total_steps", std::to_string(a.tc.total_steps)},
                 {"lr", std::to_string(a.tc.lr)},
                 {"micro_batch", std::to_string(a.tc.micro_batch)},
                 {"accumulation", std::to_string(a.tc.accumulation)},
                 {"crop_size", std::to_string(a.tc.crop_size)},
                 {"hflip_prob", std::to_string(a.tc.hflip_prob)},
                 {"seed", std::to_string(a.tc.seed)},
                 {"checkpoint_every", std::to_string(a.tc.checkpoint_every)},
                 {"threads", std::to_string(a.tc.threads)},
                 {"stage_channels", a.mf.stage_channels},
                 {"groupnorm_groups", std::to_string(mc.groupnorm_groups)},
                 {"T", std::to_string(sched.T)}});

    omp_set_num_threads(a.tc.threads);
    DirectoryDataset data(a.low_dir, a.high_dir);
    fs::create_directories(a.out_dir);

    UNetModel model(mc, a.tc.seed);
    AdamW opt(model.params(), a.tc.lr, a.tc.adamw_beta1, a.tc.adamw_beta2,
              a.tc.weight_decay);
    int start_step = 1;
    if (!a.resume.empty()) {
        const Checkpoint ck = load_checkpoint_file(a.resume);
        if (!(unet_config_from_meta(ck) == mc))
            throw ConfigError("checkpoint '" + a.resume +
                              "' was trained with a different model config");
        start_step = restore_train_checkpoint(ck, model, opt) + 1;
        log_info("resumed from step " + std::to_string(start_step - 1));
    }

    const auto ckpt_path = [&](int step) {
        char name[64];
        std::snprintf(name, sizeof(name), "checkpoint_%06d.lpdm", step);
        return (fs::path(a.out_dir) / name).string();
    };
    const auto hook = [&](int step) {
        save_checkpoint_file(ckpt_path(step),
                             build_train_checkpoint(model, opt, a.tc, sched, step));
        if (step == a.tc.total_steps)
            save_checkpoint_file((fs::path(a.out_dir) / "final.lpdm").string(),
                                 build_train_checkpoint(model, opt, a.tc, sched, step));
        log_info("checkpoint written at step " + std::to_string(step));
    };
    train_loop(model, opt, data, sched, a.tc,
               (fs::path(a.out_dir) / "loss.csv").string(), hook, start_step);
    return 0;
}

// ---------------------------------------------------------- postprocess ----

struct PostCli {
    std::string checkpoint, enhanced_dir, cond_dir, out_dir = ".", variant, phi_sweep;
    int phi = 300, s = 30, threads = 1;
};

void setup_postprocess(CLI::App* cmd, PostCli& a) {
    cmd->add_option("--checkpoint", a.checkpoint, "Trained model archive")->required();
    cmd->add_option("--enhanced-dir", a.enhanced_dir, "Enhancer outputs to correct")
        ->required();
    cmd->add_option("--cond-dir", a.cond_dir,
                    "Original low-light images (conditioned variants)");
    cmd->add_option("--out-dir", a.out_dir)->capture_default_str();
    cmd->add_option("--phi", a.phi, "Noise-detection timestep")->capture_default_str();
    cmd->add_option("--s", a.s, "Correction strength timestep")->capture_default_str();
    cmd->add_option("--variant", a.variant, "Defaults to the checkpoint's variant");
    cmd->add_option("--phi-sweep", a.phi_sweep,
                    "Comma list of phi values; writes out-dir/phi_<value>/");
    cmd->add_option("--threads", a.threads)->capture_default_str();
}

int run_postprocess(PostCli& a) {
    const Checkpoint ck = load_checkpoint_file(a.checkpoint);
    const UNetConfig mc = unet_config_from_meta(ck);
    UNetModel model(mc, 0);
    restore_model_params(ck, model);
    const DiffusionSchedule sched = build_linear_schedule(
        std::stoi(ck.require("schedule.T")), std::stod(ck.require("schedule.beta_start")),
        std::stod(ck.require("schedule.beta_end")),
        schedule_mode_from_string(ck.require("schedule.mode")));

    PostprocessConfig pc;
    pc.s = a.s;
    const auto meta_variant = ck.meta.find("variant");
    pc.variant = variant_from_string(
        !a.variant.empty() ? a.variant
                           : (meta_variant != ck.meta.end() ? meta_variant->second
                                                            : "lpdm"));

    std::vector<int> phis =
        a.phi_sweep.empty() ? std::vector<int>{a.phi}
                            : parse_int_list(a.phi_sweep, "--phi-sweep");
    echo_config({{"variant", to_string(pc.variant)},
                 {"s", std::to_string(pc.s)},
                 {"phi", a.phi_sweep.empty() ? std::to_string(a.phi) : a.phi_sweep},
                 {"threads", std::to_string(a.threads)}});

    for (int phi : phis) {
        pc.phi = phi;
        const std::string out = a.phi_sweep.empty()
                                    ? a.out_dir
                                    : (fs::path(a.out_dir) / ("phi_" + std::to_string(phi)))
                                          .string();
        const int n = postprocess_directory(model, sched, a.enhanced_dir, a.cond_dir,
                                            out, pc, a.threads);
        log_info("phi=" + std::to_string(phi) + ": corrected " + std::to_string(n) +
                 " images into " + out);
    }
    return 0;
}

// -------------------------------------------------------------- evaluate ----

struct EvalCli {
    std::string results_dir, truth_dir, csv_path = "metrics.csv";
};

void setup_evaluate(CLI::App* cmd, EvalCli& a) {
    cmd->add_option("--results-dir", a.results_dir)->required();
    cmd->add_option("--truth-dir", a.truth_dir)->required();
    cmd->add_option("--csv", a.csv_path, "Per-image metric table destination")
        ->capture_default_str();
}

int run_evaluate(const EvalCli& a) {
    const MetricReport rep = evaluate_dirs(a.results_dir, a.truth_dir);
    {
        std::ofstream f(a.csv_path);
        if (!f) throw DataError("cannot write CSV to '" + a.csv_path + "'");
        f << rep.csv();
    }
    std::printf("images evaluated: %zu\n", rep.per_image.size());
    if (rep.psnr_excluded > 0)
        std::printf("identical pairs excluded from PSNR mean: %d\n", rep.psnr_excluded);
    std::printf("mean psnr_db: %.6f\nmean ssim: %.6f\nmean mae: %.6f\n", rep.mean_psnr,
                rep.mean_ssim, rep.mean_mae);
    if (rep.per_image.empty()) {
        log_error("no matched image pairs to evaluate");
        return 2;
    }
    return rep.clean() ? 0 : 2;
}

// ---------------------------------------------------------------- others ----

struct ScheduleCli {
    ScheduleFlags sf;
    std::string out_path;
    std::map<std::string, CLI::Option*> opts;
};

int run_schedule_dump(const ScheduleCli& a) {
    const DiffusionSchedule sched = build_linear_schedule(
        a.sf.T, a.sf.beta_start, a.sf.beta_end, schedule_mode_from_string(a.sf.mode));
    const std::string csv = schedule_csv(sched);
    if (a.out_path.empty()) {
        std::fputs(csv.c_str(), stdout);
    } else {
        std::ofstream f(a.out_path);
        if (!f) throw DataError("cannot write '" + a.out_path + "'");
        f << csv;
    }
    return 0;
}

struct BaselineCli {
    std::string input_dir, illum_dir, out_dir = ".", plugin = "gaussian";
    double sigma = 15.0;
};

void setup_baseline(CLI::App* cmd, BaselineCli& a) {
    cmd->add_option("--input-dir", a.input_dir, "Enhanced images to denoise")->required();
    cmd->add_option("--illum-dir", a.illum_dir, "Grayscale illumination maps")
        ->required();
    cmd->add_option("--out-dir", a.out_dir)->capture_default_str();
    cmd->add_option("--sigma", a.sigma, "Denoiser strength")->capture_default_str();
    cmd->add_option("--plugin", a.plugin, "gaussian or identity")->capture_default_str();
}

int run_denoise_baseline(const BaselineCli& a) {
    DenoiserPlugin plugin;
    if (a.plugin == "gaussian")
        plugin = gaussian_denoiser();
    else if (a.plugin == "identity")
        plugin = identity_denoiser();
    else
        throw ConfigError("unknown plugin '" + a.plugin + "' (gaussian or identity)");
    if (!fs::is_directory(a.input_dir))
        throw DataError("input directory does not exist: " + a.input_dir);
    if (!fs::is_directory(a.illum_dir))
        throw DataError("illumination directory does not exist: " + a.illum_dir);

    char tag[64];
    std::snprintf(tag, sizeof(tag), "%s_%g", a.plugin.c_str(), a.sigma);
    const fs::path out = fs::path(a.out_dir) / tag;
    fs::create_directories(out);
    echo_config({{"plugin", a.plugin}, {"sigma", std::to_string(a.sigma)}});

    std::vector<std::string> names;
    for (const auto& e : fs::directory_iterator(a.input_dir))
        if (e.is_regular_file()) names.push_back(e.path().filename().string());
    std::sort(names.begin(), names.end());
    if (names.empty()) log_info("warning: no images found under " + a.input_dir);

    for (const auto& n : names) {
        const fs::path ip = fs::path(a.illum_dir) / n;
        if (!fs::exists(ip))
            throw DataError("no illumination map for '" + n + "' in " + a.illum_dir);
        const Tensor R = unit_from_signed(
            read_image_tensor((fs::path(a.input_dir) / n).string()));
        const IlluminationMap tm =
            illumination_from_tensor(unit_from_signed(read_image_tensor(ip.string())));
        const Tensor out_img = illumination_weighted_denoise(R, tm, plugin, a.sigma);
        write_image_tensor((out / n).string(), signed_from_unit(out_img));
    }
    log_info("wrote " + std::to_string(names.size()) + " images to " + out.string());
    return 0;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Low-light post-processing diffusion toolkit"};
    app.require_subcommand(1);

    TrainCli train_args;
    setup_train(app.add_subcommand("train", "Train the noise-prediction model"),
                train_args);
    PostCli post_args;
    setup_postprocess(
        app.add_subcommand("postprocess", "Correct enhancer outputs in one pass"),
        post_args);
    EvalCli eval_args;
    setup_evaluate(app.add_subcommand("evaluate", "PSNR/SSIM/MAE over paired dirs"),
                   eval_args);
    ScheduleCli sched_args;
    {
        auto* cmd = app.add_subcommand("schedule-dump", "Print the diffusion schedule");
        add_schedule_flags(cmd, sched_args.sf, sched_args.opts);
        cmd->add_option("--out", sched_args.out_path, "Write CSV here instead of stdout");
    }
    BaselineCli base_args;
    setup_baseline(
        app.add_subcommand("denoise-baseline",
                           "Illumination-weighted luma denoising baseline"),
        base_args);

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e);
        return code == 0 ? 0 : 1;
    }

    try {
        if (app.got_subcommand("train")) return run_train(train_args);
        if (app.got_subcommand("postprocess")) return run_postprocess(post_args);
        if (app.got_subcommand("evaluate")) return run_evaluate(eval_args);
        if (app.got_subcommand("schedule-dump")) return run_schedule_dump(sched_args);
        if (app.got_subcommand("denoise-baseline"))
            return run_denoise_baseline(base_args);
    } catch (const ConfigError& e) {
        log_error(e.what());
        return 1;
    } catch (const DataError& e) {
        log_error(e.what());
        return 2;
    } catch (const NumericError& e) {
        log_error(e.what());
        return 3;
    } catch (const std::exception& e) {
        log_error(e.what());
        return 1;
    }
    return 0;
}
