#include "wmc/config.hpp"

#include <cstdint>
#include <fstream>
#include <functional>
#include <sstream>

namespace wmc {

void ExperimentConfig::validate() const {
    check(schema == 1, "config: unsupported schema version");
    arch.validate();
    check(env.img_h == arch.img_h && env.img_w == arch.img_w,
          "config: env.image_size and model image size must agree");
    aug.validate(env.img_h, env.img_w);
    check(train.train_every >= 1, "config: train.train_every must be >= 1");
    check(train.batch_b >= 1 && train.batch_l >= 1, "config: batch dims must be >= 1");
    check(wm.momentum >= 0.0 && wm.momentum <= 1.0, "config: momentum out of [0,1]");
    check(wm.beta >= 0.0, "config: beta must be >= 0");
    check(ctrl.horizon >= 0, "config: horizon must be >= 0");
    check(ctrl.gamma > 0.0 && ctrl.gamma <= 1.0, "config: gamma out of (0,1]");
    check(ctrl.lambda >= 0.0 && ctrl.lambda <= 1.0, "config: lambda out of [0,1]");
    check(train.world_lr > 0 && train.actor_lr > 0 && train.critic_lr > 0 &&
              train.adam_eps > 0 && train.grad_clip > 0,
          "config: optimizer values must be strictly positive");
}

namespace {

struct Field {
    std::string key;
    std::function<void(ExperimentConfig&, const std::string&)> set;
    std::function<std::string(const ExperimentConfig&)> get;
};

int64_t to_i64(const std::string& s) {
    size_t pos = 0;
    const double v = std::stod(s, &pos);
    check(pos == s.size(), "config: bad integer value '" + s + "'");
    return static_cast<int64_t>(v);
}

double to_f64(const std::string& s) {
    size_t pos = 0;
    const double v = std::stod(s, &pos);
    check(pos == s.size(), "config: bad number value '" + s + "'");
    return v;
}

bool to_bool(const std::string& s) {
    if (s == "true" || s == "1") {
        return true;
    }
    if (s == "false" || s == "0") {
        return false;
    }
    fail("config: bad boolean value '" + s + "'");
}

std::vector<int> to_int_list(const std::string& s) {
    std::vector<int> out;
    std::stringstream ss(s);
    std::string item;
    while (std::getline(ss, item, ',')) {
        out.push_back(static_cast<int>(to_i64(item)));
    }
    check(!out.empty(), "config: empty integer list");
    return out;
}

std::string from_int_list(const std::vector<int>& v) {
    std::ostringstream os;
    for (size_t i = 0; i < v.size(); ++i) {
        os << (i ? "," : "") << v[i];
    }
    return os.str();
}

std::string fmt_double(double v) {
    std::ostringstream os;
    os << v;
    return os.str();
}

#define FIELD_I64(KEY, REF)                                                           \
    Field{KEY, [](ExperimentConfig& c, const std::string& s) { c.REF = to_i64(s); },  \
          [](const ExperimentConfig& c) { return std::to_string(c.REF); }}
#define FIELD_INT(KEY, REF)                                                           \
    Field{KEY,                                                                        \
          [](ExperimentConfig& c, const std::string& s) {                             \
              c.REF = static_cast<int>(to_i64(s));                                    \
          },                                                                          \
          [](const ExperimentConfig& c) { return std::to_string(c.REF); }}
#define FIELD_F64(KEY, REF)                                                           \
    Field{KEY, [](ExperimentConfig& c, const std::string& s) { c.REF = to_f64(s); },  \
          [](const ExperimentConfig& c) { return fmt_double(c.REF); }}
#define FIELD_F32(KEY, REF)                                                           \
    Field{KEY,                                                                        \
          [](ExperimentConfig& c, const std::string& s) {                             \
              c.REF = static_cast<float>(to_f64(s));                                  \
          },                                                                          \
          [](const ExperimentConfig& c) { return fmt_double(c.REF); }}
#define FIELD_BOOL(KEY, REF)                                                          \
    Field{KEY, [](ExperimentConfig& c, const std::string& s) { c.REF = to_bool(s); }, \
          [](const ExperimentConfig& c) { return c.REF ? "true" : "false"; }}
#define FIELD_ILIST(KEY, REF)                                                         \
    Field{KEY,                                                                        \
          [](ExperimentConfig& c, const std::string& s) { c.REF = to_int_list(s); },  \
          [](const ExperimentConfig& c) { return from_int_list(c.REF); }}

const std::vector<Field>& schema_fields() {
    static const std::vector<Field> fields = {
        FIELD_INT("config.schema", schema),
        Field{"seed",
              [](ExperimentConfig& c, const std::string& s) {
                  c.seed = static_cast<uint64_t>(to_i64(s));
              },
              [](const ExperimentConfig& c) { return std::to_string(c.seed); }},
        // env
        Field{"env.image_size",
              [](ExperimentConfig& c, const std::string& s) {
                  const int v = static_cast<int>(to_i64(s));
                  c.env.img_h = c.env.img_w = v;
                  c.arch.img_h = c.arch.img_w = v;
              },
              [](const ExperimentConfig& c) { return std::to_string(c.env.img_h); }},
        FIELD_F32("env.fov_deg", env.fov_deg),
        FIELD_INT("env.max_steps", env.max_steps),
        FIELD_F32("env.success_radius", env.success_radius),
        FIELD_F32("env.progress_scale", env.progress_scale),
        FIELD_F32("env.success_bonus", env.success_bonus),
        FIELD_F32("env.step_cost", env.step_cost),
        FIELD_F32("env.agent_radius", env.agent_radius),
        FIELD_INT("env.interior_cells", env.scene.interior_cells),
        FIELD_INT("env.wall_segments", env.scene.wall_segments),
        FIELD_F32("env.d_min", env.scene.d_min),
        FIELD_F32("env.d_max", env.scene.d_max),
        // augmentation
        FIELD_INT("aug.pad", aug.pad),
        FIELD_F32("aug.hue_delta", aug.hue_delta),
        FIELD_F32("aug.brightness_delta", aug.brightness_delta),
        FIELD_F32("aug.contrast_delta", aug.contrast_delta),
        FIELD_F32("aug.saturation_delta", aug.saturation_delta),
        FIELD_F32("aug.blur_sigma_min", aug.blur_sigma_min),
        FIELD_F32("aug.blur_sigma_max", aug.blur_sigma_max),
        FIELD_INT("aug.cutout_min", aug.cutout_min),
        FIELD_INT("aug.cutout_max", aug.cutout_max),
        FIELD_INT("aug.reference_side", aug.reference_side),
        FIELD_F32("aug.p_spatial_jitter", aug.p_spatial_jitter),
        FIELD_F32("aug.p_color_jitter", aug.p_color_jitter),
        FIELD_F32("aug.p_grayscale", aug.p_grayscale),
        FIELD_F32("aug.p_blur", aug.p_blur),
        FIELD_F32("aug.p_cutout", aug.p_cutout),
        // architecture
        FIELD_ILIST("wm.enc_kernels", arch.enc_kernels),
        FIELD_ILIST("wm.enc_strides", arch.enc_strides),
        FIELD_ILIST("wm.enc_channels", arch.enc_channels),
        FIELD_ILIST("wm.dec_kernels", arch.dec_kernels),
        FIELD_INT("wm.task_mlp_units", arch.task_units),
        FIELD_INT("wm.task_mlp_layers", arch.task_layers),
        FIELD_INT("wm.latent_vars", arch.latent_vars),
        FIELD_INT("wm.latent_classes", arch.latent_classes),
        FIELD_INT("wm.rssm_units", arch.rssm_units),
        FIELD_INT("wm.rssm_hidden", arch.rssm_hidden),
        FIELD_INT("wm.head_layers", arch.head_layers),
        FIELD_INT("wm.head_units", arch.head_units),
        // world-model loss
        FIELD_F64("wm.beta", wm.beta),
        FIELD_F64("wm.free_nats", wm.free_nats),
        FIELD_F64("wm.momentum", wm.momentum),
        FIELD_INT("wm.stride_negatives", wm.stride_negatives),
        FIELD_BOOL("wm.use_contrastive", wm.use_contrastive),
        FIELD_BOOL("wm.use_depth_head", wm.use_depth_head),
        FIELD_BOOL("wm.use_recon", wm.use_recon),
        FIELD_BOOL("wm.use_action_replay", wm.use_action_replay),
        FIELD_BOOL("wm.use_augmentation", wm.use_augmentation),
        // controller
        FIELD_INT("ctrl.horizon", ctrl.horizon),
        FIELD_F64("ctrl.gamma", ctrl.gamma),
        FIELD_F64("ctrl.lambda", ctrl.lambda),
        FIELD_F64("ctrl.entropy_beta", ctrl.entropy_beta),
        FIELD_INT("ctrl.slow_critic_interval", ctrl.slow_critic_interval),
        FIELD_INT("ctrl.imag_starts", ctrl.imag_starts),
        FIELD_F64("ctrl.min_std", ctrl.min_std),
        // training loop
        FIELD_I64("train.env_steps", train.env_steps),
        FIELD_INT("train.train_every", train.train_every),
        FIELD_I64("train.prefill", train.prefill),
        FIELD_F64("train.explore_noise", train.explore_noise),
        FIELD_I64("train.explore_until", train.explore_until),
        FIELD_INT("train.batch_b", train.batch_b),
        FIELD_INT("train.batch_l", train.batch_l),
        FIELD_I64("train.replay_capacity", train.replay_capacity),
        FIELD_INT("train.eval_every", train.eval_every),
        FIELD_INT("train.eval_episodes", train.eval_episodes),
        FIELD_INT("train.eval_episodes_during_train", train.eval_episodes_during_train),
        FIELD_INT("train.checkpoint_every", train.checkpoint_every),
        FIELD_INT("train.threads", train.threads),
        FIELD_F64("train.world_lr", train.world_lr),
        FIELD_F64("train.actor_lr", train.actor_lr),
        FIELD_F64("train.critic_lr", train.critic_lr),
        FIELD_F64("train.adam_eps", train.adam_eps),
        FIELD_F64("train.grad_clip", train.grad_clip),
    };
    return fields;
}

#undef FIELD_I64
#undef FIELD_INT
#undef FIELD_F64
#undef FIELD_F32
#undef FIELD_BOOL
#undef FIELD_ILIST

std::string trim(const std::string& s) {
    const size_t a = s.find_first_not_of(" \t\r\n");
    if (a == std::string::npos) {
        return "";
    }
    const size_t b = s.find_last_not_of(" \t\r\n");
    return s.substr(a, b - a + 1);
}

}  // namespace

ExperimentConfig parse_config_text(const std::string& text) {
    ExperimentConfig cfg;
    std::istringstream is(text);
    std::string line;
    int lineno = 0;
    while (std::getline(is, line)) {
        ++lineno;
        const size_t hash = line.find('#');
        if (hash != std::string::npos) {
            line = line.substr(0, hash);
        }
        line = trim(line);
        if (line.empty()) {
            continue;
        }
        const size_t eq = line.find('=');
        check(eq != std::string::npos,
              "config: missing '=' at line " + std::to_string(lineno));
        const std::string key = trim(line.substr(0, eq));
        const std::string value = trim(line.substr(eq + 1));
        bool found = false;
        for (const auto& f : schema_fields()) {
            if (f.key == key) {
                f.set(cfg, value);
                found = true;
                break;
            }
        }
        check(found,
              "config: unknown key '" + key + "' at line " + std::to_string(lineno));
    }
    cfg.validate();
    return cfg;
}

ExperimentConfig load_config_file(const std::string& path) {
    std::ifstream is(path);
    check(static_cast<bool>(is), "config: cannot open file: " + path);
    std::ostringstream ss;
    ss << is.rdbuf();
    return parse_config_text(ss.str());
}

std::string serialize_config(const ExperimentConfig& cfg) {
    std::ostringstream os;
    for (const auto& f : schema_fields()) {
        os << f.key << " = " << f.get(cfg) << "\n";
    }
    return os.str();
}

const std::vector<std::string> kVariantNames = {
    "WMC", "WMC-AR", "WMC-AR-D", "WMC-D+I", "DreamerV2", "DreamerV2+DA",
};

void apply_variant(ExperimentConfig& cfg, const std::string& variant) {
    WorldModelConfig& wm = cfg.wm;
    if (variant == "WMC") {
        wm.use_contrastive = true;
        wm.use_recon = true;
        wm.use_depth_head = true;
        wm.use_action_replay = true;
        wm.use_augmentation = true;
    } else if (variant == "WMC-AR") {
        wm.use_contrastive = true;
        wm.use_recon = true;
        wm.use_depth_head = true;
        wm.use_action_replay = false;
        wm.use_augmentation = true;
    } else if (variant == "WMC-AR-D") {
        wm.use_contrastive = true;
        wm.use_recon = false;
        wm.use_depth_head = true;
        wm.use_action_replay = false;
        wm.use_augmentation = true;
    } else if (variant == "WMC-D+I") {
        wm.use_contrastive = true;
        wm.use_recon = true;
        wm.use_depth_head = false;
        wm.use_action_replay = true;
        wm.use_augmentation = true;
    } else if (variant == "DreamerV2") {
        wm.use_contrastive = false;
        wm.use_recon = true;
        wm.use_depth_head = false;
        wm.use_action_replay = false;
        wm.use_augmentation = false;
    } else if (variant == "DreamerV2+DA") {
        wm.use_contrastive = false;
        wm.use_recon = true;
        wm.use_depth_head = false;
        wm.use_action_replay = false;
        wm.use_augmentation = true;
    } else {
        fail("unknown ablation variant: " + variant);
    }
}

ExperimentConfig desk_config() {
    ExperimentConfig cfg;
    cfg.env.img_h = cfg.env.img_w = 32;
    cfg.arch.img_h = cfg.arch.img_w = 32;
    cfg.arch.enc_channels = {16, 24, 32, 48, 64};
    cfg.arch.enc_kernels = {4, 4, 4, 4, 4};
    cfg.arch.enc_strides = {2, 2, 2, 2, 2};
    cfg.arch.dec_kernels = {4, 4, 4, 4, 4};
    cfg.arch.rssm_units = 192;
    cfg.arch.rssm_hidden = 192;
    cfg.arch.head_layers = 2;
    cfg.arch.head_units = 128;
    cfg.train.batch_b = 8;
    cfg.train.batch_l = 8;
    cfg.train.replay_capacity = 100000;
    cfg.train.eval_episodes = 50;
    cfg.train.eval_episodes_during_train = 10;
    cfg.ctrl.imag_starts = 16;
    cfg.validate();
    return cfg;
}

ExperimentConfig micro_config() {
    ExperimentConfig cfg;
    cfg.env.img_h = cfg.env.img_w = 4;
    cfg.arch.img_h = cfg.arch.img_w = 4;
    cfg.arch.enc_channels = {4, 8};
    cfg.arch.enc_kernels = {4, 4};
    cfg.arch.enc_strides = {2, 2};
    cfg.arch.dec_kernels = {4, 4};
    cfg.arch.task_units = 8;
    cfg.arch.task_layers = 2;
    cfg.arch.latent_vars = 2;
    cfg.arch.latent_classes = 4;
    cfg.arch.rssm_units = 8;
    cfg.arch.rssm_hidden = 8;
    cfg.arch.head_layers = 2;
    cfg.arch.head_units = 8;
    cfg.aug.pad = 1;
    cfg.aug.cutout_min = 1;
    cfg.aug.cutout_max = 2;
    cfg.aug.reference_side = 4;
    cfg.train.batch_b = 2;
    cfg.train.batch_l = 6;
    cfg.ctrl.horizon = 3;
    cfg.validate();
    return cfg;
}

}  // namespace wmc
