#pragma once

#include <string>
#include <vector>

#include "wmc/augment.hpp"
#include "wmc/env.hpp"
#include "wmc/tensor.hpp"

namespace wmc {

// Network shapes. Defaults are the paper's; the desk preset shrinks widths
// while keeping the architecture (stride-2 conv stack, categorical latent,
// GRU core, MLP heads) intact.
struct ModelArch {
    int img_h = 64;
    int img_w = 64;
    std::vector<int> enc_kernels{4, 4, 4, 4, 4};
    std::vector<int> enc_strides{2, 2, 2, 2, 2};
    std::vector<int> enc_channels{32, 64, 128, 256, 512};
    std::vector<int> dec_kernels{5, 5, 4, 5, 4};
    int task_units = 32;
    int task_layers = 2;
    int task_dim = 6;
    int latent_vars = 32;
    int latent_classes = 32;
    int rssm_units = 1024;
    int rssm_hidden = 1024;
    int head_layers = 4;
    int head_units = 400;
    int action_dim = 2;

    int z_dim() const { return latent_vars * latent_classes; }
    int feat_dim() const { return rssm_units + z_dim(); }

    int conv_out_hw() const {
        int hw = img_h;
        for (size_t i = 0; i < enc_kernels.size(); ++i) {
            const int k = enc_kernels[i], s = enc_strides[i], p = (k - 2) / 2;
            hw = (hw + 2 * p - k) / s + 1;
        }
        return hw;
    }
    int conv_out_dim() const {
        return conv_out_hw() * conv_out_hw() * enc_channels.back();
    }
    int embed_dim() const { return conv_out_dim() + task_units; }

    int dec_start_hw() const {
        int hw = img_h;
        for (size_t i = 0; i < dec_kernels.size(); ++i) {
            hw /= 2;
        }
        return hw;
    }
    std::vector<int> dec_channels(int out_channels) const {
        std::vector<int> ch;
        for (size_t i = 1; i < enc_channels.size(); ++i) {
            ch.push_back(enc_channels[enc_channels.size() - 1 - i]);
        }
        ch.push_back(out_channels);
        return ch;
    }

    void validate() const {
        check(img_h == img_w, "arch: image must be square");
        check(enc_kernels.size() == enc_strides.size() &&
                  enc_kernels.size() == enc_channels.size(),
              "arch: encoder layer lists must have equal length");
        check(dec_kernels.size() == enc_channels.size(),
              "arch: decoder kernel count must match encoder depth");
        for (size_t i = 0; i < enc_kernels.size(); ++i) {
            check(enc_strides[i] == 2, "arch: encoder strides must be 2");
            check(enc_kernels[i] % 2 == 0, "arch: encoder kernels must be even");
        }
        check(conv_out_hw() >= 1, "arch: conv stack does not consume the image");
        check(dec_start_hw() >= 1, "arch: decoder start collapses");
        int hw = dec_start_hw();
        for (size_t i = 0; i < dec_kernels.size(); ++i) {
            hw *= 2;
        }
        check(hw == img_h, "arch: decoder stack does not reproduce the image size");
        check(latent_vars > 0 && latent_classes > 0 && rssm_units > 0,
              "arch: latent sizes must be positive");
    }
};

enum class ReconHead { depth = 0, rgb = 1, none = 2 };

// Joint world-model loss configuration.
struct WorldModelConfig {
    double beta = 1.0;            // KL loss scale
    double free_nats = 1.0;       // per latent variable
    double momentum = 0.999;      // key encoder EMA
    int stride_negatives = 5;     // negative mining stride over time
    bool use_contrastive = true;
    bool use_depth_head = true;   // false selects the rgb head
    bool use_recon = true;        // false drops reconstruction entirely
    bool use_action_replay = true;
    bool use_augmentation = true;

    ReconHead recon_head() const {
        if (!use_recon) {
            return ReconHead::none;
        }
        return use_depth_head ? ReconHead::depth : ReconHead::rgb;
    }
};

struct ControllerConfig {
    int horizon = 15;
    double gamma = 0.99;
    double lambda = 0.95;
    double entropy_beta = 1e-4;
    int slow_critic_interval = 100;
    int imag_starts = 0;  // 0 = imagine from every posterior state
    double min_std = 0.01;
};

struct TrainConfig {
    int64_t env_steps = 30000;
    int train_every = 5;  // policy steps per gradient step
    int64_t prefill = 1000;
    double explore_noise = 0.3;
    int64_t explore_until = 5000;
    int batch_b = 50;
    int batch_l = 50;
    int64_t replay_capacity = 300000;
    int eval_every = 2000;       // gradient steps between periodic evals
    int eval_episodes = 50;
    int eval_episodes_during_train = 10;
    int checkpoint_every = 2000;  // gradient steps
    int threads = 2;
    double world_lr = 3e-4;
    double actor_lr = 1e-4;
    double critic_lr = 1e-4;
    double adam_eps = 1e-5;
    double grad_clip = 100.0;
};

struct ExperimentConfig {
    int schema = 1;
    uint64_t seed = 0;
    EnvConfig env;
    AugmentationConfig aug;
    ModelArch arch;
    WorldModelConfig wm;
    ControllerConfig ctrl;
    TrainConfig train;

    void validate() const;
};

// Flat dotted-key config text: `key = value` lines, '#' comments, unknown
// keys rejected, all defaults present when omitted.
ExperimentConfig parse_config_text(const std::string& text);
ExperimentConfig load_config_file(const std::string& path);
std::string serialize_config(const ExperimentConfig& cfg);

// Table 4 / Table 1 ablation variants.
extern const std::vector<std::string> kVariantNames;
void apply_variant(ExperimentConfig& cfg, const std::string& variant);

// Desk-scale preset: small widths, short sequences, fits the CPU budget.
ExperimentConfig desk_config();

// Micro preset for gradient-check suites: 4x4 images, tiny latent.
ExperimentConfig micro_config();

}  // namespace wmc
