#include <CLI11.hpp>

#include <cmath>
#include <filesystem>
#include <fstream>
#include <iostream>

#include "wmc/ablate.hpp"
#include "wmc/checkpoint.hpp"
#include "wmc/env.hpp"
#include "wmc/eval.hpp"
#include "wmc/logging.hpp"
#include "wmc/png_io.hpp"
#include "wmc/replay.hpp"
#include "wmc/trainer.hpp"

namespace {

constexpr int kExitOk = 0;
constexpr int kExitError = 1;
constexpr int kExitBadConfig = 2;
constexpr int kExitDiverged = 3;

wmc::ExperimentConfig load_or_default(const std::string& config_path) {
    if (config_path.empty()) {
        return wmc::desk_config();
    }
    return wmc::load_config_file(config_path);
}

wmc::Split parse_split(const std::string& s) {
    wmc::check(s == "train" || s == "test", "split must be 'train' or 'test'");
    return s == "train" ? wmc::Split::train : wmc::Split::test;
}

int cmd_train(const std::string& config_path, int64_t seed, int64_t steps,
              const std::string& out_dir) {
    wmc::ExperimentConfig cfg;
    try {
        cfg = load_or_default(config_path);
    } catch (const std::exception& e) {
        std::cerr << "config error: " << e.what() << "\n";
        return kExitBadConfig;
    }
    if (seed >= 0) {
        cfg.seed = static_cast<uint64_t>(seed);
    }
    if (steps > 0) {
        cfg.train.env_steps = steps;
    }
    try {
        auto result = wmc::train(cfg, out_dir);
        std::cout << "trained " << result.env_steps << " env steps, "
                  << result.gradient_steps << " gradient steps\n"
                  << "train split: SR " << result.train_eval.sr << "% SPL "
                  << result.train_eval.spl << "\n"
                  << "test  split: SR " << result.test_eval.sr << "% SPL "
                  << result.test_eval.spl << "\n"
                  << "checkpoint: " << result.checkpoint_path << "\n"
                  << "metrics: " << result.metrics_path << "\n";
        return kExitOk;
    } catch (const wmc::TrainingDiverged& e) {
        std::cerr << "training diverged: " << e.what() << "\n";
        return kExitDiverged;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return kExitError;
    }
}

int cmd_eval(const std::string& checkpoint_path, const std::string& split_name,
             int episodes, int64_t seed, const std::string& out_file) {
    wmc::Checkpoint ck;
    try {
        ck = wmc::Checkpoint::load(checkpoint_path);
    } catch (const std::exception& e) {
        std::cerr << "checkpoint error: " << e.what() << "\n";
        return kExitBadConfig;
    }
    try {
        auto cfg = wmc::parse_config_text(ck.config_text);
        auto world = wmc::checkpoint_get_params<float>(ck, "world");
        auto actor = wmc::checkpoint_get_params<float>(ck, "actor");
        const uint64_t eval_seed =
            seed >= 0 ? static_cast<uint64_t>(seed) : cfg.seed + 424242;
        auto report = wmc::evaluate(cfg, world, actor, parse_split(split_name), episodes,
                                    eval_seed);
        std::cout << "split " << split_name << ": episodes " << report.episodes_run
                  << " SR " << report.sr << "% SPL " << report.spl << "\n";
        std::cout << report.to_csv();
        if (!out_file.empty()) {
            std::ofstream os(out_file, std::ios::trunc);
            os << report.to_csv();
        }
        return kExitOk;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return kExitError;
    }
}

int cmd_ablate(const std::string& config_path, const std::string& seeds_arg,
               const std::string& variants_arg, const std::string& out_dir, int jobs) {
    wmc::ExperimentConfig cfg;
    try {
        cfg = load_or_default(config_path);
    } catch (const std::exception& e) {
        std::cerr << "config error: " << e.what() << "\n";
        return kExitBadConfig;
    }
    try {
        std::vector<uint64_t> seeds;
        std::stringstream ss(seeds_arg);
        std::string item;
        while (std::getline(ss, item, ',')) {
            seeds.push_back(std::stoull(item));
        }
        std::vector<std::string> variants;
        if (variants_arg.empty()) {
            variants = wmc::kVariantNames;
        } else {
            std::stringstream vs(variants_arg);
            while (std::getline(vs, item, ',')) {
                variants.push_back(item);
            }
        }
        auto result = wmc::run_ablation_matrix(cfg, variants, seeds, out_dir, jobs);
        std::cout << result.to_csv();
        return kExitOk;
    } catch (const wmc::TrainingDiverged& e) {
        std::cerr << "training diverged: " << e.what() << "\n";
        return kExitDiverged;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return kExitError;
    }
}

int cmd_replay_demo(int64_t seed, const std::string& out_dir) {
    try {
        wmc::ExperimentConfig cfg = wmc::desk_config();
        std::filesystem::create_directories(out_dir);
        wmc::RngStream rng(static_cast<uint64_t>(seed));
        const uint64_t scene_seed = rng.next_u64();
        const uint64_t tex_a = rng.next_u64();
        const uint64_t tex_b = rng.next_u64();
        wmc::PointGoalEnv probe(cfg.env);
        probe.reset(scene_seed, tex_a, wmc::Split::train);
        std::vector<wmc::EnvAction> actions;
        while (probe.episode_active()) {
            wmc::EnvAction a{static_cast<float>(rng.uniform(-0.7, 0.7)),
                             static_cast<float>(rng.uniform(0.0, 0.25))};
            auto res = probe.step(a);
            actions.push_back(a);
            if (res.done) {
                break;
            }
        }
        auto [ep_a, ep_b] = wmc::replay_actions(cfg.env, actions, scene_seed, tex_a,
                                                tex_b, wmc::Split::train);
        wmc::write_episode_dump(out_dir + "/episode_a.bin", ep_a);
        wmc::write_episode_dump(out_dir + "/episode_b.bin", ep_b);
        double max_depth_diff = 0.0;
        double mean_rgb_diff = 0.0;
        int64_t rgb_count = 0;
        for (int t = 0; t < ep_a.length(); ++t) {
            const auto& a = ep_a.steps[static_cast<size_t>(t)].obs;
            const auto& b = ep_b.steps[static_cast<size_t>(t)].obs;
            for (int64_t i = 0; i < a.depth.size(); ++i) {
                max_depth_diff = std::max(
                    max_depth_diff,
                    static_cast<double>(std::fabs(a.depth[i] - b.depth[i])));
            }
            for (int64_t i = 0; i < a.rgb.size(); ++i) {
                mean_rgb_diff += std::fabs(a.rgb[i] - b.rgb[i]);
                ++rgb_count;
            }
        }
        mean_rgb_diff /= std::max<int64_t>(1, rgb_count);
        wmc::write_png(out_dir + "/view_a_t0.png", ep_a.steps[0].obs.rgb);
        wmc::write_png(out_dir + "/view_b_t0.png", ep_b.steps[0].obs.rgb);
        const float depth_hi = static_cast<float>(cfg.env.scene.interior_cells + 2) *
                               std::sqrt(2.0f);
        wmc::write_png_gray(out_dir + "/depth_t0.png", ep_a.steps[0].obs.depth, 0.0f,
                            depth_hi);
        std::ofstream summary(out_dir + "/summary.txt", std::ios::trunc);
        summary << "steps " << ep_a.length() << "\n"
                << "max_abs_depth_diff " << max_depth_diff << "\n"
                << "mean_abs_rgb_diff " << mean_rgb_diff << "\n";
        std::cout << "replay pair of " << ep_a.length() << " steps: max depth diff "
                  << max_depth_diff << ", mean rgb diff " << mean_rgb_diff << "\n";
        return kExitOk;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return kExitError;
    }
}

int cmd_render(const std::string& split_name, int count, int64_t seed,
               const std::string& out_dir) {
    try {
        const wmc::Split split = parse_split(split_name);
        wmc::ExperimentConfig cfg = wmc::desk_config();
        cfg.env.img_h = cfg.env.img_w = 64;
        cfg.arch.img_h = cfg.arch.img_w = 64;
        std::filesystem::create_directories(out_dir);
        wmc::RngStream rng(static_cast<uint64_t>(seed));
        std::ofstream manifest(out_dir + "/textures.txt", std::ios::trunc);
        for (int i = 0; i < count; ++i) {
            wmc::PointGoalEnv env(cfg.env);
            auto obs = env.reset(rng.next_u64(), rng.next_u64(), split);
            wmc::write_png(out_dir + "/sample_" + std::to_string(i) + ".png", obs.rgb);
            for (const auto& tex : env.scene().textures) {
                manifest << "sample_" << i << " " << tex.to_text() << "\n";
            }
        }
        std::cout << "wrote " << count << " " << split_name << "-split samples to "
                  << out_dir << "\n";
        return kExitOk;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return kExitError;
    }
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"WMC point-goal navigation experiments"};
    app.require_subcommand(1);

    std::string config_path, out_dir = "out", split = "test", checkpoint_path, out_file;
    std::string seeds_arg = "1,2,3", variants_arg;
    int64_t seed = -1;
    int64_t steps = -1;
    int episodes = 50;
    int count = 8;
    int jobs = 1;

    auto* train_cmd = app.add_subcommand("train", "train a model");
    train_cmd->add_option("--config", config_path, "config file");
    train_cmd->add_option("--seed", seed, "experiment seed");
    train_cmd->add_option("--steps", steps, "interactive env steps");
    train_cmd->add_option("--out", out_dir, "output directory");

    auto* eval_cmd = app.add_subcommand("eval", "evaluate a checkpoint");
    eval_cmd->add_option("--checkpoint", checkpoint_path, "checkpoint file")->required();
    eval_cmd->add_option("--split", split, "texture split: train or test");
    eval_cmd->add_option("--episodes", episodes, "evaluation episodes");
    eval_cmd->add_option("--seed", seed, "evaluation seed");
    eval_cmd->add_option("--out", out_file, "CSV report path");

    auto* ablate_cmd = app.add_subcommand("ablate", "run the ablation matrix");
    ablate_cmd->add_option("--config", config_path, "config file");
    ablate_cmd->add_option("--seeds", seeds_arg, "comma-separated seeds");
    ablate_cmd->add_option("--variants", variants_arg, "comma-separated variants");
    ablate_cmd->add_option("--out", out_dir, "output directory");
    ablate_cmd->add_option("--jobs", jobs, "concurrent runs");

    auto* replay_cmd =
        app.add_subcommand("replay-demo", "paired texture-intervention episodes");
    replay_cmd->add_option("--seed", seed, "demo seed");
    replay_cmd->add_option("--out", out_dir, "output directory");

    auto* render_cmd = app.add_subcommand("render", "render split samples");
    render_cmd->add_option("--split", split, "texture split: train or test");
    render_cmd->add_option("--count", count, "number of samples");
    render_cmd->add_option("--seed", seed, "render seed");
    render_cmd->add_option("--out", out_dir, "output directory");

    CLI11_PARSE(app, argc, argv);

    if (train_cmd->parsed()) {
        return cmd_train(config_path, seed, steps, out_dir);
    }
    if (eval_cmd->parsed()) {
        return cmd_eval(checkpoint_path, split, episodes, seed, out_file);
    }
    if (ablate_cmd->parsed()) {
        return cmd_ablate(config_path, seeds_arg, variants_arg, out_dir, jobs);
    }
    if (replay_cmd->parsed()) {
        return cmd_replay_demo(seed < 0 ? 1 : seed, out_dir);
    }
    if (render_cmd->parsed()) {
        return cmd_render(split, count, seed < 0 ? 1 : seed, out_dir);
    }
    return kExitError;
}
