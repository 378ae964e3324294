#include "wmc/eval.hpp"

#include <algorithm>
#include <map>
#include <sstream>

#include "wmc/env.hpp"

namespace wmc {

namespace {
struct SceneRowAccum {
    int n = 0;
    int successes = 0;
    double spl = 0.0;
};
}  // namespace

double spl_term(bool success, double geodesic_opt, double path_length) {
    if (!success) {
        return 0.0;
    }
    const double denom = std::max(path_length, geodesic_opt);
    if (denom <= 0.0) {
        return 1.0;
    }
    return geodesic_opt / denom;
}

std::string EvalReport::to_csv() const {
    std::ostringstream os;
    os << "scene_seed,episodes,sr,spl\n";
    for (const auto& row : per_scene) {
        os << row.scene_seed << "," << row.n << "," << row.sr << "," << row.spl << "\n";
    }
    os << "aggregate," << episodes_run << "," << sr << "," << spl << "\n";
    return os.str();
}

EvalReport evaluate(const ExperimentConfig& cfg, const ParamSet<float>& world_params,
                    const ParamSet<float>& actor_params, Split split, int n_episodes,
                    uint64_t eval_seed) {
    Controller<float> ctrl(cfg.arch, cfg.ctrl, cfg.env.max_rotation, cfg.env.max_forward);
    RngStream stream = RngStream(eval_seed).split(split == Split::train
                                                      ? "eval_scenes_train"
                                                      : "eval_scenes_test");
    EvalReport report;
    double spl_sum = 0.0;
    int successes = 0;
    const int distinct_scenes = std::max(1, std::min(n_episodes, 5));
    std::vector<uint64_t> scene_seeds;
    for (int i = 0; i < distinct_scenes; ++i) {
        scene_seeds.push_back(stream.next_u64());
    }
    for (int ep = 0; ep < n_episodes; ++ep) {
        const uint64_t scene_seed =
            scene_seeds[static_cast<size_t>(ep % distinct_scenes)] +
            static_cast<uint64_t>(ep / distinct_scenes);
        const uint64_t texture_seed = stream.next_u64();
        PointGoalEnv env(cfg.env);
        EnvObservation obs;
        try {
            obs = env.reset(scene_seed, texture_seed, split);
        } catch (const std::exception&) {
            continue;  // unsatisfiable placement for this seed; skip it
        }
        PolicyState<float> policy;
        policy.reset(cfg.arch);
        RngStream policy_rng =
            RngStream(eval_seed).split("eval_policy").split(static_cast<uint64_t>(ep));
        bool success = false;
        while (env.episode_active()) {
            const EnvAction action = policy.act(obs.rgb, obs.task_vec, world_params,
                                                actor_params, ctrl, true, policy_rng);
            auto res = env.step(action);
            obs = std::move(res.obs);
            if (res.done) {
                success = res.success;
            }
        }
        EpisodeLog log;
        log.scene_seed = scene_seed;
        log.texture_seed = texture_seed;
        log.success = success;
        log.path_length = env.path_length();
        log.geodesic_opt = env.geodesic_start();
        log.steps = env.steps_taken();
        report.episodes.push_back(log);
        successes += success ? 1 : 0;
        spl_sum += spl_term(success, log.geodesic_opt, log.path_length);
    }
    report.episodes_run = static_cast<int>(report.episodes.size());
    if (report.episodes_run > 0) {
        report.sr = 100.0 * successes / report.episodes_run;
        report.spl = spl_sum / report.episodes_run;
    }
    // per-scene aggregates
    std::map<uint64_t, SceneRowAccum> scenes;
    for (const auto& log : report.episodes) {
        auto& acc = scenes[log.scene_seed];
        acc.n += 1;
        acc.successes += log.success ? 1 : 0;
        acc.spl += spl_term(log.success, log.geodesic_opt, log.path_length);
    }
    for (const auto& [seed, acc] : scenes) {
        EvalReport::SceneRow row;
        row.scene_seed = seed;
        row.n = acc.n;
        row.sr = 100.0 * acc.successes / acc.n;
        row.spl = acc.spl / acc.n;
        report.per_scene.push_back(row);
    }
    return report;
}

}  // namespace wmc
