#pragma once

#include <string>
#include <vector>

#include "wmc/config.hpp"
#include "wmc/controller.hpp"
#include "wmc/nn.hpp"

namespace wmc {

struct EpisodeLog {
    uint64_t scene_seed = 0;
    uint64_t texture_seed = 0;
    bool success = false;
    float path_length = 0.0f;
    float geodesic_opt = 0.0f;
    int steps = 0;
};

// Success weighted by normalized inverse path length:
//   SPL_i = S_i * l_i / max(p_i, l_i)
double spl_term(bool success, double geodesic_opt, double path_length);

struct EvalReport {
    double sr = 0.0;   // percent
    double spl = 0.0;  // [0, 1]
    int episodes_run = 0;
    std::vector<EpisodeLog> episodes;

    struct SceneRow {
        uint64_t scene_seed = 0;
        double sr = 0.0;
        double spl = 0.0;
        int n = 0;
    };
    std::vector<SceneRow> per_scene;

    std::string to_csv() const;
};

// Runs the mean-mode policy on fresh scenes with `split` textures. Evaluation
// consumes rgb and task vectors only; depth and augmentation never enter.
EvalReport evaluate(const ExperimentConfig& cfg, const ParamSet<float>& world_params,
                    const ParamSet<float>& actor_params, Split split, int n_episodes,
                    uint64_t eval_seed);

}  // namespace wmc
