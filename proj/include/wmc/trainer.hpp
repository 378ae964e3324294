#pragma once

#include <stdexcept>
#include <string>

#include "wmc/config.hpp"
#include "wmc/eval.hpp"

namespace wmc {

// Raised when a loss goes non-finite; the CLI maps it to exit code 3 after a
// diagnostic dump has been written next to the metrics file.
struct TrainingDiverged : std::runtime_error {
    explicit TrainingDiverged(const std::string& msg) : std::runtime_error(msg) {}
};

struct TrainResult {
    std::string checkpoint_path;
    std::string metrics_path;
    EvalReport train_eval;
    EvalReport test_eval;
    int64_t env_steps = 0;
    int64_t gradient_steps = 0;
};

// Collect-train loop: prefill with random actions, then one world-model
// gradient step plus one actor-critic step every train_every interactive
// steps, EMA key update each step, periodic checkpoints and evals.
TrainResult train(const ExperimentConfig& cfg, const std::string& out_dir);

// Gradient steps the schedule produces for a budget (after prefill).
int64_t planned_gradient_steps(const ExperimentConfig& cfg);

}  // namespace wmc
