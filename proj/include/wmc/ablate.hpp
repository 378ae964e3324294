#pragma once

#include <string>
#include <vector>

#include "wmc/config.hpp"
#include "wmc/trainer.hpp"

namespace wmc {

struct AblationRow {
    std::string variant;
    uint64_t seed = 0;
    double sr_train = 0.0;
    double spl_train = 0.0;
    double sr_test = 0.0;
    double spl_test = 0.0;
};

struct AblationResult {
    std::vector<AblationRow> runs;  // one row per (variant, seed)

    struct Summary {
        std::string variant;
        double sr_train = 0.0, spl_train = 0.0, sr_test = 0.0, spl_test = 0.0;
        int seeds = 0;
    };
    std::vector<Summary> summaries() const;

    // Table-shaped CSV: variant x split x {SR, SPL}, mean over seeds.
    std::string to_csv() const;
    std::string runs_csv() const;
};

// Trains and evaluates every variant x seed combination. jobs > 1 runs
// independent trainings concurrently (each confined to one thread).
AblationResult run_ablation_matrix(const ExperimentConfig& base,
                                   const std::vector<std::string>& variants,
                                   const std::vector<uint64_t>& seeds,
                                   const std::string& out_dir, int jobs = 1);

}  // namespace wmc
