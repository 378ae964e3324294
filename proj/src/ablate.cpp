#include "wmc/ablate.hpp"

#include <filesystem>
#include <fstream>
#include <future>
#include <map>
#include <sstream>

#include "wmc/logging.hpp"

namespace wmc {

std::vector<AblationResult::Summary> AblationResult::summaries() const {
    std::map<std::string, Summary> acc;
    std::vector<std::string> order;
    for (const auto& run : runs) {
        if (acc.find(run.variant) == acc.end()) {
            order.push_back(run.variant);
            acc[run.variant].variant = run.variant;
        }
        Summary& s = acc[run.variant];
        s.sr_train += run.sr_train;
        s.spl_train += run.spl_train;
        s.sr_test += run.sr_test;
        s.spl_test += run.spl_test;
        s.seeds += 1;
    }
    std::vector<Summary> out;
    for (const auto& name : order) {
        Summary s = acc[name];
        if (s.seeds > 0) {
            s.sr_train /= s.seeds;
            s.spl_train /= s.seeds;
            s.sr_test /= s.seeds;
            s.spl_test /= s.seeds;
        }
        out.push_back(s);
    }
    return out;
}

std::string AblationResult::to_csv() const {
    std::ostringstream os;
    os << "variant,seeds,sr_train,spl_train,sr_test,spl_test\n";
    for (const auto& s : summaries()) {
        os << s.variant << "," << s.seeds << "," << s.sr_train << "," << s.spl_train
           << "," << s.sr_test << "," << s.spl_test << "\n";
    }
    return os.str();
}

std::string AblationResult::runs_csv() const {
    std::ostringstream os;
    os << "variant,seed,sr_train,spl_train,sr_test,spl_test\n";
    for (const auto& r : runs) {
        os << r.variant << "," << r.seed << "," << r.sr_train << "," << r.spl_train
           << "," << r.sr_test << "," << r.spl_test << "\n";
    }
    return os.str();
}

AblationResult run_ablation_matrix(const ExperimentConfig& base,
                                   const std::vector<std::string>& variants,
                                   const std::vector<uint64_t>& seeds,
                                   const std::string& out_dir, int jobs) {
    check(seeds.size() >= 1, "ablation: at least one seed required");
    std::filesystem::create_directories(out_dir);

    struct Job {
        std::string variant;
        uint64_t seed;
        std::string dir;
        ExperimentConfig cfg;
    };
    std::vector<Job> jobs_list;
    for (const auto& variant : variants) {
        for (uint64_t seed : seeds) {
            Job j;
            j.variant = variant;
            j.seed = seed;
            j.cfg = base;
            apply_variant(j.cfg, variant);
            j.cfg.seed = seed;
            if (jobs > 1) {
                j.cfg.train.threads = 1;
            }
            std::string safe = variant;
            for (char& c : safe) {
                if (c == '+') {
                    c = 'p';
                }
            }
            j.dir = out_dir + "/" + safe + "_seed" + std::to_string(seed);
            jobs_list.push_back(std::move(j));
        }
    }

    AblationResult result;
    result.runs.resize(jobs_list.size());
    std::atomic<size_t> next{0};
    auto worker = [&] {
        for (;;) {
            const size_t idx = next.fetch_add(1);
            if (idx >= jobs_list.size()) {
                return;
            }
            const Job& job = jobs_list[idx];
            log_info("ablation run " + job.variant + " seed " +
                     std::to_string(job.seed));
            auto res = train(job.cfg, job.dir);
            AblationRow row;
            row.variant = job.variant;
            row.seed = job.seed;
            row.sr_train = res.train_eval.sr;
            row.spl_train = res.train_eval.spl;
            row.sr_test = res.test_eval.sr;
            row.spl_test = res.test_eval.spl;
            result.runs[idx] = row;
        }
    };
    const int n_workers = std::max(1, std::min<int>(jobs, static_cast<int>(jobs_list.size())));
    std::vector<std::future<void>> futures;
    for (int i = 0; i < n_workers; ++i) {
        futures.push_back(std::async(std::launch::async, worker));
    }
    for (auto& f : futures) {
        f.get();
    }

    {
        std::ofstream table(out_dir + "/ablation_table.csv", std::ios::trunc);
        table << result.to_csv();
        std::ofstream runs(out_dir + "/ablation_runs.csv", std::ios::trunc);
        runs << result.runs_csv();
    }
    return result;
}

}  // namespace wmc
