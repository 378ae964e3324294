#include "wmc/trainer.hpp"

#include <omp.h>

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <sstream>

#include "wmc/checkpoint.hpp"
#include "wmc/controller.hpp"
#include "wmc/env.hpp"
#include "wmc/logging.hpp"
#include "wmc/replay.hpp"
#include "wmc/worldmodel.hpp"

namespace wmc {

namespace {

constexpr double kHalfLog2PiE = 1.4189385332046727;  // 0.5*ln(2*pi*e)

struct Collector {
    const ExperimentConfig& cfg;
    PointGoalEnv env;
    PolicyState<float> policy;
    RngStream scene_rng;
    RngStream policy_rng;
    RngStream explore_rng;
    EnvObservation obs;
    std::vector<EnvAction> actions;
    uint64_t scene_seed = 0;
    uint64_t texture_seed = 0;
    bool episode_open = false;
    EpisodeRecord episode;

    Collector(const ExperimentConfig& c, uint64_t seed)
        : cfg(c),
          env(c.env),
          scene_rng(RngStream(seed).split("collect_scenes")),
          policy_rng(RngStream(seed).split("collect_policy")),
          explore_rng(RngStream(seed).split("collect_explore")) {}

    void begin_episode() {
        for (int attempt = 0; attempt < 64; ++attempt) {
            scene_seed = scene_rng.next_u64();
            texture_seed = scene_rng.next_u64();
            try {
                obs = env.reset(scene_seed, texture_seed, Split::train);
                break;
            } catch (const std::exception&) {
                continue;  // unsatisfiable placement; draw another scene
            }
        }
        check(env.episode_active(), "collector could not place an episode");
        policy.reset(cfg.arch);
        actions.clear();
        episode = EpisodeRecord{};
        episode.scene_seed = scene_seed;
        episode.texture_seed = texture_seed;
        episode.split = Split::train;
        episode.geodesic_start = env.geodesic_start();
        episode_open = true;
    }

    // One interactive step; returns true when the episode finished.
    bool step(const ParamSet<float>& world, const ParamSet<float>& actor,
              const Controller<float>& ctrl, int64_t env_steps, bool random_policy) {
        EnvAction action;
        if (random_policy) {
            action.rotation = static_cast<float>(
                explore_rng.uniform(-cfg.env.max_rotation, cfg.env.max_rotation));
            action.forward =
                static_cast<float>(explore_rng.uniform(0.0, cfg.env.max_forward));
        } else {
            action = policy.act(obs.rgb, obs.task_vec, world, actor, ctrl, false,
                                policy_rng);
            if (env_steps < cfg.train.explore_until) {
                action.rotation += static_cast<float>(explore_rng.normal() *
                                                      cfg.train.explore_noise *
                                                      cfg.env.max_rotation);
                action.forward += static_cast<float>(explore_rng.normal() *
                                                     cfg.train.explore_noise *
                                                     cfg.env.max_forward);
            }
        }
        action.rotation =
            std::clamp(action.rotation, -cfg.env.max_rotation, cfg.env.max_rotation);
        action.forward = std::clamp(action.forward, 0.0f, cfg.env.max_forward);

        EpisodeStep step;
        step.obs = obs;
        step.action = action;
        auto res = env.step(action);
        step.reward = res.reward;
        step.done = res.done;
        episode.steps.push_back(std::move(step));
        actions.push_back(action);
        obs = std::move(res.obs);
        if (res.done) {
            episode.success = res.success;
            episode.path_length = env.path_length();
            episode_open = false;
            return true;
        }
        return false;
    }
};

void append_metrics_header(std::ostream& os) {
    os << "step,env_steps,loss_total,loss_contrastive,loss_depth,loss_reward,loss_kl,"
          "actor_loss,critic_loss,value_mean,entropy,sr_train,spl_train,sr_test,"
          "spl_test\n";
}

std::string fmt(double v) {
    std::ostringstream os;
    os.precision(9);
    os << v;
    return os.str();
}

}  // namespace

int64_t planned_gradient_steps(const ExperimentConfig& cfg) {
    const int64_t interactive = cfg.train.env_steps;
    return interactive / cfg.train.train_every;
}

TrainResult train(const ExperimentConfig& cfg, const std::string& out_dir) {
    cfg.validate();
    omp_set_num_threads(std::max(1, cfg.train.threads));
    std::filesystem::create_directories(out_dir);

    const float depth_max =
        static_cast<float>(cfg.env.scene.interior_cells + 2) * std::sqrt(2.0f) *
        cfg.env.scene.cell_m;
    WorldModel<float> wm(cfg.arch, cfg.wm, cfg.aug, depth_max);
    Controller<float> ctrl(cfg.arch, cfg.ctrl, cfg.env.max_rotation, cfg.env.max_forward);

    RngStream root(cfg.seed);
    RngStream init_rng = root.split("init");
    ParamSet<float> world;
    wm.init_params(world, init_rng);
    ParamSet<float> key_params;
    if (cfg.wm.use_contrastive) {
        key_params = wm.init_key_params(world);
    }
    ParamSet<float> actor;
    RngStream actor_rng = root.split("init_actor");
    ctrl.init_actor(actor, actor_rng);
    ParamSet<float> critic;
    RngStream critic_rng = root.split("init_critic");
    ctrl.init_critic(critic, critic_rng);
    ParamSet<float> slow_critic = critic;

    OptimConfig world_opt{cfg.train.world_lr, cfg.train.adam_eps, cfg.train.grad_clip};
    OptimConfig actor_opt{cfg.train.actor_lr, cfg.train.adam_eps, cfg.train.grad_clip};
    OptimConfig critic_opt{cfg.train.critic_lr, cfg.train.adam_eps, cfg.train.grad_clip};

    ReplayBuffer buffer(cfg.train.replay_capacity, depth_max);
    Collector collector(cfg, cfg.seed);
    collector.begin_episode();

    const std::string metrics_path = out_dir + "/metrics.csv";
    std::ofstream metrics(metrics_path, std::ios::trunc);
    check(static_cast<bool>(metrics), "trainer: cannot open metrics file " + metrics_path);
    append_metrics_header(metrics);
    {
        std::ofstream cfg_echo(out_dir + "/config_resolved.cfg", std::ios::trunc);
        cfg_echo << serialize_config(cfg);
    }

    RngStream step_rng = root.split("train_steps");
    RngStream ar_rng = root.split("action_replay");
    RngStream start_rng = root.split("imag_starts");

    int64_t env_steps = 0;
    int64_t grad_steps = 0;
    double sr_train = -1.0, spl_train = -1.0, sr_test = -1.0, spl_test = -1.0;
    const int64_t total_interactive = cfg.train.prefill + cfg.train.env_steps;

    auto save_checkpoint = [&](const std::string& name) {
        Checkpoint ck;
        ck.config_text = serialize_config(cfg);
        checkpoint_add_params(ck, "world", world);
        if (cfg.wm.use_contrastive) {
            checkpoint_add_params(ck, "key", key_params);
        }
        checkpoint_add_params(ck, "actor", actor);
        checkpoint_add_params(ck, "critic", critic);
        checkpoint_add_params(ck, "slow_critic", slow_critic);
        ck.add_scalar_i64("env_steps", env_steps);
        ck.add_scalar_i64("grad_steps", grad_steps);
        const std::string path = out_dir + "/" + name;
        ck.save(path);
        return path;
    };

    std::string last_checkpoint = save_checkpoint("checkpoint_init.ckpt");

    auto finish_episode = [&] {
        const EpisodeRecord& ep = collector.episode;
        const int64_t id = buffer.add_episode(ep);
        if (cfg.wm.use_action_replay) {
            // texture randomization as intervention: replay the identical
            // action sequence under a fresh texture seed; replays do not
            // consume the interactive-step budget
            const uint64_t tex_b = ar_rng.next_u64();
            auto pair = replay_actions(cfg.env, collector.actions, ep.scene_seed,
                                       ep.texture_seed, tex_b, Split::train);
            buffer.add_episode(pair.second, id);
        }
        collector.begin_episode();
    };

    while (env_steps < total_interactive) {
        const bool random_phase = env_steps < cfg.train.prefill;
        const bool done =
            collector.step(world, actor, ctrl, env_steps - cfg.train.prefill,
                           random_phase);
        ++env_steps;
        if (done) {
            finish_episode();
        }

        const bool training_phase = env_steps > cfg.train.prefill;
        const int64_t steps_after_prefill = env_steps - cfg.train.prefill;
        if (!training_phase || steps_after_prefill % cfg.train.train_every != 0 ||
            !buffer.can_sample(cfg.train.batch_l)) {
            continue;
        }

        // ---- world model step ----
        RngStream grad_rng = step_rng.split(static_cast<uint64_t>(grad_steps));
        RngStream batch_rng = grad_rng.split("batch");
        auto batch =
            buffer.sample_sequences(cfg.train.batch_b, cfg.train.batch_l, batch_rng);
        Tape<float> tape;
        BoundParams<float> bound(tape, world, true);
        auto wm_res = wm.build_loss(tape, bound, key_params, batch, grad_rng.split("wm"));
        if (!std::isfinite(wm_res.diag.total)) {
            std::ofstream dump(out_dir + "/nan_dump.txt", std::ios::trunc);
            dump << "world model loss non-finite at grad step " << grad_steps
                 << " env step " << env_steps << "\n"
                 << "contrastive=" << wm_res.diag.contrastive
                 << " depth=" << wm_res.diag.depth_nll
                 << " reward=" << wm_res.diag.reward_nll << " kl=" << wm_res.diag.kl
                 << "\n";
            throw TrainingDiverged("world model loss became non-finite");
        }
        tape.backward(wm_res.loss);
        auto world_grads = bound.collect_grads();
        clip_by_global_norm(world_grads, world_opt.grad_clip_norm);
        adam_step(world, world_grads, world_opt);
        if (cfg.wm.use_contrastive) {
            wm.ema_update_keys(key_params, world);
        }

        // ---- actor-critic step on imagined rollouts ----
        const int n_rows = cfg.train.batch_b * cfg.train.batch_l;
        int n_starts = cfg.ctrl.imag_starts > 0
                           ? std::min(cfg.ctrl.imag_starts, n_rows)
                           : n_rows;
        TensorT<float> h0({n_starts, cfg.arch.rssm_units});
        TensorT<float> z0({n_starts, cfg.arch.z_dim()});
        for (int i = 0; i < n_starts; ++i) {
            const int row = n_starts == n_rows
                                ? i
                                : static_cast<int>(start_rng.uniform_int(n_rows));
            std::copy(wm_res.h_values.data() + static_cast<int64_t>(row) *
                          cfg.arch.rssm_units,
                      wm_res.h_values.data() +
                          static_cast<int64_t>(row + 1) * cfg.arch.rssm_units,
                      h0.data() + static_cast<int64_t>(i) * cfg.arch.rssm_units);
            std::copy(
                wm_res.z_values.data() + static_cast<int64_t>(row) * cfg.arch.z_dim(),
                wm_res.z_values.data() + static_cast<int64_t>(row + 1) * cfg.arch.z_dim(),
                z0.data() + static_cast<int64_t>(i) * cfg.arch.z_dim());
        }

        Tape<float> imag_tape;
        BoundParams<float> world_frozen(imag_tape, world, false);
        BoundParams<float> actor_bound(imag_tape, actor, true);
        BoundParams<float> slow_bound(imag_tape, slow_critic, false);
        RngStream imagine_rng = grad_rng.split("imagine");
        auto traj = ctrl.imagine(imag_tape, world_frozen, actor_bound, slow_bound, h0, z0,
                                 cfg.ctrl.horizon, imagine_rng);
        auto targets = ctrl.value_targets_traced(imag_tape, traj);
        auto a_loss = ctrl.actor_loss(imag_tape, traj, targets);
        const double actor_loss_value = static_cast<double>(imag_tape.val(a_loss)[0]);
        if (!std::isfinite(actor_loss_value)) {
            throw TrainingDiverged("actor loss became non-finite");
        }
        imag_tape.backward(a_loss);
        auto actor_grads = actor_bound.collect_grads();
        clip_by_global_norm(actor_grads, actor_opt.grad_clip_norm);
        adam_step(actor, actor_grads, actor_opt);

        // critic regresses the same targets on detached states
        const int horizon = cfg.ctrl.horizon;
        double critic_loss_value = 0.0;
        if (horizon > 0) {
            std::vector<TensorT<float>> feat_values;
            TensorT<float> feats({n_starts * horizon, cfg.arch.feat_dim()});
            TensorT<float> target_values({n_starts * horizon, 1});
            for (int t = 0; t < horizon; ++t) {
                const auto& fv = imag_tape.val(traj.feats[static_cast<size_t>(t)]);
                const auto& tv = imag_tape.val(targets[static_cast<size_t>(t)]);
                for (int i = 0; i < n_starts; ++i) {
                    std::copy(fv.data() + static_cast<int64_t>(i) * cfg.arch.feat_dim(),
                              fv.data() +
                                  static_cast<int64_t>(i + 1) * cfg.arch.feat_dim(),
                              feats.data() + (static_cast<int64_t>(t) * n_starts + i) *
                                                 cfg.arch.feat_dim());
                    target_values[static_cast<int64_t>(t) * n_starts + i] = tv[i];
                }
            }
            Tape<float> critic_tape;
            BoundParams<float> critic_bound(critic_tape, critic, true);
            auto v_pred = Nets<float>::mlp_fwd(critic_tape, critic_bound, "critic",
                                               critic_tape.constant(std::move(feats)),
                                               cfg.arch.head_layers);
            auto err = critic_tape.sub(
                v_pred, critic_tape.constant(std::move(target_values)));
            auto c_loss = critic_tape.scale(critic_tape.half_sum_sq(err),
                                            1.0f / (n_starts * horizon));
            critic_loss_value = static_cast<double>(critic_tape.val(c_loss)[0]);
            if (!std::isfinite(critic_loss_value)) {
                throw TrainingDiverged("critic loss became non-finite");
            }
            critic_tape.backward(c_loss);
            auto critic_grads = critic_bound.collect_grads();
            clip_by_global_norm(critic_grads, critic_opt.grad_clip_norm);
            adam_step(critic, critic_grads, critic_opt);
        }

        ++grad_steps;
        if (cfg.ctrl.slow_critic_interval > 0 &&
            grad_steps % cfg.ctrl.slow_critic_interval == 0) {
            for (auto& [name, e] : slow_critic.entries) {
                e.value = critic.at(name);
            }
        }

        // diagnostics
        double value_mean = 0.0;
        {
            const auto& v0 = imag_tape.val(traj.values[0]);
            for (int64_t i = 0; i < v0.size(); ++i) {
                value_mean += static_cast<double>(v0[i]);
            }
            value_mean /= std::max<int64_t>(1, v0.size());
        }
        double entropy = 0.0;
        if (!traj.log_stds.empty()) {
            int64_t count = 0;
            for (auto ls : traj.log_stds) {
                const auto& v = imag_tape.val(ls);
                for (int64_t i = 0; i < v.size(); ++i) {
                    entropy += static_cast<double>(v[i]) + kHalfLog2PiE;
                }
                count += v.size() / cfg.arch.action_dim;
            }
            entropy /= std::max<int64_t>(1, count);
        }

        if (cfg.train.eval_every > 0 && grad_steps % cfg.train.eval_every == 0) {
            auto tr = evaluate(cfg, world, actor, Split::train,
                               cfg.train.eval_episodes_during_train, cfg.seed + 7777);
            auto te = evaluate(cfg, world, actor, Split::test,
                               cfg.train.eval_episodes_during_train, cfg.seed + 7777);
            sr_train = tr.sr;
            spl_train = tr.spl;
            sr_test = te.sr;
            spl_test = te.spl;
            log_info("step " + std::to_string(grad_steps) + " sr_train=" + fmt(sr_train) +
                     " sr_test=" + fmt(sr_test));
        }

        metrics << grad_steps << "," << env_steps << "," << fmt(wm_res.diag.total) << ","
                << fmt(wm_res.diag.contrastive) << "," << fmt(wm_res.diag.depth_nll)
                << "," << fmt(wm_res.diag.reward_nll) << "," << fmt(wm_res.diag.kl) << ","
                << fmt(actor_loss_value) << "," << fmt(critic_loss_value) << ","
                << fmt(value_mean) << "," << fmt(entropy) << "," << fmt(sr_train) << ","
                << fmt(spl_train) << "," << fmt(sr_test) << "," << fmt(spl_test) << "\n";

        if (cfg.train.checkpoint_every > 0 &&
            grad_steps % cfg.train.checkpoint_every == 0) {
            last_checkpoint =
                save_checkpoint("checkpoint_" + std::to_string(grad_steps) + ".ckpt");
        }
    }

    metrics.flush();
    TrainResult result;
    result.metrics_path = metrics_path;
    result.env_steps = env_steps - cfg.train.prefill;
    result.gradient_steps = grad_steps;
    result.checkpoint_path = save_checkpoint("checkpoint_final.ckpt");
    result.train_eval = evaluate(cfg, world, actor, Split::train,
                                 cfg.train.eval_episodes, cfg.seed + 424242);
    result.test_eval = evaluate(cfg, world, actor, Split::test, cfg.train.eval_episodes,
                                cfg.seed + 424242);
    {
        std::ofstream report(out_dir + "/eval_final.csv", std::ios::trunc);
        report << "split,episodes,sr,spl\n";
        report << "train," << result.train_eval.episodes_run << ","
               << result.train_eval.sr << "," << result.train_eval.spl << "\n";
        report << "test," << result.test_eval.episodes_run << "," << result.test_eval.sr
               << "," << result.test_eval.spl << "\n";
    }
    return result;
}

}  // namespace wmc
