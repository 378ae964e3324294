#pragma once

#include <cmath>
#include <vector>

#include "wmc/config.hpp"
#include "wmc/networks.hpp"
#include "wmc/nn.hpp"
#include "wmc/tape.hpp"

namespace wmc {

// Pure lambda-return recursion, shared by tests (as the oracle target) and by
// the traced implementation:
//   V_t = r_t + gamma * ((1-lambda) * v_{t+1} + lambda * V_{t+1}),
//   V_H = v_H (slow-critic bootstrap); with lambda = 1 this is the literal
//   discounted sum of H rewards plus the terminal bootstrap.
inline std::vector<double> lambda_returns(const std::vector<double>& rewards,
                                          const std::vector<double>& values,
                                          double gamma, double lambda) {
    const size_t h = rewards.size();
    check(values.size() == h + 1, "lambda_returns: need H+1 values for H rewards");
    std::vector<double> targets(h);
    double next = values[h];
    for (size_t i = h; i-- > 0;) {
        targets[i] = rewards[i] + gamma * ((1.0 - lambda) * values[i + 1] + lambda * next);
        next = targets[i];
    }
    return targets;
}

template <class T>
class Controller {
public:
    using Var = typename Tape<T>::Var;

    Controller(ModelArch arch, ControllerConfig cfg, float max_rotation,
               float max_forward)
        : arch_(std::move(arch)),
          cfg_(cfg),
          max_rotation_(max_rotation),
          max_forward_(max_forward) {}

    const ControllerConfig& config() const { return cfg_; }

    void init_actor(ParamSet<T>& p, RngStream& rng) const {
        Nets<T>::init_mlp(p, "actor", arch_.feat_dim(), arch_.head_units,
                          arch_.head_layers, 2 * arch_.action_dim, rng);
    }
    void init_critic(ParamSet<T>& p, RngStream& rng) const {
        Nets<T>::init_mlp(p, "critic", arch_.feat_dim(), arch_.head_units,
                          arch_.head_layers, 1, rng);
    }

    struct ActionDist {
        Var action = -1;   // env-scaled action [N, 2]
        Var log_std = -1;  // [N, action_dim] (log of the base std)
    };

    // Squashed-Gaussian policy: a = tanh(mu + std * eps) mapped into the env
    // bounds. mean_mode uses tanh(mu). The reparameterized sample keeps the
    // pathwise gradient to the actor.
    ActionDist actor_forward(Tape<T>& t, BoundParams<T>& actor, Var feat, bool mean_mode,
                             RngStream& rng) const {
        const int n = t.shape(feat)[0];
        const int a_dim = arch_.action_dim;
        Var out = Nets<T>::mlp_fwd(t, actor, "actor", feat, arch_.head_layers);
        Var mu = t.slice_cols(out, 0, a_dim);
        Var raw_std = t.slice_cols(out, a_dim, 2 * a_dim);
        Var std = t.affine(t.softplus(raw_std), T(1), static_cast<T>(cfg_.min_std));
        Var pre_tanh;
        if (mean_mode) {
            pre_tanh = mu;
        } else {
            TensorT<T> eps({n, a_dim});
            for (int64_t i = 0; i < eps.size(); ++i) {
                eps[i] = static_cast<T>(rng.normal());
            }
            pre_tanh = t.add(mu, t.mul(std, t.constant(std::move(eps), "eps")));
        }
        Var squashed = t.tanh_op(pre_tanh);
        Var rot = t.scale(t.slice_cols(squashed, 0, 1), static_cast<T>(max_rotation_));
        Var fwd = t.affine(t.slice_cols(squashed, 1, 2),
                           static_cast<T>(max_forward_ / 2.0),
                           static_cast<T>(max_forward_ / 2.0));
        ActionDist dist;
        dist.action = t.concat({rot, fwd});
        dist.log_std = t.log_op(std);
        return dist;
    }

    struct Trajectory {
        std::vector<Var> feats;    // H+1 latent states as concat(h, z)
        std::vector<Var> actions;  // H
        std::vector<Var> rewards;  // H, reward head at the arrival state
        std::vector<Var> values;   // H+1, from the provided critic parameters
        std::vector<Var> log_stds;
    };

    // Imagination: exactly H prior-only transitions from detached posterior
    // starts. The signature takes latent tensors only, never an observation;
    // rssm_prior has no embedding input, so no code path can consult one.
    Trajectory imagine(Tape<T>& t, BoundParams<T>& world, BoundParams<T>& actor,
                       BoundParams<T>& value_params, const TensorT<T>& h0,
                       const TensorT<T>& z0, int horizon, RngStream& rng,
                       LatentMode mode = LatentMode::sample) const {
        Trajectory traj;
        Var h = t.constant(h0, "imag_h0");
        Var z = t.constant(z0, "imag_z0");
        Var feat = t.concat({h, z});
        traj.feats.push_back(feat);
        traj.values.push_back(
            Nets<T>::mlp_fwd(t, value_params, "critic", feat, arch_.head_layers));
        RngStream z_stream = rng.split("imag_z");
        RngStream a_stream = rng.split("imag_a");
        for (int k = 0; k < horizon; ++k) {
            auto dist = actor_forward(t, actor, feat, false, a_stream);
            traj.actions.push_back(dist.action);
            traj.log_stds.push_back(dist.log_std);
            auto next =
                Nets<T>::rssm_prior(t, world, arch_, h, z, dist.action, z_stream, mode);
            h = next.h;
            z = next.z;
            feat = t.concat({h, z});
            traj.feats.push_back(feat);
            traj.rewards.push_back(
                Nets<T>::mlp_fwd(t, world, "reward", feat, arch_.head_layers));
            traj.values.push_back(
                Nets<T>::mlp_fwd(t, value_params, "critic", feat, arch_.head_layers));
        }
        return traj;
    }

    // Traced lambda returns over [N,1] reward/value nodes.
    std::vector<Var> value_targets_traced(Tape<T>& t, const Trajectory& traj) const {
        const size_t h = traj.rewards.size();
        std::vector<Var> targets(h);
        Var next = traj.values[h];
        for (size_t i = h; i-- > 0;) {
            Var boot = t.add(t.scale(traj.values[i + 1],
                                     static_cast<T>(cfg_.gamma * (1.0 - cfg_.lambda))),
                             t.scale(next, static_cast<T>(cfg_.gamma * cfg_.lambda)));
            targets[i] = t.add(traj.rewards[i], boot);
            next = targets[i];
        }
        return targets;
    }

    // Actor objective: maximize the mean lambda-return, plus an entropy bonus
    // on the base Gaussian. Returned as a loss (minimized).
    Var actor_loss(Tape<T>& t, const Trajectory& traj,
                   const std::vector<Var>& targets) const {
        std::vector<Var> sums;
        int64_t count = 0;
        for (Var v : targets) {
            sums.push_back(t.sum(v));
            count += t.val(v).size();
        }
        Var total = t.scale(t.add_n(sums), static_cast<T>(-1.0 / count));
        if (cfg_.entropy_beta > 0 && !traj.log_stds.empty()) {
            std::vector<Var> ent;
            int64_t ecount = 0;
            for (Var ls : traj.log_stds) {
                ent.push_back(t.sum(ls));
                ecount += t.val(ls).size();
            }
            Var entropy = t.scale(t.add_n(ent),
                                  static_cast<T>(cfg_.entropy_beta / ecount));
            total = t.sub(total, entropy);
        }
        return total;
    }

    float max_rotation() const { return max_rotation_; }
    float max_forward() const { return max_forward_; }
    const ModelArch& arch() const { return arch_; }

private:
    ModelArch arch_;
    ControllerConfig cfg_;
    float max_rotation_;
    float max_forward_;
};

// Online filtering state for acting in the environment. Consumes rgb and the
// task vector only; depth never enters the deployment path.
template <class T>
struct PolicyState {
    TensorT<T> h;
    TensorT<T> z;
    TensorT<T> prev_action;

    void reset(const ModelArch& arch) {
        h = TensorT<T>::zeros({1, arch.rssm_units});
        z = TensorT<T>::zeros({1, arch.z_dim()});
        prev_action = TensorT<T>::zeros({1, arch.action_dim});
    }

    EnvAction act(const Tensor32& rgb, const std::array<float, 6>& task_vec,
                  const ParamSet<T>& world_params, const ParamSet<T>& actor_params,
                  const Controller<T>& ctrl, bool mean_mode, RngStream& rng) {
        const ModelArch& arch = ctrl.arch();
        Tape<T> t;
        BoundParams<T> world(t, world_params, false);
        BoundParams<T> actor(t, actor_params, false);
        TensorT<T> img({1, arch.img_h, arch.img_w, 3});
        for (int64_t i = 0; i < rgb.size(); ++i) {
            img[i] = static_cast<T>(rgb[i] - 0.5f);
        }
        TensorT<T> task({1, arch.task_dim});
        for (int k = 0; k < arch.task_dim; ++k) {
            task[k] = static_cast<T>(task_vec[static_cast<size_t>(k)]);
        }
        auto embed = Nets<T>::encode(t, world, arch, t.constant(std::move(img)),
                                     t.constant(std::move(task)));
        auto post = Nets<T>::rssm_posterior(t, world, arch, t.constant(h), t.constant(z),
                                            t.constant(prev_action), embed, rng);
        auto feat = t.concat({post.h, post.z});
        auto dist = ctrl.actor_forward(t, actor, feat, mean_mode, rng);
        h = t.val(post.h);
        z = t.val(post.z);
        const auto& a = t.val(dist.action);
        prev_action = a;
        EnvAction env_action;
        env_action.rotation = static_cast<float>(a[0]);
        env_action.forward = static_cast<float>(a[1]);
        return env_action;
    }
};

}  // namespace wmc
