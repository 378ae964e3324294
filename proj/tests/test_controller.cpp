#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include <cmath>

#include "wmc/controller.hpp"
#include "wmc/env.hpp"
#include "wmc/gradcheck.hpp"
#include "wmc/worldmodel.hpp"

using namespace wmc;

namespace {

struct MicroSetup {
    ExperimentConfig cfg = micro_config();
    ParamSet<double> world;
    ParamSet<double> actor;
    ParamSet<double> critic;
    Controller<double> ctrl;

    MicroSetup()
        : ctrl(micro_config().arch, micro_config().ctrl, 0.7853982f, 0.25f) {
        WorldModel<double> wm(cfg.arch, cfg.wm, cfg.aug, 14.14f);
        RngStream rng(3);
        wm.init_params(world, rng);
        RngStream ar(5);
        ctrl.init_actor(actor, ar);
        RngStream cr(7);
        ctrl.init_critic(critic, cr);
    }

    TensorT<double> random_h(int n, uint64_t seed) const {
        RngStream r(seed);
        TensorT<double> h({n, cfg.arch.rssm_units});
        for (int64_t i = 0; i < h.size(); ++i) {
            h[i] = r.normal() * 0.5;
        }
        return h;
    }
    TensorT<double> onehot_z(int n, uint64_t seed) const {
        RngStream r(seed);
        TensorT<double> z({n, cfg.arch.z_dim()});
        for (int row = 0; row < n; ++row) {
            for (int v = 0; v < cfg.arch.latent_vars; ++v) {
                const int pick = r.uniform_int(cfg.arch.latent_classes);
                z[row * cfg.arch.z_dim() + v * cfg.arch.latent_classes + pick] = 1.0;
            }
        }
        return z;
    }
};

}  // namespace

TEST_CASE("lambda_returns: frozen examples and oracle equivalence") {
    // constant reward 1, gamma 0.5, H = 3, zero terminal value, lambda = 1
    {
        auto targets = lambda_returns({1.0, 1.0, 1.0}, {0.0, 0.0, 0.0, 0.0}, 0.5, 1.0);
        CHECK(targets[0] == doctest::Approx(1.75).epsilon(1e-12));
    }
    // gamma -> 0: target equals the immediate reward
    {
        auto targets = lambda_returns({0.3, -0.7, 2.0}, {5.0, 5.0, 5.0, 5.0}, 1e-12, 0.95);
        const double expect[3] = {0.3, -0.7, 2.0};
        for (size_t i = 0; i < targets.size(); ++i) {
            CHECK(targets[i] == doctest::Approx(expect[i]).epsilon(1e-9));
        }
    }
    // lambda = 0: the one-step TD target r + gamma * v
    {
        auto targets = lambda_returns({1.0, 2.0}, {9.0, 4.0, 8.0}, 0.9, 0.0);
        CHECK(targets[0] == doctest::Approx(1.0 + 0.9 * 4.0).epsilon(1e-12));
        CHECK(targets[1] == doctest::Approx(2.0 + 0.9 * 8.0).epsilon(1e-12));
    }
    // lambda = 1 equals the literal discounted sum plus terminal bootstrap
    RngStream rng(11);
    for (int it = 0; it < 200; ++it) {
        const int h = 1 + rng.uniform_int(14);
        std::vector<double> rewards(static_cast<size_t>(h));
        std::vector<double> values(static_cast<size_t>(h + 1));
        for (auto& r : rewards) {
            r = rng.normal();
        }
        for (auto& v : values) {
            v = rng.normal();
        }
        const double gamma = 0.5 + 0.5 * rng.uniform();
        auto targets = lambda_returns(rewards, values, gamma, 1.0);
        for (int t = 0; t < h; ++t) {
            double expect = 0.0;
            double g = 1.0;
            for (int k = t; k < h; ++k) {
                expect += g * rewards[static_cast<size_t>(k)];
                g *= gamma;
            }
            expect += g * values[static_cast<size_t>(h)];
            CHECK(std::abs(targets[static_cast<size_t>(t)] - expect) < 1e-6);
        }
    }
}

TEST_CASE("actor: outputs always within the action bounds") {
    MicroSetup s;
    RngStream fr(13);
    RngStream ar(17);
    int checked = 0;
    TensorT<double> feat({100, s.cfg.arch.feat_dim()});
    for (int rep = 0; rep < 100; ++rep) {
        for (int64_t i = 0; i < feat.size(); ++i) {
            feat[i] = fr.normal() * 2.0;
        }
        Tape<double> tt;
        BoundParams<double> ab(tt, s.actor, false);
        auto dist = s.ctrl.actor_forward(tt, ab, tt.constant(feat), false, ar);
        const auto& a = tt.val(dist.action);
        for (int row = 0; row < tt.shape(dist.action)[0]; ++row) {
            const double rot = a[row * 2];
            const double fwd = a[row * 2 + 1];
            CHECK(rot >= -0.7853982);
            CHECK(rot <= 0.7853982);
            CHECK(fwd >= 0.0);
            CHECK(fwd <= 0.25);
            ++checked;
        }
    }
    CHECK(checked == 10000);

    // mean mode is deterministic for fixed parameters
    Tape<double> t1, t2;
    BoundParams<double> b1(t1, s.actor, false), b2(t2, s.actor, false);
    RngStream r1(1), r2(2);  // different streams must not matter in mean mode
    TensorT<double> f0({3, s.cfg.arch.feat_dim()});
    RngStream fr2(23);
    for (int64_t i = 0; i < f0.size(); ++i) {
        f0[i] = fr2.normal();
    }
    auto d1 = s.ctrl.actor_forward(t1, b1, t1.constant(f0), true, r1);
    auto d2 = s.ctrl.actor_forward(t2, b2, t2.constant(f0), true, r2);
    for (int64_t i = 0; i < t1.val(d1.action).size(); ++i) {
        CHECK(t1.val(d1.action)[i] == t2.val(d2.action)[i]);
    }
}

TEST_CASE("imagine: horizon contract and determinism") {
    MicroSetup s;
    auto h0 = s.random_h(4, 31);
    auto z0 = s.onehot_z(4, 33);

    // H = 15 -> exactly 15 transitions, H+1 states, H rewards, H+1 values
    {
        Tape<double> t;
        BoundParams<double> world(t, s.world, false);
        BoundParams<double> actor(t, s.actor, false);
        BoundParams<double> critic(t, s.critic, false);
        RngStream rng(35);
        auto traj = s.ctrl.imagine(t, world, actor, critic, h0, z0, 15, rng);
        CHECK(traj.actions.size() == 15);
        CHECK(traj.feats.size() == 16);
        CHECK(traj.rewards.size() == 15);
        CHECK(traj.values.size() == 16);
    }
    // H = 0 -> just the start state
    {
        Tape<double> t;
        BoundParams<double> world(t, s.world, false);
        BoundParams<double> actor(t, s.actor, false);
        BoundParams<double> critic(t, s.critic, false);
        RngStream rng(35);
        auto traj = s.ctrl.imagine(t, world, actor, critic, h0, z0, 0, rng);
        CHECK(traj.actions.empty());
        CHECK(traj.feats.size() == 1);
        CHECK(traj.rewards.empty());
        CHECK(traj.values.size() == 1);
    }
    // identical seeds -> identical trajectories; different seeds differ
    {
        auto run = [&](uint64_t seed) {
            Tape<double> t;
            BoundParams<double> world(t, s.world, false);
            BoundParams<double> actor(t, s.actor, false);
            BoundParams<double> critic(t, s.critic, false);
            RngStream rng(seed);
            auto traj = s.ctrl.imagine(t, world, actor, critic, h0, z0, 8, rng);
            return t.val(traj.feats.back());
        };
        auto a = run(99);
        auto b = run(99);
        for (int64_t i = 0; i < a.size(); ++i) {
            CHECK(a[i] == b[i]);
        }
        auto c = run(100);
        double diff = 0.0;
        for (int64_t i = 0; i < a.size(); ++i) {
            diff += std::abs(a[i] - c[i]);
        }
        CHECK(diff > 0.0);
    }
}

TEST_CASE("critic loss is zero when targets equal predictions") {
    MicroSetup s;
    Tape<double> t;
    BoundParams<double> critic(t, s.critic, true);
    RngStream fr(41);
    TensorT<double> feat({5, s.cfg.arch.feat_dim()});
    for (int64_t i = 0; i < feat.size(); ++i) {
        feat[i] = fr.normal();
    }
    auto v = Nets<double>::mlp_fwd(t, critic, "critic", t.constant(feat),
                                   s.cfg.arch.head_layers);
    auto err = t.sub(v, t.constant(t.val(v)));
    auto loss = t.scale(t.half_sum_sq(err), 1.0 / 5.0);
    CHECK(t.val(loss)[0] == 0.0);
}

TEST_CASE("actor and critic gradients pass the finite-difference oracle") {
    MicroSetup s;
    auto h0 = s.random_h(3, 51);
    auto z0 = s.onehot_z(3, 53);

    // actor: pathwise gradient through the frozen dynamics
    {
        auto build = [&](Tape<double>& t, BoundParams<double>& actor_b) {
            BoundParams<double> world(t, s.world, false);
            BoundParams<double> critic(t, s.critic, false);
            RngStream rng(55);
            auto traj = s.ctrl.imagine(t, world, actor_b, critic, h0, z0, 3, rng,
                                       LatentMode::surrogate);
            auto targets = s.ctrl.value_targets_traced(t, traj);
            return s.ctrl.actor_loss(t, traj, targets);
        };
        Tape<double> tape;
        BoundParams<double> actor_b(tape, s.actor, true);
        auto loss = build(tape, actor_b);
        tape.backward(loss);
        auto grads = actor_b.collect_grads();
        auto loss_fn = [&](const ParamSet<double>& p) {
            Tape<double> t;
            BoundParams<double> b(t, p, false);
            return static_cast<double>(t.val(build(t, b))[0]);
        };
        auto rep = finite_diff_check<double>(loss_fn, s.actor, grads, 1e-5, 1e-5,
                                             RngStream(3), 64);
        INFO(rep.to_string());
        CHECK(rep.pass);
    }

    // critic: regression on detached states
    {
        RngStream fr(61);
        TensorT<double> feat({6, s.cfg.arch.feat_dim()});
        for (int64_t i = 0; i < feat.size(); ++i) {
            feat[i] = fr.normal();
        }
        TensorT<double> target({6, 1});
        for (int64_t i = 0; i < 6; ++i) {
            target[i] = fr.normal();
        }
        auto build = [&](Tape<double>& t, BoundParams<double>& critic_b) {
            auto v = Nets<double>::mlp_fwd(t, critic_b, "critic", t.constant(feat),
                                           s.cfg.arch.head_layers);
            auto err = t.sub(v, t.constant(target));
            return t.scale(t.half_sum_sq(err), 1.0 / 6.0);
        };
        Tape<double> tape;
        BoundParams<double> critic_b(tape, s.critic, true);
        auto loss = build(tape, critic_b);
        tape.backward(loss);
        auto grads = critic_b.collect_grads();
        auto loss_fn = [&](const ParamSet<double>& p) {
            Tape<double> t;
            BoundParams<double> b(t, p, false);
            return static_cast<double>(t.val(build(t, b))[0]);
        };
        auto rep = finite_diff_check<double>(loss_fn, s.critic, grads, 1e-5, 1e-7,
                                             RngStream(5), 64);
        INFO(rep.to_string());
        CHECK(rep.pass);
    }
}

TEST_CASE("imagination consumes latent state only; z stays one-hot") {
    // rssm_prior takes no embedding argument, so imagination is a pure
    // function of (h0, z0, params, seed).
    MicroSetup s;
    auto h0 = s.random_h(2, 71);
    auto z0 = s.onehot_z(2, 73);
    auto run = [&] {
        Tape<double> t;
        BoundParams<double> world(t, s.world, false);
        BoundParams<double> actor(t, s.actor, false);
        BoundParams<double> critic(t, s.critic, false);
        RngStream rng(75);
        auto traj = s.ctrl.imagine(t, world, actor, critic, h0, z0, 15, rng);
        return t.val(traj.feats.back());
    };
    auto a = run();
    auto b = run();  // no observation source exists to vary
    for (int64_t i = 0; i < a.size(); ++i) {
        CHECK(a[i] == b[i]);
    }

    // every imagined z stays exactly one-hot per variable over 15 steps
    Tape<double> t;
    BoundParams<double> world(t, s.world, false);
    BoundParams<double> actor(t, s.actor, false);
    BoundParams<double> critic(t, s.critic, false);
    RngStream rng(77);
    auto traj = s.ctrl.imagine(t, world, actor, critic, h0, z0, 15, rng);
    const int zoff = s.cfg.arch.rssm_units;
    for (size_t k = 1; k < traj.feats.size(); ++k) {
        const auto& feat = t.val(traj.feats[k]);
        for (int row = 0; row < 2; ++row) {
            for (int v = 0; v < s.cfg.arch.latent_vars; ++v) {
                double sum = 0.0;
                for (int c = 0; c < s.cfg.arch.latent_classes; ++c) {
                    const double z = feat[row * s.cfg.arch.feat_dim() + zoff +
                                          v * s.cfg.arch.latent_classes + c];
                    CHECK((z == 0.0 || z == 1.0));
                    sum += z;
                }
                CHECK(sum == 1.0);
            }
        }
    }
}

TEST_CASE("slow critic changes only at multiples of the interval") {
    MicroSetup s;
    ParamSet<double> slow = s.critic;
    OptimConfig opt;
    opt.learning_rate = 1e-3;
    RngStream rng(81);
    const int interval = 10;
    for (int step = 1; step <= 25; ++step) {
        std::map<std::string, TensorT<double>> grads;
        for (const auto& [name, e] : s.critic.entries) {
            TensorT<double> g(e.value.shape);
            for (int64_t i = 0; i < g.size(); ++i) {
                g[i] = rng.normal();
            }
            grads.emplace(name, std::move(g));
        }
        auto before = slow;
        adam_step(s.critic, grads, opt);
        if (step % interval == 0) {
            for (auto& [name, e] : slow.entries) {
                e.value = s.critic.at(name);
            }
            for (const auto& [name, e] : slow.entries) {
                const auto& cv = s.critic.at(name);
                for (int64_t i = 0; i < cv.size(); ++i) {
                    CHECK(e.value[i] == cv[i]);
                }
            }
        } else {
            for (const auto& [name, e] : slow.entries) {
                const auto& bv = before.at(name);
                for (int64_t i = 0; i < bv.size(); ++i) {
                    CHECK(e.value[i] == bv[i]);
                }
            }
        }
    }
}
