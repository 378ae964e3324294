#pragma once

#include <cmath>
#include <map>
#include <string>

#include "wmc/nn.hpp"
#include "wmc/tensor.hpp"

namespace wmc {

struct OptimConfig {
    double learning_rate = 3e-4;
    double adam_epsilon = 1e-5;
    double grad_clip_norm = 100.0;
    double beta1 = 0.9;
    double beta2 = 0.999;

    void validate() const {
        check(learning_rate > 0 && adam_epsilon > 0 && grad_clip_norm > 0,
              "optimizer config values must be strictly positive");
    }
};

template <class T>
double global_grad_norm(const std::map<std::string, TensorT<T>>& grads) {
    double acc = 0.0;
    for (const auto& [name, g] : grads) {
        for (int64_t i = 0; i < g.size(); ++i) {
            const double v = static_cast<double>(g[i]);
            acc += v * v;
        }
    }
    return std::sqrt(acc);
}

// Scales all gradients by max_norm/norm when the global L2 norm exceeds
// max_norm; otherwise leaves them untouched. Returns the pre-clip norm.
template <class T>
double clip_by_global_norm(std::map<std::string, TensorT<T>>& grads, double max_norm) {
    check(max_norm > 0, "clip_by_global_norm: max_norm must be positive");
    for (const auto& [name, g] : grads) {
        check(g.finite(), "clip_by_global_norm: non-finite gradient in " + name);
    }
    const double norm = global_grad_norm(grads);
    if (norm > max_norm) {
        const T s = static_cast<T>(max_norm / norm);
        for (auto& [name, g] : grads) {
            for (int64_t i = 0; i < g.size(); ++i) {
                g[i] *= s;
            }
        }
    }
    return norm;
}

// Standard Adam with bias correction; epsilon is added to the square-root
// denominator. Increments the ParamSet step counter once per call.
template <class T>
void adam_step(ParamSet<T>& params, const std::map<std::string, TensorT<T>>& grads,
               const OptimConfig& cfg) {
    cfg.validate();
    check(params.step >= 0, "adam_step: negative step counter");
    params.step += 1;
    const double b1 = cfg.beta1;
    const double b2 = cfg.beta2;
    const double bias1 = 1.0 - std::pow(b1, static_cast<double>(params.step));
    const double bias2 = 1.0 - std::pow(b2, static_cast<double>(params.step));
    for (auto& [name, entry] : params.entries) {
        auto git = grads.find(name);
        if (git == grads.end()) {
            continue;  // decay-only is handled below for present grads only
        }
        const TensorT<T>& g = git->second;
        check(g.shape == entry.value.shape, "adam_step: gradient shape mismatch for " + name);
        check(g.finite(), "adam_step: non-finite gradient for " + name);
        for (int64_t i = 0; i < g.size(); ++i) {
            const double gi = static_cast<double>(g[i]);
            const double m = b1 * static_cast<double>(entry.m[i]) + (1.0 - b1) * gi;
            const double v = b2 * static_cast<double>(entry.v[i]) + (1.0 - b2) * gi * gi;
            entry.m[i] = static_cast<T>(m);
            entry.v[i] = static_cast<T>(v);
            const double mhat = m / bias1;
            const double vhat = v / bias2;
            entry.value[i] -= static_cast<T>(cfg.learning_rate * mhat /
                                             (std::sqrt(vhat) + cfg.adam_epsilon));
        }
    }
    for (auto& [name, entry] : params.entries) {
        if (grads.count(name) != 0) {
            continue;
        }
        // Parameters without a gradient this step: moments decay, value fixed.
        for (int64_t i = 0; i < entry.m.size(); ++i) {
            entry.m[i] = static_cast<T>(b1 * static_cast<double>(entry.m[i]));
            entry.v[i] = static_cast<T>(b2 * static_cast<double>(entry.v[i]));
        }
    }
}

// key <- m*key + (1-m)*query, elementwise over all entries. The key set never
// receives gradients; this is its only update path.
template <class T>
void ema_update(ParamSet<T>& key, const ParamSet<T>& query, double momentum) {
    check(momentum >= 0.0 && momentum <= 1.0, "ema_update: momentum out of [0,1]");
    for (auto& [name, entry] : key.entries) {
        const auto it = query.entries.find(name);
        check(it != query.entries.end(), "ema_update: missing query param " + name);
        const TensorT<T>& q = it->second.value;
        check(q.shape == entry.value.shape, "ema_update: shape mismatch for " + name);
        const T m = static_cast<T>(momentum);
        const T om = static_cast<T>(1.0 - momentum);
        for (int64_t i = 0; i < q.size(); ++i) {
            entry.value[i] = m * entry.value[i] + om * q[i];
        }
    }
}

}  // namespace wmc
