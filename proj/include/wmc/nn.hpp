#pragma once

#include <map>
#include <string>
#include <vector>

#include "wmc/rng.hpp"
#include "wmc/tape.hpp"
#include "wmc/tensor.hpp"

namespace wmc {

// Named parameter tensors plus per-parameter Adam state. std::map keeps
// iteration order fixed, which makes global-norm reductions deterministic.
template <class T>
struct ParamSet {
    struct Entry {
        TensorT<T> value;
        TensorT<T> m;  // first moment
        TensorT<T> v;  // second moment
    };

    std::map<std::string, Entry> entries;
    int64_t step = 0;

    bool contains(const std::string& name) const { return entries.count(name) != 0; }

    TensorT<T>& add(const std::string& name, TensorT<T> init) {
        check(!contains(name), "duplicate parameter name: " + name);
        Entry e;
        e.m = TensorT<T>::zeros(init.shape);
        e.v = TensorT<T>::zeros(init.shape);
        e.value = std::move(init);
        return entries.emplace(name, std::move(e)).first->second.value;
    }

    TensorT<T>& at(const std::string& name) {
        auto it = entries.find(name);
        check(it != entries.end(), "unknown parameter: " + name);
        return it->second.value;
    }
    const TensorT<T>& at(const std::string& name) const {
        auto it = entries.find(name);
        check(it != entries.end(), "unknown parameter: " + name);
        return it->second.value;
    }

    int64_t total_values() const {
        int64_t n = 0;
        for (const auto& [k, e] : entries) {
            n += e.value.size();
        }
        return n;
    }

    template <class U>
    ParamSet<U> cast() const {
        ParamSet<U> out;
        out.step = step;
        for (const auto& [k, e] : entries) {
            typename ParamSet<U>::Entry eu;
            eu.value = e.value.template cast<U>();
            eu.m = e.m.template cast<U>();
            eu.v = e.v.template cast<U>();
            out.entries.emplace(k, std::move(eu));
        }
        return out;
    }
};

// Truncated-normal fan-in initialization; biases are zeros.
template <class T>
TensorT<T> init_dense_weight(Shape shape, int fan_in, RngStream& rng, double gain = 1.0) {
    TensorT<T> w(std::move(shape));
    const double stddev = gain / std::sqrt(static_cast<double>(std::max(1, fan_in)));
    for (int64_t i = 0; i < w.size(); ++i) {
        w[i] = static_cast<T>(rng.truncated_normal() * stddev);
    }
    return w;
}

// Binds ParamSet entries to tape variables so networks can look them up by
// name while the trainer retrieves gradients afterwards.
template <class T>
struct BoundParams {
    Tape<T>* tape = nullptr;
    const ParamSet<T>* params = nullptr;
    bool trainable = true;
    std::map<std::string, typename Tape<T>::Var> vars;

    BoundParams(Tape<T>& t, const ParamSet<T>& p, bool trainable_)
        : tape(&t), params(&p), trainable(trainable_) {}

    typename Tape<T>::Var operator[](const std::string& name) {
        auto it = vars.find(name);
        if (it != vars.end()) {
            return it->second;
        }
        auto v = tape->input(params->at(name), trainable, "param");
        vars.emplace(name, v);
        return v;
    }

    // Gradients for every bound parameter; zeros where the graph did not touch.
    std::map<std::string, TensorT<T>> collect_grads() const {
        std::map<std::string, TensorT<T>> out;
        for (const auto& [name, var] : vars) {
            if (tape->has_grad(var)) {
                out.emplace(name, tape->grad(var));
            } else {
                out.emplace(name, TensorT<T>::zeros(params->at(name).shape));
            }
        }
        return out;
    }
};

}  // namespace wmc
