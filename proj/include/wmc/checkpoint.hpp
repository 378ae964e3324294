#pragma once

#include <cstdint>
#include <cstring>
#include <string>
#include <vector>

#include "wmc/nn.hpp"
#include "wmc/tensor.hpp"

namespace wmc {

// Self-describing container of named arrays: per-array name, dtype tag, shape,
// little-endian payload, plus a format version and the full config echoed as
// text. Round-trips bit-exactly.
enum class ArrayDType : uint8_t { f32 = 0, f64 = 1, i64 = 2, u8 = 3, u16 = 4 };

struct CheckpointArray {
    std::string name;
    ArrayDType dtype = ArrayDType::f32;
    std::vector<int64_t> shape;
    std::vector<uint8_t> bytes;

    int64_t count() const {
        int64_t n = 1;
        for (int64_t d : shape) {
            n *= d;
        }
        return n;
    }
};

class Checkpoint {
public:
    uint32_t version = 1;
    std::string config_text;

    void add_raw(CheckpointArray a);
    bool contains(const std::string& name) const;
    const CheckpointArray& at(const std::string& name) const;
    const std::vector<CheckpointArray>& arrays() const { return arrays_; }

    template <class T>
    void add_tensor(const std::string& name, const TensorT<T>& t) {
        CheckpointArray a;
        a.name = name;
        a.dtype = sizeof(T) == 4 ? ArrayDType::f32 : ArrayDType::f64;
        for (int d : t.shape) {
            a.shape.push_back(d);
        }
        a.bytes.resize(static_cast<size_t>(t.size()) * sizeof(T));
        std::memcpy(a.bytes.data(), t.data(), a.bytes.size());
        add_raw(std::move(a));
    }

    void add_scalar_i64(const std::string& name, int64_t v);
    int64_t get_scalar_i64(const std::string& name) const;

    template <class T>
    TensorT<T> get_tensor(const std::string& name) const {
        const CheckpointArray& a = at(name);
        check((a.dtype == ArrayDType::f32 && sizeof(T) == 4) ||
                  (a.dtype == ArrayDType::f64 && sizeof(T) == 8),
              "checkpoint: dtype mismatch for " + name);
        Shape s;
        for (int64_t d : a.shape) {
            s.push_back(static_cast<int>(d));
        }
        TensorT<T> t(s);
        check(a.bytes.size() == static_cast<size_t>(t.size()) * sizeof(T),
              "checkpoint: payload size mismatch for " + name);
        std::memcpy(t.data(), a.bytes.data(), a.bytes.size());
        return t;
    }

    void save(const std::string& path) const;
    static Checkpoint load(const std::string& path);

private:
    std::vector<CheckpointArray> arrays_;
};

// ParamSet serialization: values plus Adam moments and the step counter, so a
// reloaded set continues training identically.
template <class T>
void checkpoint_add_params(Checkpoint& ck, const std::string& prefix,
                           const ParamSet<T>& params) {
    ck.add_scalar_i64(prefix + "/__step", params.step);
    for (const auto& [name, e] : params.entries) {
        ck.add_tensor(prefix + "/value/" + name, e.value);
        ck.add_tensor(prefix + "/adam_m/" + name, e.m);
        ck.add_tensor(prefix + "/adam_v/" + name, e.v);
    }
}

template <class T>
ParamSet<T> checkpoint_get_params(const Checkpoint& ck, const std::string& prefix) {
    ParamSet<T> out;
    out.step = ck.get_scalar_i64(prefix + "/__step");
    const std::string vp = prefix + "/value/";
    for (const auto& a : ck.arrays()) {
        if (a.name.rfind(vp, 0) == 0) {
            const std::string name = a.name.substr(vp.size());
            typename ParamSet<T>::Entry e;
            e.value = ck.get_tensor<T>(a.name);
            e.m = ck.get_tensor<T>(prefix + "/adam_m/" + name);
            e.v = ck.get_tensor<T>(prefix + "/adam_v/" + name);
            out.entries.emplace(name, std::move(e));
        }
    }
    return out;
}

}  // namespace wmc
