#pragma once

#include <cmath>
#include <cstdint>
#include <numeric>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

namespace wmc {

[[noreturn]] inline void fail(const std::string& msg) {
    throw std::runtime_error(msg);
}

inline void check(bool cond, const std::string& msg) {
    if (!cond) {
        fail(msg);
    }
}

using Shape = std::vector<int>;

inline int64_t numel(const Shape& s) {
    int64_t n = 1;
    for (int d : s) {
        n *= d;
    }
    return n;
}

inline std::string shape_str(const Shape& s) {
    std::ostringstream os;
    os << "[";
    for (size_t i = 0; i < s.size(); ++i) {
        os << (i ? "," : "") << s[i];
    }
    os << "]";
    return os.str();
}

// Dense row-major tensor. Image data uses NHWC layout throughout.
template <class T>
struct TensorT {
    Shape shape;
    std::vector<T> v;

    TensorT() = default;
    explicit TensorT(Shape s) : shape(std::move(s)), v(static_cast<size_t>(numel(shape)), T(0)) {}
    TensorT(Shape s, std::vector<T> data) : shape(std::move(s)), v(std::move(data)) {
        check(static_cast<int64_t>(v.size()) == numel(shape),
              "tensor data size does not match shape " + shape_str(shape));
    }

    static TensorT zeros(Shape s) { return TensorT(std::move(s)); }
    static TensorT full(Shape s, T value) {
        TensorT t(std::move(s));
        std::fill(t.v.begin(), t.v.end(), value);
        return t;
    }
    static TensorT scalar(T value) { return TensorT({1}, {value}); }

    int64_t size() const { return static_cast<int64_t>(v.size()); }
    T* data() { return v.data(); }
    const T* data() const { return v.data(); }
    T& operator[](int64_t i) { return v[static_cast<size_t>(i)]; }
    T operator[](int64_t i) const { return v[static_cast<size_t>(i)]; }

    bool finite() const {
        for (T x : v) {
            if (!std::isfinite(static_cast<double>(x))) {
                return false;
            }
        }
        return true;
    }

    template <class U>
    TensorT<U> cast() const {
        TensorT<U> out(shape);
        for (int64_t i = 0; i < size(); ++i) {
            out[i] = static_cast<U>(v[static_cast<size_t>(i)]);
        }
        return out;
    }
};

using Tensor32 = TensorT<float>;
using Tensor64 = TensorT<double>;

}  // namespace wmc
