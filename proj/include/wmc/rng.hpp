#pragma once

#include <cmath>
#include <cstdint>
#include <string_view>

namespace wmc {

// Counter-based splittable PRNG. Every draw is a stateless hash of
// (stream key, counter), so streams can be split hierarchically and any
// two streams with different keys are independent for practical purposes.
// All experiment randomness derives from one root seed through named splits.
class RngStream {
public:
    RngStream() : key_(0x9e3779b97f4a7c15ull) {}
    explicit RngStream(uint64_t key) : key_(mix64(key ^ 0xd1b54a32d192ed03ull)) {}

    static uint64_t mix64(uint64_t x) {
        x += 0x9e3779b97f4a7c15ull;
        x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ull;
        x = (x ^ (x >> 27)) * 0x94d049bb133111ebull;
        return x ^ (x >> 31);
    }

    static uint64_t hash_label(std::string_view label) {
        uint64_t h = 0xcbf29ce484222325ull;  // FNV-1a
        for (char c : label) {
            h ^= static_cast<uint8_t>(c);
            h *= 0x100000001b3ull;
        }
        return h;
    }

    // Derived child stream; does not disturb this stream's counter.
    RngStream split(std::string_view label) const {
        RngStream child;
        child.key_ = mix64(key_ ^ mix64(hash_label(label)));
        return child;
    }
    RngStream split(uint64_t salt) const {
        RngStream child;
        child.key_ = mix64(key_ ^ mix64(salt * 0x9e3779b97f4a7c15ull + 0x632be59bd9b4e019ull));
        return child;
    }

    uint64_t next_u64() { return mix64(key_ ^ (counter_++ * 0xda942042e4dd58b5ull)); }

    uint32_t next_u32() { return static_cast<uint32_t>(next_u64() >> 32); }

    // Uniform in [0,1).
    double uniform() { return static_cast<double>(next_u64() >> 11) * 0x1.0p-53; }

    double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

    // Uniform integer in [0, n).
    int uniform_int(int n) {
        return n <= 1 ? 0 : static_cast<int>(next_u64() % static_cast<uint64_t>(n));
    }
    int64_t uniform_int64(int64_t n) {
        return n <= 1 ? 0 : static_cast<int64_t>(next_u64() % static_cast<uint64_t>(n));
    }

    bool bernoulli(double p) { return uniform() < p; }

    // Box-Muller; consumes exactly two counters per draw.
    double normal() {
        double u1 = uniform();
        double u2 = uniform();
        if (u1 < 1e-300) {
            u1 = 1e-300;
        }
        return std::sqrt(-2.0 * std::log(u1)) * std::cos(6.283185307179586477 * u2);
    }

    // Standard normal conditioned on |z| <= 2.
    double truncated_normal() {
        for (;;) {
            double z = normal();
            if (z >= -2.0 && z <= 2.0) {
                return z;
            }
        }
    }

    uint64_t key() const { return key_; }

private:
    uint64_t key_;
    uint64_t counter_ = 0;
};

}  // namespace wmc
