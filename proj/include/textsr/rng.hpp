#ifndef TEXTSR_RNG_HPP
#define TEXTSR_RNG_HPP

#include <cmath>
#include <cstdint>
#include <initializer_list>

#include "common.hpp"

namespace textsr {

// SplitMix64 counter generator. All randomness in the project flows through
// this so runs are bit-reproducible on one device and streams can be derived
// statelessly from (run_seed, purpose, step, sample) without storing large
// engine states in checkpoints.
class Rng {
public:
    explicit Rng(uint64_t seed = 0) : state_(seed) {}

    uint64_t next_u64() {
        uint64_t z = (state_ += 0x9e3779b97f4a7c15ull);
        z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ull;
        z = (z ^ (z >> 27)) * 0x94d049bb133111ebull;
        return z ^ (z >> 31);
    }

    // [0, 1)
    double uniform() {
        return static_cast<double>(next_u64() >> 11) * 0x1.0p-53;
    }

    double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

    // [lo, hi] inclusive
    int64_t uniform_int(int64_t lo, int64_t hi) {
        return lo + static_cast<int64_t>(next_u64() % static_cast<uint64_t>(hi - lo + 1));
    }

    // Box-Muller without spare caching so the state is a single u64.
    double normal() {
        double u1 = uniform();
        double u2 = uniform();
        if (u1 < 1e-300) u1 = 1e-300;
        return std::sqrt(-2.0 * std::log(u1)) * std::cos(6.283185307179586 * u2);
    }

    uint64_t state() const { return state_; }
    void set_state(uint64_t s) { state_ = s; }

    // Derives an independent stream from a root seed and a path of labels.
    static Rng derive(uint64_t root, std::initializer_list<uint64_t> path) {
        uint64_t h = 0xcbf29ce484222325ull;
        auto mix = [&h](uint64_t v) {
            for (int i = 0; i < 8; i++) {
                h ^= (v >> (8 * i)) & 0xff;
                h *= 0x100000001b3ull;
            }
        };
        mix(root);
        for (uint64_t v : path) mix(v);
        return Rng(h);
    }

    static Rng derive(uint64_t root, const std::string& label, std::initializer_list<uint64_t> path = {}) {
        uint64_t h = fnv1a64(label);
        Rng r = derive(root, {h});
        for (uint64_t v : path) r = derive(r.state(), {v});
        return r;
    }

private:
    uint64_t state_;
};

}  // namespace textsr

#endif  // TEXTSR_RNG_HPP
