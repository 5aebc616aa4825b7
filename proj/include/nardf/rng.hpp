#pragma once

#include <cmath>
#include <cstdint>
#include <initializer_list>

namespace nardf {

// ============================================================================
// Counter-based splittable RNG
//
// Every random draw in the library flows from a single 64-bit seed.  Streams
// are derived by hashing a path of ids (e.g. {trial, step}) into a key; draws
// are then stateless functions of (key, counter).  Independent paths give
// independent streams, so Monte-Carlo trials can run concurrently and any
// (seed, config) pair reproduces byte-identical output.
// ============================================================================

// murmur3 64-bit finalizer: bijective, good avalanche
inline std::uint64_t mix_bits(std::uint64_t z) {
    z ^= z >> 33;
    z *= 0xFF51AFD7ED558CCDull;
    z ^= z >> 33;
    z *= 0xC4CEB9FE1A85EC53ull;
    z ^= z >> 33;
    return z;
}

inline std::uint64_t derive_key(std::uint64_t key, std::uint64_t id) {
    return mix_bits(key + 0x9E3779B97F4A7C15ull * (id + 1));
}

class StreamRng {
public:
    explicit StreamRng(std::uint64_t key) : key_(key) {}

    // Hash a path of ids under the root seed, e.g. derive(seed, {trial, step}).
    static StreamRng derive(std::uint64_t seed, std::initializer_list<std::uint64_t> path) {
        std::uint64_t key = mix_bits(seed ^ 0x6A09E667F3BCC909ull);
        for (std::uint64_t id : path) key = derive_key(key, id);
        return StreamRng(key);
    }

    std::uint64_t next_u64() {
        ++counter_;
        return mix_bits(key_ ^ (0xD1B54A32D192ED03ull * counter_));
    }

    // strictly inside (0,1) so log() below is always finite
    double uniform() {
        return (static_cast<double>(next_u64() >> 11) + 0.5) * 0x1.0p-53;
    }

    // N(0,1) via Box-Muller; the second of each pair is cached
    double gaussian() {
        if (have_spare_) {
            have_spare_ = false;
            return spare_;
        }
        const double u1 = uniform();
        const double u2 = uniform();
        const double r = std::sqrt(-2.0 * std::log(u1));
        const double theta = 6.283185307179586477 * u2;
        spare_ = r * std::sin(theta);
        have_spare_ = true;
        return r * std::cos(theta);
    }

private:
    std::uint64_t key_ = 0;
    std::uint64_t counter_ = 0;
    double spare_ = 0.0;
    bool have_spare_ = false;
};

}  // namespace nardf
