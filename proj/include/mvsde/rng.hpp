#pragma once

// Counter-based random numbers (Philox4x32-10).  Any draw is addressable by
// (stream key, block counter), so every path / lattice point / worker owns a
// stream that can be regenerated in isolation regardless of scheduling.

#include <array>
#include <cmath>
#include <cstdint>
#include <numbers>

namespace mvsde {

namespace detail {
inline void mulhilo32(uint32_t a, uint32_t b, uint32_t& hi, uint32_t& lo) {
    const uint64_t p = static_cast<uint64_t>(a) * b;
    hi = static_cast<uint32_t>(p >> 32);
    lo = static_cast<uint32_t>(p);
}
}  // namespace detail

/// One 10-round Philox4x32 block: 128-bit counter, 64-bit key -> 128 bits out.
inline std::array<uint32_t, 4> philox4x32(std::array<uint32_t, 4> ctr, std::array<uint32_t, 2> key) {
    constexpr uint32_t kM0 = 0xD2511F53u, kM1 = 0xCD9E8D57u;
    constexpr uint32_t kW0 = 0x9E3779B9u, kW1 = 0xBB67AE85u;
    for (int round = 0; round < 10; ++round) {
        uint32_t hi0, lo0, hi1, lo1;
        detail::mulhilo32(kM0, ctr[0], hi0, lo0);
        detail::mulhilo32(kM1, ctr[2], hi1, lo1);
        ctr = {hi1 ^ ctr[1] ^ key[0], lo1, hi0 ^ ctr[3] ^ key[1], lo0};
        key[0] += kW0;
        key[1] += kW1;
    }
    return ctr;
}

/// SplitMix64 finalizer, used to derive statistically independent stream keys.
inline uint64_t mix64(uint64_t z) {
    z += 0x9E3779B97F4A7C15ull;
    z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ull;
    z = (z ^ (z >> 27)) * 0x94D049BB133111EBull;
    return z ^ (z >> 31);
}

/// Derive a child stream key from a parent key and a tag.
inline uint64_t substream(uint64_t parent, uint64_t tag) { return mix64(parent ^ mix64(tag)); }

struct UniformPair {
    double u0, u1;  // in (0, 1]
};

/// Two uniforms in (0,1] from one Philox block addressed by (key, counter).
inline UniformPair philox_uniforms(uint64_t key, uint64_t counter) {
    const std::array<uint32_t, 4> out = philox4x32(
        {static_cast<uint32_t>(counter), static_cast<uint32_t>(counter >> 32), 0u, 0u},
        {static_cast<uint32_t>(key), static_cast<uint32_t>(key >> 32)});
    const uint64_t a = (static_cast<uint64_t>(out[1]) << 32) | out[0];
    const uint64_t b = (static_cast<uint64_t>(out[3]) << 32) | out[2];
    constexpr double kScale = 1.0 / 9007199254740992.0;  // 2^-53
    return {(static_cast<double>(a >> 11) + 1.0) * kScale, (static_cast<double>(b >> 11) + 1.0) * kScale};
}

struct NormalPair {
    double z0, z1;
};

/// Two standard normals (Box-Muller) from one Philox block.
inline NormalPair philox_normals(uint64_t key, uint64_t counter) {
    const UniformPair u = philox_uniforms(key, counter);
    const double r = std::sqrt(-2.0 * std::log(u.u0));
    const double a = 2.0 * std::numbers::pi * u.u1;
    return {r * std::cos(a), r * std::sin(a)};
}

/// Sequential view of one stream; draws advance a private block counter.
class RngStream {
public:
    explicit RngStream(uint64_t key) : key_(key) {}
    RngStream(uint64_t parent, uint64_t tag) : key_(substream(parent, tag)) {}

    double uniform() {
        refill_if_needed();
        return lane_ == 0 ? (lane_ = 1, cached_.u0) : (lane_ = 0, cached_.u1);
    }

    double normal() {
        if (have_normal_) {
            have_normal_ = false;
            return cached_normal_;
        }
        const NormalPair p = philox_normals(key_, counter_++);
        cached_normal_ = p.z1;
        have_normal_ = true;
        return p.z0;
    }

    uint64_t key() const { return key_; }

private:
    void refill_if_needed() {
        if (lane_ == 0) cached_ = philox_uniforms(key_, counter_++);
    }

    uint64_t key_;
    uint64_t counter_ = 0;
    UniformPair cached_{0, 0};
    int lane_ = 0;
    bool have_normal_ = false;
    double cached_normal_ = 0;
};

}  // namespace mvsde
