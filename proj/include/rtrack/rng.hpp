#pragma once

#include <cmath>
#include <cstdint>
#include <limits>
#include <numbers>
#include <string_view>

namespace rtrack {

namespace detail {

inline constexpr std::uint64_t splitmix64(std::uint64_t z) {
    z += 0x9e3779b97f4a7c15ULL;
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
    return z ^ (z >> 31);
}

inline constexpr std::uint64_t fnv1a(std::string_view s) {
    std::uint64_t h = 0xcbf29ce484222325ULL;
    for (char c : s) {
        h ^= static_cast<unsigned char>(c);
        h *= 0x100000001b3ULL;
    }
    return h;
}

}  // namespace detail

// Counter-based stream: the n-th draw is a pure function of (key, n), so
// streams derived from one master seed never perturb each other.
class RngStream {
public:
    using result_type = std::uint64_t;

    explicit RngStream(std::uint64_t key = 0) : key_(detail::splitmix64(key)) {}

    /// Independent substream identified by a name.
    static RngStream derive(std::uint64_t master_seed, std::string_view name) {
        return RngStream(detail::splitmix64(master_seed) ^ detail::fnv1a(name));
    }

    RngStream split(std::string_view name) const {
        return RngStream(key_ ^ detail::fnv1a(name));
    }

    static constexpr result_type min() { return 0; }
    static constexpr result_type max() { return std::numeric_limits<result_type>::max(); }

    result_type operator()() {
        return detail::splitmix64(key_ + 0x632be59bd9b4e019ULL * ++counter_);
    }

    /// Uniform in [0, 1).
    double uniform() { return static_cast<double>((*this)() >> 11) * 0x1.0p-53; }

    /// Standard normal via Box-Muller; one normal per two uniforms.
    double normal() {
        double u1 = 0.0;
        while (u1 <= 0.0) u1 = uniform();
        const double u2 = uniform();
        return std::sqrt(-2.0 * std::log(u1)) * std::cos(2.0 * std::numbers::pi * u2);
    }

    bool bernoulli(double p) { return uniform() < p; }

    std::uint64_t draws() const { return counter_; }

private:
    std::uint64_t key_;
    std::uint64_t counter_ = 0;
};

}  // namespace rtrack
