#ifndef POTGAM_RNG_HPP
#define POTGAM_RNG_HPP

#include <cstdint>
#include <cmath>

namespace potgam {

// splitmix64 finalizer; used to derive independent per-replicate streams
// from (master seed, stream index) so parallel and serial runs agree.
inline std::uint64_t mix64(std::uint64_t x) {
    x += 0x9e3779b97f4a7c15ULL;
    x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
    x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
    return x ^ (x >> 31);
}

// xoshiro256** with a fixed in-house uniform mapping. We avoid
// std::uniform_real_distribution because its output is
// implementation-defined; every draw here is reproducible byte-for-byte.
class Rng {
  public:
    explicit Rng(std::uint64_t seed) {
        std::uint64_t s = seed;
        for (auto& w : state_) {
            s = mix64(s);
            w = s;
        }
    }

    static Rng stream(std::uint64_t master_seed, std::uint64_t stream_index) {
        return Rng(mix64(master_seed ^ mix64(stream_index + 0x5851f42d4c957f2dULL)));
    }

    std::uint64_t next_u64() {
        const std::uint64_t result = rotl(state_[1] * 5, 7) * 9;
        const std::uint64_t t = state_[1] << 17;
        state_[2] ^= state_[0];
        state_[3] ^= state_[1];
        state_[1] ^= state_[2];
        state_[0] ^= state_[3];
        state_[2] ^= t;
        state_[3] = rotl(state_[3], 45);
        return result;
    }

    // uniform on the open interval (0,1); never returns an endpoint
    double uniform01() {
        const double u = static_cast<double>(next_u64() >> 11) * 0x1.0p-53;
        return u == 0.0 ? 0x1.0p-53 : u;
    }

    double uniform(double lo, double hi) { return lo + (hi - lo) * uniform01(); }

    // Box-Muller without caching: two uniforms per draw, keeps replicate
    // streams stateless across call sites.
    double normal() {
        const double u1 = uniform01();
        const double u2 = uniform01();
        return std::sqrt(-2.0 * std::log(u1)) * std::cos(6.283185307179586476925286766559 * u2);
    }

  private:
    static std::uint64_t rotl(std::uint64_t x, int k) { return (x << k) | (x >> (64 - k)); }
    std::uint64_t state_[4];
};

}  // namespace potgam

#endif
