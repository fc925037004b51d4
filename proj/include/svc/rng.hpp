#pragma once

#include <cmath>
#include <cstdint>
#include <vector>

namespace svc {

// xoshiro256** with splitmix64 seeding. The state is 4 x u64 and can be
// dumped/restored exactly, which keeps checkpoint resume bit-identical.
class Rng {
  public:
    explicit Rng(uint64_t seed = 0) {
        uint64_t x = seed;
        for (auto& w : s_) {
            x += 0x9e3779b97f4a7c15ULL;
            uint64_t z = x;
            z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
            z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
            w = z ^ (z >> 31);
        }
    }

    uint64_t next_u64() {
        auto rotl = [](uint64_t v, int k) { return (v << k) | (v >> (64 - k)); };
        uint64_t result = rotl(s_[1] * 5, 7) * 9;
        uint64_t t = s_[1] << 17;
        s_[2] ^= s_[0];
        s_[3] ^= s_[1];
        s_[1] ^= s_[2];
        s_[0] ^= s_[3];
        s_[2] ^= t;
        s_[3] = rotl(s_[3], 45);
        return result;
    }

    // Uniform in [0, 1).
    double uniform() { return double(next_u64() >> 11) * 0x1.0p-53; }

    double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

    // Uniform integer in [0, n).
    uint64_t uniform_int(uint64_t n) { return next_u64() % n; }

    // Box-Muller; draws two uniforms per call so the state advance is fixed.
    double gaussian() {
        double u1 = double((next_u64() >> 11) + 1) * 0x1.0p-53;  // (0, 1]
        double u2 = double(next_u64() >> 11) * 0x1.0p-53;
        return std::sqrt(-2.0 * std::log(u1)) * std::cos(2.0 * M_PI * u2);
    }

    std::vector<uint32_t> dump_state() const {
        std::vector<uint32_t> out;
        out.reserve(8);
        for (uint64_t w : s_) {
            out.push_back(uint32_t(w & 0xffffffffULL));
            out.push_back(uint32_t(w >> 32));
        }
        return out;
    }

    void restore_state(const std::vector<uint32_t>& words) {
        for (int i = 0; i < 4; ++i)
            s_[i] = uint64_t(words[2 * i]) | (uint64_t(words[2 * i + 1]) << 32);
    }

  private:
    uint64_t s_[4];
};

}  // namespace svc
