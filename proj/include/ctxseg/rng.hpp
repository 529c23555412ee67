#pragma once

#include <cstdint>
#include <vector>

namespace ctxseg {

// Deterministic RNG with a fixed algorithm (xoshiro256**), so identical seeds
// give identical streams on every platform. std:: distributions are not
// specified bit-exactly, hence the hand-rolled helpers below.
class Rng {
public:
    explicit Rng(std::uint64_t seed) {
        // splitmix64 seeding, as recommended by the xoshiro authors
        std::uint64_t x = seed;
        for (auto& s : state_) {
            x += 0x9e3779b97f4a7c15ULL;
            std::uint64_t z = x;
            z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
            z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
            s = z ^ (z >> 31);
        }
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

    // uniform in [0, n), n >= 1; modulo bias is irrelevant at our scales but
    // rejection keeps it exact
    std::uint64_t next_below(std::uint64_t n) {
        const std::uint64_t limit = ~std::uint64_t{0} - (~std::uint64_t{0} % n);
        std::uint64_t v = next_u64();
        while (v >= limit) v = next_u64();
        return v % n;
    }

    int uniform_int(int lo, int hi) {  // inclusive bounds
        return lo + static_cast<int>(next_below(static_cast<std::uint64_t>(hi - lo + 1)));
    }

    double uniform_real() {  // [0, 1)
        return static_cast<double>(next_u64() >> 11) * 0x1.0p-53;
    }

    double uniform_real(double lo, double hi) {
        return lo + (hi - lo) * uniform_real();
    }

    bool bernoulli(double p) { return uniform_real() < p; }

    template <typename T>
    void shuffle(std::vector<T>& v) {
        for (std::size_t i = v.size(); i > 1; --i) {
            std::size_t j = next_below(i);
            std::swap(v[i - 1], v[j]);
        }
    }

    // Independent child stream; used to give each tree / image its own seed.
    static std::uint64_t derive(std::uint64_t seed, std::uint64_t stream) {
        std::uint64_t z = seed + 0x9e3779b97f4a7c15ULL * (stream + 1);
        z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
        z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
        return z ^ (z >> 31);
    }

private:
    static std::uint64_t rotl(std::uint64_t x, int k) {
        return (x << k) | (x >> (64 - k));
    }

    std::uint64_t state_[4];
};

}  // namespace ctxseg
