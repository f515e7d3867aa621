#pragma once

#include <cstdint>
#include <vector>

namespace mtr {

// All randomness in the library flows through splitmix64 so that runs are
// bit-exact across platforms. std::mt19937 + std::uniform_int_distribution
// are not portable across standard library implementations.

inline uint64_t splitmix64(uint64_t& state) {
    state += 0x9E3779B97F4A7C15ULL;
    uint64_t z = state;
    z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
    z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
    return z ^ (z >> 31);
}

/// Derive an independent stream seed from a base seed and a stream index.
/// Streams keyed by (sample, iteration, purpose) make output independent of
/// scheduling order.
inline uint64_t derive_seed(uint64_t seed, uint64_t index) {
    uint64_t state = seed ^ index;
    return splitmix64(state);
}

class Rng {
public:
    explicit Rng(uint64_t seed) : state_(seed) {}

    uint64_t next_u64() { return splitmix64(state_); }

    /// Uniform integer in [0, n). Rejection sampling avoids modulo bias.
    uint64_t next_below(uint64_t n) {
        // threshold = 2^64 mod n
        uint64_t threshold = (0 - n) % n;
        for (;;) {
            uint64_t r = next_u64();
            if (r >= threshold) return r % n;
        }
    }

    /// Uniform double in [0, 1) with 53 bits of precision.
    double next_double() {
        return static_cast<double>(next_u64() >> 11) * 0x1.0p-53;
    }

    /// Fisher-Yates shuffle.
    template <typename T>
    void shuffle(std::vector<T>& items) {
        for (size_t i = items.size(); i > 1; --i) {
            size_t j = static_cast<size_t>(next_below(i));
            std::swap(items[i - 1], items[j]);
        }
    }

    /// k distinct indices drawn uniformly without replacement from [0, n),
    /// in sampled order (partial Fisher-Yates).
    std::vector<size_t> sample_indices(size_t n, size_t k) {
        std::vector<size_t> pool(n);
        for (size_t i = 0; i < n; ++i) pool[i] = i;
        for (size_t i = 0; i < k; ++i) {
            size_t j = i + static_cast<size_t>(next_below(n - i));
            std::swap(pool[i], pool[j]);
        }
        pool.resize(k);
        return pool;
    }

private:
    uint64_t state_;
};

} // namespace mtr
