#pragma once

#include <cstdint>

namespace ergolab {

// Counter-based generator (Philox 2x64, 10 rounds). A draw is a pure
// function of (key, stream, counter), so parallel consumers can pull from
// disjoint streams in any order and still reproduce the exact sequence.
class Philox {
  public:
    Philox(std::uint64_t seed, std::uint64_t stream)
        : key_(seed), stream_(stream), ctr_(0), cached_(false), cache_(0) {}

    std::uint64_t next_u64() {
        if (cached_) {
            cached_ = false;
            return cache_;
        }
        std::uint64_t x0 = stream_;
        std::uint64_t x1 = ctr_++;
        std::uint64_t k = key_;
        for (int r = 0; r < 10; ++r) {
            round(x0, x1, k);
            k += kWeyl;
        }
        cache_ = x1;
        cached_ = true;
        return x0;
    }

    // Uniform in [0,1) from the top 53 bits.
    double next_double() {
        return static_cast<double>(next_u64() >> 11) * 0x1.0p-53;
    }

    // Standard normal via Box-Muller; consumes two uniforms per pair.
    double next_gaussian();

    std::uint64_t seed() const { return key_; }
    std::uint64_t stream() const { return stream_; }

  private:
    static constexpr std::uint64_t kMul = 0xD2B74407B1CE6E93ull;
    static constexpr std::uint64_t kWeyl = 0x9E3779B97F4A7C15ull;

    static void round(std::uint64_t& x0, std::uint64_t& x1, std::uint64_t k) {
        unsigned __int128 prod =
            static_cast<unsigned __int128>(kMul) * static_cast<unsigned __int128>(x0);
        std::uint64_t hi = static_cast<std::uint64_t>(prod >> 64);
        std::uint64_t lo = static_cast<std::uint64_t>(prod);
        x0 = hi ^ k ^ x1;
        x1 = lo;
    }

    std::uint64_t key_;
    std::uint64_t stream_;
    std::uint64_t ctr_;
    bool cached_;
    std::uint64_t cache_;
};

// Derives a child stream id from a parent stream and a slot index, so that
// nested loops (trajectory x step, grid cell x batch, ...) get disjoint
// streams without bookkeeping.
inline std::uint64_t substream(std::uint64_t parent, std::uint64_t slot) {
    std::uint64_t z = parent + 0x9E3779B97F4A7C15ull * (slot + 1);
    z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ull;
    z = (z ^ (z >> 27)) * 0x94D049BB133111EBull;
    return z ^ (z >> 31);
}

}  // namespace ergolab
