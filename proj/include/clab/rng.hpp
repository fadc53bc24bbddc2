#pragma once

#include "clab/arith.hpp"

#include <cstdint>
#include <random>

namespace clab {

/// Seeded random stream. Streams are derived from (master seed, task index)
/// so that any partition of tasks over workers reproduces the same draws.
class Stream {
   public:
    explicit Stream(std::uint64_t seed, std::uint64_t task = 0, std::uint64_t salt = 0) {
        std::seed_seq seq{static_cast<std::uint32_t>(seed), static_cast<std::uint32_t>(seed >> 32),
                          static_cast<std::uint32_t>(task), static_cast<std::uint32_t>(task >> 32),
                          static_cast<std::uint32_t>(salt), 0x636c6162u};
        engine_.seed(seq);
    }

    /// Uniform integer in [0, n); rejection sampling keeps it exact and portable.
    Int below(Int n) {
        const std::uint64_t un = static_cast<std::uint64_t>(n);
        const std::uint64_t limit = std::numeric_limits<std::uint64_t>::max() - std::numeric_limits<std::uint64_t>::max() % un;
        std::uint64_t x;
        do {
            x = engine_();
        } while (x >= limit);
        return static_cast<Int>(x % un);
    }

    std::uint64_t next() { return engine_(); }
    std::mt19937_64& engine() { return engine_; }

   private:
    std::mt19937_64 engine_;
};

}  // namespace clab
