#pragma once

#include "predsub/rng.hpp"

#include <cmath>
#include <random>

namespace predsub::detail {

/// Rows sharing one RNG stream. Fixed, so results ignore the thread count.
inline constexpr Index kRowsPerStream = 64;

/// 53-bit uniform on [0, 1); cheaper than uniform_real_distribution in
/// the per-candidate loops.
inline double unit_uniform(Engine& engine) {
    return static_cast<double>(engine() >> 11) * 0x1.0p-53;
}

/// Visits the positions in [0, count) selected by independent
/// Bernoulli(rate) trials, jumping between hits with geometric skips.
/// Callers thin the hits with a second uniform to realize position-specific
/// probabilities below `rate`.
template <typename Visit>
void for_each_bernoulli_hit(Engine& engine, Offset count, double rate, Visit&& visit) {
    if (count <= 0 || !(rate > 0.0)) {
        return;
    }
    if (rate >= 1.0) {
        for (Offset k = 0; k < count; ++k) {
            visit(k);
        }
        return;
    }
    const double log_miss = std::log1p(-rate);
    Offset k = -1;
    for (;;) {
        const double u = 1.0 - unit_uniform(engine);  // (0, 1]
        const double skip = std::floor(std::log(u) / log_miss);
        if (skip >= static_cast<double>(count - k - 1)) {
            return;
        }
        k += 1 + static_cast<Offset>(skip);
        visit(k);
    }
}

}  // namespace predsub::detail
