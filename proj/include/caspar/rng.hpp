#pragma once
#include <cmath>
#include <algorithm>
#include <cstdint>
#include <initializer_list>
#include <limits>
#include <random>

namespace caspar {

/// Purposes of independent random streams. Values are part of the on-disk
/// reproducibility contract: never renumber.
enum class StreamPurpose : std::uint64_t
{
    design = 1,
    noise = 2,
    placement = 3,
    signs = 4,
    folds = 5,
    fuzz = 6,
};

inline std::uint64_t splitmix64(std::uint64_t x)
{
    x += 0x9e3779b97f4a7c15ULL;
    x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
    x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
    return x ^ (x >> 31);
}

/**
 * Seeded random stream, version 1.
 *
 * Engine is std::mt19937_64 (bit-exact across standard libraries). The
 * distributions are implemented here rather than taken from <random>,
 * whose distribution algorithms are implementation-defined. A stream is
 * keyed by a root seed plus any number of integer labels, so draws for one
 * purpose never perturb another.
 */
class RandomStream
{
public:
    static constexpr int version = 1;

    explicit RandomStream(std::uint64_t seed, std::initializer_list<std::uint64_t> labels = {})
    {
        std::uint64_t key = splitmix64(seed ^ 0x6361737061720001ULL);
        for (auto l : labels) key = splitmix64(key ^ splitmix64(l + 0x1234567ULL));
        engine_.seed(key);
    }

    std::uint64_t next_u64() { return engine_(); }

    /// Uniform on [0, 1) with 53 random bits.
    double uniform()
    {
        return static_cast<double>(engine_() >> 11) * 0x1.0p-53;
    }

    /// Uniform integer on [0, bound). bound must be > 0.
    std::uint64_t uniform_index(std::uint64_t bound)
    {
        // Rejection on the biased tail keeps the draw exactly uniform.
        const std::uint64_t limit = std::numeric_limits<std::uint64_t>::max()
            - std::numeric_limits<std::uint64_t>::max() % bound;
        std::uint64_t x;
        do { x = engine_(); } while (x >= limit);
        return x % bound;
    }

    /// Standard normal via Box-Muller; caches the second variate.
    double normal()
    {
        if (has_spare_) {
            has_spare_ = false;
            return spare_;
        }
        double u1;
        do { u1 = uniform(); } while (u1 <= 0.0);
        const double u2 = uniform();
        const double radius = std::sqrt(-2.0 * std::log(u1));
        const double angle = 2.0 * M_PI * u2;
        spare_ = radius * std::sin(angle);
        has_spare_ = true;
        return radius * std::cos(angle);
    }

    bool coin() { return (engine_() >> 63) != 0; }

    template <class It>
    void shuffle(It first, It last)
    {
        const auto n = static_cast<std::uint64_t>(last - first);
        for (std::uint64_t i = n; i > 1; --i) {
            const auto j = uniform_index(i);
            std::iter_swap(first + (i - 1), first + j);
        }
    }

private:
    std::mt19937_64 engine_;
    bool has_spare_ = false;
    double spare_ = 0.0;
};

} // namespace caspar
