#pragma once

// Seeding and sampling helpers. Every run derives its own streams from
// (master seed, run index, purpose), so results do not depend on how runs
// are scheduled across threads.

#include <algorithm>
#include <cstdint>
#include <random>
#include <span>
#include <stdexcept>
#include <vector>

#include "errors.hpp"

namespace excouple {

using Rng = std::mt19937_64;

inline std::uint64_t splitmix64(std::uint64_t z) {
    z += 0x9e3779b97f4a7c15ULL;
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
    return z ^ (z >> 31);
}

/// Stream purposes within one run.
enum class Stream : std::uint64_t { Steps = 1, Split = 2, Resample = 3, Auxiliary = 4 };

inline std::uint64_t derive_seed(std::uint64_t master, std::uint64_t run_index) {
    return splitmix64(splitmix64(master) ^ splitmix64(run_index + 0x632be59bd9b4e019ULL));
}

inline Rng make_stream(std::uint64_t run_seed, Stream purpose) {
    return Rng(splitmix64(run_seed ^ (static_cast<std::uint64_t>(purpose) * 0xd1b54a32d192ed03ULL)));
}

/// Uniform double in [0, 1) from the top 53 bits; identical on every platform.
inline double uniform01(Rng& rng) { return static_cast<double>(rng() >> 11) * 0x1.0p-53; }

/// Samples an index with probability proportional to its weight.
class DiscreteSampler {
public:
    DiscreteSampler() = default;
    explicit DiscreteSampler(std::span<const double> weights) {
        cumulative_.reserve(weights.size());
        double acc = 0;
        for (double w : weights) {
            if (!(w >= 0)) throw DomainError("sampler weights must be nonnegative");
            acc += w;
            cumulative_.push_back(acc);
        }
        if (!(acc > 0)) throw DomainError("sampler weights sum to zero");
    }

    std::size_t operator()(Rng& rng) const {
        double u = uniform01(rng) * cumulative_.back();
        auto it = std::upper_bound(cumulative_.begin(), cumulative_.end(), u);
        if (it == cumulative_.end())
            it = std::lower_bound(cumulative_.begin(), cumulative_.end(), cumulative_.back());
        return static_cast<std::size_t>(it - cumulative_.begin());
    }

    std::size_t size() const noexcept { return cumulative_.size(); }

private:
    std::vector<double> cumulative_;
};

} // namespace excouple
