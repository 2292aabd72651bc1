#pragma once

#include <cstdint>
#include <random>

namespace addsel {

using Rng = std::mt19937_64;

inline std::uint64_t splitmix64(std::uint64_t x) {
    x += 0x9e3779b97f4a7c15ULL;
    x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
    x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
    return x ^ (x >> 31);
}

/// Purpose tags keep per-trial streams for design, model and noise disjoint.
enum class Stream : std::uint64_t {
    design = 1,
    model = 2,
    noise = 3,
    bootstrap = 4,
    auxiliary = 5,
};

/// Seed of stream `stream` for trial `index` under `master`. Pure function of its inputs.
inline std::uint64_t derive_seed(std::uint64_t master, Stream stream, std::uint64_t index) {
    std::uint64_t h = splitmix64(master);
    h = splitmix64(h ^ (static_cast<std::uint64_t>(stream) * 0xd1b54a32d192ed03ULL));
    return splitmix64(h ^ (index * 0x8cb92ba72f3d8dd7ULL + 0x632be59bd9b4e019ULL));
}

inline Rng make_rng(std::uint64_t seed) { return Rng(seed); }

}  // namespace addsel
