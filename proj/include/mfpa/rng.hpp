#pragma once

#include <array>
#include <cstdint>

#include <boost/random/normal_distribution.hpp>
#include <boost/random/taus88.hpp>

namespace mfpa {

/// Per-particle generator. 12 bytes of state, so one engine per particle is
/// affordable even for 10^5-particle proxies.
using Engine = boost::random::taus88;

inline std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

/// Master seed plus the (replication, particle) -> substream derivation.
///
/// Every particle of every replication owns an independent engine, so the
/// draws never depend on how work is split across threads.
struct SeedSpec {
  std::uint64_t master_seed = 0;

  Engine substream(std::uint64_t replication, std::uint64_t particle) const {
    std::uint64_t h = splitmix64(master_seed);
    h = splitmix64(h ^ (replication * 0xd1b54a32d192ed03ULL));
    h = splitmix64(h ^ (particle * 0x8cb92ba72f3d8dd7ULL + 0x632be59bd9b4e019ULL));
    const std::uint64_t h2 = splitmix64(h);
    std::array<std::uint32_t, 3> words{static_cast<std::uint32_t>(h), static_cast<std::uint32_t>(h >> 32),
                                       static_cast<std::uint32_t>(h2)};
    auto first = words.begin();
    Engine engine;
    engine.seed(first, words.end());
    return engine;
  }

  /// Seed for an independent experiment cell (e.g. a second proxy system).
  SeedSpec derive(std::uint64_t salt) const { return SeedSpec{splitmix64(master_seed ^ splitmix64(salt))}; }
};

inline double standard_normal(Engine& engine) {
  boost::random::normal_distribution<double> dist(0.0, 1.0);
  return dist(engine);
}

}  // namespace mfpa
