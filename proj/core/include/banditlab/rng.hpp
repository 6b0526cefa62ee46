#pragma once

#include <cstdint>
#include <string_view>

namespace banditlab {

/// One step of the splitmix64 sequence; advances `state` and returns the output.
std::uint64_t splitmix64_next(std::uint64_t& state);

/// The splitmix64 output scrambler applied to a single value (no sequence state).
std::uint64_t splitmix64_mix(std::uint64_t x);

/// 64-bit FNV-1a, used to turn string tokens into seed material.
std::uint64_t fnv1a64(std::string_view s);

/// Order-sensitive seed derivation: folds one token into a seed.
/// The full hierarchy (master -> condition -> run -> env/agent) is built by
/// chaining these calls; see the README for the documented layout.
std::uint64_t seed_combine(std::uint64_t seed, std::uint64_t token);
std::uint64_t seed_combine(std::uint64_t seed, std::string_view token);

/// xoshiro256++ with splitmix64 state expansion. Portable and cheap; the
/// reference output streams are pinned in the test suite so any platform
/// or refactoring drift is caught immediately.
class Xoshiro256pp {
 public:
  explicit Xoshiro256pp(std::uint64_t seed);

  std::uint64_t next();

  /// Uniform double in [0, 1), 53 usable bits.
  double uniform();

  /// Uniform double strictly inside (0, 1); safe to feed inverse CDFs.
  double uniform_oo();

  /// Standard normal via the inverse-CDF transform (one uniform per draw).
  double normal();

  /// Uniform integer in [0, bound), bound > 0. Rejection-sampled, unbiased.
  std::uint64_t below(std::uint64_t bound);

 private:
  std::uint64_t s_[4];
};

}  // namespace banditlab
