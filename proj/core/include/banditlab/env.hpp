#pragma once

#include <cstdint>
#include <string>
#include <string_view>

#include "banditlab/rng.hpp"
#include "banditlab/types.hpp"

namespace banditlab {

/// Two-arm Bernoulli payoff probabilities.
struct RewardStructure {
  double p_x = 0.0;
  double p_y = 0.0;
  std::string label;

  bool symmetric() const { return p_x == p_y; }

  /// Higher-probability arm; ties resolve to X by convention so that a
  /// target rate is always computable.
  Choice target_arm() const { return p_y > p_x ? Choice::Y : Choice::X; }
};

/// Throws std::invalid_argument unless both probabilities lie in [0, 1].
void validate_structure(const RewardStructure& s);

/// Named presets: "symmetric" -> (0.25, 0.25), "asymmetric" -> (0.75, 0.25).
/// Any other name throws std::invalid_argument.
RewardStructure preset_structure(std::string_view name);

struct TrialOutcome {
  int reward = 0;  // 0 or 1
};

/// Seeded two-arm Bernoulli environment. One uniform draw is consumed per
/// valid choice; Invalid choices pay 0 without touching the stream, so the
/// reward sequence seen by valid choices is unaffected by interleaved
/// invalid trials.
class BanditEnv {
 public:
  BanditEnv(RewardStructure structure, std::uint64_t seed);

  TrialOutcome draw_reward(Choice choice);

  const RewardStructure& structure() const { return structure_; }

 private:
  RewardStructure structure_;
  Xoshiro256pp rng_;
};

}  // namespace banditlab
