#include "banditlab/env.hpp"

#include <stdexcept>
#include <string>
#include <utility>

namespace banditlab {

void validate_structure(const RewardStructure& s) {
  const auto in_unit = [](double p) { return p >= 0.0 && p <= 1.0; };
  if (!in_unit(s.p_x) || !in_unit(s.p_y)) {
    throw std::invalid_argument("reward structure: probabilities must lie in [0,1]");
  }
}

RewardStructure preset_structure(std::string_view name) {
  if (name == "symmetric") return {0.25, 0.25, "symmetric"};
  if (name == "asymmetric") return {0.75, 0.25, "asymmetric"};
  throw std::invalid_argument("unknown reward structure preset '" + std::string(name) + "'");
}

BanditEnv::BanditEnv(RewardStructure structure, std::uint64_t seed)
    : structure_(std::move(structure)), rng_(seed) {
  validate_structure(structure_);
}

TrialOutcome BanditEnv::draw_reward(Choice choice) {
  if (!is_valid(choice)) return {0};
  const double p = choice == Choice::X ? structure_.p_x : structure_.p_y;
  return {rng_.uniform() < p ? 1 : 0};
}

}  // namespace banditlab
