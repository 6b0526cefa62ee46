#pragma once

#include <cstdint>
#include <string>
#include <string_view>
#include <vector>

namespace banditlab {

/// A trial outcome category. Synthetic agents only ever emit X or Y;
/// Invalid arises from model tokens that parse to neither arm.
enum class Choice : std::uint8_t { X, Y, Invalid };

inline bool is_valid(Choice c) { return c != Choice::Invalid; }

std::string_view to_string(Choice c);

/// Parses the run-log encoding ("X", "Y", "Invalid"); throws on anything else.
Choice choice_from_string(std::string_view s);

/// One trial: what was chosen, what it paid, and the raw model token that
/// produced the choice (empty for synthetic agents).
struct TrialRecord {
  int trial = 0;  // 1-based
  Choice choice = Choice::X;
  int reward = 0;  // 0 or 1
  std::string raw_token;
};

/// An ordered session of trials under one condition.
struct RunLog {
  std::string condition_id;
  int run_id = 0;
  std::vector<TrialRecord> trials;
};

struct HistoryEntry {
  int trial = 0;  // 1-based, strictly increasing
  Choice choice = Choice::X;
  int reward = 0;
};

using History = std::vector<HistoryEntry>;

}  // namespace banditlab
