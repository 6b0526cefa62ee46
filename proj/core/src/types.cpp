#include "banditlab/types.hpp"

#include <stdexcept>

namespace banditlab {

std::string_view to_string(Choice c) {
  switch (c) {
    case Choice::X: return "X";
    case Choice::Y: return "Y";
    case Choice::Invalid: return "Invalid";
  }
  throw std::logic_error("to_string: corrupt Choice value");
}

Choice choice_from_string(std::string_view s) {
  if (s == "X") return Choice::X;
  if (s == "Y") return Choice::Y;
  if (s == "Invalid") return Choice::Invalid;
  throw std::invalid_argument("choice_from_string: unrecognized token '" + std::string(s) + "'");
}

}  // namespace banditlab
