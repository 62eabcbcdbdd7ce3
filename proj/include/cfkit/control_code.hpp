#pragma once

#include <array>
#include <optional>
#include <string>
#include <string_view>

namespace cfkit {

/// The eight perturbation types plus the `global` catch-all. Declaration
/// order is the classifier's rule precedence.
enum class ControlCode {
  negation,
  quantifier,
  shuffle,
  lexical,
  insert,
  remove,  // spelled "delete" on the wire
  resemantic,
  restructure,
  global,
};

inline constexpr std::array<ControlCode, 8> kPerturbationCodes{
    ControlCode::negation, ControlCode::quantifier, ControlCode::shuffle,    ControlCode::lexical,
    ControlCode::resemantic, ControlCode::insert,   ControlCode::remove, ControlCode::restructure};

std::string_view to_string(ControlCode c);
std::optional<ControlCode> parse_control_code(std::string_view s);

/// Position in the classification cascade; lower fires first.
int rule_rank(ControlCode c);

}  // namespace cfkit
