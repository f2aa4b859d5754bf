#pragma once

#include <optional>
#include <string>

#include "wayguard/types.hpp"

namespace wayguard {

/// Checks every field bound of a candidate fix. Returns std::nullopt when
/// the fix is acceptable, otherwise the name of the first violated field
/// in declaration order.
std::optional<std::string> validate_fix(const LocationFix& fix);

}  // namespace wayguard
