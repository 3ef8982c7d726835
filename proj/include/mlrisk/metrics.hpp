#pragma once

#include <set>
#include <string>
#include <string_view>

namespace mlrisk {

// Attack goals (AG1..AG3).
enum class Impact { Tampering, Dos, Disclosure };

using ImpactSet = std::set<Impact>;

std::string_view to_string(Impact impact);
// Accepts "tampering", "dos", "disclosure" and the AG1..AG3 codes.
Impact impact_from_string(std::string_view text);

// Three-level rating shared by access complexity and attack performance.
enum class Rating { Low, Medium, High };

std::string_view to_string(Rating rating);
// Case-insensitive "low" / "medium" / "high".
Rating rating_from_string(std::string_view text);

}  // namespace mlrisk
