#include "mlrisk/metrics.hpp"

#include <algorithm>
#include <cctype>

#include "mlrisk/error.hpp"

namespace mlrisk {

namespace {

std::string lower(std::string_view text) {
  std::string out(text);
  std::transform(out.begin(), out.end(), out.begin(),
                 [](unsigned char c) { return static_cast<char>(std::tolower(c)); });
  return out;
}

}  // namespace

std::string_view to_string(Impact impact) {
  switch (impact) {
    case Impact::Tampering: return "tampering";
    case Impact::Dos: return "dos";
    case Impact::Disclosure: return "disclosure";
  }
  return "tampering";
}

Impact impact_from_string(std::string_view text) {
  std::string t = lower(text);
  if (t == "tampering" || t == "ag1") return Impact::Tampering;
  if (t == "dos" || t == "ag2") return Impact::Dos;
  if (t == "disclosure" || t == "ag3") return Impact::Disclosure;
  throw ValidationError("unknown impact '" + std::string(text) + "'");
}

std::string_view to_string(Rating rating) {
  switch (rating) {
    case Rating::Low: return "Low";
    case Rating::Medium: return "Medium";
    case Rating::High: return "High";
  }
  return "Low";
}

Rating rating_from_string(std::string_view text) {
  std::string t = lower(text);
  if (t == "low") return Rating::Low;
  if (t == "medium") return Rating::Medium;
  if (t == "high") return Rating::High;
  throw ValidationError("unknown rating '" + std::string(text) + "' (expected Low, Medium or High)");
}

}  // namespace mlrisk
