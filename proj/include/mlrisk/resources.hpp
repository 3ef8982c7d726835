#pragma once

#include <optional>
#include <string>
#include <string_view>
#include <vector>

namespace mlrisk {

// Data files compiled into the library, addressed by their path under data/
// (e.g. "rulepack/access.P", "scenarios/demo.json").
std::optional<std::string_view> resource(std::string_view path);
std::vector<std::string> resource_names();

}  // namespace mlrisk
