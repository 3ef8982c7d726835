#pragma once

#include <string>
#include <string_view>

#include "mlrisk/model.hpp"

namespace mlrisk {

// {"schema_version":1, "nodes":[{id, kind, label, fact | rule_id}],
//  "edges":[{src, dst}], "goals":[id...]}
std::string graph_to_json(const AttackGraph& graph);
AttackGraph graph_from_json(std::string_view text);

// Graphviz: AND ellipse, OR diamond, LEAF box; goals drawn bold.
std::string graph_to_dot(const AttackGraph& graph);

}  // namespace mlrisk
