// Slow reference computations for the likelihood tests.
#pragma once

#include <cstdint>
#include <functional>
#include <map>
#include <span>
#include <string>

#include "mlrisk/model.hpp"

namespace testing_support {

// P(at least one) by summing over every non-empty subset with alternating
// signs.
inline double inclusion_exclusion(std::span<const double> p) {
  const std::size_t n = p.size();
  double total = 0;
  for (std::uint32_t mask = 1; mask < (1u << n); ++mask) {
    double term = 1;
    int bits = 0;
    for (std::size_t i = 0; i < n; ++i)
      if (mask & (1u << i)) {
        term *= p[i];
        ++bits;
      }
    total += (bits % 2 == 1) ? term : -term;
  }
  return total;
}

// Memoized recursion over parents taken in id order; AND multiplies, OR uses
// the complement product.
inline std::map<std::string, double> recursive_likelihood(const mlrisk::AttackGraph& g,
                                                          const std::map<std::string, double>& leaf) {
  std::map<std::string, double> memo;
  std::function<double(std::size_t)> eval = [&](std::size_t i) -> double {
    const auto& node = g.node(i);
    if (auto it = memo.find(node.id); it != memo.end()) return it->second;
    double v;
    if (node.kind == mlrisk::NodeKind::Leaf) {
      auto it = leaf.find(node.id);
      v = it == leaf.end() ? 1.0 : it->second;
    } else {
      std::map<std::string, double> parents;
      for (auto p : g.parents(i)) parents[g.node(p).id] = eval(p);
      double all = 1, miss = 1;
      for (const auto& [id, x] : parents) {
        all *= x;
        miss *= 1 - x;
      }
      v = node.kind == mlrisk::NodeKind::And ? all : 1 - miss;
    }
    memo[node.id] = v;
    return v;
  };
  for (std::size_t i = 0; i < g.nodes().size(); ++i) eval(i);
  return memo;
}

}  // namespace testing_support
