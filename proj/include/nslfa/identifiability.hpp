#pragma once

#include <cstdint>
#include <vector>

#include "nslfa/model.hpp"

namespace nslfa {

// Per-factor structural identifiability verdicts for a design matrix.
// witness[k] holds the intersection of all factor subsets S containing k
// whose item set R_Q(S) is non-empty, as sorted 0-based factor indices;
// an empty witness marks the empty-intersection convention (no subset
// containing k has any item). per_factor[k] is true iff witness[k]=={k}.
struct IdentifiabilityReport {
  std::vector<bool> per_factor;
  std::vector<std::vector<int>> witness;

  bool all_identifiable() const;
};

// Items loading on exactly the factor subset encoded by `subset_mask`
// (bit k set means factor k is in S). Returns 0-based item indices.
std::vector<Index> r_q(const DesignMatrix& q, std::uint32_t subset_mask);

// Theorem-style condition for a single 0-based factor index.
bool factor_identifiable(const DesignMatrix& q, Index k);

// Batch verdicts with witness sets. Rejects K > 20.
IdentifiabilityReport identifiability_report(const DesignMatrix& q);

}  // namespace nslfa
