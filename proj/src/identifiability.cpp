#include "nslfa/identifiability.hpp"

#include <algorithm>
#include <bit>

namespace nslfa {

namespace {

// A subset S has non-empty R_Q(S) exactly when S is the loading pattern
// of some row, so the intersection in the identifiability condition only
// ever ranges over the distinct row patterns. Sorted by popcount so the
// running intersection shrinks as early as possible.
std::vector<std::uint32_t> distinct_row_masks(const DesignMatrix& q) {
  std::vector<std::uint32_t> masks;
  masks.reserve(static_cast<std::size_t>(q.items()));
  for (Index j = 0; j < q.items(); ++j) masks.push_back(q.row_mask(j));
  std::sort(masks.begin(), masks.end(), [](std::uint32_t a, std::uint32_t b) {
    const int pa = std::popcount(a);
    const int pb = std::popcount(b);
    return pa != pb ? pa < pb : a < b;
  });
  masks.erase(std::unique(masks.begin(), masks.end()), masks.end());
  return masks;
}

// Intersection of every pattern containing factor k; ~0 left intact means
// no pattern contains k (the empty-intersection convention).
std::uint32_t witness_mask(const std::vector<std::uint32_t>& masks, Index k) {
  const std::uint32_t kbit = std::uint32_t{1} << k;
  std::uint32_t inter = ~std::uint32_t{0};
  bool any = false;
  for (const std::uint32_t m : masks) {
    if (!(m & kbit)) continue;
    any = true;
    inter &= m;
    if (inter == kbit) break;
  }
  return any ? inter : 0;
}

std::vector<int> mask_to_indices(std::uint32_t m) {
  std::vector<int> out;
  for (int k = 0; m != 0; ++k, m >>= 1) {
    if (m & 1u) out.push_back(k);
  }
  return out;
}

}  // namespace

bool IdentifiabilityReport::all_identifiable() const {
  return std::all_of(per_factor.begin(), per_factor.end(),
                     [](bool b) { return b; });
}

std::vector<Index> r_q(const DesignMatrix& q, std::uint32_t subset_mask) {
  std::vector<Index> items;
  for (Index j = 0; j < q.items(); ++j) {
    if (q.row_mask(j) == subset_mask) items.push_back(j);
  }
  return items;
}

bool factor_identifiable(const DesignMatrix& q, Index k) {
  if (k < 0 || k >= q.factors()) {
    throw FactorIndexOutOfRange("factor index " + std::to_string(k) +
                                " outside [0," +
                                std::to_string(q.factors() - 1) + "]");
  }
  const auto masks = distinct_row_masks(q);
  return witness_mask(masks, k) == std::uint32_t{1} << k;
}

IdentifiabilityReport identifiability_report(const DesignMatrix& q) {
  if (q.factors() > 20) {
    throw FactorCountTooLarge("K = " + std::to_string(q.factors()) +
                              " exceeds the subset-enumeration limit of 20");
  }
  const auto masks = distinct_row_masks(q);
  IdentifiabilityReport report;
  report.per_factor.resize(static_cast<std::size_t>(q.factors()));
  report.witness.resize(static_cast<std::size_t>(q.factors()));
  for (Index k = 0; k < q.factors(); ++k) {
    const std::uint32_t inter = witness_mask(masks, k);
    report.witness[static_cast<std::size_t>(k)] = mask_to_indices(inter);
    report.per_factor[static_cast<std::size_t>(k)] =
        inter == std::uint32_t{1} << k;
  }
  return report;
}

}  // namespace nslfa
