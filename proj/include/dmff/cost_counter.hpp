#pragma once

#include <array>
#include <cstddef>
#include <cstdint>

namespace dmff {

// Category a counted multiply is attributed to.
enum class CostTag : std::uint8_t {
  kOther = 0,
  kProjection,   // Q/K/V/O projections
  kScores,       // Q * K^T
  kWeightedSum,  // softmax(...) * V
  kFfn,          // both FFN layers
  kShrink,       // convolutional shrinking
  kFusion,       // NIN 1x1 fusion
  kCount_
};

/// Scalar-multiply tally, split by CostTag. Only forward matrix products are
/// counted; softmax exponentials, scaling and additions are not.
struct MulTally {
  std::array<std::uint64_t, static_cast<std::size_t>(CostTag::kCount_)> by_tag{};

  std::uint64_t operator[](CostTag t) const { return by_tag[static_cast<std::size_t>(t)]; }
  std::uint64_t attention() const { return (*this)[CostTag::kScores] + (*this)[CostTag::kWeightedSum]; }
  std::uint64_t total() const {
    std::uint64_t s = 0;
    for (auto v : by_tag) s += v;
    return s;
  }
};

namespace detail {
inline thread_local MulTally* active_tally = nullptr;
inline thread_local CostTag active_tag = CostTag::kOther;
}  // namespace detail

/// Routes multiply counts on this thread into `tally` for the scope lifetime.
class ScopedTally {
 public:
  explicit ScopedTally(MulTally& tally) : prev_(detail::active_tally) { detail::active_tally = &tally; }
  ~ScopedTally() { detail::active_tally = prev_; }
  ScopedTally(const ScopedTally&) = delete;
  ScopedTally& operator=(const ScopedTally&) = delete;

 private:
  MulTally* prev_;
};

class ScopedCostTag {
 public:
  explicit ScopedCostTag(CostTag tag) : prev_(detail::active_tag) { detail::active_tag = tag; }
  ~ScopedCostTag() { detail::active_tag = prev_; }
  ScopedCostTag(const ScopedCostTag&) = delete;
  ScopedCostTag& operator=(const ScopedCostTag&) = delete;

 private:
  CostTag prev_;
};

inline void count_multiplies(std::uint64_t n) {
  if (detail::active_tally) detail::active_tally->by_tag[static_cast<std::size_t>(detail::active_tag)] += n;
}

}  // namespace dmff
