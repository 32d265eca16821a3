#pragma once

#include <cstddef>
#include <span>
#include <string>
#include <vector>

#include "ezcrop/importance.hpp"
#include "ezcrop/tensor.hpp"

namespace ezcrop {

/// Channels kept for one layer: `keep` holds 1-based original indices,
/// ascending and duplicate-free, with 1 <= keep.size() <= channels.
struct PlanEntry {
  std::string layer;
  std::size_t channels = 0;
  std::vector<std::size_t> keep;

  friend bool operator==(const PlanEntry&, const PlanEntry&) = default;
};

struct PrunePlan {
  std::vector<PlanEntry> layers;

  const PlanEntry* find(const std::string& layer) const noexcept;
  friend bool operator==(const PrunePlan&, const PrunePlan&) = default;
};

/// Throws std::invalid_argument when the entry breaks the PlanEntry invariants.
void validate(const PlanEntry& entry);

/// Plan that keeps every channel of a T-channel layer.
PlanEntry keep_all(std::string layer, std::size_t channels);

/// Keep count for a ratio in (0, 1]: max(1, round(ratio * channels)).
std::size_t keep_count_for_ratio(double ratio, std::size_t channels);

/// Keeps the first `keep_count` channels of importance.order, re-sorted
/// ascending.
PlanEntry make_plan(const LayerImportance& importance, std::size_t keep_count);

/// `second` indexes the channels left by `first`; the result indexes the
/// original layer: keep = { first.keep[k] : k in second.keep }.
PlanEntry compose_entries(const PlanEntry& first, const PlanEntry& second);

/// Layer-wise composition. Both plans must cover the same layers.
PrunePlan compose_plans(const PrunePlan& first, const PrunePlan& second);

/// D x D x |in_keep| x |out_keep| sub-tensor; indices are 1-based and must be
/// in range for the kernel's S and T.
KernelTensor apply_plan(const KernelTensor& kernel, std::span<const std::size_t> in_keep,
                        std::span<const std::size_t> out_keep);

/// Shape of one convolution in a sequential chain.
struct ConvShape {
  std::string layer;
  std::size_t kernel_size = 0;
  std::size_t in_channels = 0;
  std::size_t out_channels = 0;
  std::size_t out_rows = 0;
  std::size_t out_cols = 0;
};

struct CostSummary {
  std::size_t params = 0;
  std::size_t flops = 0;  // multiply-accumulates
};

/// Weight count and MACs of a stride-1 convolution chain without bias.
CostSummary chain_cost(std::span<const ConvShape> chain);

/// Chain after pruning: every layer's outputs shrink to its plan entry and the
/// next layer's inputs follow. Layers absent from the plan are left intact.
std::vector<ConvShape> prune_chain(std::span<const ConvShape> chain, const PrunePlan& plan);

/// Warnings for per-layer plans that do not line up with a sequential chain:
/// plan T differing from the layer's output count, and adjacent layers whose
/// out/in counts already disagree (shortcut or concatenation coupling the
/// planner does not model). Never throws for a mismatch.
std::vector<std::string> check_consistency(std::span<const ConvShape> chain,
                                           const PrunePlan& plan);

}  // namespace ezcrop
