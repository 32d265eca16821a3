#include "ezcrop/pruner.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <stdexcept>

namespace ezcrop {
namespace {

void check_indices(std::span<const std::size_t> keep, std::size_t limit, const char* what) {
  for (std::size_t k : keep) {
    if (k < 1 || k > limit) {
      throw std::invalid_argument(std::string(what) + " index " + std::to_string(k) +
                                  " out of range 1.." + std::to_string(limit));
    }
  }
}

}  // namespace

const PlanEntry* PrunePlan::find(const std::string& layer) const noexcept {
  for (const PlanEntry& e : layers) {
    if (e.layer == layer) return &e;
  }
  return nullptr;
}

void validate(const PlanEntry& entry) {
  if (entry.keep.empty() || entry.keep.size() > entry.channels) {
    throw std::invalid_argument("layer " + entry.layer + ": keep count " +
                                std::to_string(entry.keep.size()) + " outside 1.." +
                                std::to_string(entry.channels));
  }
  check_indices(entry.keep, entry.channels, "keep");
  if (!std::is_sorted(entry.keep.begin(), entry.keep.end()) ||
      std::adjacent_find(entry.keep.begin(), entry.keep.end()) != entry.keep.end()) {
    throw std::invalid_argument("layer " + entry.layer + ": keep not ascending");
  }
}

PlanEntry keep_all(std::string layer, std::size_t channels) {
  PlanEntry e{std::move(layer), channels, std::vector<std::size_t>(channels)};
  std::iota(e.keep.begin(), e.keep.end(), std::size_t{1});
  return e;
}

std::size_t keep_count_for_ratio(double ratio, std::size_t channels) {
  if (!(ratio > 0.0 && ratio <= 1.0)) {
    throw std::invalid_argument("keep ratio must lie in (0, 1], got " + std::to_string(ratio));
  }
  const auto rounded = static_cast<std::size_t>(std::llround(ratio * static_cast<double>(channels)));
  return std::clamp<std::size_t>(rounded, 1, channels);
}

PlanEntry make_plan(const LayerImportance& importance, std::size_t keep_count) {
  const std::size_t t = importance.order.size();
  if (keep_count < 1 || keep_count > t) {
    throw std::invalid_argument("keep count " + std::to_string(keep_count) + " outside 1.." +
                                std::to_string(t));
  }
  PlanEntry e{importance.layer, t,
              {importance.order.begin(), importance.order.begin() + static_cast<std::ptrdiff_t>(keep_count)}};
  std::sort(e.keep.begin(), e.keep.end());
  validate(e);
  return e;
}

PlanEntry compose_entries(const PlanEntry& first, const PlanEntry& second) {
  if (second.channels != first.keep.size()) {
    throw std::invalid_argument("layer " + first.layer + ": second pass sees " +
                                std::to_string(second.channels) + " channels, first pass kept " +
                                std::to_string(first.keep.size()));
  }
  validate(first);
  validate(second);
  PlanEntry out{first.layer, first.channels, {}};
  out.keep.reserve(second.keep.size());
  for (std::size_t k : second.keep) out.keep.push_back(first.keep[k - 1]);
  // Monotone index map, so the result is already ascending.
  return out;
}

PrunePlan compose_plans(const PrunePlan& first, const PrunePlan& second) {
  if (first.layers.size() != second.layers.size()) {
    throw std::invalid_argument("plans cover different numbers of layers");
  }
  PrunePlan out;
  out.layers.reserve(first.layers.size());
  for (const PlanEntry& a : first.layers) {
    const PlanEntry* b = second.find(a.layer);
    if (b == nullptr) throw std::invalid_argument("layer " + a.layer + " missing from second plan");
    out.layers.push_back(compose_entries(a, *b));
  }
  return out;
}

KernelTensor apply_plan(const KernelTensor& kernel, std::span<const std::size_t> in_keep,
                        std::span<const std::size_t> out_keep) {
  if (in_keep.empty() || out_keep.empty()) throw std::invalid_argument("empty keep list");
  check_indices(in_keep, kernel.in_channels(), "input channel");
  check_indices(out_keep, kernel.out_channels(), "output channel");

  const std::size_t d = kernel.size();
  KernelTensor out(d, in_keep.size(), out_keep.size());
  for (std::size_t u = 0; u < d; ++u) {
    for (std::size_t v = 0; v < d; ++v) {
      for (std::size_t i = 0; i < in_keep.size(); ++i) {
        for (std::size_t j = 0; j < out_keep.size(); ++j) {
          out.at(u, v, i, j) = kernel.at(u, v, in_keep[i] - 1, out_keep[j] - 1);
        }
      }
    }
  }
  return out;
}

CostSummary chain_cost(std::span<const ConvShape> chain) {
  CostSummary cost;
  for (const ConvShape& s : chain) {
    const std::size_t weights = s.kernel_size * s.kernel_size * s.in_channels * s.out_channels;
    cost.params += weights;
    cost.flops += weights * s.out_rows * s.out_cols;
  }
  return cost;
}

std::vector<ConvShape> prune_chain(std::span<const ConvShape> chain, const PrunePlan& plan) {
  std::vector<ConvShape> out(chain.begin(), chain.end());
  for (std::size_t k = 0; k < out.size(); ++k) {
    const PlanEntry* e = plan.find(out[k].layer);
    if (e == nullptr) continue;
    const std::size_t before = chain[k].out_channels;
    out[k].out_channels = e->keep.size();
    if (k + 1 < out.size() && chain[k + 1].in_channels == before) {
      out[k + 1].in_channels = e->keep.size();
    }
  }
  return out;
}

std::vector<std::string> check_consistency(std::span<const ConvShape> chain,
                                           const PrunePlan& plan) {
  std::vector<std::string> warnings;
  for (std::size_t k = 0; k < chain.size(); ++k) {
    const PlanEntry* e = plan.find(chain[k].layer);
    if (e != nullptr && e->channels != chain[k].out_channels) {
      warnings.push_back("layer " + chain[k].layer + ": plan expects " +
                         std::to_string(e->channels) + " channels, layer has " +
                         std::to_string(chain[k].out_channels));
    }
    if (k + 1 < chain.size() && chain[k].out_channels != chain[k + 1].in_channels) {
      warnings.push_back("layers " + chain[k].layer + " -> " + chain[k + 1].layer + ": " +
                         std::to_string(chain[k].out_channels) + " outputs feed " +
                         std::to_string(chain[k + 1].in_channels) +
                         " inputs; pruning this pair is not modelled");
    }
  }
  for (const PlanEntry& e : plan.layers) {
    const bool known = std::any_of(chain.begin(), chain.end(),
                                   [&](const ConvShape& s) { return s.layer == e.layer; });
    if (!known) warnings.push_back("layer " + e.layer + ": not present in the network");
  }
  return warnings;
}

}  // namespace ezcrop
