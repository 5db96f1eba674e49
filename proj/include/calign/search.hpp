#pragma once

#include <cstdint>
#include <list>
#include <optional>
#include <string>
#include <unordered_map>
#include <unordered_set>
#include <vector>

#include "calign/heuristic.hpp"
#include "calign/label.hpp"

namespace calign {

struct SearchLimits {
    std::optional<std::uint64_t> max_nodes;  // popped nodes
    std::optional<double> max_seconds;
};

struct SearchOptions {
    std::uint32_t max_length = 3;
    OperatorSet operators;
    SearchLimits limits;
    bool backprop = true;
    std::size_t prefix_cache_capacity = 4096;
};

enum class Tier : std::uint8_t { Aggregated, Sample, Exact };

struct SearchNode {
    Label label;  // canonical form
    PathKind kind = PathKind::Final;
    Tier tier = Tier::Aggregated;
    QuantityBounds bounds;
    Rational priority = Rational::zero();  // dIoU_max of this node's path
    Rational diou_min = Rational::zero();
    std::uint64_t insertion_seq = 0;
};

// Bounded LRU of exact prefix quantities keyed by canonical rendering.
class PrefixCache {
public:
    explicit PrefixCache(std::size_t capacity) : capacity_(capacity) {}
    const ConceptQuantities* find(const std::string& key);
    void put(const std::string& key, ConceptQuantities value);
    std::size_t size() const { return map_.size(); }

private:
    std::size_t capacity_;
    std::list<std::pair<std::string, ConceptQuantities>> order_;  // front = most recent
    std::unordered_map<std::string, decltype(order_)::iterator> map_;
};

struct SearchState {
    std::vector<SearchNode> frontier;  // binary max-heap on (priority, -seq)
    Rational min_iou = Rational::zero();
    std::optional<std::pair<Label, Rational>> best;
    std::unordered_set<std::string> memory;  // canonical label + path kind
    Rational recent_iou = Rational::zero();
    PrefixCache prefix_cache{4096};
    SearchStats stats;
    std::uint64_t next_seq = 0;
    std::uint64_t backprop_updates = 0;

    std::size_t live_frontier_size() const;  // entries with priority > min_iou
};

// Drops every frontier node whose priority is not strictly above min_iou.
void reduce_frontier(SearchState& state);

// Recomputes bounds of frontier nodes whose label starts with one of the
// freshly cached exact prefixes. Priorities only tighten. Returns the
// number of nodes whose bounds were recomputed.
std::uint64_t backpropagate_prefix(SearchState& state, const SearchContext& ctx,
                                   const std::vector<std::string>& new_prefix_keys);

// Best-first search with admissible path bounds; returns the label of
// length <= n maximizing IoU with an exact rational score. If a budget is
// exhausted the best-so-far is returned with optimal == false.
Explanation optimal_search(const ConceptDataset& dataset, const NeuronMask& neuron,
                           const SearchOptions& options);

}  // namespace calign
