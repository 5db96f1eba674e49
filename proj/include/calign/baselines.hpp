#pragma once

#include <cstdint>
#include <vector>

#include "calign/heuristic.hpp"
#include "calign/label.hpp"

namespace calign {

struct BeamConfig {
    std::uint32_t beam_size = 5;
    std::uint32_t max_length = 3;
    OperatorSet operators;

    void validate() const;
};

// Per-level instrumentation for the beam searches.
struct BeamLevelTrace {
    std::uint64_t level = 0;
    std::uint64_t pool_size = 0;  // deduplicated candidates this level
    std::uint64_t estimated = 0;
    std::uint64_t visited = 0;
};

// Level-wise beam search scoring every candidate by exact IoU. The old
// beam competes with the new candidates, so shorter labels can win.
Explanation beam_search_vanilla(const ConceptDataset& dataset, const NeuronMask& neuron,
                                const BeamConfig& cfg,
                                std::vector<BeamLevelTrace>* trace = nullptr);

// Same discipline, but candidates are ranked by the label-quantity
// estimate first and exact IoU is computed only while the estimate stays
// at or above the current beam minimum. Admissible estimates make the
// resulting beams identical to the vanilla ones.
Explanation beam_search_heuristic(const ConceptDataset& dataset, const NeuronMask& neuron,
                                  const BeamConfig& cfg,
                                  std::vector<BeamLevelTrace>* trace = nullptr);

// Number of left-deep labels with distinct concepts up to length n:
// sum_k n_ops^(k-1) * K*(K-1)*...*(K-k+1). Saturates at uint64 max.
std::uint64_t state_space_size(std::uint32_t concepts, std::uint32_t max_length, int n_ops);

struct BruteForceResult {
    Explanation best;
    std::uint64_t enumerated = 0;
    // canonical-deduplicated ranking, best first (top_m entries)
    std::vector<std::pair<Label, Rational>> ranking;
};

inline constexpr std::uint64_t kDefaultBruteCap = 10'000'000;

// Exhaustive enumeration of every left-deep label; the verification
// oracle for the optimal search. Throws if the state space exceeds cap.
BruteForceResult brute_force(const ConceptDataset& dataset, const NeuronMask& neuron,
                             std::uint32_t max_length, const OperatorSet& operators,
                             std::uint64_t cap = kDefaultBruteCap, std::size_t top_m = 0);

}  // namespace calign
