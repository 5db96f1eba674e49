#pragma once

#include <array>
#include <cstdint>
#include <vector>

#include "calign/dataset.hpp"
#include "calign/rational.hpp"

namespace calign {

// The four fundamental per-concept quantities, indexable where convenient.
enum class Quantity : std::uint8_t { IC = 0, IU = 1, EC = 2, EU = 3 };
inline constexpr std::array<Quantity, 4> kQuantities{Quantity::IC, Quantity::IU, Quantity::EC,
                                                     Quantity::EU};

// Unique (exactly one annotation) vs common (two or more) locations.
struct Partition {
    BitMatrix unique;
    BitMatrix common;
};

// Per-sample decomposition of the neuron mask against the partition.
// n_per_sample includes locations outside every annotation.
struct NeuronSplit {
    std::vector<std::uint32_t> nu_per_sample;   // |N^U_x|
    std::vector<std::uint32_t> nc_per_sample;   // |N^C_x|
    std::vector<std::uint32_t> seu_per_sample;  // |SE^U_x|
    std::vector<std::uint32_t> sec_per_sample;  // |SE^C_x|
    std::vector<std::uint32_t> n_per_sample;    // |N_x|
    std::uint64_t n_total = 0;                  // |^1N|
    std::uint64_t nu_total = 0;
    std::uint64_t nc_total = 0;
    std::uint64_t seu_total = 0;
    std::uint64_t sec_total = 0;
};

// Exact per-sample quantities of a concept (or of an evaluated label).
struct ConceptQuantities {
    std::vector<std::uint32_t> iu, ic, eu, ec;
    std::uint64_t iu_total = 0, ic_total = 0, eu_total = 0, ec_total = 0;

    std::uint64_t total(Quantity q) const {
        switch (q) {
            case Quantity::IC: return ic_total;
            case Quantity::IU: return iu_total;
            case Quantity::EC: return ec_total;
            default: return eu_total;
        }
    }
    const std::vector<std::uint32_t>& per_sample(Quantity q) const {
        switch (q) {
            case Quantity::IC: return ic;
            case Quantity::IU: return iu;
            case Quantity::EC: return ec;
            default: return eu;
        }
    }
};

// dIoU of exactly known quantities: (IU+IC) / (|N| + EU + EC).
Rational diou_from_quantities(const ConceptQuantities& q, std::uint64_t n_total);

struct DisjointMatrix {
    std::uint32_t concepts = 0;
    std::vector<std::uint8_t> cells;  // row-major K x K

    bool disjoint(std::uint32_t a, std::uint32_t b) const {
        return cells[std::size_t(a) * concepts + b] != 0;
    }
};

// Cumulative best/worst per-quantity improvements. Per-sample vectors hold
// Top_t for t=1..depth (saturating past the concept count); Bott_1 is the
// per-sample minimum. The aggregated vectors are the dataset sums of the
// per-sample ones, which keeps the aggregated estimates an envelope of the
// sample estimates for every operator.
struct TopBott {
    std::uint32_t depth = 0;  // n-1
    std::uint32_t samples = 0;
    // top[q][ (t-1)*S + x ]
    std::array<std::vector<std::uint32_t>, 4> top;
    std::array<std::vector<std::uint32_t>, 4> bott1;
    std::array<std::vector<std::uint64_t>, 4> top_agg;  // per t
    std::array<std::uint64_t, 4> bott1_agg{};
    std::array<bool, 4> bott1_all_zero{};

    std::uint32_t top_at(Quantity q, std::uint32_t t, std::uint32_t x) const {
        return top[std::size_t(q)][std::size_t(t - 1) * samples + x];
    }
    std::uint32_t bott1_at(Quantity q, std::uint32_t x) const {
        return bott1_all_zero[std::size_t(q)] ? 0 : bott1[std::size_t(q)][x];
    }
    std::uint64_t top_agg_at(Quantity q, std::uint32_t t) const {
        return top_agg[std::size_t(q)][t - 1];
    }
    std::uint64_t bott1_agg_at(Quantity q) const { return bott1_agg[std::size_t(q)]; }
};

Partition compute_partition(const ConceptDataset& dataset);

NeuronSplit compute_neuron_split(const NeuronMask& neuron, const Partition& partition);

ConceptQuantities compute_concept_quantities(std::uint32_t concept_id, const NeuronMask& neuron,
                                             const Partition& partition,
                                             const ConceptDataset& dataset);

// Exact quantities of an arbitrary evaluated mask (labels use this too).
ConceptQuantities compute_mask_quantities(const BitMatrix& mask, const NeuronMask& neuron,
                                          const Partition& partition);

DisjointMatrix compute_disjoint_matrix(const ConceptDataset& dataset);

TopBott compute_top_bott(const std::vector<ConceptQuantities>& all_concept_quantities,
                         std::uint32_t max_length);

}  // namespace calign
