#pragma once

#include <array>
#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "calign/label.hpp"
#include "calign/quantities.hpp"
#include "calign/rational.hpp"

namespace calign {

enum class Granularity : std::uint8_t { Sample, Aggregated };

struct OperatorSet {
    std::array<bool, 3> allowed{true, true, true};

    static OperatorSet all() { return {}; }
    static OperatorSet parse(const std::string& csv);  // "or,and,andnot"
    std::string to_string() const;

    bool contains(Operator op) const { return allowed[std::size_t(op)]; }
    int count() const { return int(allowed[0]) + int(allowed[1]) + int(allowed[2]); }
};

// Min/max estimates of the four quantities for a label. Unique quantities
// are exact by construction (unique elements belong to exactly one
// concept); only the common pair carries a real interval. Per-sample
// vectors are populated at Sample granularity, totals always.
struct QuantityBounds {
    Granularity granularity = Granularity::Aggregated;

    std::uint64_t iu_total = 0, eu_total = 0;  // exact
    std::uint64_t ic_min_total = 0, ic_max_total = 0;
    std::uint64_t ec_min_total = 0, ec_max_total = 0;

    std::vector<std::uint32_t> iu, eu;
    std::vector<std::uint32_t> ic_min, ic_max, ec_min, ec_max;

    bool common_exact = true;  // ic/ec intervals are degenerate and true
    bool degenerate = false;   // AND NOT over fully disjoint sides

    bool exact(Quantity q) const {
        return q == Quantity::IU || q == Quantity::EU || common_exact;
    }
    std::uint64_t min_total(Quantity q) const;
    std::uint64_t max_total(Quantity q) const;
};

// Exact atomic bounds (Assumption: the right side of every fold step is a
// single concept whose quantities are exact).
QuantityBounds atom_bounds(const ConceptQuantities& q, Granularity granularity);

// One fold step of the label-quantity estimation: bounds of (left op k).
// `disjoint` must be true only if every concept in the left side is
// disjoint from k. Throws on granularity mismatch.
QuantityBounds estimate_label_bounds(const QuantityBounds& left, const ConceptQuantities& right,
                                     Operator op, bool disjoint, const NeuronSplit& split,
                                     Granularity granularity);

enum class PathKind : std::uint8_t { Or = 0, And = 1, AndNot = 2, Combined = 3, Final = 4 };

const char* path_kind_name(PathKind k);

struct PathInterval {
    bool present = false;
    std::uint64_t i_min = 0, i_max = 0;
    std::uint64_t union_min = 0, union_max = 0;
    Rational diou_min = Rational::zero();
    Rational diou_max = Rational::zero();
};

struct PathBounds {
    std::uint32_t t = 0;  // remaining length budget
    std::array<PathInterval, 3> exclusive;  // indexed by Operator
    PathInterval combined;                  // over the allowed operator set
    PathInterval final;                     // label kept as-is

    const PathInterval& of(PathKind k) const {
        if (k == PathKind::Final) return final;
        if (k == PathKind::Combined) return combined;
        return exclusive[std::size_t(k)];
    }
};

// Path estimation for a label with bounds `label_bounds`, budget t, over
// the allowed operators. t == 0 yields only the FINAL path. A degenerate
// label forces every path to 0/1.
PathBounds estimate_path_bounds(const QuantityBounds& label_bounds, const TopBott& topbott,
                                const NeuronSplit& split, std::uint32_t t,
                                const OperatorSet& operators, Granularity granularity);

// (dIoU_min, dIoU_max) of one path interval.
std::pair<Rational, Rational> diou_bounds(const PathInterval& path);

// Everything derived once per (dataset, neuron, n, operators) and shared
// read-only by estimators and searches.
struct SearchContext {
    const ConceptDataset* dataset = nullptr;
    const NeuronMask* neuron = nullptr;
    std::uint32_t max_length = 1;
    OperatorSet operators;
    Partition partition;
    NeuronSplit split;
    DisjointMatrix disjoint;
    std::vector<ConceptQuantities> concept_quantities;
    TopBott topbott;

    bool left_disjoint_from(const Label& left, std::uint32_t k) const;

    // Bounds of a whole label, folded head-to-tail at the requested
    // granularity, optionally starting from exact quantities of a prefix.
    QuantityBounds fold_label_bounds(const Label& label, Granularity granularity,
                                     const ConceptQuantities* exact_prefix = nullptr,
                                     std::size_t exact_prefix_len = 0) const;
};

SearchContext build_search_context(const ConceptDataset& dataset, const NeuronMask& neuron,
                                   std::uint32_t max_length, const OperatorSet& operators);

}  // namespace calign
