#pragma once

// Shared fixtures and independent oracles for the test suites. The oracle
// helpers deliberately walk bits one by one through get(); they must stay
// independent of the packed fast paths they check.

#include <cstdint>
#include <random>
#include <string>
#include <vector>

#include "calign/baselines.hpp"
#include "calign/dataset.hpp"
#include "calign/heuristic.hpp"
#include "calign/label.hpp"
#include "calign/quantities.hpp"
#include "calign/search.hpp"

namespace testutil {

using namespace calign;

inline BitMatrix row_matrix(const std::vector<std::vector<int>>& rows) {
    BitMatrix m(std::uint32_t(rows.size()), std::uint32_t(rows.front().size()));
    for (std::uint32_t x = 0; x < rows.size(); ++x)
        for (std::uint32_t j = 0; j < rows[x].size(); ++j)
            if (rows[x][j]) m.set(x, j, true);
    return m;
}

// Hand-checkable instance: one sample, three concepts, d=6.
inline ConceptDataset worked_example_dataset() {
    ConceptDataset ds;
    ds.concept_names = {"c1", "c2", "c3"};
    ds.concept_masks.push_back(row_matrix({{1, 1, 0, 0, 1, 1}}));
    ds.concept_masks.push_back(row_matrix({{1, 1, 0, 1, 0, 0}}));
    ds.concept_masks.push_back(row_matrix({{1, 0, 1, 0, 1, 1}}));
    return ds;
}

inline NeuronMask worked_example_neuron() {
    return NeuronMask{row_matrix({{1, 1, 1, 0, 0, 0}})};
}

// --- per-bit oracles ---

inline std::uint64_t oracle_popcount(const BitMatrix& m) {
    std::uint64_t n = 0;
    for (std::uint32_t x = 0; x < m.samples(); ++x)
        for (std::uint32_t j = 0; j < m.features(); ++j)
            if (m.get(x, j)) ++n;
    return n;
}

inline std::uint64_t oracle_and_popcount(const BitMatrix& a, const BitMatrix& b) {
    std::uint64_t n = 0;
    for (std::uint32_t x = 0; x < a.samples(); ++x)
        for (std::uint32_t j = 0; j < a.features(); ++j)
            if (a.get(x, j) && b.get(x, j)) ++n;
    return n;
}

inline std::uint64_t oracle_or_popcount(const BitMatrix& a, const BitMatrix& b) {
    std::uint64_t n = 0;
    for (std::uint32_t x = 0; x < a.samples(); ++x)
        for (std::uint32_t j = 0; j < a.features(); ++j)
            if (a.get(x, j) || b.get(x, j)) ++n;
    return n;
}

// bit-by-bit left fold of a label over the dataset masks
inline BitMatrix oracle_evaluate(const Label& label, const ConceptDataset& ds) {
    BitMatrix acc(ds.samples(), ds.features());
    for (std::uint32_t x = 0; x < ds.samples(); ++x)
        for (std::uint32_t j = 0; j < ds.features(); ++j)
            acc.set(x, j, ds.concept_masks[label.head].get(x, j));
    for (const auto& [op, k] : label.tail) {
        const BitMatrix& m = ds.concept_masks[k];
        for (std::uint32_t x = 0; x < ds.samples(); ++x)
            for (std::uint32_t j = 0; j < ds.features(); ++j) {
                const bool l = acc.get(x, j), r = m.get(x, j);
                bool v = false;
                if (op == Operator::Or) v = l || r;
                else if (op == Operator::And) v = l && r;
                else v = l && !r;
                acc.set(x, j, v);
            }
    }
    return acc;
}

inline Rational oracle_iou(const Label& label, const NeuronMask& neuron,
                           const ConceptDataset& ds) {
    const BitMatrix mask = oracle_evaluate(label, ds);
    return Rational::make(oracle_and_popcount(neuron.mask, mask),
                          oracle_or_popcount(neuron.mask, mask));
}

// true per-sample (iu, ic, eu, ec) of a mask by location counting
struct OracleQuantities {
    std::vector<std::uint32_t> iu, ic, eu, ec;
};

inline OracleQuantities oracle_quantities(const BitMatrix& mask, const NeuronMask& neuron,
                                          const ConceptDataset& ds) {
    OracleQuantities q;
    const std::uint32_t s = ds.samples();
    q.iu.assign(s, 0);
    q.ic.assign(s, 0);
    q.eu.assign(s, 0);
    q.ec.assign(s, 0);
    for (std::uint32_t x = 0; x < s; ++x)
        for (std::uint32_t j = 0; j < ds.features(); ++j) {
            if (!mask.get(x, j)) continue;
            std::uint32_t annotations = 0;
            for (const auto& m : ds.concept_masks)
                if (m.get(x, j)) ++annotations;
            const bool fires = neuron.mask.get(x, j);
            if (annotations == 1) fires ? ++q.iu[x] : ++q.eu[x];
            else if (annotations >= 2) fires ? ++q.ic[x] : ++q.ec[x];
        }
    return q;
}

// --- random instances ---

inline SynthConfig synth_config(std::uint64_t seed, std::uint32_t concepts = 8,
                                std::uint32_t samples = 16, std::uint32_t features = 64,
                                double overlap = 0.3) {
    SynthConfig cfg;
    cfg.seed = seed;
    cfg.concepts = concepts;
    cfg.samples = samples;
    cfg.features = features;
    cfg.annotation_density = 0.5;
    cfg.overlap_density = overlap;
    cfg.neuron_fire_rate = 0.2;
    return cfg;
}

// Best raw IoU reachable from `label` by chaining further distinct
// concepts up to max_length (the label itself counts, via its final
// path). Degenerate AND NOT steps are skipped; their values equal those
// of shorter labels that are themselves reachable.
inline Rational max_reachable_iou(const ConceptDataset& ds, const NeuronMask& neuron,
                                  const DisjointMatrix& dj, const Label& label,
                                  std::uint32_t max_length, const OperatorSet& ops) {
    BitMatrix mask = evaluate_label(label, ds);
    Rational best = Rational::make(popcount_and(neuron.mask, mask),
                                   popcount_or(neuron.mask, mask));
    struct Walker {
        const ConceptDataset& ds;
        const NeuronMask& neuron;
        const DisjointMatrix& dj;
        std::uint32_t max_length;
        const OperatorSet& ops;
        Rational best;

        bool step_degenerate(const Label& left, std::uint32_t k) const {
            if (!dj.disjoint(left.head, k)) return false;
            for (const auto& [o, c] : left.tail)
                if (!dj.disjoint(c, k)) return false;
            return true;
        }
        void walk(const Label& label, const BitMatrix& mask) {
            if (label.length() >= max_length) return;
            for (Operator op : {Operator::Or, Operator::And, Operator::AndNot}) {
                if (!ops.contains(op)) continue;
                for (std::uint32_t k = 0; k < ds.concept_count(); ++k) {
                    if (label.contains(k)) continue;
                    if (op == Operator::AndNot && step_degenerate(label, k)) continue;
                    BitMatrix next = mask;
                    if (op == Operator::Or) next.or_with(ds.concept_masks[k]);
                    else if (op == Operator::And) next.and_with(ds.concept_masks[k]);
                    else next.andnot_with(ds.concept_masks[k]);
                    const Rational v = Rational::make(popcount_and(neuron.mask, next),
                                                      popcount_or(neuron.mask, next));
                    if (best < v) best = v;
                    walk(label.extended(op, k), next);
                }
            }
        }
    } walker{ds, neuron, dj, max_length, ops, best};
    walker.walk(label, mask);
    return walker.best;
}

// random non-degenerate label of the given length with distinct concepts
inline Label random_label(std::mt19937_64& rng, std::uint32_t concepts, std::uint32_t length,
                          const OperatorSet& ops = OperatorSet::all()) {
    std::uniform_int_distribution<std::uint32_t> pick_concept(0, concepts - 1);
    std::vector<Operator> allowed;
    for (Operator op : {Operator::Or, Operator::And, Operator::AndNot})
        if (ops.contains(op)) allowed.push_back(op);
    std::uniform_int_distribution<std::size_t> pick_op(0, allowed.size() - 1);
    Label label(pick_concept(rng));
    while (label.length() < length) {
        std::uint32_t k = pick_concept(rng);
        while (label.contains(k)) k = pick_concept(rng);
        label.tail.emplace_back(allowed[pick_op(rng)], k);
    }
    return label;
}

}  // namespace testutil
