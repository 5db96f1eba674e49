#pragma once

#include <cstdint>
#include <string>
#include <utility>
#include <vector>

#include "calign/quantities.hpp"
#include "calign/rational.hpp"

namespace calign {

// All three connectives are 00-preserving, the precondition for the
// decomposed IoU (AND NOT maps (a,b) to a & ~b).
enum class Operator : std::uint8_t { Or = 0, And = 1, AndNot = 2 };

const char* operator_name(Operator op);  // "OR" / "AND" / "AND NOT"

// Left-deep formula over distinct concept ids: head, then (op, concept)
// pairs folded left to right.
struct Label {
    std::uint32_t head = 0;
    std::vector<std::pair<Operator, std::uint32_t>> tail;

    explicit Label(std::uint32_t h = 0) : head(h) {}
    Label(std::uint32_t h, std::vector<std::pair<Operator, std::uint32_t>> t)
        : head(h), tail(std::move(t)) {}

    std::size_t length() const { return 1 + tail.size(); }
    bool contains(std::uint32_t k) const;
    Label prefix(std::size_t len) const;  // first len concepts
    Label extended(Operator op, std::uint32_t k) const;

    bool operator==(const Label& o) const = default;
};

struct SearchStats {
    std::uint64_t visited = 0;    // exact IoU evaluations of composite labels
    std::uint64_t expanded = 0;   // nodes whose children were generated
    std::uint64_t estimated = 0;  // heuristic bound computations
    std::uint64_t backprop_updates = 0;  // frontier bounds recomputed from exact prefixes
    std::uint64_t elapsed_ms = 0;
};

struct Explanation {
    Label label;
    Rational iou;
    SearchStats stats;
    bool optimal = false;      // guarantee held (budget not exhausted)
    std::string warning;       // e.g. all-zero neuron mask
};

// Fully parenthesised left-deep rendering, e.g. "((A AND NOT B) OR C)".
// This string doubles as the canonical key when the label is canonical.
std::string render_label(const Label& label, const ConceptDataset& dataset);

// Parses the grammar  label := concept | "(" label " " op " " concept ")".
Label parse_label(const std::string& text, const ConceptDataset& dataset);

// Left fold of the concept masks under the tail operators.
BitMatrix evaluate_label(const Label& label, const ConceptDataset& dataset);

// Bitwise IoU (Jaccard) of the evaluated label against the neuron mask.
// Empty union is defined as 0/1.
Rational iou(const Label& label, const NeuronMask& neuron, const ConceptDataset& dataset);

// Exact per-sample quantities of every prefix, shortest first. The last
// entry's decomposed IoU equals the bitwise IoU of the whole label.
std::vector<ConceptQuantities> exact_label_quantities(const Label& label,
                                                      const ConceptDataset& dataset,
                                                      const NeuronMask& neuron,
                                                      const Partition& partition);

// Sorts concept ids ascending within every maximal run of one operator in
// the tail; the head joins the leading run when its operator commutes
// through the head position (OR / AND). Evaluation is unchanged.
Label canonicalize(const Label& label);

// Expansion filter: concepts stay distinct, and chaining the same operator
// twice in a row requires a strictly larger concept id (other orders are
// reached from the lower-id node).
bool is_expansion_allowed(const Label& label, Operator op, std::uint32_t k);

// True when some fold step applies AND NOT between fully disjoint sides;
// such labels reduce to their left side and score 0 in the searches.
bool label_is_degenerate(const Label& label, const DisjointMatrix& disjoint);

enum class DifferenceCategory { Same, Cat1, Cat2, Cat3 };

const char* difference_category_name(DifferenceCategory c);

// Table-2 style classification. IoU equality dominates: equal IoU with
// different canonical labels is Cat3 regardless of concept sets.
DifferenceCategory classify_difference(const Explanation& a, const Explanation& b,
                                       const ConceptDataset& dataset);

}  // namespace calign
