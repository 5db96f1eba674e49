#include "calign/label.hpp"

#include <algorithm>
#include <set>
#include <stdexcept>

namespace calign {

const char* operator_name(Operator op) {
    switch (op) {
        case Operator::Or: return "OR";
        case Operator::And: return "AND";
        default: return "AND NOT";
    }
}

bool Label::contains(std::uint32_t k) const {
    if (head == k) return true;
    for (const auto& [op, c] : tail)
        if (c == k) return true;
    return false;
}

Label Label::prefix(std::size_t len) const {
    Label p(head);
    p.tail.assign(tail.begin(), tail.begin() + (len - 1));
    return p;
}

Label Label::extended(Operator op, std::uint32_t k) const {
    Label e(*this);
    e.tail.emplace_back(op, k);
    return e;
}

std::string render_label(const Label& label, const ConceptDataset& dataset) {
    auto name = [&](std::uint32_t k) -> const std::string& {
        if (k >= dataset.concept_count()) throw std::invalid_argument("unknown concept id");
        return dataset.concept_names[k];
    };
    std::string out = name(label.head);
    for (const auto& [op, k] : label.tail)
        out = "(" + out + " " + operator_name(op) + " " + name(k) + ")";
    return out;
}

namespace {

// recursive descent over: label := concept | "(" label " " op " " concept ")"
struct LabelParser {
    const std::string& text;
    const ConceptDataset& dataset;
    std::size_t pos = 0;

    [[noreturn]] void fail(const std::string& why) const {
        throw std::invalid_argument("cannot parse label at position " + std::to_string(pos) +
                                    ": " + why);
    }
    bool eat(const std::string& token) {
        if (text.compare(pos, token.size(), token) == 0) {
            pos += token.size();
            return true;
        }
        return false;
    }
    std::uint32_t concept_until(const std::string& stop) {
        const std::size_t end = text.find(stop, pos);
        if (end == std::string::npos) fail("expected \"" + stop + "\"");
        const std::string name = text.substr(pos, end - pos);
        auto id = dataset.index_of(name);
        if (!id) fail("unknown concept \"" + name + "\"");
        pos = end;
        return *id;
    }
    Label parse() {
        Label l = parse_node();
        if (pos != text.size()) fail("trailing characters");
        return l;
    }
    Label parse_node() {
        if (!eat("(")) {
            // bare concept: the rest of the current scope
            return Label(concept_until_scope_end());
        }
        Label left = parse_node();
        if (!eat(" ")) fail("expected space before operator");
        Operator op;
        if (eat("OR ")) op = Operator::Or;
        else if (eat("AND NOT ")) op = Operator::AndNot;
        else if (eat("AND ")) op = Operator::And;
        else fail("expected operator");
        const std::uint32_t k = concept_until(")");
        if (!eat(")")) fail("expected \")\"");
        left.tail.emplace_back(op, k);
        return left;
    }
    std::uint32_t concept_until_scope_end() {
        // a bare concept ends at " OR ", " AND ", ")" or end of input;
        // match the longest known concept name starting here instead of
        // guessing, so names containing spaces still work
        std::size_t best_len = 0;
        std::uint32_t best_id = 0;
        for (std::uint32_t k = 0; k < dataset.concept_count(); ++k) {
            const std::string& n = dataset.concept_names[k];
            if (n.size() > best_len && text.compare(pos, n.size(), n) == 0) {
                best_len = n.size();
                best_id = k;
            }
        }
        if (best_len == 0) fail("unknown concept");
        pos += best_len;
        return best_id;
    }
};

}  // namespace

Label parse_label(const std::string& text, const ConceptDataset& dataset) {
    LabelParser p{text, dataset};
    return p.parse();
}

BitMatrix evaluate_label(const Label& label, const ConceptDataset& dataset) {
    if (label.head >= dataset.concept_count())
        throw std::invalid_argument("unknown concept id in label");
    BitMatrix acc = dataset.concept_masks[label.head];
    for (const auto& [op, k] : label.tail) {
        if (k >= dataset.concept_count())
            throw std::invalid_argument("unknown concept id in label");
        const BitMatrix& m = dataset.concept_masks[k];
        switch (op) {
            case Operator::Or: acc.or_with(m); break;
            case Operator::And: acc.and_with(m); break;
            case Operator::AndNot: acc.andnot_with(m); break;
        }
    }
    return acc;
}

Rational iou(const Label& label, const NeuronMask& neuron, const ConceptDataset& dataset) {
    if (neuron.mask.samples() != dataset.samples() ||
        neuron.mask.features() != dataset.features())
        throw std::invalid_argument("neuron mask and dataset disagree on (S, d)");
    const BitMatrix mask = evaluate_label(label, dataset);
    return Rational::make(popcount_and(neuron.mask, mask), popcount_or(neuron.mask, mask));
}

std::vector<ConceptQuantities> exact_label_quantities(const Label& label,
                                                      const ConceptDataset& dataset,
                                                      const NeuronMask& neuron,
                                                      const Partition& partition) {
    std::vector<ConceptQuantities> result;
    result.reserve(label.length());
    BitMatrix acc = dataset.concept_masks.at(label.head);
    result.push_back(compute_mask_quantities(acc, neuron, partition));
    for (const auto& [op, k] : label.tail) {
        const BitMatrix& m = dataset.concept_masks.at(k);
        switch (op) {
            case Operator::Or: acc.or_with(m); break;
            case Operator::And: acc.and_with(m); break;
            case Operator::AndNot: acc.andnot_with(m); break;
        }
        result.push_back(compute_mask_quantities(acc, neuron, partition));
    }
    return result;
}

Label canonicalize(const Label& label) {
    if (label.tail.empty()) return label;
    Label out(label.head);
    out.tail = label.tail;
    // sort ids inside each maximal same-operator run; reordering the right
    // operands of one operator never changes the fold result
    std::size_t i = 0;
    while (i < out.tail.size()) {
        std::size_t j = i + 1;
        while (j < out.tail.size() && out.tail[j].first == out.tail[i].first) ++j;
        const Operator op = out.tail[i].first;
        if (i == 0 && (op == Operator::Or || op == Operator::And)) {
            // head participates in a leading commutative run
            std::vector<std::uint32_t> ids{out.head};
            for (std::size_t t = 0; t < j; ++t) ids.push_back(out.tail[t].second);
            std::sort(ids.begin(), ids.end());
            out.head = ids[0];
            for (std::size_t t = 0; t < j; ++t) out.tail[t].second = ids[t + 1];
        } else {
            std::sort(out.tail.begin() + i, out.tail.begin() + j,
                      [](const auto& a, const auto& b) { return a.second < b.second; });
        }
        i = j;
    }
    return out;
}

bool is_expansion_allowed(const Label& label, Operator op, std::uint32_t k) {
    if (label.contains(k)) return false;
    if (!label.tail.empty() && label.tail.back().first == op && k <= label.tail.back().second)
        return false;
    return true;
}

bool label_is_degenerate(const Label& label, const DisjointMatrix& disjoint) {
    std::vector<std::uint32_t> left{label.head};
    for (const auto& [op, k] : label.tail) {
        if (op == Operator::AndNot) {
            bool all_disjoint = true;
            for (std::uint32_t c : left)
                if (!disjoint.disjoint(c, k)) {
                    all_disjoint = false;
                    break;
                }
            if (all_disjoint) return true;
        }
        left.push_back(k);
    }
    return false;
}

const char* difference_category_name(DifferenceCategory c) {
    switch (c) {
        case DifferenceCategory::Same: return "same";
        case DifferenceCategory::Cat1: return "cat1";
        case DifferenceCategory::Cat2: return "cat2";
        default: return "cat3";
    }
}

DifferenceCategory classify_difference(const Explanation& a, const Explanation& b,
                                       const ConceptDataset& dataset) {
    const std::string ca = render_label(canonicalize(a.label), dataset);
    const std::string cb = render_label(canonicalize(b.label), dataset);
    if (ca == cb) return DifferenceCategory::Same;
    if (a.iou == b.iou) return DifferenceCategory::Cat3;
    std::set<std::uint32_t> sa{a.label.head}, sb{b.label.head};
    for (const auto& [op, k] : a.label.tail) sa.insert(k);
    for (const auto& [op, k] : b.label.tail) sb.insert(k);
    return sa == sb ? DifferenceCategory::Cat2 : DifferenceCategory::Cat1;
}

}  // namespace calign
