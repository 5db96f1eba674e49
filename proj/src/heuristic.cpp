#include "calign/heuristic.hpp"

#include <algorithm>
#include <cassert>
#include <sstream>
#include <stdexcept>

namespace calign {

namespace {

std::uint64_t sub_floor0(std::uint64_t a, std::uint64_t b) { return a > b ? a - b : 0; }

// a + b - c, floored at zero (the guaranteed-overlap form of the AND rules)
std::uint64_t overlap_floor0(std::uint64_t a, std::uint64_t b, std::uint64_t c) {
    return a + b > c ? a + b - c : 0;
}

}  // namespace

OperatorSet OperatorSet::parse(const std::string& csv) {
    OperatorSet set;
    set.allowed = {false, false, false};
    std::stringstream ss(csv);
    std::string item;
    while (std::getline(ss, item, ',')) {
        if (item == "or") set.allowed[std::size_t(Operator::Or)] = true;
        else if (item == "and") set.allowed[std::size_t(Operator::And)] = true;
        else if (item == "andnot") set.allowed[std::size_t(Operator::AndNot)] = true;
        else throw std::invalid_argument("unknown operator \"" + item +
                                         "\" (expected or,and,andnot)");
    }
    if (set.count() == 0) throw std::invalid_argument("operator set cannot be empty");
    return set;
}

std::string OperatorSet::to_string() const {
    std::string out;
    const char* names[3] = {"or", "and", "andnot"};
    for (int i = 0; i < 3; ++i) {
        if (!allowed[i]) continue;
        if (!out.empty()) out += ',';
        out += names[i];
    }
    return out;
}

std::uint64_t QuantityBounds::min_total(Quantity q) const {
    switch (q) {
        case Quantity::IC: return ic_min_total;
        case Quantity::IU: return iu_total;
        case Quantity::EC: return ec_min_total;
        default: return eu_total;
    }
}

std::uint64_t QuantityBounds::max_total(Quantity q) const {
    switch (q) {
        case Quantity::IC: return ic_max_total;
        case Quantity::IU: return iu_total;
        case Quantity::EC: return ec_max_total;
        default: return eu_total;
    }
}

QuantityBounds atom_bounds(const ConceptQuantities& q, Granularity granularity) {
    QuantityBounds b;
    b.granularity = granularity;
    b.iu_total = q.iu_total;
    b.eu_total = q.eu_total;
    b.ic_min_total = b.ic_max_total = q.ic_total;
    b.ec_min_total = b.ec_max_total = q.ec_total;
    b.common_exact = true;
    if (granularity == Granularity::Sample) {
        b.iu = q.iu;
        b.eu = q.eu;
        b.ic_min = b.ic_max = q.ic;
        b.ec_min = b.ec_max = q.ec;
    }
    return b;
}

QuantityBounds estimate_label_bounds(const QuantityBounds& left, const ConceptQuantities& right,
                                     Operator op, bool disjoint, const NeuronSplit& split,
                                     Granularity granularity) {
    if (left.granularity != granularity)
        throw std::invalid_argument("granularity mismatch between left bounds and request");

    QuantityBounds out;
    out.granularity = granularity;
    out.degenerate = left.degenerate;

    if (disjoint && op == Operator::AndNot) {
        // mathematically the label collapses to its left side; keep the
        // (valid) left quantities but force the score to zero downstream
        out = left;
        out.degenerate = true;
        return out;
    }

    if (disjoint && op == Operator::And) {
        // disjoint sides leave an empty mask
        out.common_exact = true;
        if (granularity == Granularity::Sample) {
            const std::size_t s = left.ic_min.size();
            out.iu.assign(s, 0);
            out.eu.assign(s, 0);
            out.ic_min.assign(s, 0);
            out.ic_max.assign(s, 0);
            out.ec_min.assign(s, 0);
            out.ec_max.assign(s, 0);
        }
        return out;
    }

    // unique elements combine exactly for every operator
    switch (op) {
        case Operator::Or:
            out.iu_total = left.iu_total + right.iu_total;
            out.eu_total = left.eu_total + right.eu_total;
            break;
        case Operator::And:
            out.iu_total = out.eu_total = 0;
            break;
        case Operator::AndNot:
            out.iu_total = left.iu_total;
            out.eu_total = left.eu_total;
            break;
    }

    if (disjoint) {
        // op == OR here: common elements combine additively as well
        out.common_exact = left.common_exact;
        out.ic_min_total = left.ic_min_total + right.ic_total;
        out.ic_max_total = left.ic_max_total + right.ic_total;
        out.ec_min_total = left.ec_min_total + right.ec_total;
        out.ec_max_total = left.ec_max_total + right.ec_total;
        if (granularity == Granularity::Sample) {
            const std::size_t s = left.ic_min.size();
            out.iu.resize(s);
            out.eu.resize(s);
            out.ic_min.resize(s);
            out.ic_max.resize(s);
            out.ec_min.resize(s);
            out.ec_max.resize(s);
            for (std::size_t x = 0; x < s; ++x) {
                out.iu[x] = left.iu[x] + right.iu[x];
                out.eu[x] = left.eu[x] + right.eu[x];
                out.ic_min[x] = left.ic_min[x] + right.ic[x];
                out.ic_max[x] = left.ic_max[x] + right.ic[x];
                out.ec_min[x] = left.ec_min[x] + right.ec[x];
                out.ec_max[x] = left.ec_max[x] + right.ec[x];
            }
        }
        return out;
    }

    out.common_exact = false;

    if (granularity == Granularity::Aggregated) {
        const std::uint64_t nc = split.nc_total;
        const std::uint64_t sec = split.sec_total;
        const std::uint64_t icr = right.ic_total;
        const std::uint64_t ecr = right.ec_total;
        switch (op) {
            case Operator::Or:
                out.ic_min_total = std::min(left.ic_min_total, icr);
                out.ic_max_total = std::min(left.ic_max_total + icr, nc);
                out.ec_min_total = std::max(left.ec_min_total, ecr);
                out.ec_max_total = std::min(left.ec_max_total + ecr, sec);
                break;
            case Operator::And:
                out.ic_min_total = overlap_floor0(left.ic_min_total, icr, nc);
                out.ic_max_total = std::min(left.ic_max_total, icr);
                out.ec_min_total = overlap_floor0(left.ec_min_total, ecr, sec);
                out.ec_max_total = std::min(left.ec_max_total, ecr);
                break;
            case Operator::AndNot:
                out.ic_min_total = sub_floor0(left.ic_min_total, icr);
                out.ic_max_total = std::min(left.ic_max_total, nc - icr);
                out.ec_min_total = sub_floor0(left.ec_min_total, ecr);
                out.ec_max_total = std::min(left.ec_max_total, sec - ecr);
                break;
        }
        return out;
    }

    const std::size_t s = left.ic_min.size();
    out.iu.resize(s);
    out.eu.resize(s);
    out.ic_min.resize(s);
    out.ic_max.resize(s);
    out.ec_min.resize(s);
    out.ec_max.resize(s);
    out.iu_total = out.eu_total = 0;
    for (std::size_t x = 0; x < s; ++x) {
        switch (op) {
            case Operator::Or:
                out.iu[x] = left.iu[x] + right.iu[x];
                out.eu[x] = left.eu[x] + right.eu[x];
                break;
            case Operator::And:
                out.iu[x] = out.eu[x] = 0;
                break;
            case Operator::AndNot:
                out.iu[x] = left.iu[x];
                out.eu[x] = left.eu[x];
                break;
        }
        const std::uint32_t nc = split.nc_per_sample[x];
        const std::uint32_t sec = split.sec_per_sample[x];
        const std::uint32_t icr = right.ic[x];
        const std::uint32_t ecr = right.ec[x];
        switch (op) {
            case Operator::Or:
                out.ic_min[x] = std::max(left.ic_min[x], icr);
                out.ic_max[x] = std::uint32_t(std::min<std::uint64_t>(left.ic_max[x] + icr, nc));
                out.ec_min[x] = std::max(left.ec_min[x], ecr);
                out.ec_max[x] = std::uint32_t(std::min<std::uint64_t>(left.ec_max[x] + ecr, sec));
                break;
            case Operator::And:
                out.ic_min[x] = std::uint32_t(overlap_floor0(left.ic_min[x], icr, nc));
                out.ic_max[x] = std::min(left.ic_max[x], icr);
                out.ec_min[x] = std::uint32_t(overlap_floor0(left.ec_min[x], ecr, sec));
                out.ec_max[x] = std::min(left.ec_max[x], ecr);
                break;
            case Operator::AndNot:
                out.ic_min[x] = std::uint32_t(sub_floor0(left.ic_min[x], icr));
                out.ic_max[x] = std::min(left.ic_max[x], nc - icr);
                out.ec_min[x] = std::uint32_t(sub_floor0(left.ec_min[x], ecr));
                out.ec_max[x] = std::min(left.ec_max[x], sec - ecr);
                break;
        }
        assert(out.ic_min[x] <= out.ic_max[x] && out.ec_min[x] <= out.ec_max[x]);
        out.iu_total += out.iu[x];
        out.eu_total += out.eu[x];
        out.ic_min_total += out.ic_min[x];
        out.ic_max_total += out.ic_max[x];
        out.ec_min_total += out.ec_min[x];
        out.ec_max_total += out.ec_max[x];
    }
    return out;
}

const char* path_kind_name(PathKind k) {
    switch (k) {
        case PathKind::Or: return "or";
        case PathKind::And: return "and";
        case PathKind::AndNot: return "andnot";
        case PathKind::Combined: return "combined";
        default: return "final";
    }
}

std::pair<Rational, Rational> diou_bounds(const PathInterval& path) {
    return {path.diou_min, path.diou_max};
}

namespace {

void finish_interval(PathInterval& p) {
    p.present = true;
    p.diou_max = Rational::make(p.i_max, p.union_min);
    p.diou_min = Rational::make(p.i_min, p.union_max);
}

}  // namespace

PathBounds estimate_path_bounds(const QuantityBounds& label_bounds, const TopBott& topbott,
                                const NeuronSplit& split, std::uint32_t t,
                                const OperatorSet& operators, Granularity granularity) {
    if (label_bounds.granularity != granularity)
        throw std::invalid_argument("granularity mismatch between label bounds and request");
    if (t > topbott.depth)
        throw std::invalid_argument("path budget " + std::to_string(t) +
                                    " exceeds stored Top depth " +
                                    std::to_string(topbott.depth));
    PathBounds paths;
    paths.t = t;

    if (label_bounds.degenerate) {
        // forced-zero labels: every path pins to 0/1 and the node dies
        paths.final.present = true;
        return paths;
    }

    // FINAL: the label as-is
    paths.final.i_min = label_bounds.iu_total + label_bounds.ic_min_total;
    paths.final.i_max = label_bounds.iu_total + label_bounds.ic_max_total;
    paths.final.union_min = split.n_total + label_bounds.eu_total + label_bounds.ec_min_total;
    paths.final.union_max = split.n_total + label_bounds.eu_total + label_bounds.ec_max_total;
    finish_interval(paths.final);

    if (t == 0) return paths;

    const bool sample = granularity == Granularity::Sample;
    const std::size_t s = sample ? label_bounds.ic_min.size() : 0;

    auto accumulate = [&](Operator op, PathInterval& out) {
        if (sample) {
            for (std::size_t xi = 0; xi < s; ++xi) {
                const std::uint32_t x = std::uint32_t(xi);
                const std::uint64_t icn = label_bounds.ic_min[x], icx = label_bounds.ic_max[x];
                const std::uint64_t ecn = label_bounds.ec_min[x], ecx = label_bounds.ec_max[x];
                const std::uint64_t iu = label_bounds.iu[x], eu = label_bounds.eu[x];
                const std::uint64_t nc = split.nc_per_sample[x], nu = split.nu_per_sample[x];
                const std::uint64_t sec = split.sec_per_sample[x], seu = split.seu_per_sample[x];
                const std::uint64_t n = split.n_per_sample[x];
                switch (op) {
                    case Operator::Or:
                        out.i_min += std::max(icn + iu, std::uint64_t(topbott.bott1_at(Quantity::IC, x)) +
                                                            topbott.bott1_at(Quantity::IU, x));
                        out.i_max += std::min(icx + topbott.top_at(Quantity::IC, t, x), nc) +
                                     std::min(iu + topbott.top_at(Quantity::IU, t, x), nu);
                        out.union_min += n + std::max(ecn + eu,
                                                      std::uint64_t(topbott.bott1_at(Quantity::EC, x)) +
                                                          topbott.bott1_at(Quantity::EU, x));
                        out.union_max += n + std::min(ecx + topbott.top_at(Quantity::EC, t, x), sec) +
                                         std::min(eu + topbott.top_at(Quantity::EU, t, x), seu);
                        break;
                    case Operator::And:
                        out.i_max += std::min(icx, std::uint64_t(topbott.top_at(Quantity::IC, 1, x)));
                        out.union_min += n;
                        out.union_max += n + std::min(ecx, std::uint64_t(topbott.top_at(Quantity::EC, 1, x)));
                        break;
                    case Operator::AndNot:
                        out.i_min += iu;
                        out.i_max += iu + std::min(icx, nc - topbott.bott1_at(Quantity::IC, x));
                        out.union_min += n + eu;
                        out.union_max += n + eu + std::min(ecx, sec - topbott.bott1_at(Quantity::EC, x));
                        break;
                }
            }
        } else {
            const std::uint64_t icn = label_bounds.ic_min_total, icx = label_bounds.ic_max_total;
            const std::uint64_t ecn = label_bounds.ec_min_total, ecx = label_bounds.ec_max_total;
            const std::uint64_t iu = label_bounds.iu_total, eu = label_bounds.eu_total;
            const std::uint64_t nc = split.nc_total, nu = split.nu_total;
            const std::uint64_t sec = split.sec_total, seu = split.seu_total;
            const std::uint64_t n = split.n_total;
            switch (op) {
                case Operator::Or:
                    out.i_min = std::max(icn + iu, topbott.bott1_agg_at(Quantity::IC) +
                                                       topbott.bott1_agg_at(Quantity::IU));
                    out.i_max = std::min(icx + topbott.top_agg_at(Quantity::IC, t), nc) +
                                std::min(iu + topbott.top_agg_at(Quantity::IU, t), nu);
                    out.union_min = n + std::max(ecn + eu, topbott.bott1_agg_at(Quantity::EC) +
                                                               topbott.bott1_agg_at(Quantity::EU));
                    out.union_max = n + std::min(ecx + topbott.top_agg_at(Quantity::EC, t), sec) +
                                    std::min(eu + topbott.top_agg_at(Quantity::EU, t), seu);
                    break;
                case Operator::And:
                    out.i_min = 0;
                    out.i_max = std::min(icx, topbott.top_agg_at(Quantity::IC, 1));
                    out.union_min = n;
                    out.union_max = n + std::min(ecx, topbott.top_agg_at(Quantity::EC, 1));
                    break;
                case Operator::AndNot:
                    out.i_min = iu;
                    out.i_max = iu + std::min(icx, nc - topbott.bott1_agg_at(Quantity::IC));
                    out.union_min = n + eu;
                    out.union_max = n + eu + std::min(ecx, sec - topbott.bott1_agg_at(Quantity::EC));
                    break;
            }
        }
        finish_interval(out);
    };

    bool any = false;
    for (Operator op : {Operator::Or, Operator::And, Operator::AndNot}) {
        if (!operators.contains(op)) continue;
        accumulate(op, paths.exclusive[std::size_t(op)]);
        any = true;
    }
    if (any) {
        PathInterval& c = paths.combined;
        c.i_min = ~std::uint64_t(0);
        c.union_min = ~std::uint64_t(0);
        for (const auto& e : paths.exclusive) {
            if (!e.present) continue;
            c.i_min = std::min(c.i_min, e.i_min);
            c.i_max = std::max(c.i_max, e.i_max);
            c.union_min = std::min(c.union_min, e.union_min);
            c.union_max = std::max(c.union_max, e.union_max);
        }
        finish_interval(c);
    }
    return paths;
}

bool SearchContext::left_disjoint_from(const Label& left, std::uint32_t k) const {
    if (!disjoint.disjoint(left.head, k)) return false;
    for (const auto& [op, c] : left.tail)
        if (!disjoint.disjoint(c, k)) return false;
    return true;
}

QuantityBounds SearchContext::fold_label_bounds(const Label& label, Granularity granularity,
                                                const ConceptQuantities* exact_prefix,
                                                std::size_t exact_prefix_len) const {
    QuantityBounds bounds;
    std::size_t start;
    if (exact_prefix && exact_prefix_len >= 1) {
        bounds = atom_bounds(*exact_prefix, granularity);
        bounds.degenerate = label_is_degenerate(label.prefix(exact_prefix_len), disjoint);
        start = exact_prefix_len;
    } else {
        bounds = atom_bounds(concept_quantities[label.head], granularity);
        start = 1;
    }
    for (std::size_t i = start; i < label.length(); ++i) {
        const auto& [op, k] = label.tail[i - 1];
        const bool dj = left_disjoint_from(label.prefix(i), k);
        bounds = estimate_label_bounds(bounds, concept_quantities[k], op, dj, split, granularity);
    }
    return bounds;
}

SearchContext build_search_context(const ConceptDataset& dataset, const NeuronMask& neuron,
                                   std::uint32_t max_length, const OperatorSet& operators) {
    dataset.validate(false);
    if (!neuron.mask.same_shape(dataset.concept_masks.front()))
        throw std::invalid_argument("neuron mask and dataset disagree on (S, d)");
    if (max_length < 1) throw std::invalid_argument("max length must be >= 1");

    SearchContext ctx;
    ctx.dataset = &dataset;
    ctx.neuron = &neuron;
    ctx.max_length = max_length;
    ctx.operators = operators;
    ctx.partition = compute_partition(dataset);
    ctx.split = compute_neuron_split(neuron, ctx.partition);
    ctx.disjoint = compute_disjoint_matrix(dataset);
    ctx.concept_quantities.reserve(dataset.concept_count());
    for (std::uint32_t k = 0; k < dataset.concept_count(); ++k)
        ctx.concept_quantities.push_back(
            compute_concept_quantities(k, neuron, ctx.partition, dataset));
    ctx.topbott = compute_top_bott(ctx.concept_quantities, std::max<std::uint32_t>(2, max_length));
    return ctx;
}

}  // namespace calign
