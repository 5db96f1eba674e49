#include "calign/baselines.hpp"

#include <algorithm>
#include <chrono>
#include <stdexcept>
#include <unordered_map>
#include <unordered_set>

namespace calign {

namespace {

using Clock = std::chrono::steady_clock;

std::uint64_t elapsed_ms(Clock::time_point start) {
    return std::uint64_t(
        std::chrono::duration_cast<std::chrono::milliseconds>(Clock::now() - start).count());
}

std::vector<Operator> allowed_ops(const OperatorSet& set) {
    std::vector<Operator> ops;
    for (Operator op : {Operator::Or, Operator::And, Operator::AndNot})
        if (set.contains(op)) ops.push_back(op);
    return ops;
}

Rational effective_iou(const BitMatrix& mask, const NeuronMask& neuron, bool degenerate) {
    if (degenerate) return Rational::zero();
    return Rational::make(popcount_and(neuron.mask, mask), popcount_or(neuron.mask, mask));
}

struct BeamEntry {
    Label label;          // canonical
    std::string key;      // canonical rendering
    Rational iou;
};

bool beam_order(const BeamEntry& a, const BeamEntry& b) {
    if (a.iou != b.iou) return b.iou < a.iou;
    return a.key < b.key;
}

struct Candidate {
    Label label;  // canonical
    std::string key;
    Rational estimate;
};

// Shared beam discipline; `informed` switches on the estimate-then-break
// candidate scoring of the heuristic variant.
Explanation beam_search_impl(const ConceptDataset& dataset, const NeuronMask& neuron,
                             const BeamConfig& cfg, bool informed,
                             std::vector<BeamLevelTrace>* trace) {
    cfg.validate();
    const auto start = Clock::now();
    SearchContext ctx = build_search_context(dataset, neuron, cfg.max_length, cfg.operators);
    const auto ops = allowed_ops(cfg.operators);
    SearchStats stats;

    std::vector<BeamEntry> beam;
    for (std::uint32_t k = 0; k < dataset.concept_count(); ++k) {
        BeamEntry e{Label(k), dataset.concept_names[k],
                    diou_from_quantities(ctx.concept_quantities[k], ctx.split.n_total)};
        beam.push_back(std::move(e));
    }
    std::sort(beam.begin(), beam.end(), beam_order);
    if (beam.size() > cfg.beam_size) beam.resize(cfg.beam_size);

    for (std::uint32_t level = 2; level <= cfg.max_length; ++level) {
        // expand every beam member, deduplicating by canonical form
        std::unordered_set<std::string> seen;
        std::vector<Candidate> candidates;
        for (const BeamEntry& member : beam) {
            ++stats.expanded;
            for (Operator op : ops)
                for (std::uint32_t k = 0; k < dataset.concept_count(); ++k) {
                    if (!is_expansion_allowed(member.label, op, k)) continue;
                    Label child = canonicalize(member.label.extended(op, k));
                    std::string key = render_label(child, dataset);
                    if (!seen.insert(key).second) continue;
                    candidates.push_back({std::move(child), std::move(key), Rational::zero()});
                }
        }

        BeamLevelTrace lt;
        lt.level = level;
        lt.pool_size = candidates.size();

        const Rational beam_min =
            beam.empty() ? Rational::zero() : std::min_element(beam.begin(), beam.end(),
                                                               [](const auto& a, const auto& b) {
                                                                   return a.iou < b.iou;
                                                               })
                                                  ->iou;

        std::vector<BeamEntry> pool = beam;
        std::unordered_set<std::string> pooled;
        for (const auto& e : pool) pooled.insert(e.key);

        auto visit = [&](const Candidate& c) {
            const bool degenerate = label_is_degenerate(c.label, ctx.disjoint);
            const Rational v = effective_iou(evaluate_label(c.label, dataset), neuron, degenerate);
            ++stats.visited;
            ++lt.visited;
            if (pooled.insert(c.key).second) pool.push_back({c.label, c.key, v});
        };

        if (!informed) {
            std::sort(candidates.begin(), candidates.end(),
                      [](const auto& a, const auto& b) { return a.key < b.key; });
            for (const auto& c : candidates) visit(c);
        } else {
            for (auto& c : candidates) {
                const QuantityBounds b = ctx.fold_label_bounds(c.label, Granularity::Sample);
                c.estimate = b.degenerate
                                 ? Rational::zero()
                                 : Rational::make(b.iu_total + b.ic_max_total,
                                                  ctx.split.n_total + b.eu_total + b.ec_min_total);
                ++stats.estimated;
                ++lt.estimated;
            }
            std::sort(candidates.begin(), candidates.end(), [](const auto& a, const auto& b) {
                if (a.estimate != b.estimate) return b.estimate < a.estimate;
                return a.key < b.key;
            });
            for (const auto& c : candidates) {
                if (c.estimate < beam_min) break;  // nothing below can reach the beam
                visit(c);
            }
        }

        std::sort(pool.begin(), pool.end(), beam_order);
        if (pool.size() > cfg.beam_size) pool.resize(cfg.beam_size);
        beam = std::move(pool);
        if (trace) trace->push_back(lt);
    }

    const BeamEntry& best = *std::min_element(beam.begin(), beam.end(), beam_order);
    Explanation out;
    out.label = best.label;
    out.iou = best.iou;
    out.stats = stats;
    out.stats.elapsed_ms = elapsed_ms(start);
    out.optimal = false;
    return out;
}

}  // namespace

void BeamConfig::validate() const {
    if (beam_size < 1) throw std::invalid_argument("beam size must be >= 1");
    if (max_length < 1) throw std::invalid_argument("max length must be >= 1");
    if (operators.count() == 0) throw std::invalid_argument("operator set cannot be empty");
}

Explanation beam_search_vanilla(const ConceptDataset& dataset, const NeuronMask& neuron,
                                const BeamConfig& cfg, std::vector<BeamLevelTrace>* trace) {
    return beam_search_impl(dataset, neuron, cfg, false, trace);
}

Explanation beam_search_heuristic(const ConceptDataset& dataset, const NeuronMask& neuron,
                                  const BeamConfig& cfg, std::vector<BeamLevelTrace>* trace) {
    return beam_search_impl(dataset, neuron, cfg, true, trace);
}

std::uint64_t state_space_size(std::uint32_t concepts, std::uint32_t max_length, int n_ops) {
    const unsigned __int128 limit = ~std::uint64_t(0);
    unsigned __int128 total = 0;
    for (std::uint32_t len = 1; len <= max_length; ++len) {
        unsigned __int128 term = 1;
        for (std::uint32_t j = 0; j < len - 1; ++j) term *= std::uint64_t(n_ops);
        for (std::uint32_t j = 0; j < len; ++j) {
            if (j >= concepts) { term = 0; break; }
            term *= (concepts - j);
            if (term > limit) return ~std::uint64_t(0);
        }
        total += term;
        if (total > limit) return ~std::uint64_t(0);
    }
    return std::uint64_t(total);
}

namespace {

struct BruteState {
    const ConceptDataset& dataset;
    const NeuronMask& neuron;
    std::uint32_t max_length;
    const std::vector<Operator>& ops;
    std::uint64_t enumerated = 0;
    std::uint64_t extended = 0;
    Label best_label{0};
    std::string best_key;
    Rational best_iou = Rational::zero();
    bool have_best = false;
    std::unordered_map<std::string, Rational>* ranking = nullptr;

    void consider(const Label& label, const BitMatrix& mask) {
        ++enumerated;
        const Rational v =
            Rational::make(popcount_and(neuron.mask, mask), popcount_or(neuron.mask, mask));
        std::string key = render_label(canonicalize(label), dataset);
        if (ranking) ranking->emplace(key, v);  // canonical twins share the IoU
        if (!have_best || best_iou < v || (v == best_iou && key < best_key)) {
            have_best = true;
            best_iou = v;
            best_label = label;
            best_key = std::move(key);
        }
    }

    void extend(const Label& label, const BitMatrix& mask) {
        if (label.length() >= max_length) return;
        ++extended;
        for (Operator op : ops)
            for (std::uint32_t k = 0; k < dataset.concept_count(); ++k) {
                if (label.contains(k)) continue;
                BitMatrix next = mask;
                switch (op) {
                    case Operator::Or: next.or_with(dataset.concept_masks[k]); break;
                    case Operator::And: next.and_with(dataset.concept_masks[k]); break;
                    case Operator::AndNot: next.andnot_with(dataset.concept_masks[k]); break;
                }
                const Label child = label.extended(op, k);
                consider(child, next);
                extend(child, next);
            }
    }
};

}  // namespace

BruteForceResult brute_force(const ConceptDataset& dataset, const NeuronMask& neuron,
                             std::uint32_t max_length, const OperatorSet& operators,
                             std::uint64_t cap, std::size_t top_m) {
    dataset.validate(false);
    if (!neuron.mask.same_shape(dataset.concept_masks.front()))
        throw std::invalid_argument("neuron mask and dataset disagree on (S, d)");
    const auto ops = allowed_ops(operators);
    const std::uint64_t space =
        state_space_size(dataset.concept_count(), max_length, int(ops.size()));
    if (space > cap)
        throw std::invalid_argument("state space of " + std::to_string(space) +
                                    " labels exceeds the cap of " + std::to_string(cap));

    const auto start = Clock::now();
    BruteState state{dataset, neuron, max_length, ops, 0, 0, Label(0), {}};
    std::unordered_map<std::string, Rational> ranking;
    if (top_m > 0) state.ranking = &ranking;

    for (std::uint32_t k = 0; k < dataset.concept_count(); ++k) {
        const Label atom(k);
        state.consider(atom, dataset.concept_masks[k]);
        state.extend(atom, dataset.concept_masks[k]);
    }

    BruteForceResult result;
    result.enumerated = state.enumerated;
    result.best.label = state.best_label;
    result.best.iou = state.best_iou;
    result.best.optimal = true;
    result.best.stats.visited = state.enumerated;
    result.best.stats.expanded = state.extended;
    result.best.stats.elapsed_ms = elapsed_ms(start);
    if (top_m > 0) {
        std::vector<std::pair<std::string, Rational>> sorted(ranking.begin(), ranking.end());
        std::sort(sorted.begin(), sorted.end(), [](const auto& a, const auto& b) {
            if (a.second != b.second) return b.second < a.second;
            return a.first < b.first;
        });
        if (sorted.size() > top_m) sorted.resize(top_m);
        for (auto& [key, v] : sorted)
            result.ranking.emplace_back(parse_label(key, dataset), v);
    }
    return result;
}

}  // namespace calign
