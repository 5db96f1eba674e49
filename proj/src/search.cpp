#include "calign/search.hpp"

#include <algorithm>
#include <chrono>
#include <stdexcept>

namespace calign {

namespace {

using Clock = std::chrono::steady_clock;

bool node_less(const SearchNode& a, const SearchNode& b) {
    if (a.priority != b.priority) return a.priority < b.priority;
    return a.insertion_seq > b.insertion_seq;  // FIFO among ties
}

QuantityBounds aggregated_view(const QuantityBounds& b) {
    QuantityBounds out;
    out.granularity = Granularity::Aggregated;
    out.iu_total = b.iu_total;
    out.eu_total = b.eu_total;
    out.ic_min_total = b.ic_min_total;
    out.ic_max_total = b.ic_max_total;
    out.ec_min_total = b.ec_min_total;
    out.ec_max_total = b.ec_max_total;
    out.common_exact = b.common_exact;
    out.degenerate = b.degenerate;
    return out;
}

}  // namespace

const ConceptQuantities* PrefixCache::find(const std::string& key) {
    auto it = map_.find(key);
    if (it == map_.end()) return nullptr;
    order_.splice(order_.begin(), order_, it->second);
    return &it->second->second;
}

void PrefixCache::put(const std::string& key, ConceptQuantities value) {
    auto it = map_.find(key);
    if (it != map_.end()) {
        it->second->second = std::move(value);
        order_.splice(order_.begin(), order_, it->second);
        return;
    }
    order_.emplace_front(key, std::move(value));
    map_[key] = order_.begin();
    while (map_.size() > capacity_) {
        map_.erase(order_.back().first);
        order_.pop_back();
    }
}

std::size_t SearchState::live_frontier_size() const {
    std::size_t n = 0;
    for (const auto& node : frontier)
        if (node.priority > min_iou) ++n;
    return n;
}

void reduce_frontier(SearchState& state) {
    std::erase_if(state.frontier,
                  [&](const SearchNode& n) { return !(n.priority > state.min_iou); });
    std::make_heap(state.frontier.begin(), state.frontier.end(), node_less);
}

namespace {

// Driver holding the per-run state so the event handling (eager witness
// evaluation on min_iou raises) can call back into exact evaluation.
struct Search {
    const SearchContext& ctx;
    const SearchOptions& options;
    SearchState& state;
    Clock::time_point start_time;
    std::uint64_t pops = 0;
    bool budget_exhausted = false;

    std::uint32_t concept_count() const { return ctx.dataset->concept_count(); }

    std::string key_of(const Label& canonical_label) const {
        return render_label(canonical_label, *ctx.dataset);
    }

    void update_best(const Label& label, const Rational& value) {
        if (!state.best || state.best->second < value) state.best = {label, value};
    }

    // Exact evaluation of a (non-degenerate, canonical) label: fills the
    // prefix cache, backpropagates and updates best / min_iou.
    Rational visit(const Label& label) {
        auto quantities = exact_label_quantities(label, *ctx.dataset, *ctx.neuron, ctx.partition);
        ++state.stats.visited;
        const Rational value = diou_from_quantities(quantities.back(), ctx.split.n_total);
        update_best(label, value);
        if (state.min_iou < value) {
            state.min_iou = value;
            maybe_reduce();
        }
        if (options.backprop) {
            std::vector<std::string> keys;
            keys.reserve(quantities.size());
            for (std::size_t i = 1; i <= quantities.size(); ++i) {
                Label prefix = canonicalize(label.prefix(i));
                std::string key = key_of(prefix);
                state.prefix_cache.put(key, std::move(quantities[i - 1]));
                keys.push_back(std::move(key));
            }
            state.backprop_updates += backpropagate_prefix(state, ctx, keys);
        }
        return value;
    }

    // Single-step extension witnessing a path-minimum event: the bound
    // holds for every one-step extension under that operator, so any
    // concrete choice realises at least the bound.
    void witness_path_min(const Label& label, Operator op) {
        std::optional<std::uint32_t> pick;
        for (std::uint32_t k = 0; k < concept_count(); ++k) {
            if (label.contains(k)) continue;
            if (op == Operator::AndNot && ctx.left_disjoint_from(label, k)) {
                if (!pick) pick = k;  // degenerate fallback, keep looking
                continue;
            }
            visit(canonicalize(label.extended(op, k)));
            return;
        }
        // only degenerate AND NOT extensions exist; they all equal the
        // label itself, so evaluate that instead
        if (pick) visit(label);
    }

    bool has_unused_concept(const Label& label) const {
        return label.length() < concept_count();
    }

    // Processes the estimate of one label: eager best updates for
    // collapsed or promising FINAL intervals, witnessed min_iou raises,
    // then node insertion. Keeps best >= min_iou at all times so the
    // strict pruning guard never discards an unwitnessed optimum.
    void handle_estimates(const Label& label, const QuantityBounds& bounds,
                          const PathBounds& paths, Tier tier) {
        if (bounds.degenerate) return;  // forced-zero, never enters the frontier

        Rational raise = Rational::zero();
        const PathInterval& fin = paths.final;
        if (fin.diou_min == fin.diou_max) {
            update_best(label, fin.diou_min);  // bounds sandwich the exact IoU
        } else if (state.best && state.best->second < fin.diou_min) {
            visit(label);
        } else if (!state.best) {
            visit(label);
        }
        raise = std::max(raise, fin.diou_min);

        if (paths.t > 0 && has_unused_concept(label)) {
            for (Operator op : {Operator::Or, Operator::And, Operator::AndNot}) {
                const PathInterval& e = paths.exclusive[std::size_t(op)];
                if (!e.present) continue;
                if (state.best->second < e.diou_min) witness_path_min(label, op);
                raise = std::max(raise, e.diou_min);
            }
        }

        if (state.min_iou < raise) {
            state.min_iou = raise;
            maybe_reduce();
        }

        // a collapsed FINAL interval already pinned the exact value above
        if (fin.diou_min != fin.diou_max)
            insert_node(label, PathKind::Final, tier, bounds, fin);
        if (paths.t > 0 && has_unused_concept(label) && paths.combined.present)
            insert_node(label, PathKind::Combined, tier, bounds, paths.combined);
    }

    void insert_node(const Label& label, PathKind kind, Tier tier, const QuantityBounds& bounds,
                     const PathInterval& interval) {
        if (!(interval.diou_max > state.min_iou)) return;
        SearchNode node;
        node.label = label;
        node.kind = kind;
        node.tier = tier;
        node.bounds = bounds;
        node.priority = interval.diou_max;
        node.diou_min = interval.diou_min;
        node.insertion_seq = state.next_seq++;
        state.frontier.push_back(std::move(node));
        std::push_heap(state.frontier.begin(), state.frontier.end(), node_less);
    }

    // Lazy reduction: physically compact only once half the heap is stale.
    void maybe_reduce() {
        std::size_t stale = 0;
        if (state.frontier.size() < 64) {
            reduce_frontier(state);
            return;
        }
        for (const auto& n : state.frontier)
            if (!(n.priority > state.min_iou) && ++stale * 2 > state.frontier.size()) {
                reduce_frontier(state);
                return;
            }
    }

    std::optional<SearchNode> pop() {
        while (!state.frontier.empty()) {
            std::pop_heap(state.frontier.begin(), state.frontier.end(), node_less);
            SearchNode node = std::move(state.frontier.back());
            state.frontier.pop_back();
            if (node.priority > state.min_iou) return node;  // stale entries are dropped
        }
        return std::nullopt;
    }

    QuantityBounds fold_with_cache(const Label& label, Granularity granularity) {
        for (std::size_t len = label.length(); len >= 1; --len) {
            const std::string key = key_of(canonicalize(label.prefix(len)));
            if (const ConceptQuantities* exact = state.prefix_cache.find(key))
                return ctx.fold_label_bounds(label, granularity, exact, len);
        }
        return ctx.fold_label_bounds(label, granularity);
    }

    std::uint32_t budget_t(const Label& label) const {
        return ctx.max_length - std::uint32_t(label.length());
    }

    // Sample-tier refinement of an aggregated node (Algorithm step 4a).
    void refine(SearchNode node) {
        QuantityBounds bounds = fold_with_cache(node.label, Granularity::Sample);
        PathBounds paths = estimate_path_bounds(bounds, ctx.topbott, ctx.split,
                                                budget_t(node.label), ctx.operators,
                                                Granularity::Sample);
        ++state.stats.estimated;
        const Tier tier = bounds.common_exact ? Tier::Exact : Tier::Sample;
        handle_estimates_refined(node, bounds, paths, tier);
    }

    // Like handle_estimates but only reinserts the node's own path kind.
    void handle_estimates_refined(const SearchNode& node, const QuantityBounds& bounds,
                                  const PathBounds& paths, Tier tier) {
        if (bounds.degenerate) return;
        const PathInterval& own = paths.of(node.kind);
        Rational raise = own.diou_min;
        bool reinsert = true;
        if (node.kind == PathKind::Final) {
            if (own.diou_min == own.diou_max) {
                update_best(node.label, own.diou_min);
                reinsert = false;
            } else if (state.best->second < own.diou_min) {
                visit(node.label);
            }
        } else if (paths.t > 0 && has_unused_concept(node.label)) {
            for (Operator op : {Operator::Or, Operator::And, Operator::AndNot}) {
                const PathInterval& e = paths.exclusive[std::size_t(op)];
                if (!e.present) continue;
                if (state.best->second < e.diou_min) witness_path_min(node.label, op);
                raise = std::max(raise, e.diou_min);
            }
        }
        if (state.min_iou < raise) {
            state.min_iou = raise;
            maybe_reduce();
        }
        if (reinsert) insert_node(node.label, node.kind, tier, bounds, own);
    }

    // Semantically equal left-deep permutations reachable by adjacent
    // swaps: AND <-> AND NOT always commute, OR <-> AND NOT commute when
    // the two concepts are disjoint, same-operator order is normalised by
    // canonicalize. Degenerate variants are skipped (their forced-zero
    // score is a convention, not a bound).
    std::vector<Label> equivalence_variants(const Label& label) const {
        std::vector<Label> out;
        std::vector<std::string> seen_keys{key_of(label)};
        std::vector<Label> queue{label};
        auto push = [&](Label l) {
            l = canonicalize(l);
            std::string key = key_of(l);
            for (const auto& k : seen_keys)
                if (k == key) return;
            seen_keys.push_back(std::move(key));
            queue.push_back(l);
            out.push_back(std::move(l));
        };
        for (std::size_t qi = 0; qi < queue.size() && out.size() < 24; ++qi) {
            const Label cur = queue[qi];
            for (std::size_t i = 0; i + 1 < cur.tail.size(); ++i) {
                const Operator a = cur.tail[i].first;
                const Operator b = cur.tail[i + 1].first;
                bool ok = false;
                if ((a == Operator::And && b == Operator::AndNot) ||
                    (a == Operator::AndNot && b == Operator::And)) {
                    ok = true;
                } else if ((a == Operator::Or && b == Operator::AndNot) ||
                           (a == Operator::AndNot && b == Operator::Or)) {
                    ok = ctx.disjoint.disjoint(cur.tail[i].second, cur.tail[i + 1].second);
                }
                if (!ok) continue;
                Label swapped = cur;
                std::swap(swapped.tail[i], swapped.tail[i + 1]);
                push(std::move(swapped));
            }
        }
        return out;
    }

    // Apply-logic-equivalences step: keep the node's label but adopt the
    // variant bounds with the smallest dIoU_max (all variants evaluate to
    // the same mask, so their bounds are valid for this node too).
    bool equivalence_pass(SearchNode& node) {
        if (node.label.tail.size() < 2) return false;
        bool improved = false;
        for (const Label& variant : equivalence_variants(node.label)) {
            QuantityBounds bounds = fold_with_cache(variant, Granularity::Sample);
            if (bounds.degenerate) continue;
            PathBounds paths = estimate_path_bounds(bounds, ctx.topbott, ctx.split,
                                                    budget_t(variant), ctx.operators,
                                                    Granularity::Sample);
            ++state.stats.estimated;
            const PathInterval& own = paths.of(node.kind);
            if (own.diou_max < node.priority) {
                node.priority = own.diou_max;
                node.diou_min = own.diou_min;
                node.bounds = std::move(bounds);
                improved = true;
            }
        }
        return improved;
    }

    void expand(const SearchNode& node) {
        ++state.stats.expanded;
        const QuantityBounds left = aggregated_view(node.bounds);
        for (Operator op : {Operator::Or, Operator::And, Operator::AndNot}) {
            if (!ctx.operators.contains(op)) continue;
            for (std::uint32_t k = 0; k < concept_count(); ++k) {
                if (!is_expansion_allowed(node.label, op, k)) continue;
                const bool disjoint = ctx.left_disjoint_from(node.label, k);
                QuantityBounds bounds = estimate_label_bounds(
                    left, ctx.concept_quantities[k], op, disjoint, ctx.split,
                    Granularity::Aggregated);
                const Label child = canonicalize(node.label.extended(op, k));
                PathBounds paths = estimate_path_bounds(bounds, ctx.topbott, ctx.split,
                                                        budget_t(child), ctx.operators,
                                                        Granularity::Aggregated);
                ++state.stats.estimated;
                handle_estimates(child, bounds, paths, Tier::Aggregated);
            }
        }
    }

    bool over_budget() const {
        if (options.limits.max_nodes && pops >= *options.limits.max_nodes) return true;
        if (options.limits.max_seconds) {
            const double secs =
                std::chrono::duration<double>(Clock::now() - start_time).count();
            if (secs >= *options.limits.max_seconds) return true;
        }
        return false;
    }

    void run() {
        start_time = Clock::now();

        // seed: exact quantities per concept, aggregated path estimates
        for (std::uint32_t k = 0; k < concept_count(); ++k) {
            QuantityBounds bounds = atom_bounds(ctx.concept_quantities[k],
                                                Granularity::Aggregated);
            PathBounds paths = estimate_path_bounds(bounds, ctx.topbott, ctx.split,
                                                    budget_t(Label(k)), ctx.operators,
                                                    Granularity::Aggregated);
            ++state.stats.estimated;
            handle_estimates(Label(k), bounds, paths, Tier::Aggregated);
        }
        reduce_frontier(state);

        while (true) {
            if (over_budget()) {
                budget_exhausted = state.live_frontier_size() > 0;
                break;
            }
            auto popped = pop();
            if (!popped) break;
            SearchNode node = std::move(*popped);
            ++pops;

            if (node.tier == Tier::Aggregated) {
                refine(std::move(node));
                continue;
            }

            if (equivalence_pass(node)) {
                if (node.priority > state.min_iou) {
                    node.insertion_seq = state.next_seq++;
                    state.frontier.push_back(std::move(node));
                    std::push_heap(state.frontier.begin(), state.frontier.end(), node_less);
                }
                continue;
            }

            // memory buffer: skip duplicates popped inside one dIoU_max run
            const std::string memory_key =
                key_of(node.label) + "|" + path_kind_name(node.kind);
            if (node.priority == state.recent_iou) {
                if (state.memory.contains(memory_key)) continue;
                state.memory.insert(memory_key);
            } else {
                state.memory.clear();
                state.recent_iou = node.priority;
            }

            if (node.kind == PathKind::Final) visit(node.label);
            else expand(node);
        }
    }
};

}  // namespace

std::uint64_t backpropagate_prefix(SearchState& state, const SearchContext& ctx,
                                   const std::vector<std::string>& new_prefix_keys) {
    if (new_prefix_keys.empty() || state.frontier.empty()) return 0;
    std::unordered_set<std::string> fresh(new_prefix_keys.begin(), new_prefix_keys.end());
    std::uint64_t updated = 0;
    bool changed = false;
    for (SearchNode& node : state.frontier) {
        if (!(node.priority > state.min_iou)) continue;
        // longest freshly cached prefix wins
        std::size_t match_len = 0;
        const ConceptQuantities* exact = nullptr;
        for (std::size_t len = node.label.length(); len >= 1; --len) {
            const std::string key =
                render_label(canonicalize(node.label.prefix(len)), *ctx.dataset);
            if (!fresh.contains(key)) continue;
            if (const ConceptQuantities* q = state.prefix_cache.find(key)) {
                match_len = len;
                exact = q;
                break;
            }
        }
        if (!exact) continue;
        const Granularity gran = node.tier == Tier::Aggregated ? Granularity::Aggregated
                                                               : Granularity::Sample;
        QuantityBounds bounds = ctx.fold_label_bounds(node.label, gran, exact, match_len);
        if (bounds.degenerate) continue;
        PathBounds paths = estimate_path_bounds(
            bounds, ctx.topbott, ctx.split,
            ctx.max_length - std::uint32_t(node.label.length()), ctx.operators, gran);
        const PathInterval& own = paths.of(node.kind);
        ++updated;
        if (own.diou_max < node.priority) {  // estimates only ever tighten
            const bool exact_now = bounds.common_exact;
            node.priority = own.diou_max;
            node.diou_min = own.diou_min;
            node.bounds = std::move(bounds);
            if (exact_now && node.tier == Tier::Sample) node.tier = Tier::Exact;
            changed = true;
        }
    }
    if (changed) std::make_heap(state.frontier.begin(), state.frontier.end(), node_less);
    return updated;
}

Explanation optimal_search(const ConceptDataset& dataset, const NeuronMask& neuron,
                           const SearchOptions& options) {
    const auto start = Clock::now();
    SearchContext ctx =
        build_search_context(dataset, neuron, options.max_length, options.operators);

    Explanation out;
    if (neuron.mask.all_zero()) {
        out.label = Label(0);
        out.iou = Rational::zero();
        out.optimal = true;
        out.warning = "neuron mask is all-zero; every label has IoU 0";
        out.stats.elapsed_ms = std::uint64_t(
            std::chrono::duration_cast<std::chrono::milliseconds>(Clock::now() - start).count());
        return out;
    }

    SearchState state;
    state.prefix_cache = PrefixCache(options.prefix_cache_capacity);
    Search search{ctx, options, state, {}};
    search.run();

    // every min_iou raise is witnessed before it is applied
    if (!state.best || state.best->second < state.min_iou)
        throw std::logic_error("search invariant violated: best < min_iou at termination");

    out.label = state.best->first;
    out.iou = state.best->second;
    out.stats = state.stats;
    out.stats.backprop_updates = state.backprop_updates;
    out.optimal = !search.budget_exhausted;
    if (search.budget_exhausted) out.warning = "search budget exhausted; result may be suboptimal";
    out.stats.elapsed_ms = std::uint64_t(
        std::chrono::duration_cast<std::chrono::milliseconds>(Clock::now() - start).count());
    return out;
}

}  // namespace calign
