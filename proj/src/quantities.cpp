#include "calign/quantities.hpp"

#include <algorithm>
#include <stdexcept>

namespace calign {

Rational diou_from_quantities(const ConceptQuantities& q, std::uint64_t n_total) {
    return Rational::make(q.iu_total + q.ic_total, n_total + q.eu_total + q.ec_total);
}

Partition compute_partition(const ConceptDataset& dataset) {
    const std::uint32_t s = dataset.samples();
    const std::uint32_t d = dataset.features();
    Partition p{BitMatrix(s, d), BitMatrix(s, d)};
    // count == 1 -> unique, count >= 2 -> common
    for (std::uint32_t x = 0; x < s; ++x)
        for (std::uint32_t j = 0; j < d; ++j) {
            std::uint32_t count = 0;
            for (const auto& m : dataset.concept_masks) {
                if (m.get(x, j) && ++count == 2) break;
            }
            if (count == 1) p.unique.set(x, j, true);
            else if (count >= 2) p.common.set(x, j, true);
        }
    return p;
}

NeuronSplit compute_neuron_split(const NeuronMask& neuron, const Partition& partition) {
    if (!neuron.mask.same_shape(partition.unique))
        throw std::invalid_argument("neuron mask and dataset disagree on (S, d)");
    const std::uint32_t s = neuron.mask.samples();
    NeuronSplit split;
    split.nu_per_sample.resize(s);
    split.nc_per_sample.resize(s);
    split.seu_per_sample.resize(s);
    split.sec_per_sample.resize(s);
    split.n_per_sample.resize(s);
    for (std::uint32_t x = 0; x < s; ++x) {
        const std::uint32_t nu = row_popcount_and(neuron.mask, partition.unique, x);
        const std::uint32_t nc = row_popcount_and(neuron.mask, partition.common, x);
        const std::uint32_t u = partition.unique.row_popcount(x);
        const std::uint32_t c = partition.common.row_popcount(x);
        split.nu_per_sample[x] = nu;
        split.nc_per_sample[x] = nc;
        split.seu_per_sample[x] = u - nu;
        split.sec_per_sample[x] = c - nc;
        split.n_per_sample[x] = neuron.mask.row_popcount(x);
        split.nu_total += nu;
        split.nc_total += nc;
        split.seu_total += u - nu;
        split.sec_total += c - nc;
        split.n_total += split.n_per_sample[x];
    }
    return split;
}

ConceptQuantities compute_mask_quantities(const BitMatrix& mask, const NeuronMask& neuron,
                                          const Partition& partition) {
    const std::uint32_t s = mask.samples();
    ConceptQuantities q;
    q.iu.resize(s);
    q.ic.resize(s);
    q.eu.resize(s);
    q.ec.resize(s);
    for (std::uint32_t x = 0; x < s; ++x) {
        const std::uint32_t mu = row_popcount_and(mask, partition.unique, x);
        const std::uint32_t mc = row_popcount_and(mask, partition.common, x);
        const std::uint32_t iu = row_popcount_and3(mask, partition.unique, neuron.mask, x);
        const std::uint32_t ic = row_popcount_and3(mask, partition.common, neuron.mask, x);
        q.iu[x] = iu;
        q.ic[x] = ic;
        q.eu[x] = mu - iu;
        q.ec[x] = mc - ic;
        q.iu_total += iu;
        q.ic_total += ic;
        q.eu_total += mu - iu;
        q.ec_total += mc - ic;
    }
    return q;
}

ConceptQuantities compute_concept_quantities(std::uint32_t concept_id, const NeuronMask& neuron,
                                             const Partition& partition,
                                             const ConceptDataset& dataset) {
    if (concept_id >= dataset.concept_count())
        throw std::invalid_argument("concept id out of range");
    return compute_mask_quantities(dataset.concept_masks[concept_id], neuron, partition);
}

DisjointMatrix compute_disjoint_matrix(const ConceptDataset& dataset) {
    const std::uint32_t k = dataset.concept_count();
    DisjointMatrix d;
    d.concepts = k;
    d.cells.assign(std::size_t(k) * k, 0);
    for (std::uint32_t a = 0; a < k; ++a)
        for (std::uint32_t b = a; b < k; ++b) {
            const bool disjoint = !dataset.concept_masks[a].intersects(dataset.concept_masks[b]);
            d.cells[std::size_t(a) * k + b] = disjoint;
            d.cells[std::size_t(b) * k + a] = disjoint;
        }
    return d;
}

TopBott compute_top_bott(const std::vector<ConceptQuantities>& all_concept_quantities,
                         std::uint32_t max_length) {
    if (max_length < 2) throw std::invalid_argument("max_length must be >= 2 for Top/Bott");
    if (all_concept_quantities.empty())
        throw std::invalid_argument("need at least one concept for Top/Bott");
    const std::uint32_t s = std::uint32_t(all_concept_quantities.front().iu.size());
    const std::uint32_t depth = max_length - 1;

    TopBott tb;
    tb.depth = depth;
    tb.samples = s;
    std::vector<std::uint32_t> values(all_concept_quantities.size());
    for (Quantity q : kQuantities) {
        const auto qi = std::size_t(q);
        tb.top[qi].assign(std::size_t(depth) * s, 0);
        tb.bott1[qi].assign(s, 0);
        tb.top_agg[qi].assign(depth, 0);
        bool bott_zero = true;
        for (std::uint32_t x = 0; x < s; ++x) {
            for (std::size_t k = 0; k < all_concept_quantities.size(); ++k)
                values[k] = all_concept_quantities[k].per_sample(q)[x];
            std::sort(values.begin(), values.end(), std::greater<std::uint32_t>());
            std::uint32_t cum = 0;
            for (std::uint32_t t = 1; t <= depth; ++t) {
                if (t <= values.size()) cum += values[t - 1];  // saturates past K
                tb.top[qi][std::size_t(t - 1) * s + x] = cum;
                tb.top_agg[qi][t - 1] += cum;
            }
            const std::uint32_t b = values.back();
            tb.bott1[qi][x] = b;
            tb.bott1_agg[qi] += b;
            if (b != 0) bott_zero = false;
        }
        tb.bott1_all_zero[qi] = bott_zero;
    }
    return tb;
}

}  // namespace calign
