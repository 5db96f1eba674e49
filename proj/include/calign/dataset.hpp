#pragma once

#include <cstdint>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include "calign/bitmatrix.hpp"

namespace calign {

// Malformed archive or activation file. offset is the byte position the
// problem was detected at.
class FormatError : public std::runtime_error {
public:
    FormatError(const std::string& msg, std::uint64_t offset)
        : std::runtime_error(msg + " (at byte offset " + std::to_string(offset) + ")"),
          offset_(offset) {}
    std::uint64_t offset() const { return offset_; }

private:
    std::uint64_t offset_;
};

struct ConceptDataset {
    std::vector<std::string> concept_names;
    std::vector<BitMatrix> concept_masks;

    std::uint32_t concept_count() const { return std::uint32_t(concept_names.size()); }
    std::uint32_t samples() const { return concept_masks.front().samples(); }
    std::uint32_t features() const { return concept_masks.front().features(); }

    std::optional<std::uint32_t> index_of(const std::string& name) const;
    void validate(bool reject_empty_concepts) const;
};

struct NeuronMask {
    BitMatrix mask;
};

struct SynthConfig {
    std::uint64_t seed = 0;
    std::uint32_t concepts = 1;
    std::uint32_t samples = 1;
    std::uint32_t features = 1;
    double annotation_density = 0.5;
    double overlap_density = 0.0;
    double neuron_fire_rate = 0.25;

    void validate() const;
};

struct LoadOptions {
    // Empty concept masks make every label containing them degenerate, so
    // the default is to refuse them. Round-trip tooling can opt out.
    bool reject_empty_concepts = true;
};

// Archive formats (little endian throughout):
//   "CMA1": u32 K, u32 S, u32 d; K names (u16 length + UTF-8);
//           K mask payloads of S*ceil(d/8) bytes, in name order.
//   "NAM1": u32 S, u32 d; one payload.
//   "NAF1": u32 S, u32 d; S*d float32 activations, sample-major.
ConceptDataset load_concept_archive(const std::string& path, const LoadOptions& opts = {});
void write_concept_archive(const ConceptDataset& dataset, const std::string& path);

NeuronMask load_neuron_mask(const std::string& path);
void write_neuron_mask(const NeuronMask& neuron, const std::string& path);

std::vector<float> load_activations(const std::string& path, std::uint32_t& samples,
                                    std::uint32_t& features);
void write_activations(const std::vector<float>& values, std::uint32_t samples,
                       std::uint32_t features, const std::string& path);

// In-memory (de)serialisation used by both the file API and the bindings.
std::vector<std::uint8_t> encode_concept_archive(const ConceptDataset& dataset);
ConceptDataset decode_concept_archive(std::span<const std::uint8_t> bytes,
                                      const LoadOptions& opts = {});
std::vector<std::uint8_t> encode_neuron_mask(const NeuronMask& neuron);
NeuronMask decode_neuron_mask(std::span<const std::uint8_t> bytes);

// Bit set iff activation >= the (1-quantile)-quantile of all S*d values
// pooled, i.e. the top `quantile` fraction is kept (ties included). An
// all-equal input yields an all-ones mask. upper_cutoff additionally
// requires activation <= cutoff.
NeuronMask binarize_activations(const std::vector<float>& raw, std::uint32_t samples,
                                std::uint32_t features, double quantile,
                                std::optional<float> upper_cutoff = std::nullopt);

// Deterministic for a fixed seed. overlap_density=0 produces pairwise
// disjoint concepts; every concept ends up with at least one annotation.
std::pair<ConceptDataset, NeuronMask> generate_synthetic(const SynthConfig& config);

}  // namespace calign
