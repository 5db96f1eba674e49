#include "calign/dataset.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>
#include <fstream>
#include <random>
#include <unordered_set>

namespace calign {

namespace {

void put_u16(std::vector<std::uint8_t>& out, std::uint16_t v) {
    out.push_back(std::uint8_t(v & 0xFF));
    out.push_back(std::uint8_t(v >> 8));
}

void put_u32(std::vector<std::uint8_t>& out, std::uint32_t v) {
    for (int i = 0; i < 4; ++i) out.push_back(std::uint8_t((v >> (8 * i)) & 0xFF));
}

struct Reader {
    std::span<const std::uint8_t> bytes;
    std::uint64_t pos = 0;

    void need(std::uint64_t n, const char* what) const {
        if (pos + n > bytes.size())
            throw FormatError(std::string("truncated ") + what + ": expected " +
                                  std::to_string(pos + n) + " bytes, file has " +
                                  std::to_string(bytes.size()),
                              pos);
    }
    std::uint16_t u16(const char* what) {
        need(2, what);
        std::uint16_t v = std::uint16_t(bytes[pos] | (std::uint16_t(bytes[pos + 1]) << 8));
        pos += 2;
        return v;
    }
    std::uint32_t u32(const char* what) {
        need(4, what);
        std::uint32_t v = 0;
        for (int i = 0; i < 4; ++i) v |= std::uint32_t(bytes[pos + i]) << (8 * i);
        pos += 4;
        return v;
    }
    std::span<const std::uint8_t> raw(std::uint64_t n, const char* what) {
        need(n, what);
        auto s = bytes.subspan(pos, n);
        pos += n;
        return s;
    }
    void expect_magic(const char* magic) {
        need(4, "magic");
        if (std::memcmp(bytes.data() + pos, magic, 4) != 0)
            throw FormatError(std::string("bad magic, expected \"") + magic + "\"", pos);
        pos += 4;
    }
    void expect_end(const char* what) const {
        if (pos != bytes.size())
            throw FormatError(std::string("trailing bytes after ") + what, pos);
    }
};

std::vector<std::uint8_t> read_file(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw std::runtime_error("cannot open file: " + path);
    std::vector<std::uint8_t> bytes((std::istreambuf_iterator<char>(in)),
                                    std::istreambuf_iterator<char>());
    return bytes;
}

void write_file(const std::string& path, std::span<const std::uint8_t> bytes) {
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw std::runtime_error("cannot open file for writing: " + path);
    out.write(reinterpret_cast<const char*>(bytes.data()), std::streamsize(bytes.size()));
    if (!out) throw std::runtime_error("write failed: " + path);
}

}  // namespace

std::optional<std::uint32_t> ConceptDataset::index_of(const std::string& name) const {
    for (std::uint32_t k = 0; k < concept_names.size(); ++k)
        if (concept_names[k] == name) return k;
    return std::nullopt;
}

void ConceptDataset::validate(bool reject_empty_concepts) const {
    if (concept_masks.empty() || concept_names.size() != concept_masks.size())
        throw std::invalid_argument("dataset needs at least one named concept");
    std::unordered_set<std::string> seen;
    for (const auto& n : concept_names)
        if (!seen.insert(n).second) throw std::invalid_argument("duplicate concept name: " + n);
    for (const auto& m : concept_masks)
        if (!m.same_shape(concept_masks.front()))
            throw std::invalid_argument("concept masks disagree on (S, d)");
    if (reject_empty_concepts) {
        for (std::uint32_t k = 0; k < concept_masks.size(); ++k)
            if (concept_masks[k].all_zero())
                throw std::invalid_argument("concept \"" + concept_names[k] +
                                            "\" has an empty mask");
    }
}

void SynthConfig::validate() const {
    auto prob = [](double p) { return p >= 0.0 && p <= 1.0; };
    if (!prob(annotation_density) || !prob(overlap_density) || !prob(neuron_fire_rate))
        throw std::invalid_argument("synthetic densities must be in [0,1]");
    if (concepts < 1 || samples < 1 || features < 1)
        throw std::invalid_argument("synthetic sizes must be >= 1");
}

std::vector<std::uint8_t> encode_concept_archive(const ConceptDataset& dataset) {
    std::vector<std::uint8_t> out;
    out.insert(out.end(), {'C', 'M', 'A', '1'});
    put_u32(out, dataset.concept_count());
    put_u32(out, dataset.samples());
    put_u32(out, dataset.features());
    for (const auto& name : dataset.concept_names) {
        if (name.size() > 0xFFFF) throw std::invalid_argument("concept name too long: " + name);
        put_u16(out, std::uint16_t(name.size()));
        out.insert(out.end(), name.begin(), name.end());
    }
    for (const auto& mask : dataset.concept_masks)
        out.insert(out.end(), mask.payload().begin(), mask.payload().end());
    return out;
}

ConceptDataset decode_concept_archive(std::span<const std::uint8_t> bytes,
                                      const LoadOptions& opts) {
    Reader r{bytes};
    r.expect_magic("CMA1");
    const std::uint32_t k = r.u32("concept count");
    const std::uint32_t s = r.u32("sample count");
    const std::uint32_t d = r.u32("feature count");
    if (k == 0) throw FormatError("archive holds zero concepts", r.pos);
    if (s == 0 || d == 0) throw FormatError("archive has empty dimensions", r.pos);

    ConceptDataset dataset;
    std::unordered_set<std::string> seen;
    for (std::uint32_t i = 0; i < k; ++i) {
        const std::uint64_t name_at = r.pos;
        const std::uint16_t len = r.u16("name length");
        auto raw = r.raw(len, "name bytes");
        std::string name(raw.begin(), raw.end());
        if (!seen.insert(name).second)
            throw FormatError("duplicate concept name \"" + name + "\"", name_at);
        dataset.concept_names.push_back(std::move(name));
    }
    const std::uint64_t mask_bytes = std::uint64_t(s) * ((std::uint64_t(d) + 7) / 8);
    for (std::uint32_t i = 0; i < k; ++i) {
        const std::uint64_t at = r.pos;
        auto payload = r.raw(mask_bytes, "mask payload");
        try {
            dataset.concept_masks.push_back(BitMatrix::from_payload(s, d, payload));
        } catch (const std::invalid_argument& e) {
            throw FormatError(std::string("mask for \"") + dataset.concept_names[i] +
                                  "\": " + e.what(),
                              at);
        }
    }
    r.expect_end("concept archive");
    try {
        dataset.validate(opts.reject_empty_concepts);
    } catch (const std::invalid_argument& e) {
        throw FormatError(e.what(), 0);
    }
    return dataset;
}

ConceptDataset load_concept_archive(const std::string& path, const LoadOptions& opts) {
    auto bytes = read_file(path);
    return decode_concept_archive(bytes, opts);
}

void write_concept_archive(const ConceptDataset& dataset, const std::string& path) {
    dataset.validate(false);
    write_file(path, encode_concept_archive(dataset));
}

std::vector<std::uint8_t> encode_neuron_mask(const NeuronMask& neuron) {
    std::vector<std::uint8_t> out;
    out.insert(out.end(), {'N', 'A', 'M', '1'});
    put_u32(out, neuron.mask.samples());
    put_u32(out, neuron.mask.features());
    out.insert(out.end(), neuron.mask.payload().begin(), neuron.mask.payload().end());
    return out;
}

NeuronMask decode_neuron_mask(std::span<const std::uint8_t> bytes) {
    Reader r{bytes};
    r.expect_magic("NAM1");
    const std::uint32_t s = r.u32("sample count");
    const std::uint32_t d = r.u32("feature count");
    if (s == 0 || d == 0) throw FormatError("mask has empty dimensions", r.pos);
    const std::uint64_t mask_bytes = std::uint64_t(s) * ((std::uint64_t(d) + 7) / 8);
    const std::uint64_t at = r.pos;
    auto payload = r.raw(mask_bytes, "mask payload");
    r.expect_end("neuron mask");
    try {
        return NeuronMask{BitMatrix::from_payload(s, d, payload)};
    } catch (const std::invalid_argument& e) {
        throw FormatError(e.what(), at);
    }
}

NeuronMask load_neuron_mask(const std::string& path) {
    auto bytes = read_file(path);
    return decode_neuron_mask(bytes);
}

void write_neuron_mask(const NeuronMask& neuron, const std::string& path) {
    write_file(path, encode_neuron_mask(neuron));
}

std::vector<float> load_activations(const std::string& path, std::uint32_t& samples,
                                    std::uint32_t& features) {
    auto bytes = read_file(path);
    Reader r{bytes};
    r.expect_magic("NAF1");
    samples = r.u32("sample count");
    features = r.u32("feature count");
    const std::uint64_t n = std::uint64_t(samples) * features;
    if (n > bytes.size())  // also keeps n*4 from wrapping
        throw FormatError("declared dimensions exceed the file size", r.pos);
    auto raw = r.raw(n * 4, "activation payload");
    r.expect_end("activation file");
    std::vector<float> values(n);
    static_assert(sizeof(float) == 4);
    std::memcpy(values.data(), raw.data(), raw.size());
    for (std::uint64_t i = 0; i < n; ++i)
        if (!std::isfinite(values[i]))
            throw FormatError("non-finite activation at index " + std::to_string(i),
                              12 + i * 4);
    return values;
}

void write_activations(const std::vector<float>& values, std::uint32_t samples,
                       std::uint32_t features, const std::string& path) {
    if (values.size() != std::uint64_t(samples) * features)
        throw std::invalid_argument("activation count does not match S*d");
    std::vector<std::uint8_t> out;
    out.insert(out.end(), {'N', 'A', 'F', '1'});
    put_u32(out, samples);
    put_u32(out, features);
    const std::size_t base = out.size();
    out.resize(base + values.size() * 4);
    std::memcpy(out.data() + base, values.data(), values.size() * 4);
    write_file(path, out);
}

NeuronMask binarize_activations(const std::vector<float>& raw, std::uint32_t samples,
                                std::uint32_t features, double quantile,
                                std::optional<float> upper_cutoff) {
    const std::uint64_t n = std::uint64_t(samples) * features;
    if (raw.size() != n) throw std::invalid_argument("activation count does not match S*d");
    if (!(quantile > 0.0 && quantile < 1.0))
        throw std::invalid_argument("quantile must lie in (0,1)");
    for (float v : raw)
        if (!std::isfinite(v)) throw std::invalid_argument("non-finite activation value");

    // threshold = k-th largest with k = ceil(quantile * n), so at least a
    // `quantile` fraction of locations is kept (more under ties)
    std::uint64_t k = std::uint64_t(std::ceil(quantile * double(n)));
    k = std::max<std::uint64_t>(1, std::min(k, n));
    std::vector<float> sorted(raw);
    std::nth_element(sorted.begin(), sorted.begin() + (k - 1), sorted.end(),
                     std::greater<float>());
    const float threshold = sorted[k - 1];

    NeuronMask neuron{BitMatrix(samples, features)};
    std::uint64_t i = 0;
    for (std::uint32_t x = 0; x < samples; ++x)
        for (std::uint32_t j = 0; j < features; ++j, ++i) {
            const bool on = raw[i] >= threshold &&
                            (!upper_cutoff || raw[i] <= *upper_cutoff);
            if (on) neuron.mask.set(x, j, true);
        }
    return neuron;
}

std::pair<ConceptDataset, NeuronMask> generate_synthetic(const SynthConfig& config) {
    config.validate();
    std::mt19937_64 rng(config.seed);
    std::uniform_real_distribution<double> coin(0.0, 1.0);
    std::uniform_int_distribution<std::uint32_t> pick(0, config.concepts - 1);

    ConceptDataset dataset;
    for (std::uint32_t k = 0; k < config.concepts; ++k) {
        dataset.concept_names.push_back("c" + std::to_string(k));
        dataset.concept_masks.emplace_back(config.samples, config.features);
    }
    NeuronMask neuron{BitMatrix(config.samples, config.features)};

    for (std::uint32_t x = 0; x < config.samples; ++x)
        for (std::uint32_t j = 0; j < config.features; ++j) {
            if (coin(rng) < config.annotation_density) {
                const std::uint32_t first = pick(rng);
                dataset.concept_masks[first].set(x, j, true);
                if (config.concepts > 1 && coin(rng) < config.overlap_density) {
                    std::uint32_t second = pick(rng);
                    while (second == first) second = pick(rng);
                    dataset.concept_masks[second].set(x, j, true);
                    if (config.concepts > 2 && coin(rng) < config.overlap_density) {
                        std::uint32_t third = pick(rng);
                        while (third == first || third == second) third = pick(rng);
                        dataset.concept_masks[third].set(x, j, true);
                    }
                }
            }
            if (coin(rng) < config.neuron_fire_rate) neuron.mask.set(x, j, true);
        }

    // concepts that came out empty claim the first free location each, to
    // keep the overlap structure intact
    std::uint32_t cursor = 0;
    const std::uint64_t total = std::uint64_t(config.samples) * config.features;
    auto location_free = [&](std::uint32_t x, std::uint32_t j) {
        for (const auto& m : dataset.concept_masks)
            if (m.get(x, j)) return false;
        return true;
    };
    for (std::uint32_t k = 0; k < config.concepts; ++k) {
        if (!dataset.concept_masks[k].all_zero()) continue;
        std::uint64_t tried = 0;
        while (tried < total) {
            const std::uint32_t x = cursor / config.features;
            const std::uint32_t j = cursor % config.features;
            cursor = std::uint32_t((cursor + 1) % total);
            ++tried;
            if (location_free(x, j)) {
                dataset.concept_masks[k].set(x, j, true);
                break;
            }
        }
        if (dataset.concept_masks[k].all_zero())
            dataset.concept_masks[k].set(k % config.samples, k % config.features, true);
    }
    return {std::move(dataset), std::move(neuron)};
}

}  // namespace calign
