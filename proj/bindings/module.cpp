#include <pybind11/numpy.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

#include "calign/baselines.hpp"
#include "calign/dataset.hpp"
#include "calign/search.hpp"

namespace py = pybind11;
using namespace calign;

namespace {

using BoolArray = py::array_t<bool, py::array::c_style | py::array::forcecast>;
using FloatArray = py::array_t<float, py::array::c_style | py::array::forcecast>;

BitMatrix matrix_from_numpy(const BoolArray& array) {
    if (array.ndim() != 2) throw std::invalid_argument("mask array must be 2-D (samples x features)");
    const auto s = std::uint32_t(array.shape(0));
    const auto d = std::uint32_t(array.shape(1));
    BitMatrix m(s, d);
    auto view = array.unchecked<2>();
    for (std::uint32_t x = 0; x < s; ++x)
        for (std::uint32_t j = 0; j < d; ++j)
            if (view(x, j)) m.set(x, j, true);
    return m;
}

py::array_t<bool> matrix_to_numpy(const BitMatrix& m) {
    py::array_t<bool> out({py::ssize_t(m.samples()), py::ssize_t(m.features())});
    auto view = out.mutable_unchecked<2>();
    for (std::uint32_t x = 0; x < m.samples(); ++x)
        for (std::uint32_t j = 0; j < m.features(); ++j) view(x, j) = m.get(x, j);
    return out;
}

ConceptDataset dataset_from_dict(const py::dict& masks) {
    ConceptDataset ds;
    for (auto item : masks) {
        ds.concept_names.push_back(py::cast<std::string>(item.first));
        ds.concept_masks.push_back(matrix_from_numpy(py::cast<BoolArray>(item.second)));
    }
    ds.validate(false);
    return ds;
}

py::dict explanation_to_dict(const Explanation& e, const ConceptDataset& ds) {
    py::dict out;
    out["label"] = render_label(e.label, ds);
    out["iou_num"] = e.iou.num;
    out["iou_den"] = e.iou.den;
    out["iou"] = e.iou.to_double();
    out["iou_str"] = e.iou.to_decimal_string(12);
    out["optimal"] = e.optimal;
    out["visited"] = e.stats.visited;
    out["expanded"] = e.stats.expanded;
    out["estimated"] = e.stats.estimated;
    out["elapsed_ms"] = e.stats.elapsed_ms;
    if (!e.warning.empty()) out["warning"] = e.warning;
    return out;
}

py::dict explain(const ConceptDataset& ds, const NeuronMask& neuron, const std::string& algorithm,
                 std::uint32_t max_length, std::uint32_t beam_size, const std::string& operators,
                 bool backprop, std::optional<std::uint64_t> budget_nodes,
                 std::optional<double> budget_seconds, std::uint64_t brute_cap) {
    const OperatorSet ops = OperatorSet::parse(operators);
    Explanation result;
    if (algorithm == "optimal") {
        SearchOptions o;
        o.max_length = max_length;
        o.operators = ops;
        o.backprop = backprop;
        o.limits.max_nodes = budget_nodes;
        o.limits.max_seconds = budget_seconds;
        result = optimal_search(ds, neuron, o);
    } else if (algorithm == "beam" || algorithm == "beam-vanilla") {
        BeamConfig cfg;
        cfg.beam_size = beam_size;
        cfg.max_length = max_length;
        cfg.operators = ops;
        result = algorithm == "beam" ? beam_search_heuristic(ds, neuron, cfg)
                                     : beam_search_vanilla(ds, neuron, cfg);
    } else if (algorithm == "brute") {
        result = brute_force(ds, neuron, max_length, ops, brute_cap).best;
    } else {
        throw std::invalid_argument("unknown algorithm \"" + algorithm +
                                    "\" (optimal|beam|beam-vanilla|brute)");
    }
    return explanation_to_dict(result, ds);
}

py::list concept_stats(const ConceptDataset& ds, const NeuronMask& neuron) {
    const SearchContext ctx = build_search_context(ds, neuron, 1, OperatorSet::all());
    py::list rows;
    for (std::uint32_t k = 0; k < ds.concept_count(); ++k) {
        const auto& q = ctx.concept_quantities[k];
        py::dict row;
        row["name"] = ds.concept_names[k];
        row["iu"] = q.iu_total;
        row["ic"] = q.ic_total;
        row["eu"] = q.eu_total;
        row["ec"] = q.ec_total;
        const Rational d = diou_from_quantities(q, ctx.split.n_total);
        row["diou_num"] = d.num;
        row["diou_den"] = d.den;
        row["diou"] = d.to_double();
        rows.append(std::move(row));
    }
    return rows;
}

}  // namespace

PYBIND11_MODULE(_core, m) {
    m.doc() = "Optimal compositional explanations over bit-packed concept masks";

    py::register_exception<FormatError>(m, "FormatError");

    py::class_<BitMatrix>(m, "BitMatrix")
        .def(py::init(&matrix_from_numpy), py::arg("array"))
        .def_property_readonly("samples", &BitMatrix::samples)
        .def_property_readonly("features", &BitMatrix::features)
        .def("popcount", &BitMatrix::popcount)
        .def("to_numpy", &matrix_to_numpy)
        .def("__eq__", [](const BitMatrix& a, const BitMatrix& b) { return a == b; });

    py::class_<ConceptDataset>(m, "ConceptDataset")
        .def(py::init(&dataset_from_dict), py::arg("masks"),
             "Build from an ordered {name: bool array (S x d)} mapping")
        .def_property_readonly("concept_names",
                               [](const ConceptDataset& ds) { return ds.concept_names; })
        .def_property_readonly("samples", &ConceptDataset::samples)
        .def_property_readonly("features", &ConceptDataset::features)
        .def("mask", [](const ConceptDataset& ds, std::uint32_t k) {
            return matrix_to_numpy(ds.concept_masks.at(k));
        });

    py::class_<NeuronMask>(m, "NeuronMask")
        .def(py::init([](const BoolArray& a) { return NeuronMask{matrix_from_numpy(a)}; }),
             py::arg("array"))
        .def("to_numpy", [](const NeuronMask& n) { return matrix_to_numpy(n.mask); })
        .def("popcount", [](const NeuronMask& n) { return n.mask.popcount(); });

    m.def("load_concept_archive",
          [](const std::string& path, bool reject_empty) {
              LoadOptions opts;
              opts.reject_empty_concepts = reject_empty;
              return load_concept_archive(path, opts);
          },
          py::arg("path"), py::arg("reject_empty_concepts") = true);
    m.def("write_concept_archive", &write_concept_archive, py::arg("dataset"), py::arg("path"));
    m.def("load_neuron_mask", &load_neuron_mask, py::arg("path"));
    m.def("write_neuron_mask", &write_neuron_mask, py::arg("neuron"), py::arg("path"));

    m.def("binarize_activations",
          [](const FloatArray& raw, double quantile, std::optional<float> upper_cutoff) {
              if (raw.ndim() != 2)
                  throw std::invalid_argument("activations must be 2-D (samples x features)");
              const auto s = std::uint32_t(raw.shape(0));
              const auto d = std::uint32_t(raw.shape(1));
              std::vector<float> values(raw.data(), raw.data() + std::size_t(s) * d);
              return binarize_activations(values, s, d, quantile, upper_cutoff);
          },
          py::arg("activations"), py::arg("quantile") = 0.005,
          py::arg("upper_cutoff") = py::none(),
          "Keep the top `quantile` fraction of pooled activations (ties included)");

    m.def("generate_synthetic",
          [](std::uint64_t seed, std::uint32_t concepts, std::uint32_t samples,
             std::uint32_t features, double annotation_density, double overlap_density,
             double neuron_fire_rate) {
              SynthConfig cfg;
              cfg.seed = seed;
              cfg.concepts = concepts;
              cfg.samples = samples;
              cfg.features = features;
              cfg.annotation_density = annotation_density;
              cfg.overlap_density = overlap_density;
              cfg.neuron_fire_rate = neuron_fire_rate;
              return generate_synthetic(cfg);
          },
          py::arg("seed") = 0, py::arg("concepts") = 8, py::arg("samples") = 16,
          py::arg("features") = 64, py::arg("annotation_density") = 0.5,
          py::arg("overlap_density") = 0.3, py::arg("neuron_fire_rate") = 0.25);

    m.def("explain", &explain, py::arg("dataset"), py::arg("neuron"),
          py::arg("algorithm") = "optimal", py::arg("max_length") = 3, py::arg("beam_size") = 5,
          py::arg("operators") = "or,and,andnot", py::arg("backprop") = true,
          py::arg("budget_nodes") = py::none(), py::arg("budget_seconds") = py::none(),
          py::arg("brute_cap") = kDefaultBruteCap,
          "Run one of optimal | beam | beam-vanilla | brute and return a report dict");

    m.def("concept_stats", &concept_stats, py::arg("dataset"), py::arg("neuron"));

    m.def("iou",
          [](const ConceptDataset& ds, const NeuronMask& neuron, const std::string& label) {
              const Rational v = iou(parse_label(label, ds), neuron, ds);
              return py::make_tuple(v.num, v.den);
          },
          py::arg("dataset"), py::arg("neuron"), py::arg("label"),
          "Exact IoU of a label string as a (num, den) tuple");

    m.def("classify_difference",
          [](const ConceptDataset& ds, const std::string& label_a, std::uint64_t num_a,
             std::uint64_t den_a, const std::string& label_b, std::uint64_t num_b,
             std::uint64_t den_b) {
              Explanation a, b;
              a.label = parse_label(label_a, ds);
              a.iou = Rational(num_a, den_a);
              b.label = parse_label(label_b, ds);
              b.iou = Rational(num_b, den_b);
              return std::string(difference_category_name(classify_difference(a, b, ds)));
          },
          py::arg("dataset"), py::arg("label_a"), py::arg("num_a"), py::arg("den_a"),
          py::arg("label_b"), py::arg("num_b"), py::arg("den_b"));

    m.def("state_space_size", &state_space_size, py::arg("concepts"), py::arg("max_length"),
          py::arg("n_ops") = 3);
}
