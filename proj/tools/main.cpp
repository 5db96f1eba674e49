// calign: compositional-explanation toolkit CLI.
// JSON goes to stdout, diagnostics to stderr. Exit codes: 0 ok, 2 bad
// flags/usage, 3 malformed input files, 4 search budget exhausted.

#include <algorithm>
#include <array>
#include <atomic>
#include <chrono>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <functional>
#include <iostream>
#include <mutex>
#include <optional>
#include <sstream>
#include <thread>

#include "CLI11.hpp"

#include "calign/baselines.hpp"
#include "calign/dataset.hpp"
#include "calign/report.hpp"
#include "calign/search.hpp"

namespace fs = std::filesystem;
using namespace calign;

namespace {

struct AlgoParams {
    std::string algorithm = "optimal";
    std::uint32_t max_length = 3;
    std::uint32_t beam_size = 5;
    std::string operators = "or,and,andnot";
    bool no_backprop = false;
    std::optional<std::uint64_t> budget_nodes;
    std::optional<double> budget_seconds;
    std::uint64_t brute_cap = kDefaultBruteCap;
    double quantile = 0.005;
};

void add_algo_flags(CLI::App* cmd, AlgoParams& p, bool with_algorithm = true) {
    if (with_algorithm)
        cmd->add_option("--algorithm", p.algorithm, "Search algorithm")
            ->check(CLI::IsMember({"optimal", "beam", "beam-vanilla", "brute"}))
            ->capture_default_str();
    cmd->add_option("--max-length", p.max_length, "Maximum explanation length")
        ->check(CLI::PositiveNumber)
        ->capture_default_str();
    cmd->add_option("--beam-size", p.beam_size, "Beam size for the beam algorithms")
        ->check(CLI::PositiveNumber)
        ->capture_default_str();
    cmd->add_option("--operators", p.operators, "Allowed connectives (subset of or,and,andnot)")
        ->capture_default_str();
    cmd->add_flag("--no-backprop", p.no_backprop,
                  "Disable exact-prefix backpropagation in the optimal search");
    cmd->add_option("--budget-nodes", p.budget_nodes,
                    "Stop the optimal search after this many popped nodes");
    cmd->add_option("--budget-seconds", p.budget_seconds,
                    "Stop the optimal search after this many seconds");
    cmd->add_option("--brute-cap", p.brute_cap,
                    "Refuse brute-force enumeration beyond this many labels")
        ->capture_default_str();
    cmd->add_option("--quantile", p.quantile,
                    "Top activation fraction kept when binarizing raw activations")
        ->check(CLI::Range(0.0, 1.0))
        ->capture_default_str();
}

NeuronMask load_neuron_any(const std::string& path, double quantile) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw std::invalid_argument("cannot open file: " + path);
    char magic[4] = {0, 0, 0, 0};
    in.read(magic, 4);
    in.close();
    if (std::string(magic, 4) == "NAM1") return load_neuron_mask(path);
    if (std::string(magic, 4) == "NAF1") {
        std::uint32_t s = 0, d = 0;
        auto values = load_activations(path, s, d);
        return binarize_activations(values, s, d, quantile);
    }
    throw FormatError("unrecognized magic in \"" + path + "\" (want NAM1 or NAF1)", 0);
}

std::string unit_name(const std::string& path) {
    return fs::path(path).stem().string();
}

Explanation run_algorithm(const AlgoParams& p, const ConceptDataset& dataset,
                          const NeuronMask& neuron) {
    const OperatorSet ops = OperatorSet::parse(p.operators);
    if (p.algorithm == "optimal") {
        SearchOptions opts;
        opts.max_length = p.max_length;
        opts.operators = ops;
        opts.backprop = !p.no_backprop;
        opts.limits.max_nodes = p.budget_nodes;
        opts.limits.max_seconds = p.budget_seconds;
        return optimal_search(dataset, neuron, opts);
    }
    BeamConfig cfg;
    cfg.beam_size = p.beam_size;
    cfg.max_length = p.max_length;
    cfg.operators = ops;
    if (p.algorithm == "beam") return beam_search_heuristic(dataset, neuron, cfg);
    if (p.algorithm == "beam-vanilla") return beam_search_vanilla(dataset, neuron, cfg);
    return brute_force(dataset, neuron, p.max_length, ops, p.brute_cap).best;
}

Json config_echo(const AlgoParams& p, const std::string& dataset_path,
                 const std::string& neuron_path) {
    Json cfg;
    cfg["dataset"] = dataset_path;
    if (!neuron_path.empty()) cfg["neuron"] = neuron_path;
    cfg["algorithm"] = p.algorithm;
    cfg["max_length"] = p.max_length;
    if (p.algorithm == "beam" || p.algorithm == "beam-vanilla") cfg["beam_size"] = p.beam_size;
    cfg["operators"] = OperatorSet::parse(p.operators).to_string();
    if (p.algorithm == "optimal") cfg["backprop"] = !p.no_backprop;
    if (p.budget_nodes) cfg["budget_nodes"] = *p.budget_nodes;
    if (p.budget_seconds) cfg["budget_seconds"] = *p.budget_seconds;
    cfg["quantile"] = p.quantile;
    return cfg;
}

std::vector<std::string> collect_units(const std::string& dir) {
    std::vector<std::string> paths;
    for (const auto& entry : fs::directory_iterator(dir)) {
        if (!entry.is_regular_file()) continue;
        const std::string ext = entry.path().extension().string();
        if (ext == ".nam" || ext == ".naf") paths.push_back(entry.path().string());
    }
    std::sort(paths.begin(), paths.end(),
              [](const std::string& a, const std::string& b) {
                  return fs::path(a).filename().string() < fs::path(b).filename().string();
              });
    if (paths.empty()) throw std::invalid_argument("no .nam/.naf units found in " + dir);
    return paths;
}

// unit-level parallelism with deterministic slot assignment
void for_each_unit(std::size_t count, unsigned jobs, const std::function<void(std::size_t)>& fn) {
    jobs = std::max(1u, jobs);
    if (jobs == 1) {
        for (std::size_t i = 0; i < count; ++i) fn(i);
        return;
    }
    std::atomic<std::size_t> next{0};
    std::vector<std::thread> threads;
    std::mutex error_mutex;
    std::exception_ptr error;
    for (unsigned t = 0; t < jobs; ++t)
        threads.emplace_back([&] {
            while (true) {
                const std::size_t i = next.fetch_add(1);
                if (i >= count) return;
                try {
                    fn(i);
                } catch (...) {
                    std::lock_guard lock(error_mutex);
                    if (!error) error = std::current_exception();
                    return;
                }
            }
        });
    for (auto& th : threads) th.join();
    if (error) std::rethrow_exception(error);
}

std::string mean_string(double v) {
    char buf[64];
    std::snprintf(buf, sizeof buf, "%.6f", v);
    return buf;
}

int cmd_explain(const AlgoParams& p, const std::string& dataset_path,
                const std::string& neuron_path, bool seedless) {
    const ConceptDataset dataset = load_concept_archive(dataset_path);
    const NeuronMask neuron = load_neuron_any(neuron_path, p.quantile);
    log_message(LogLevel::Info, "explaining " + unit_name(neuron_path) + " with " + p.algorithm +
                                    " over " + std::to_string(dataset.concept_count()) +
                                    " concepts");
    const Explanation result = run_algorithm(p, dataset, neuron);
    log_message(LogLevel::Info,
                "result " + render_label(result.label, dataset) + " iou " +
                    result.iou.to_fraction_string() + " visited " +
                    std::to_string(result.stats.visited));
    const Json report = run_report(unit_name(neuron_path), p.algorithm, result, dataset,
                                   config_echo(p, dataset_path, neuron_path), !seedless);
    std::cout << report.dump(2) << "\n";
    const bool budget_set = p.budget_nodes.has_value() || p.budget_seconds.has_value();
    if (p.algorithm == "optimal" && budget_set && !result.optimal) return 4;
    return 0;
}

int cmd_stats(const std::string& dataset_path, const std::string& neuron_path, double quantile,
              bool seedless) {
    const ConceptDataset dataset = load_concept_archive(dataset_path);
    const NeuronMask neuron = load_neuron_any(neuron_path, quantile);
    const auto t0 = std::chrono::steady_clock::now();
    const SearchContext ctx = build_search_context(dataset, neuron, 1, OperatorSet::all());
    const auto elapsed =
        std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - t0).count();

    Json out;
    out["unit"] = unit_name(neuron_path);
    out["samples"] = dataset.samples();
    out["features"] = dataset.features();
    Json split;
    split["n"] = ctx.split.n_total;
    split["nu"] = ctx.split.nu_total;
    split["nc"] = ctx.split.nc_total;
    split["seu"] = ctx.split.seu_total;
    split["sec"] = ctx.split.sec_total;
    out["neuron_split"] = std::move(split);
    Json concepts = Json::array();
    for (std::uint32_t k = 0; k < dataset.concept_count(); ++k) {
        const auto& q = ctx.concept_quantities[k];
        Json row;
        row["name"] = dataset.concept_names[k];
        row["iu"] = q.iu_total;
        row["ic"] = q.ic_total;
        row["eu"] = q.eu_total;
        row["ec"] = q.ec_total;
        row["diou"] = iou_json(diou_from_quantities(q, ctx.split.n_total));
        concepts.push_back(std::move(row));
    }
    out["concepts"] = std::move(concepts);
    Json disjoint = Json::array();
    for (std::uint32_t a = 0; a < dataset.concept_count(); ++a) {
        Json row = Json::array();
        for (std::uint32_t b = 0; b < dataset.concept_count(); ++b)
            row.push_back(ctx.disjoint.disjoint(a, b) ? 1 : 0);
        disjoint.push_back(std::move(row));
    }
    out["disjoint_matrix"] = std::move(disjoint);
    if (!seedless) out["elapsed_ms"] = elapsed;
    std::cout << out.dump(2) << "\n";
    return 0;
}

int cmd_gen(const SynthConfig& cfg, const std::string& out_dataset,
            const std::string& out_neuron) {
    auto [dataset, neuron] = generate_synthetic(cfg);
    write_concept_archive(dataset, out_dataset);
    write_neuron_mask(neuron, out_neuron);
    Json out;
    out["dataset"] = out_dataset;
    out["neuron"] = out_neuron;
    out["concepts"] = cfg.concepts;
    out["samples"] = cfg.samples;
    out["features"] = cfg.features;
    out["seed"] = cfg.seed;
    std::cout << out.dump(2) << "\n";
    return 0;
}

int cmd_compare(AlgoParams base, const std::string& dataset_path, const std::string& neurons_dir,
                const std::string& algo_a, const std::string& algo_b, unsigned jobs) {
    const ConceptDataset dataset = load_concept_archive(dataset_path);
    const auto units = collect_units(neurons_dir);

    struct Row {
        std::string unit;
        Explanation a, b;
        DifferenceCategory category = DifferenceCategory::Same;
    };
    std::vector<Row> rows(units.size());
    for_each_unit(units.size(), jobs, [&](std::size_t i) {
        const NeuronMask neuron = load_neuron_any(units[i], base.quantile);
        AlgoParams pa = base;
        pa.algorithm = algo_a;
        AlgoParams pb = base;
        pb.algorithm = algo_b;
        Row row;
        row.unit = unit_name(units[i]);
        row.a = run_algorithm(pa, dataset, neuron);
        row.b = run_algorithm(pb, dataset, neuron);
        row.category = classify_difference(row.a, row.b, dataset);
        rows[i] = std::move(row);
    });

    std::size_t diff = 0;
    std::array<std::size_t, 4> cat_counts{};  // Same, Cat1, Cat2, Cat3
    double sum_a = 0, sum_b = 0;
    Json unit_rows = Json::array();
    for (const Row& row : rows) {
        cat_counts[std::size_t(row.category)]++;
        if (row.category != DifferenceCategory::Same) ++diff;
        sum_a += row.a.iou.to_double();
        sum_b += row.b.iou.to_double();
        Json jr;
        jr["unit"] = row.unit;
        jr["a"] = Json{{"label", render_label(row.a.label, dataset)}, {"iou", iou_json(row.a.iou)}};
        jr["b"] = Json{{"label", render_label(row.b.label, dataset)}, {"iou", iou_json(row.b.iou)}};
        jr["category"] = difference_category_name(row.category);
        unit_rows.push_back(std::move(jr));
    }
    const double n = double(units.size());
    const double nd = diff ? double(diff) : 1.0;  // category percentages over differing units
    Json out;
    out["dataset"] = dataset_path;
    out["algorithm_a"] = algo_a;
    out["algorithm_b"] = algo_b;
    out["units"] = std::move(unit_rows);
    Json agg;
    agg["units"] = units.size();
    agg["diff_percent"] = mean_string(100.0 * double(diff) / n);
    agg["cat1_percent"] = mean_string(100.0 * double(cat_counts[1]) / nd);
    agg["cat2_percent"] = mean_string(100.0 * double(cat_counts[2]) / nd);
    agg["cat3_percent"] = mean_string(100.0 * double(cat_counts[3]) / nd);
    agg["mean_iou_a"] = mean_string(sum_a / n);
    agg["mean_iou_b"] = mean_string(sum_b / n);
    out["aggregate"] = std::move(agg);
    std::cout << out.dump(2) << "\n";
    return 0;
}

int cmd_bench(AlgoParams base, const std::string& dataset_path, const std::string& neurons_dir,
              const std::string& algorithms_csv, unsigned jobs) {
    const ConceptDataset dataset = load_concept_archive(dataset_path);
    const auto units = collect_units(neurons_dir);
    std::vector<std::string> algorithms;
    {
        std::stringstream ss(algorithms_csv);
        std::string item;
        while (std::getline(ss, item, ',')) {
            if (item != "optimal" && item != "beam" && item != "beam-vanilla" && item != "brute")
                throw std::invalid_argument("unknown algorithm \"" + item + "\"");
            algorithms.push_back(item);
        }
    }
    if (algorithms.empty()) throw std::invalid_argument("no algorithms selected");

    Json table = Json::array();
    for (const std::string& algo : algorithms) {
        std::vector<SearchStats> stats(units.size());
        for_each_unit(units.size(), jobs, [&](std::size_t i) {
            const NeuronMask neuron = load_neuron_any(units[i], base.quantile);
            AlgoParams p = base;
            p.algorithm = algo;
            stats[i] = run_algorithm(p, dataset, neuron).stats;
        });
        auto agg = [&](auto pick) {
            double mean = 0, m2 = 0;
            for (const auto& st : stats) mean += double(pick(st));
            mean /= double(stats.size());
            for (const auto& st : stats) {
                const double dv = double(pick(st)) - mean;
                m2 += dv * dv;
            }
            const double stddev = stats.size() > 1 ? std::sqrt(m2 / double(stats.size() - 1)) : 0;
            return Json{{"mean", mean_string(mean)}, {"stddev", mean_string(stddev)}};
        };
        Json row;
        row["algorithm"] = algo;
        row["units"] = units.size();
        row["visited"] = agg([](const SearchStats& s) { return s.visited; });
        row["expanded"] = agg([](const SearchStats& s) { return s.expanded; });
        row["estimated"] = agg([](const SearchStats& s) { return s.estimated; });
        row["elapsed_ms"] = agg([](const SearchStats& s) { return s.elapsed_ms; });
        table.push_back(std::move(row));
    }
    Json out;
    out["dataset"] = dataset_path;
    out["algorithms"] = table;
    std::cout << out.dump(2) << "\n";
    return 0;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"concept-align: optimal compositional explanations over binary masks"};
    app.require_subcommand(1);

    AlgoParams params;
    std::string dataset_path, neuron_path, neurons_dir;
    bool seedless = false;

    auto* explain = app.add_subcommand("explain", "Explain one unit with a chosen algorithm");
    explain->add_option("--dataset", dataset_path, "Concept archive (.cma)")->required();
    explain->add_option("--neuron", neuron_path, "Neuron mask (.nam) or raw activations (.naf)")
        ->required();
    add_algo_flags(explain, params);
    explain->add_flag("--seedless-output", seedless,
                      "Omit volatile fields (timing) for byte-stable output");

    auto* stats = app.add_subcommand("stats", "Dump per-concept quantities and dIoU");
    stats->add_option("--dataset", dataset_path, "Concept archive (.cma)")->required();
    stats->add_option("--neuron", neuron_path, "Neuron mask or activations")->required();
    double stats_quantile = 0.005;
    stats->add_option("--quantile", stats_quantile, "Binarization quantile for .naf inputs")
        ->check(CLI::Range(0.0, 1.0))
        ->capture_default_str();
    stats->add_flag("--seedless-output", seedless, "Omit volatile fields (timing)");

    auto* gen = app.add_subcommand("gen", "Generate a synthetic dataset and neuron mask");
    SynthConfig synth;
    std::string out_dataset = "dataset.cma", out_neuron = "neuron.nam";
    gen->add_option("--seed", synth.seed, "RNG seed")->capture_default_str();
    gen->add_option("--concepts", synth.concepts, "Concept count")->check(CLI::PositiveNumber);
    gen->add_option("--samples", synth.samples, "Sample count")->check(CLI::PositiveNumber);
    gen->add_option("--features", synth.features, "Features per sample")
        ->check(CLI::PositiveNumber);
    gen->add_option("--annotation-density", synth.annotation_density,
                    "Probability a location is annotated")
        ->check(CLI::Range(0.0, 1.0));
    gen->add_option("--overlap-density", synth.overlap_density,
                    "Probability an annotated location gets extra concepts")
        ->check(CLI::Range(0.0, 1.0));
    gen->add_option("--neuron-fire-rate", synth.neuron_fire_rate,
                    "Probability the neuron fires at a location")
        ->check(CLI::Range(0.0, 1.0));
    gen->add_option("--out-dataset", out_dataset, "Output archive path")->capture_default_str();
    gen->add_option("--out-neuron", out_neuron, "Output mask path")->capture_default_str();

    auto* compare = app.add_subcommand("compare", "Compare two algorithms over a unit directory");
    compare->add_option("--dataset", dataset_path, "Concept archive (.cma)")->required();
    compare->add_option("--neurons", neurons_dir, "Directory of .nam/.naf units")->required();
    std::string algo_a = "optimal", algo_b = "beam";
    unsigned jobs = 1;
    compare->add_option("--algorithm-a", algo_a, "First algorithm")
        ->check(CLI::IsMember({"optimal", "beam", "beam-vanilla", "brute"}))
        ->capture_default_str();
    compare->add_option("--algorithm-b", algo_b, "Second algorithm")
        ->check(CLI::IsMember({"optimal", "beam", "beam-vanilla", "brute"}))
        ->capture_default_str();
    compare->add_option("--jobs", jobs, "Parallel unit-level workers")->check(CLI::PositiveNumber);
    add_algo_flags(compare, params, false);

    auto* bench = app.add_subcommand("bench", "Benchmark algorithms over a unit directory");
    bench->add_option("--dataset", dataset_path, "Concept archive (.cma)")->required();
    bench->add_option("--neurons", neurons_dir, "Directory of .nam/.naf units")->required();
    std::string algorithms_csv = "optimal,beam,beam-vanilla,brute";
    bench->add_option("--algorithms", algorithms_csv, "Comma-separated algorithm list")
        ->capture_default_str();
    bench->add_option("--jobs", jobs, "Parallel unit-level workers")->check(CLI::PositiveNumber);
    add_algo_flags(bench, params, false);

    try {
        app.parse(argc, argv);
    } catch (const CLI::CallForHelp& e) {
        return app.exit(e);
    } catch (const CLI::CallForAllHelp& e) {
        return app.exit(e);
    } catch (const CLI::ParseError& e) {
        std::cerr << e.what() << "\n\n" << app.help() << std::flush;
        return 2;
    }

    try {
        if (explain->parsed())
            return cmd_explain(params, dataset_path, neuron_path, seedless);
        if (stats->parsed())
            return cmd_stats(dataset_path, neuron_path, stats_quantile, seedless);
        if (gen->parsed()) return cmd_gen(synth, out_dataset, out_neuron);
        if (compare->parsed())
            return cmd_compare(params, dataset_path, neurons_dir, algo_a, algo_b, jobs);
        if (bench->parsed())
            return cmd_bench(params, dataset_path, neurons_dir, algorithms_csv, jobs);
    } catch (const FormatError& e) {
        log_message(LogLevel::Error, e.what());
        std::cerr << "error: " << e.what() << "\n";
        return 3;
    } catch (const std::exception& e) {
        log_message(LogLevel::Error, e.what());
        std::cerr << "error: " << e.what() << "\n";
        return 2;
    }
    return 0;
}
