#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include <array>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <random>
#include <regex>

#include "json.hpp"

#include "testutil.hpp"

using namespace calign;
using namespace testutil;
namespace fs = std::filesystem;

namespace {

struct RunResult {
    int exit_code = -1;
    std::string out;
};

// run the CLI, capturing stdout; stderr goes to a scratch file
RunResult run_cli(const std::string& args) {
    const std::string out_file =
        (fs::temp_directory_path() / ("calign_out_" + std::to_string(::getpid()))).string();
    const std::string cmd =
        std::string(CALIGN_CLI_PATH) + " " + args + " >" + out_file + " 2>/dev/null";
    const int raw = std::system(cmd.c_str());
    RunResult r;
    r.exit_code = WIFEXITED(raw) ? WEXITSTATUS(raw) : -1;
    std::ifstream in(out_file, std::ios::binary);
    r.out.assign((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
    std::remove(out_file.c_str());
    return r;
}

struct TempDir {
    fs::path path;
    TempDir() {
        path = fs::temp_directory_path() /
               ("calign_cli_" + std::to_string(std::random_device{}()));
        fs::create_directories(path);
    }
    ~TempDir() { fs::remove_all(path); }
    std::string file(const std::string& name) const { return (path / name).string(); }
};

void write_worked_example(const TempDir& tmp) {
    write_concept_archive(worked_example_dataset(), tmp.file("we.cma"));
    write_neuron_mask(worked_example_neuron(), tmp.file("we.nam"));
}

std::string read_file(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    return std::string((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
}

}  // namespace

TEST_CASE("explain: worked example optimal n=2 reports IoU 2/3 and optimal flag") {
    TempDir tmp;
    write_worked_example(tmp);
    const RunResult r = run_cli("explain --dataset " + tmp.file("we.cma") + " --neuron " +
                                tmp.file("we.nam") + " --algorithm optimal --max-length 2");
    REQUIRE(r.exit_code == 0);
    const auto report = nlohmann::json::parse(r.out);
    CHECK(report["algorithm"] == "optimal");
    CHECK(report["optimal"] == true);
    CHECK(Rational(report["iou"]["num"], report["iou"]["den"]) == Rational(2, 3));
    CHECK(report["stats"].contains("visited"));
    CHECK(report["config"]["max_length"] == 2);
    // the decimal string matches the fraction to 12 places
    const double value = std::stod(report["iou"]["value"].get<std::string>());
    const double expect = double(report["iou"]["num"].get<std::uint64_t>()) /
                          double(report["iou"]["den"].get<std::uint64_t>());
    CHECK(std::abs(value - expect) <= 5e-13);
}

TEST_CASE("explain: beam and beam-vanilla return identical label strings") {
    TempDir tmp;
    auto [ds, neuron] = generate_synthetic(synth_config(8, 8, 12, 56, 0.6));
    write_concept_archive(ds, tmp.file("d.cma"));
    write_neuron_mask(neuron, tmp.file("n.nam"));
    const std::string base = " --dataset " + tmp.file("d.cma") + " --neuron " +
                             tmp.file("n.nam") + " --max-length 3 --beam-size 5";
    const RunResult a = run_cli("explain --algorithm beam" + base);
    const RunResult b = run_cli("explain --algorithm beam-vanilla" + base);
    REQUIRE(a.exit_code == 0);
    REQUIRE(b.exit_code == 0);
    const auto ja = nlohmann::json::parse(a.out);
    const auto jb = nlohmann::json::parse(b.out);
    CHECK(ja["label"] == jb["label"]);
    CHECK(ja["iou"]["value"] == jb["iou"]["value"]);
}

TEST_CASE("explain: missing required flags exit 2 with usage text") {
    const RunResult r = run_cli("explain --algorithm optimal");
    CHECK(r.exit_code == 2);
    const RunResult r2 = run_cli("explain --dataset nope.cma --neuron nope.nam --algorithm bogus");
    CHECK(r2.exit_code == 2);
}

TEST_CASE("explain: malformed input files exit 3") {
    TempDir tmp;
    {
        std::ofstream bad(tmp.file("bad.cma"), std::ios::binary);
        bad << "JUNKDATA";
    }
    write_worked_example(tmp);
    const RunResult r = run_cli("explain --dataset " + tmp.file("bad.cma") + " --neuron " +
                                tmp.file("we.nam") + " --algorithm optimal");
    CHECK(r.exit_code == 3);
}

TEST_CASE("explain: exhausted budget exits 4 but still emits the report") {
    TempDir tmp;
    auto [ds, neuron] = generate_synthetic(synth_config(5, 10, 16, 64, 0.7));
    write_concept_archive(ds, tmp.file("d.cma"));
    write_neuron_mask(neuron, tmp.file("n.nam"));
    const RunResult r = run_cli("explain --dataset " + tmp.file("d.cma") + " --neuron " +
                                tmp.file("n.nam") +
                                " --algorithm optimal --max-length 3 --budget-nodes 1");
    CHECK(r.exit_code == 4);
    const auto report = nlohmann::json::parse(r.out);
    CHECK(report["optimal"] == false);
}

TEST_CASE("stats: worked example dIoU column is 2/5, 2/4, 2/5") {
    TempDir tmp;
    write_worked_example(tmp);
    const RunResult r =
        run_cli("stats --dataset " + tmp.file("we.cma") + " --neuron " + tmp.file("we.nam"));
    REQUIRE(r.exit_code == 0);
    const auto stats = nlohmann::json::parse(r.out);
    REQUIRE(stats["concepts"].size() == 3);
    const std::vector<Rational> expect{{2, 5}, {2, 4}, {2, 5}};
    for (std::size_t k = 0; k < 3; ++k) {
        const auto& d = stats["concepts"][k]["diou"];
        CHECK(Rational(d["num"], d["den"]) == expect[k]);
    }
    CHECK(stats["neuron_split"]["n"] == 3);
    CHECK(stats["disjoint_matrix"][0][1] == 0);
}

TEST_CASE("gen is deterministic: same seed gives byte-identical files") {
    TempDir tmp;
    const std::string flags =
        " --seed 99 --concepts 6 --samples 8 --features 32 --annotation-density 0.5"
        " --overlap-density 0.4 --neuron-fire-rate 0.2";
    const RunResult r1 = run_cli("gen" + flags + " --out-dataset " + tmp.file("a.cma") +
                                 " --out-neuron " + tmp.file("a.nam"));
    const RunResult r2 = run_cli("gen" + flags + " --out-dataset " + tmp.file("b.cma") +
                                 " --out-neuron " + tmp.file("b.nam"));
    REQUIRE(r1.exit_code == 0);
    REQUIRE(r2.exit_code == 0);
    CHECK(read_file(tmp.file("a.cma")) == read_file(tmp.file("b.cma")));
    CHECK(read_file(tmp.file("a.nam")) == read_file(tmp.file("b.nam")));
}

TEST_CASE("explain accepts raw activations and binarizes at the quantile") {
    TempDir tmp;
    write_worked_example(tmp);
    // activations whose top quarter is exactly position 2 of the sample
    write_activations({0.f, 1.f, 9.f, 2.f, 0.5f, 0.25f, 3.f, 0.1f}, 2, 4, tmp.file("a.naf"));
    const RunResult r = run_cli("stats --dataset " + tmp.file("we.cma") + " --neuron " +
                                tmp.file("a.naf") + " --quantile 0.25");
    // dimensions disagree with the dataset (2x4 vs 1x6): exit 2
    CHECK(r.exit_code == 2);
    auto [ds, neuron] = generate_synthetic(synth_config(3, 4, 2, 4, 0.3));
    write_concept_archive(ds, tmp.file("d.cma"));
    const RunResult ok = run_cli("explain --dataset " + tmp.file("d.cma") + " --neuron " +
                                 tmp.file("a.naf") +
                                 " --quantile 0.25 --algorithm brute --max-length 2");
    REQUIRE(ok.exit_code == 0);
    const auto report = nlohmann::json::parse(ok.out);
    CHECK(report["config"]["quantile"] == 0.25);
}

TEST_CASE("compare: identical algorithms give diff 0%") {
    TempDir tmp;
    auto [ds, neuron] = generate_synthetic(synth_config(12, 6, 8, 48, 0.5));
    write_concept_archive(ds, tmp.file("d.cma"));
    fs::create_directories(tmp.path / "units");
    for (int u = 0; u < 3; ++u) {
        auto [ds2, n2] = generate_synthetic(synth_config(100 + u, 6, 8, 48, 0.5));
        write_neuron_mask(n2, (tmp.path / "units" / ("u" + std::to_string(u) + ".nam")).string());
    }
    const RunResult r = run_cli("compare --dataset " + tmp.file("d.cma") + " --neurons " +
                                (tmp.path / "units").string() +
                                " --algorithm-a beam --algorithm-b beam --max-length 2");
    REQUIRE(r.exit_code == 0);
    const auto report = nlohmann::json::parse(r.out);
    CHECK(report["aggregate"]["units"] == 3);
    CHECK(report["aggregate"]["diff_percent"] == "0.000000");
    for (const auto& row : report["units"]) CHECK(row["category"] == "same");
}

TEST_CASE("compare: single-unit directory yields a one-row report") {
    TempDir tmp;
    auto [ds, neuron] = generate_synthetic(synth_config(13, 6, 8, 48, 0.6));
    write_concept_archive(ds, tmp.file("d.cma"));
    fs::create_directories(tmp.path / "one");
    write_neuron_mask(neuron, (tmp.path / "one" / "unit.nam").string());
    const RunResult r = run_cli("compare --dataset " + tmp.file("d.cma") + " --neurons " +
                                (tmp.path / "one").string() + " --max-length 2");
    REQUIRE(r.exit_code == 0);
    const auto report = nlohmann::json::parse(r.out);
    CHECK(report["units"].size() == 1);
    // optimal can never lose to beam
    const auto& row = report["units"][0];
    CHECK(Rational(row["a"]["iou"]["num"], row["a"]["iou"]["den"]) >=
          Rational(row["b"]["iou"]["num"], row["b"]["iou"]["den"]));
}

TEST_CASE("bench emits one row per algorithm with mean and stddev") {
    TempDir tmp;
    auto [ds, neuron] = generate_synthetic(synth_config(14, 6, 8, 48, 0.4));
    write_concept_archive(ds, tmp.file("d.cma"));
    fs::create_directories(tmp.path / "units");
    for (int u = 0; u < 4; ++u) {
        auto [ds2, n2] = generate_synthetic(synth_config(200 + u, 6, 8, 48, 0.4));
        write_neuron_mask(n2, (tmp.path / "units" / ("u" + std::to_string(u) + ".nam")).string());
    }
    const RunResult r = run_cli("bench --dataset " + tmp.file("d.cma") + " --neurons " +
                                (tmp.path / "units").string() +
                                " --algorithms optimal,beam,beam-vanilla,brute --max-length 2"
                                " --jobs 2");
    REQUIRE(r.exit_code == 0);
    const auto report = nlohmann::json::parse(r.out);
    REQUIRE(report["algorithms"].size() == 4);
    for (const auto& row : report["algorithms"]) {
        CHECK(row["units"] == 4);
        CHECK(row["visited"].contains("mean"));
        CHECK(row["visited"].contains("stddev"));
    }
}

TEST_CASE("determinism: identical invocations give byte-identical reports modulo timing") {
    TempDir tmp;
    auto [ds, neuron] = generate_synthetic(synth_config(15, 8, 12, 64, 0.6));
    write_concept_archive(ds, tmp.file("d.cma"));
    write_neuron_mask(neuron, tmp.file("n.nam"));
    const std::string cmd = "explain --dataset " + tmp.file("d.cma") + " --neuron " +
                            tmp.file("n.nam") +
                            " --algorithm optimal --max-length 3 --seedless-output";
    const RunResult r1 = run_cli(cmd);
    const RunResult r2 = run_cli(cmd);
    REQUIRE(r1.exit_code == 0);
    CHECK(r1.out == r2.out);
    // without --seedless-output only elapsed_ms may differ
    const std::string cmd2 = "explain --dataset " + tmp.file("d.cma") + " --neuron " +
                             tmp.file("n.nam") + " --algorithm optimal --max-length 3";
    const std::regex timing("\"elapsed_ms\": [0-9]+");
    const std::string a = std::regex_replace(run_cli(cmd2).out, timing, "\"elapsed_ms\": X");
    const std::string b = std::regex_replace(run_cli(cmd2).out, timing, "\"elapsed_ms\": X");
    CHECK(a == b);
}

namespace {

// minimal structural validator for the subset of JSON Schema the shipped
// schema uses: type, required, properties, enum, minimum, pattern
bool validate_against_schema(const nlohmann::json& value, const nlohmann::json& schema,
                             std::string& why) {
    if (schema.contains("type")) {
        const std::string t = schema["type"];
        const bool ok = (t == "object" && value.is_object()) ||
                        (t == "string" && value.is_string()) ||
                        (t == "integer" && value.is_number_integer()) ||
                        (t == "boolean" && value.is_boolean());
        if (!ok) {
            why = "expected type " + t + ", got " + value.dump().substr(0, 40);
            return false;
        }
    }
    if (schema.contains("enum")) {
        bool hit = false;
        for (const auto& option : schema["enum"]) hit = hit || option == value;
        if (!hit) {
            why = "value " + value.dump() + " not in enum";
            return false;
        }
    }
    if (schema.contains("minimum") && value.is_number_integer()) {
        if (value.get<std::int64_t>() < schema["minimum"].get<std::int64_t>()) {
            why = "value below minimum";
            return false;
        }
    }
    if (schema.contains("pattern") && value.is_string()) {
        if (!std::regex_match(value.get<std::string>(),
                              std::regex(schema["pattern"].get<std::string>()))) {
            why = "value " + value.dump() + " fails pattern " +
                  schema["pattern"].get<std::string>();
            return false;
        }
    }
    if (value.is_object()) {
        if (schema.contains("required"))
            for (const auto& key : schema["required"])
                if (!value.contains(key.get<std::string>())) {
                    why = "missing required key " + key.get<std::string>();
                    return false;
                }
        if (schema.contains("properties"))
            for (const auto& [key, sub] : schema["properties"].items())
                if (value.contains(key) && !validate_against_schema(value[key], sub, why)) {
                    why = key + ": " + why;
                    return false;
                }
    }
    return true;
}

}  // namespace

TEST_CASE("explain reports validate against the shipped schema") {
    TempDir tmp;
    write_worked_example(tmp);
    std::ifstream schema_in(CALIGN_SCHEMA_PATH);
    REQUIRE(schema_in.good());
    const auto schema = nlohmann::json::parse(schema_in);
    for (const char* algo : {"optimal", "beam", "beam-vanilla", "brute"}) {
        const RunResult r =
            run_cli("explain --dataset " + tmp.file("we.cma") + " --neuron " +
                    tmp.file("we.nam") + " --algorithm " + std::string(algo) + " --max-length 2");
        REQUIRE(r.exit_code == 0);
        std::string why;
        const bool ok = validate_against_schema(nlohmann::json::parse(r.out), schema, why);
        CHECK_MESSAGE(ok, algo << ": " << why);
    }
}

TEST_CASE("CONCEPT_ALIGN_LOG controls stderr diagnostics") {
    TempDir tmp;
    write_worked_example(tmp);
    const std::string err_file = tmp.file("stderr.txt");
    const std::string base = std::string(CALIGN_CLI_PATH) + " explain --dataset " +
                             tmp.file("we.cma") + " --neuron " + tmp.file("we.nam") +
                             " --algorithm optimal --max-length 2 >/dev/null 2>" + err_file;
    REQUIRE(std::system(("CONCEPT_ALIGN_LOG=info " + base).c_str()) == 0);
    CHECK(read_file(err_file).find("[calign:info]") != std::string::npos);
    REQUIRE(std::system(("CONCEPT_ALIGN_LOG=error " + base).c_str()) == 0);
    CHECK(read_file(err_file).find("[calign:info]") == std::string::npos);
}

TEST_CASE("operator subsets restrict output labels") {
    TempDir tmp;
    auto [ds, neuron] = generate_synthetic(synth_config(16, 7, 10, 48, 0.6));
    write_concept_archive(ds, tmp.file("d.cma"));
    write_neuron_mask(neuron, tmp.file("n.nam"));
    const RunResult r = run_cli("explain --dataset " + tmp.file("d.cma") + " --neuron " +
                                tmp.file("n.nam") +
                                " --algorithm optimal --max-length 3 --operators and,or");
    REQUIRE(r.exit_code == 0);
    const auto report = nlohmann::json::parse(r.out);
    const std::string label = report["label"];
    CHECK(label.find("AND NOT") == std::string::npos);
}
