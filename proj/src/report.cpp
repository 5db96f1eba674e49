#include "calign/report.hpp"

#include <cstdio>
#include <cstdlib>
#include <cstring>

namespace calign {

LogLevel log_level() {
    static const LogLevel level = [] {
        const char* env = std::getenv("CONCEPT_ALIGN_LOG");
        if (!env) return LogLevel::Warn;
        if (std::strcmp(env, "error") == 0) return LogLevel::Error;
        if (std::strcmp(env, "warn") == 0) return LogLevel::Warn;
        if (std::strcmp(env, "info") == 0) return LogLevel::Info;
        if (std::strcmp(env, "debug") == 0) return LogLevel::Debug;
        if (std::strcmp(env, "trace") == 0) return LogLevel::Trace;
        return LogLevel::Warn;
    }();
    return level;
}

void log_message(LogLevel level, const std::string& message) {
    if (int(level) > int(log_level())) return;
    const char* names[5] = {"error", "warn", "info", "debug", "trace"};
    std::fprintf(stderr, "[calign:%s] %s\n", names[int(level)], message.c_str());
}

Json iou_json(const Rational& value) {
    return Json{{"num", value.num}, {"den", value.den}, {"value", value.to_decimal_string(12)}};
}

Json run_report(const std::string& unit, const std::string& algorithm,
                const Explanation& explanation, const ConceptDataset& dataset,
                const Json& config_echo, bool include_timing) {
    Json report;
    report["unit"] = unit;
    report["algorithm"] = algorithm;
    report["label"] = render_label(explanation.label, dataset);
    report["iou"] = iou_json(explanation.iou);
    report["optimal"] = explanation.optimal;
    Json stats;
    stats["visited"] = explanation.stats.visited;
    stats["expanded"] = explanation.stats.expanded;
    stats["estimated"] = explanation.stats.estimated;
    if (include_timing) stats["elapsed_ms"] = explanation.stats.elapsed_ms;
    report["stats"] = std::move(stats);
    if (!explanation.warning.empty()) report["warning"] = explanation.warning;
    report["config"] = config_echo;
    return report;
}

}  // namespace calign
