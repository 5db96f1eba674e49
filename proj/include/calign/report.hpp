#pragma once

#include <string>

#include "calign/label.hpp"

#include "json.hpp"

namespace calign {

enum class LogLevel : int { Error = 0, Warn = 1, Info = 2, Debug = 3, Trace = 4 };

// Level comes from CONCEPT_ALIGN_LOG (error|warn|info|debug|trace), default warn.
LogLevel log_level();
void log_message(LogLevel level, const std::string& message);

using Json = nlohmann::ordered_json;

Json iou_json(const Rational& value);

// Table-1 style run report. include_timing=false omits elapsed_ms so two
// identical runs produce byte-identical output.
Json run_report(const std::string& unit, const std::string& algorithm,
                const Explanation& explanation, const ConceptDataset& dataset,
                const Json& config_echo, bool include_timing);

}  // namespace calign
