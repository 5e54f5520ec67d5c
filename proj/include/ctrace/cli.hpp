#pragma once

#include <filesystem>
#include <string>
#include <vector>

#include "ctrace/ingest.hpp"

namespace ctrace {

// Runs one subcommand. args excludes the program name. Returns the exit
// status: 0 success, 1 input error, 2 usage or configuration error.
int run(const std::vector<std::string>& args);

// Reads task events, usage and machine files into one bundle. trace_end is
// the latest event time or usage window end.
TraceBundle load_bundle(const std::vector<std::filesystem::path>& events,
                        const std::vector<std::filesystem::path>& usage,
                        const std::filesystem::path& machines,
                        std::vector<Diagnostic>& diagnostics,
                        const TaskEventColumns& event_columns = {},
                        const UsageColumns& usage_columns = {});

}  // namespace ctrace
