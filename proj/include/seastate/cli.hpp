#pragma once

#include <filesystem>
#include <iosfwd>
#include <string>
#include <vector>

namespace seastate {

/// Runs one subcommand and returns the process exit status: 0 on success,
/// otherwise the error category's code (1 usage, 2 config, 3 data, 4 asset,
/// 5 runtime). Errors are reported on `err` as one "error[category]: ..." line.
int command_dispatch(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);
int command_dispatch(int argc, const char* const* argv, std::ostream& out, std::ostream& err);

/// Renders curves, heatmaps and tables for whatever an experiment directory
/// holds into <dir>/report. Returns the files written. Throws ReportError when
/// nothing renderable is present.
std::vector<std::filesystem::path> emit_report(const std::filesystem::path& experiment_dir);

}  // namespace seastate
