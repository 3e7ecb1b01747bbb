#pragma once

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <map>
#include <optional>
#include <string>
#include <vector>

namespace sqlml::cli {

enum class CommandKind { Translate, ExportQueries, Train, ImportWeights, CheckGrad };

struct Command {
   CommandKind kind = CommandKind::Translate;
   std::filesystem::path sqlPath;
   std::filesystem::path configPath;
   std::filesystem::path dataDir;
   std::filesystem::path outDir;
   /// import-weights input; defaults to <out-dir>/weights.csv
   std::filesystem::path weightsPath;
   std::optional<std::int64_t> iterations;
   std::optional<double> learningRate;
   /// Objective print interval: script loop for translate, stderr log for train
   std::optional<std::int64_t> printEvery;
   /// check-grad: number of seeded parameter points
   std::int64_t points = 10;
};

/// Parse argv-style arguments (without the program name). Throws
/// Error(Usage) for unknown subcommands, flags, or missing required flags.
Command parse_command(const std::vector<std::string>& args);

/// Output files of a command, keyed by file name inside the out dir
using Artifacts = std::map<std::string, std::string>;

/// Do the work of a command without touching the out dir. Progress goes to
/// `log`, results meant for the user to `out`.
Artifacts execute(const Command& cmd, std::ostream& out, std::ostream& log);

/// Write every artifact or none: files written before a failure are removed
void write_artifacts(const std::filesystem::path& dir, const Artifacts& artifacts);

/// Parse, execute, write. Errors print one line `error <Code>: message` to
/// `err`; the return value is the process exit status.
int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

}
