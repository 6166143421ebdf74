#pragma once

// Command-line front end. Every command that writes artifacts also writes
// run_manifest.json next to them: the command, the fully resolved
// configuration, SHA-256 digests of inputs and outputs, the seed and the tool
// version. Passing that manifest back as --config to `train` replays the run.

#include <filesystem>
#include <string>
#include <vector>

#include "srl/data.hpp"
#include "srl/io.hpp"

namespace srl::cli {

inline constexpr const char* kToolVersion = "1.0.0";

enum ExitCode : int {
  kExitOk = 0,
  kExitFailure = 1,
  kExitUsage = 2,
  kExitData = 3,
  kExitNumeric = 4,
  kExitSchema = 5,
};

// args excludes the program name.
int run(const std::vector<std::string>& args);
int run(int argc, char** argv);

// Dataset manifests written by curate-uci ("uci") and gen-oldir ("oldir").
// Relative paths inside are resolved against the manifest's directory.
data::DirDataset load_dataset(const std::filesystem::path& manifest);

// Recomputes every recorded digest; throws DataError naming the first file
// whose content changed.
void verify_manifest(const io::Json& manifest);

}  // namespace srl::cli
