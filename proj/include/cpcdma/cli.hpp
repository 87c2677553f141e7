#ifndef CPCDMA_CLI_HPP
#define CPCDMA_CLI_HPP

#include <iosfwd>
#include <string>
#include <vector>

#include "cpcdma/arq_sim.hpp"
#include "cpcdma/config.hpp"

namespace cpcdma {

/// Fully resolved run description; echoed verbatim into output metadata.
struct RunManifest {
    SystemConfig cfg;
    std::uint64_t master_seed = 1;
    std::string out_stem = "sweep";
    int threads = 0;  // 0 = hardware concurrency
    std::string preset_name;
    std::string build_id;
};

RunManifest default_manifest();
std::vector<std::string> preset_names();
void apply_preset(RunManifest& m, const std::string& name);

/// Applies one key=value setting; throws ConfigError on unknown keys or
/// malformed values. Shared by the config-file parser and flag overrides.
void apply_key(RunManifest& m, const std::string& key, const std::string& value);

/// key = value lines, '#' comments. A preset key is applied before the other
/// keys so explicit settings override preset values regardless of position.
RunManifest parse_config(const std::string& path);

std::string csv_path(const RunManifest& m, ReceiverKind kind);
void write_csv(std::ostream& os, const RunManifest& m, ReceiverKind kind,
               const std::vector<SweepPoint>& points);

/// Runs every configured receiver sweep and writes one CSV per receiver.
/// Returns 0 on success; partially written files are removed on failure.
int run(const RunManifest& m, bool progress);

}  // namespace cpcdma

#endif
