#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <string>
#include <vector>

namespace fruitnet {

// Written at run start; captures everything needed to re-execute the run:
// the exact command line, resolved configuration, seed, and a digest of the
// dataset actually used (count, class list, content hash).
struct RunManifest {
    std::string command_line;
    std::map<std::string, std::string> config;  // resolved flag -> value
    std::uint64_t seed = 0;
    std::size_t dataset_samples = 0;
    std::vector<std::string> class_list;
    std::uint64_t dataset_hash = 0;
    std::string dataset_source;
    std::map<std::string, std::string> artifacts;  // name -> path
    std::string created_utc;
};

std::string manifest_to_json(const RunManifest& m);

// Write-to-temp then rename, so a crash never leaves a partial manifest.
void write_manifest(const RunManifest& m, const std::filesystem::path& file);

}  // namespace fruitnet
