#include "fruitnet/manifest.hpp"

#include <json.hpp>

#include <cstdio>
#include <fstream>

namespace fruitnet {

std::string manifest_to_json(const RunManifest& m) {
    nlohmann::json j;
    j["command_line"] = m.command_line;
    j["config"] = m.config;
    j["seed"] = m.seed;
    char hash_hex[24];
    std::snprintf(hash_hex, sizeof(hash_hex), "%016llx",
                  static_cast<unsigned long long>(m.dataset_hash));
    j["dataset"] = {{"samples", m.dataset_samples},
                    {"classes", m.class_list},
                    {"content_hash_fnv1a64", hash_hex},
                    {"source", m.dataset_source}};
    j["artifacts"] = m.artifacts;
    j["created_utc"] = m.created_utc;
    return j.dump(2) + "\n";
}

void write_manifest(const RunManifest& m, const std::filesystem::path& file) {
    const auto tmp = file.string() + ".tmp";
    {
        std::ofstream os(tmp, std::ios::binary);
        if (!os) throw std::runtime_error("cannot open " + tmp + " for writing");
        os << manifest_to_json(m);
        if (!os) throw std::runtime_error("failed writing " + tmp);
    }
    std::filesystem::rename(tmp, file);
}

}  // namespace fruitnet
