#pragma once

#include <filesystem>
#include <string>
#include <variant>
#include <vector>

#include "fruitnet/trainer.hpp"

namespace fruitnet {

// FRCK container: magic "FRCK", u32 version, u32 little-endian header
// length, UTF-8 JSON header (case id, class names, config, epoch, PRNG
// seed, optimizer hyper-parameters, tensor directory), then the declared
// tensors in order, each in FNT1 format. Parameter tensors are followed by
// their Adam moments so a loaded session resumes the exact run.

struct CheckpointMeta {
    int case_id = 4;
    std::size_t in_h = 100;
    std::size_t in_w = 100;
    std::size_t in_channels = 3;
    std::vector<std::string> class_names;
    TrainConfig cfg;
    int epoch = 0;
    std::string precision;  // "single" | "double"
};

template <class T>
void save_checkpoint(const Session<T>& session, const TrainConfig& cfg,
                     const std::vector<std::string>& class_names,
                     const std::filesystem::path& file);

struct LoadedCheckpoint {
    CheckpointMeta meta;
    std::variant<Session<float>, Session<double>> session;

    template <class Fn>
    decltype(auto) visit(Fn&& fn) {
        return std::visit(std::forward<Fn>(fn), session);
    }
};

// Throws std::runtime_error with a description on bad magic, unsupported
// version, or truncation.
LoadedCheckpoint load_checkpoint(const std::filesystem::path& file);

}  // namespace fruitnet
