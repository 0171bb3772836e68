#pragma once

#include <filesystem>
#include <string>

#include "fruitnet/trainer.hpp"

namespace fruitnet {

// CSV schema: header `epoch,train_loss,train_acc,test_loss,test_acc,lr,seconds`,
// one row per epoch, floats printed with 6 significant digits.
std::string history_to_csv(const TrainHistory& history);

void write_history_csv(const TrainHistory& history, const std::filesystem::path& file);

// Throws std::runtime_error naming the offending row on malformed input;
// a header-only or empty file is malformed.
TrainHistory read_history_csv(const std::filesystem::path& file);

}  // namespace fruitnet
