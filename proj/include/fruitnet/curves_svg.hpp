#pragma once

#include <filesystem>
#include <string>

#include "fruitnet/trainer.hpp"

namespace fruitnet {

// Self-contained two-panel vector plot: accuracy (train/test) and loss
// (train/test) against epoch, one polyline per series. Each panel's <g>
// carries data-* attributes with its axis ranges and pixel box so the
// mapping from data to vertex coordinates is recoverable from the file.
std::string render_curves_svg(const TrainHistory& history);

void write_curves_svg(const TrainHistory& history, const std::filesystem::path& file);

}  // namespace fruitnet
