#pragma once

#include <cstddef>
#include <filesystem>
#include <string>
#include <vector>

namespace fruitnet {

struct Dataset;

// Decoded 8-bit RGB image, HWC interleaved.
struct ImageU8 {
    std::size_t width = 0;
    std::size_t height = 0;
    std::vector<unsigned char> rgb;
};

// Dispatches on content magic (PNG signature / JPEG SOI). Throws
// std::runtime_error naming the file on anything unreadable or undecodable.
ImageU8 decode_image(const std::filesystem::path& file);

void encode_png(const std::filesystem::path& file, const ImageU8& img);

// Interleaved 8-bit RGB -> planar CHW floats in [0,1] (divide by 255).
std::vector<float> to_chw_normalized(const ImageU8& img);

// Bilinear resample of a planar CHW float image. Identity when sizes match.
std::vector<float> resize_bilinear_chw(const std::vector<float>& chw, std::size_t channels,
                                       std::size_t in_h, std::size_t in_w, std::size_t out_h,
                                       std::size_t out_w);

// Loads root/<class_name>/*.png|jpg|jpeg into a Dataset: classes indexed by
// sorted directory name, samples in sorted path order, every image resized
// to target_size x target_size RGB in [0,1].
Dataset load_image_dir(const std::filesystem::path& root, std::size_t target_size = 100);

// True when root holds pre-split Training/ and Test/ class trees.
bool has_split_dirs(const std::filesystem::path& root);

// Loads the pre-split layout; verifies both sides agree on class names.
std::pair<Dataset, Dataset> load_split_dirs(const std::filesystem::path& root,
                                            std::size_t target_size = 100);

// Writes a dataset back out as root/<class_name>/img_#####.png (values
// quantized to 8 bits). Round-trips through load_image_dir.
void export_dataset(const Dataset& ds, const std::filesystem::path& out_root);

}  // namespace fruitnet
