#pragma once

#include <cstdint>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include "fruitnet/prng.hpp"
#include "fruitnet/tensor.hpp"

namespace fruitnet {

// Labeled image collection. Images are planar CHW floats in [0,1], all the
// same shape; class_names is sorted lexicographically and defines the
// label <-> index mapping.
struct Dataset {
    std::size_t channels = 3;
    std::size_t height = 0;
    std::size_t width = 0;
    std::vector<std::vector<float>> images;
    std::vector<int> labels;
    std::vector<std::string> class_names;
    std::string source;

    std::size_t size() const { return images.size(); }
    std::size_t num_classes() const { return class_names.size(); }
    std::size_t image_elems() const { return channels * height * width; }
};

// Checks the cross-field invariants (sizes, label range, image lengths).
void validate_dataset(const Dataset& ds);

enum class SplitMode { random_stratified, directory_given };

struct SplitSpec {
    double train_fraction = 0.8;
    std::uint64_t seed = 0;
    SplitMode mode = SplitMode::random_stratified;
};

// Stratified random partition: per class, a seeded shuffle then the first
// round(train_fraction * n) samples go to train. Sample order within each
// side keeps the original dataset order.
std::pair<Dataset, Dataset> split(const Dataset& ds, const SplitSpec& spec);

// Synthetic desk-scale dataset: one base hue per class, a filled square at a
// random translation over a dimmer background, plus per-pixel noise. Labels
// are balanced and everything is a pure function of the seed.
Dataset synth_dataset(int classes, int per_class, int size, std::uint64_t seed);

// FNV-1a 64 over class names, labels, and image bits; run provenance.
std::uint64_t dataset_digest(const Dataset& ds);

template <class T>
Tensor<T> one_hot(const std::vector<int>& labels, std::size_t k) {
    Tensor<T> t(Shape{labels.size(), k});
    for (std::size_t n = 0; n < labels.size(); ++n) {
        if (labels[n] < 0 || static_cast<std::size_t>(labels[n]) >= k)
            throw std::invalid_argument("one_hot: label " + std::to_string(labels[n]) +
                                        " out of range for k=" + std::to_string(k));
        t.at(n, static_cast<std::size_t>(labels[n])) = T(1);
    }
    return t;
}

// Per-epoch permutation of [0, n), a pure function of (seed, epoch).
std::vector<std::size_t> epoch_permutation(std::size_t n, std::uint64_t seed,
                                           std::uint64_t epoch);

template <class T>
struct Batch {
    Tensor<T> x;  // [b, C, H, W]
    Tensor<T> y;  // [b, k] one-hot
    std::vector<int> labels;
};

template <class T>
Batch<T> assemble_batch(const Dataset& ds, const std::vector<std::size_t>& order,
                        std::size_t begin, std::size_t count) {
    Batch<T> b;
    b.x = Tensor<T>(Shape{count, ds.channels, ds.height, ds.width});
    b.labels.reserve(count);
    const std::size_t elems = ds.image_elems();
    for (std::size_t i = 0; i < count; ++i) {
        const std::size_t src = order[begin + i];
        const auto& img = ds.images[src];
        for (std::size_t e = 0; e < elems; ++e)
            b.x[i * elems + e] = static_cast<T>(img[e]);
        b.labels.push_back(ds.labels[src]);
    }
    b.y = one_hot<T>(b.labels, ds.num_classes());
    return b;
}

// One epoch of shuffled fixed-size batches; the final short batch is
// emitted as-is. Every sample appears exactly once per epoch.
template <class T>
class BatchIter {
public:
    BatchIter(const Dataset& ds, std::size_t batch_size, std::uint64_t epoch,
              std::uint64_t seed)
        : ds_(ds), batch_size_(batch_size) {
        if (ds.size() == 0) throw std::invalid_argument("batches: dataset is empty");
        if (batch_size == 0) throw std::invalid_argument("batches: batch_size must be >= 1");
        order_ = epoch_permutation(ds.size(), seed, epoch);
    }

    std::optional<Batch<T>> next() {
        if (pos_ >= order_.size()) return std::nullopt;
        const std::size_t count = std::min(batch_size_, order_.size() - pos_);
        Batch<T> b = assemble_batch<T>(ds_, order_, pos_, count);
        pos_ += count;
        return b;
    }

    std::size_t num_batches() const {
        return (order_.size() + batch_size_ - 1) / batch_size_;
    }

private:
    const Dataset& ds_;
    std::size_t batch_size_;
    std::vector<std::size_t> order_;
    std::size_t pos_ = 0;
};

}  // namespace fruitnet
